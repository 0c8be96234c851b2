//! Photon-number model of two-photon interference with multi-pair emission.
//!
//! States are normal-ordered polynomials in creation operators acting on
//! vacuum. A monomial `Π (m†)^k` is the Fock state `Π √k! |k⟩`, so distinct
//! monomials are orthogonal and probabilities follow directly from the
//! coefficients.
//!
//! Two configurations are modelled. In `SignalIdler` the two photons of one
//! pair meet at the beamsplitter; in `HeraldedIndependent` one photon from
//! each of two sources does, and the partner photons (heralds) are kept as
//! explicit modes so that different pair numbers never interfere.
//!
//! Outside the dip the inputs carry time labels 1 and 2 and the outputs
//! are `c₁, d₁, c₂, d₂`; detectors do not resolve the labels. Inside the dip
//! the labels merge and the outputs are `c, d`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the truncation order.
pub const MAX_TRUNCATION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// First-time-bin input (signal, or heralded photon of source A).
    A1,
    /// Second-time-bin input (idler, or heralded photon of source B).
    B2,
    C,
    D,
    C1,
    D1,
    C2,
    D2,
    HeraldA,
    HeraldB,
}

const MODES: usize = 10;

impl Mode {
    fn index(self) -> usize {
        self as usize
    }
}

type Exponents = [u8; MODES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    SignalIdler,
    HeraldedIndependent,
}

/// Sparse polynomial in creation operators with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePolynomial {
    terms: BTreeMap<Exponents, Complex64>,
    max_order: usize,
    configuration: Configuration,
}

impl ModePolynomial {
    fn constant(c: Complex64, max_order: usize, configuration: Configuration) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert([0; MODES], c);
        Self {
            terms,
            max_order,
            configuration,
        }
    }

    fn linear(parts: &[(Mode, Complex64)], max_order: usize, configuration: Configuration) -> Self {
        let mut terms = BTreeMap::new();
        for &(m, c) in parts {
            let mut e = [0; MODES];
            e[m.index()] = 1;
            *terms.entry(e).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Self {
            terms,
            max_order,
            configuration,
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<Exponents, Complex64> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let mut e = *ea;
                for (x, y) in e.iter_mut().zip(eb) {
                    *x += y;
                }
                *terms.entry(e).or_insert(Complex64::new(0.0, 0.0)) += ca * cb;
            }
        }
        terms.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Self {
            terms,
            max_order: self.max_order,
            configuration: self.configuration,
        }
    }

    fn pow(&self, n: usize) -> Self {
        let mut out = Self::constant(Complex64::new(1.0, 0.0), self.max_order, self.configuration);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    fn scale(mut self, s: Complex64) -> Self {
        self.terms.values_mut().for_each(|c| *c *= s);
        self
    }

    fn add_assign(&mut self, other: Self) {
        for (e, c) in other.terms {
            *self.terms.entry(e).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        self.terms.retain(|_, c| *c != Complex64::new(0.0, 0.0));
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn configuration(&self) -> Configuration {
        self.configuration
    }

    /// Coefficient of `Π m^k` for the listed `(mode, power)` pairs.
    pub fn coefficient(&self, monomial: &[(Mode, u8)]) -> Complex64 {
        let mut e = [0; MODES];
        for &(m, k) in monomial {
            e[m.index()] = k;
        }
        self.terms.get(&e).copied().unwrap_or_default()
    }

    /// `(occupation numbers, Fock amplitude)` for every term.
    pub fn fock_amplitudes(&self) -> impl Iterator<Item = (Exponents, Complex64)> + '_ {
        self.terms.iter().map(|(e, c)| {
            let f: f64 = e.iter().map(|&k| factorial(k as usize).sqrt()).product();
            (*e, c * f)
        })
    }

    /// Total probability held by the retained terms.
    pub fn norm_sqr(&self) -> f64 {
        self.fock_amplitudes().map(|(_, a)| a.norm_sqr()).sum()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockModelParams {
    pub lambda: f64,
    pub truncation_order: usize,
    pub configuration: Configuration,
    /// τ in `λ = √(P τ)` (1/mW).
    pub tau_constant: f64,
    /// Pump powers (mW) for [`visibility_curve`].
    #[serde(default)]
    pub power_grid: Vec<f64>,
}

impl FockModelParams {
    pub fn new(lambda: f64, truncation_order: usize, configuration: Configuration) -> Result<Self> {
        let p = Self {
            lambda,
            truncation_order,
            configuration,
            tau_constant: 0.0,
            power_grid: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let p = Self { lambda, ..self.clone() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda * self.lambda < 1.0) {
            return Err(Error::param("lambda", format!("need 0 <= λ < 1, got {}", self.lambda)));
        }
        if self.truncation_order == 0 || self.truncation_order > MAX_TRUNCATION {
            return Err(Error::param(
                "truncation_order",
                format!("must lie in 1..={MAX_TRUNCATION}, got {}", self.truncation_order),
            ));
        }
        if !(self.tau_constant >= 0.0) {
            return Err(Error::param("tau_constant", "must be non-negative"));
        }
        Ok(())
    }

    pub fn lambda_at(&self, power_mw: f64) -> Result<f64> {
        let l = (power_mw * self.tau_constant).sqrt();
        if !(l < 1.0) {
            return Err(Error::param("power", format!("λ = √(Pτ) = {l} must stay below 1")));
        }
        Ok(l)
    }
}

/// Output state behind the beamsplitter, `a† → (c† + i d†)/√2`,
/// `b† → (i c† + d†)/√2`, with each source truncated at `N` pairs.
pub fn beamsplitter_expand(params: &FockModelParams, in_dip: bool) -> Result<ModePolynomial> {
    params.validate()?;
    let n_max = params.truncation_order;
    let cfg = params.configuration;
    let lam = params.lambda;
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let ri = Complex64::new(0.0, FRAC_1_SQRT_2);
    let (a, b) = if in_dip {
        (
            ModePolynomial::linear(&[(Mode::C, r), (Mode::D, ri)], n_max, cfg),
            ModePolynomial::linear(&[(Mode::C, ri), (Mode::D, r)], n_max, cfg),
        )
    } else {
        (
            ModePolynomial::linear(&[(Mode::C1, r), (Mode::D1, ri)], n_max, cfg),
            ModePolynomial::linear(&[(Mode::C2, ri), (Mode::D2, r)], n_max, cfg),
        )
    };
    let one = Complex64::new(1.0, 0.0);
    let mut out = ModePolynomial::constant(Complex64::new(0.0, 0.0), n_max, cfg);
    out.terms.clear();
    match cfg {
        Configuration::SignalIdler => {
            let pre = (1.0 - lam * lam).sqrt();
            for n in 0..=n_max {
                let c = pre * lam.powi(n as i32) / factorial(n);
                out.add_assign(a.pow(n).mul(&b.pow(n)).scale(c.into()));
            }
        }
        Configuration::HeraldedIndependent => {
            let pre = 1.0 - lam * lam;
            let ha = ModePolynomial::linear(&[(Mode::HeraldA, one)], n_max, cfg);
            let hb = ModePolynomial::linear(&[(Mode::HeraldB, one)], n_max, cfg);
            let left: Vec<ModePolynomial> = (0..=n_max).map(|n| a.pow(n).mul(&ha.pow(n))).collect();
            let right: Vec<ModePolynomial> = (0..=n_max).map(|m| b.pow(m).mul(&hb.pow(m))).collect();
            for (n, l) in left.iter().enumerate() {
                for (m, rt) in right.iter().enumerate() {
                    let c = pre * lam.powi((n + m) as i32) / (factorial(n) * factorial(m));
                    out.add_assign(l.mul(rt).scale(c.into()));
                }
            }
        }
    }
    Ok(out)
}

/// Coincidence probability split by how the out-of-dip event arises.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Coincidence {
    pub total: f64,
    /// Both time-bin groups produce a coincidence on their own.
    pub rule_i: f64,
    /// Exactly one group does.
    pub rule_ii: f64,
    /// Neither does, but the two groups leave by opposite ports.
    pub rule_iii: f64,
}

/// Probability that both output ports fire.
///
/// For heralded photons this is the joint probability with both heralds
/// firing. Out of the dip each outcome is attributed to rule (i), (ii) or
/// (iii) from the photons in each time bin; the rules partition the
/// time-unresolved event `n_c ≥ 1 ∧ n_d ≥ 1`.
pub fn coincidence_probability(poly: &ModePolynomial, in_dip: bool) -> Coincidence {
    let heralded = poly.configuration == Configuration::HeraldedIndependent;
    let mut out = Coincidence::default();
    for (e, amp) in poly.fock_amplitudes() {
        if heralded && (e[Mode::HeraldA.index()] == 0 || e[Mode::HeraldB.index()] == 0) {
            continue;
        }
        let p = amp.norm_sqr();
        if in_dip {
            if e[Mode::C.index()] > 0 && e[Mode::D.index()] > 0 {
                out.total += p;
            }
            continue;
        }
        let (c1, d1, c2, d2) = (e[Mode::C1.index()], e[Mode::D1.index()], e[Mode::C2.index()], e[Mode::D2.index()]);
        let g1 = c1 > 0 && d1 > 0;
        let g2 = c2 > 0 && d2 > 0;
        match (g1, g2) {
            (true, true) => out.rule_i += p,
            (true, false) | (false, true) => out.rule_ii += p,
            (false, false) => {
                if (c1 > 0 && d2 > 0) || (d1 > 0 && c2 > 0) {
                    out.rule_iii += p;
                }
            }
        }
    }
    if !in_dip {
        out.total = out.rule_i + out.rule_ii + out.rule_iii;
    }
    out
}

/// `V = (p_out − p_in)/p_out` at the parameters' λ.
pub fn visibility(params: &FockModelParams) -> Result<f64> {
    let p_out = coincidence_probability(&beamsplitter_expand(params, false)?, false).total;
    let p_in = coincidence_probability(&beamsplitter_expand(params, true)?, true).total;
    if p_out > 0.0 {
        Ok((p_out - p_in) / p_out)
    } else {
        // λ = 0: the single-pair limit, where interference is ideal.
        Ok(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub power_mw: f64,
    pub lambda: f64,
    pub visibility: f64,
}

/// Visibility over `params.power_grid` with `λ = √(P τ)`.
pub fn visibility_curve(params: &FockModelParams) -> Result<Vec<CurvePoint>> {
    params.validate()?;
    params
        .power_grid
        .par_iter()
        .map(|&p| {
            let lambda = params.lambda_at(p)?;
            Ok(CurvePoint {
                power_mw: p,
                lambda,
                visibility: visibility(&params.with_lambda(lambda)?)?,
            })
        })
        .collect()
}

/// Columns `power_mw, lambda, v_sig_idler, v_heralded`.
pub fn write_curve_csv(params: &FockModelParams, path: impl AsRef<Path>) -> Result<()> {
    let mut si = params.clone();
    si.configuration = Configuration::SignalIdler;
    let mut he = params.clone();
    he.configuration = Configuration::HeraldedIndependent;
    let a = visibility_curve(&si)?;
    let b = visibility_curve(&he)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["power_mw", "lambda", "v_sig_idler", "v_heralded"])?;
    for (x, y) in a.iter().zip(&b) {
        w.serialize((x.power_mw, x.lambda, x.visibility, y.visibility))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub v0: f64,
    pub v0_uncertainty: f64,
    /// dV/dP (1/mW).
    pub slope: f64,
}

/// Weighted straight-line fit of `(power, visibility, σ)`; the intercept is
/// the zero-power visibility. Non-positive σ counts as unit weight.
pub fn extrapolate_v0(measurements: &[(f64, f64, f64)]) -> Result<Extrapolation> {
    if measurements.len() < 2 {
        return Err(Error::Fit("need at least two measurements".into()));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, sigma) in measurements {
        let w = if sigma > 0.0 { 1.0 / (sigma * sigma) } else { 1.0 };
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let spread = measurements.iter().any(|m| m.0 != measurements[0].0);
    if !spread || det <= 0.0 {
        return Err(Error::Fit("all measurements share one power".into()));
    }
    Ok(Extrapolation {
        v0: (sxx * sy - sx * sxy) / det,
        v0_uncertainty: (sxx / det).sqrt(),
        slope: (s * sxy - sx * sy) / det,
    })
}
