//! Two-photon interference: signal–idler dips versus delay, heralded-photon
//! visibility, and simple corrections for imperfect optics.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::JointSpectralAmplitude;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    GaussianFit,
    TriangleFit,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipFit {
    pub kind: FitKind,
    pub center_ps: f64,
    /// σ for a Gaussian, half base width for a triangle.
    pub width_ps: f64,
    pub amplitude: f64,
    pub baseline: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

impl DipFit {
    pub fn visibility(&self) -> f64 {
        self.amplitude / self.baseline
    }

    pub fn eval(&self, delay_ps: f64) -> f64 {
        self.baseline - self.amplitude * dip_shape(self.kind, delay_ps, self.center_ps, self.width_ps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DipScan {
    pub delays_ps: Vec<f64>,
    /// Coincidence probability, tending to 1/2 away from the dip.
    pub coincidence_probability: Vec<f64>,
    /// `(N_max − N_min)/N_max` over the scan.
    pub visibility: f64,
    pub fit_kind: FitKind,
    pub fit: Option<DipFit>,
    /// The minimum sits on the edge of the scan.
    pub undersampled: bool,
}

impl DipScan {
    /// Fitted visibility when a fit is attached, raw otherwise.
    pub fn reported_visibility(&self) -> f64 {
        self.fit.map_or(self.visibility, |f| f.visibility())
    }

    /// Columns `delay_ps, p_cc, p_cc_fit` (fit column empty for raw scans).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["delay_ps", "p_cc", "p_cc_fit"])?;
        for (&t, &p) in self.delays_ps.iter().zip(&self.coincidence_probability) {
            let fit = self.fit.map(|f| f.eval(t));
            w.serialize((t, p, fit))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exchange overlap `Σ f(ωs,ωi) f*(ωi,ωs)` binned by index difference
/// `m = j − k`, so that the delay dependence is a 1-D sum.
struct ExchangeKernel {
    h: Vec<Complex64>,
    offset: usize,
    step: f64,
}

impl ExchangeKernel {
    fn new(jsa: &JointSpectralAmplitude) -> Result<Self> {
        let g = jsa.grid();
        if !g.is_exchange_symmetric() {
            return Err(Error::IncompatibleGrids(
                "signal and idler axes must coincide to exchange photons".into(),
            ));
        }
        let f = jsa.normalized()?;
        let n = g.n_s;
        let mut h = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
        for j in 0..n {
            for k in 0..n {
                h[j + n - 1 - k] += f.get(j, k) * f.get(k, j).conj();
            }
        }
        Ok(Self {
            h,
            offset: n - 1,
            step: g.step_s(),
        })
    }

    /// `Re Σ h(m) e^{−i m δ τ}` with τ in seconds.
    fn overlap(&self, tau: f64) -> f64 {
        let rot = Complex64::from_polar(1.0, -self.step * tau);
        let mut z = Complex64::from_polar(1.0, self.step * tau * self.offset as f64);
        let mut acc = 0.0;
        for hm in &self.h {
            acc += (hm * z).re;
            z *= rot;
        }
        acc
    }

    fn probability(&self, tau: f64) -> f64 {
        (0.5 * (1.0 - self.overlap(tau))).clamp(0.0, 1.0)
    }
}

/// Coincidence probability behind a balanced beamsplitter when the idler is
/// delayed by each of `delays_ps`.
pub fn signal_idler_dip(jsa: &JointSpectralAmplitude, delays_ps: &[f64]) -> Result<DipScan> {
    if delays_ps.len() < 3 {
        return Err(Error::param("delays", "need at least three delays"));
    }
    let kernel = ExchangeKernel::new(jsa)?;
    let p: Vec<f64> = delays_ps.iter().map(|&t| kernel.probability(t * 1e-12)).collect();
    let (imin, &pmin) = p.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let pmax = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let visibility = if pmax > 0.0 { ((pmax - pmin) / pmax).clamp(0.0, 1.0) } else { 0.0 };
    Ok(DipScan {
        delays_ps: delays_ps.to_vec(),
        coincidence_probability: p,
        visibility,
        fit_kind: FitKind::Raw,
        fit: None,
        undersampled: imin == 0 || imin == delays_ps.len() - 1,
    })
}

/// Delay (ps) of maximal exchange overlap. Birefringence in the crystal
/// shifts the dip away from zero; scans should be centred here.
pub fn dip_center(jsa: &JointSpectralAmplitude) -> Result<f64> {
    let kernel = ExchangeKernel::new(jsa)?;
    // The overlap is periodic in τ with period 2π/δ; scan one period.
    let period = 2.0 * std::f64::consts::PI / kernel.step;
    let n = 8 * kernel.h.len();
    let (mut best_t, mut best) = (0.0, f64::NEG_INFINITY);
    for m in 0..n {
        let t = -period / 2.0 + period * m as f64 / n as f64;
        let v = kernel.overlap(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let h = period / n as f64;
    let t = golden_max(|t| kernel.overlap(t), best_t - h, best_t + h, 1e-9 * h);
    Ok(t * 1e12)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while (b - a).abs() > tol {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// Unit-depth dip profile centred at `c` with width `w`.
fn dip_shape(kind: FitKind, t: f64, c: f64, w: f64) -> f64 {
    match kind {
        FitKind::GaussianFit => (-(t - c) * (t - c) / (2.0 * w * w)).exp(),
        FitKind::TriangleFit => (1.0 - (t - c).abs() / w).max(0.0),
        FitKind::Raw => 0.0,
    }
}

/// Least-squares fit of `baseline − amplitude · shape((τ − c)/w)`.
///
/// Amplitude and baseline enter linearly and are solved exactly for each
/// trial `(c, ln w)`, which a Nelder–Mead simplex optimizes.
pub fn fit_dip(scan: &DipScan, kind: FitKind) -> Result<DipFit> {
    if kind == FitKind::Raw {
        return Err(Error::Fit("raw scans have no fit".into()));
    }
    let t = &scan.delays_ps;
    let y = &scan.coincidence_probability;
    let solve = |c: f64, w: f64| -> (f64, f64, f64) {
        // Normal equations for y ≈ b − a·s.
        let (mut ss, mut s1, mut sy, mut y1, n) = (0.0, 0.0, 0.0, 0.0, t.len() as f64);
        for (&ti, &yi) in t.iter().zip(y) {
            let s = dip_shape(kind, ti, c, w);
            ss += s * s;
            s1 += s;
            sy += s * yi;
            y1 += yi;
        }
        let det = n * ss - s1 * s1;
        if det.abs() < 1e-300 {
            return (0.0, y1 / n, f64::INFINITY);
        }
        let b = (ss * y1 - s1 * sy) / det;
        let a = (s1 * y1 - n * sy) / det;
        let sse: f64 = t
            .iter()
            .zip(y)
            .map(|(&ti, &yi)| (yi - (b - a * dip_shape(kind, ti, c, w))).powi(2))
            .sum();
        (a, b, sse)
    };

    // Start at the minimum, width from the half-depth crossing.
    let (imin, &ymin) = y.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * (ymin + ymax);
    let right = (imin..y.len()).find(|&i| y[i] >= half).unwrap_or(y.len() - 1);
    let left = (0..=imin).rev().find(|&i| y[i] >= half).unwrap_or(0);
    let hwhm = (0.5 * (t[right] - t[left])).max(1e-6);
    let w0 = match kind {
        FitKind::GaussianFit => hwhm / (2.0 * 2f64.ln()).sqrt(),
        _ => 2.0 * hwhm,
    };
    let objective = |p: &[f64; 2]| solve(p[0], p[1].exp()).2;
    let best = nelder_mead(objective, [t[imin], w0.ln()], [0.2 * hwhm, 0.2], 1e-14, 2000);
    let (c, w) = (best[0], best[1].exp());
    let (a, b, sse) = solve(c, w);
    if !(sse.is_finite() && b > 0.0) {
        return Err(Error::Fit(format!("{kind:?} fit did not converge")));
    }
    Ok(DipFit {
        kind,
        center_ps: c,
        width_ps: w,
        amplitude: a,
        baseline: b,
        rms_residual: (sse / t.len() as f64).sqrt(),
    })
}

/// Scan with an attached fit of the requested kind.
pub fn fitted_dip(jsa: &JointSpectralAmplitude, delays_ps: &[f64], kind: FitKind) -> Result<DipScan> {
    let mut scan = signal_idler_dip(jsa, delays_ps)?;
    if kind != FitKind::Raw {
        scan.fit = Some(fit_dip(&scan, kind)?);
    }
    scan.fit_kind = kind;
    Ok(scan)
}

fn nelder_mead(f: impl Fn(&[f64; 2]) -> f64, x0: [f64; 2], step: [f64; 2], ftol: f64, max_iter: usize) -> [f64; 2] {
    let mut simplex = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut values = simplex.map(|p| f(&p));
    let lerp = |a: &[f64; 2], b: &[f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        if (values[2] - values[0]).abs() <= ftol * (values[0].abs() + ftol) {
            break;
        }
        let centroid = lerp(&simplex[0], &simplex[1], 0.5);
        let reflect = lerp(&centroid, &simplex[2], -1.0);
        let fr = f(&reflect);
        if fr < values[0] {
            let expand = lerp(&centroid, &simplex[2], -2.0);
            let fe = f(&expand);
            (simplex[2], values[2]) = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflect, fr);
        } else {
            let contract = lerp(&centroid, &simplex[2], 0.5);
            let fc = f(&contract);
            if fc < values[2] {
                (simplex[2], values[2]) = (contract, fc);
            } else {
                for i in 1..3 {
                    simplex[i] = lerp(&simplex[0], &simplex[i], 0.5);
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    simplex[best]
}

/// `Tr(ρ₁ρ₂)` of the signal photons heralded by detecting the idlers.
pub fn heralded_dip_visibility(jsa_1: &JointSpectralAmplitude, jsa_2: &JointSpectralAmplitude) -> Result<f64> {
    if jsa_1.grid() != jsa_2.grid() {
        return Err(Error::IncompatibleGrids("heralded sources must share one grid".into()));
    }
    let f1 = jsa_1.normalized()?.to_matrix();
    let f2 = jsa_2.normalized()?.to_matrix();
    // ρ_k = F_k F_k†, so Tr(ρ₁ρ₂) = ‖F₁† F₂‖²_F.
    let m = f1.adjoint() * f2;
    Ok(m.iter().map(|z| z.norm_sqr()).sum())
}

/// Ideal visibility degraded by an unbalanced beamsplitter and by leakage
/// of the wrong polarization into the herald path:
/// `v · 2RT/(R² + T²) · (1 − leakage)²`.
pub fn imperfect_optics_visibility(v_ideal: f64, bs_reflectivity: f64, pbs_leakage: f64) -> Result<f64> {
    if !(bs_reflectivity > 0.0 && bs_reflectivity < 1.0) {
        return Err(Error::param("bs_reflectivity", format!("must lie in (0, 1), got {bs_reflectivity}")));
    }
    if !(0.0..1.0).contains(&pbs_leakage) {
        return Err(Error::param("pbs_leakage", format!("must lie in [0, 1), got {pbs_leakage}")));
    }
    let r = bs_reflectivity;
    let t = 1.0 - r;
    Ok(v_ideal * 2.0 * r * t / (r * r + t * t) * (1.0 - pbs_leakage).powi(2))
}
