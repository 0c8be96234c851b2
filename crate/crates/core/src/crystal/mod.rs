//! Poled-crystal domain configurations and their phase-matching function.
//!
//! A crystal is an ordered list of ferroelectric domains, each with an
//! orientation (±1) and a width. Its phase-matching function (PMF) is the
//! exact integral of the signed nonlinearity against `e^{iΔk x}`,
//!
//! ```text
//! pmf(Δk) = (1/L) Σ_j s_j ∫_{x_j}^{x_{j+1}} e^{iΔk x} dx ,
//! ```
//!
//! normalized so that a uniform, perfectly phase-matched crystal of the
//! same length has peak magnitude 1.

mod anneal;
mod jitter;
mod table;

pub use anneal::{
    anneal_apodized, anneal_from, fidelity, tracking_stack, AnnealResult, AnnealSchedule, FidelityWindow,
    PmfTarget, TargetShape,
};
pub use jitter::{jitter_monte_carlo, jitter_stack, JitterModel, JitterSpec, JitterSummary};
pub use table::PmfTable;

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest width accepted for a domain (um).
pub const MIN_DOMAIN_WIDTH_UM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    /// +1 or −1.
    pub sign: i8,
    pub width_um: f64,
}

impl Domain {
    pub fn new(sign: i8, width_um: f64) -> Self {
        Self { sign, width_um }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainStack {
    domains: Vec<Domain>,
    seed_period_um: f64,
}

/// On-disk stack layout: `{"seed_period_um": .., "domains": [[sign, width_um], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackFile {
    pub seed_period_um: f64,
    pub domains: Vec<(i8, f64)>,
}

impl DomainStack {
    pub fn new(domains: Vec<Domain>, seed_period_um: f64) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::param("domains", "a stack needs at least one domain"));
        }
        if !(seed_period_um > 0.0 && seed_period_um.is_finite()) {
            return Err(Error::param("seed_period_um", format!("must be positive, got {seed_period_um}")));
        }
        for (j, d) in domains.iter().enumerate() {
            if d.sign != 1 && d.sign != -1 {
                return Err(Error::param("domains", format!("domain {j} has orientation {}", d.sign)));
            }
            if !(d.width_um >= MIN_DOMAIN_WIDTH_UM && d.width_um.is_finite()) {
                return Err(Error::param("domains", format!("domain {j} has width {} um", d.width_um)));
            }
        }
        Ok(Self {
            domains,
            seed_period_um,
        })
    }

    /// Alternating ±1 domains of width `period/2`, starting at +1; the last
    /// domain is truncated so the widths sum to `length_mm` exactly.
    pub fn periodic(period_um: f64, length_mm: f64) -> Result<Self> {
        if !(period_um > 0.0 && period_um.is_finite()) {
            return Err(Error::param("period_um", format!("must be positive, got {period_um}")));
        }
        if !(length_mm > 0.0 && length_mm.is_finite()) {
            return Err(Error::param("length_mm", format!("must be positive, got {length_mm}")));
        }
        Self::new(regular_layout(period_um / 2.0, length_mm * 1e3, |j| if j % 2 == 0 { 1 } else { -1 }), period_um)
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn seed_period_um(&self) -> f64 {
        self.seed_period_um
    }

    /// Total length, the left-to-right sum of the widths (um).
    pub fn length_um(&self) -> f64 {
        self.domains.iter().fold(0.0, |acc, d| acc + d.width_um)
    }

    pub fn length_mm(&self) -> f64 {
        self.length_um() * 1e-3
    }

    pub fn length_m(&self) -> f64 {
        self.length_um() * 1e-6
    }

    /// Domain edges `x_0 = 0, .., x_n = L` in metres.
    pub fn boundaries_m(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.domains.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for d in &self.domains {
            acc += d.width_um;
            out.push(acc * 1e-6);
        }
        out
    }

    /// Same crystal with adjacent equal-orientation domains fused.
    pub fn merged(&self) -> Self {
        let mut out: Vec<Domain> = Vec::with_capacity(self.domains.len());
        for d in &self.domains {
            match out.last_mut() {
                Some(last) if last.sign == d.sign => last.width_um += d.width_um,
                _ => out.push(*d),
            }
        }
        Self {
            domains: out,
            seed_period_um: self.seed_period_um,
        }
    }

    /// All orientations inverted.
    pub fn flipped(&self) -> Self {
        Self {
            domains: self.domains.iter().map(|d| Domain::new(-d.sign, d.width_um)).collect(),
            seed_period_um: self.seed_period_um,
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &DomainStack) -> Self {
        let mut domains = self.domains.clone();
        domains.extend_from_slice(&other.domains);
        Self {
            domains,
            seed_period_um: self.seed_period_um,
        }
    }

    pub fn with_domains(&self, domains: Vec<Domain>) -> Result<Self> {
        Self::new(domains, self.seed_period_um)
    }

    /// Edges where the orientation changes, with the jump weight
    /// `s_{b-1} − s_b` (outer faces get `−s_0` and `s_{n−1}`). Positions in m.
    pub(crate) fn phasor_terms(&self) -> Vec<(f64, f64)> {
        let bounds = self.boundaries_m();
        let n = self.domains.len();
        let mut out = Vec::new();
        out.push((bounds[0], -(self.domains[0].sign as f64)));
        for b in 1..n {
            let jump = (self.domains[b - 1].sign - self.domains[b].sign) as f64;
            if jump != 0.0 {
                out.push((bounds[b], jump));
            }
        }
        out.push((bounds[n], self.domains[n - 1].sign as f64));
        out
    }

    pub fn to_file(&self) -> StackFile {
        StackFile {
            seed_period_um: self.seed_period_um,
            domains: self.domains.iter().map(|d| (d.sign, d.width_um)).collect(),
        }
    }

    pub fn from_file(file: &StackFile) -> Result<Self> {
        Self::new(
            file.domains.iter().map(|&(s, w)| Domain::new(s, w)).collect(),
            file.seed_period_um,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: StackFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_file(&file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_file())?)?;
        Ok(())
    }
}

/// Regular widths `w` up to `length`, last domain absorbing the remainder.
/// The widths sum to `length` bit-exactly: the final subtraction is exact
/// because the running sum lies within a factor two of `length`.
pub(crate) fn regular_layout(width: f64, length: f64, sign: impl Fn(usize) -> i8) -> Vec<Domain> {
    let count = ((length / width) - 1e-9).ceil().max(1.0) as usize;
    let mut domains = Vec::with_capacity(count);
    let mut acc = 0.0;
    for j in 0..count - 1 {
        domains.push(Domain::new(sign(j), width));
        acc += width;
    }
    domains.push(Domain::new(sign(count - 1), length - acc));
    domains
}

/// `∫_a^b e^{iΔk x} dx` without cancellation for small `Δk (b − a)`.
#[inline]
pub(crate) fn segment_integral(dk: f64, a: f64, b: f64) -> Complex64 {
    let w = b - a;
    let half = 0.5 * dk * w;
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    let (s, c) = (dk * 0.5 * (a + b)).sin_cos();
    Complex64::new(c, s) * (w * sinc)
}

/// Exact phase-matching function of `stack` at `delta_k` (rad/m).
pub fn pmf(stack: &DomainStack, delta_k: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut x = 0.0;
    for d in stack.domains() {
        let next = x + d.width_um;
        acc += segment_integral(delta_k, x * 1e-6, next * 1e-6) * d.sign as f64;
        x = next;
    }
    acc / stack.length_m()
}

/// Cumulative PMF along the crystal at `n_points` equally spaced positions
/// from 0 to L. Returns `(x_mm, amplitude)`; the last sample equals
/// [`pmf`].
pub fn amplitude_profile(stack: &DomainStack, delta_k: f64, n_points: usize) -> Result<Vec<(f64, Complex64)>> {
    if n_points < 2 {
        return Err(Error::param("n_points", format!("need at least 2, got {n_points}")));
    }
    let total_um = stack.length_um();
    let norm = stack.length_m();
    let mut out = Vec::with_capacity(n_points);
    let mut prefix = Complex64::new(0.0, 0.0);
    let mut start = 0.0;
    let mut domains = stack.domains().iter();
    let mut current = domains.next();
    for k in 0..n_points {
        let x = if k + 1 == n_points {
            total_um
        } else {
            total_um * k as f64 / (n_points - 1) as f64
        };
        // Advance past every domain that ends at or before x.
        while let Some(d) = current {
            let end = start + d.width_um;
            if end <= x {
                prefix += segment_integral(delta_k, start * 1e-6, end * 1e-6) * d.sign as f64;
                start = end;
                current = domains.next();
            } else {
                break;
            }
        }
        let partial = match current {
            Some(d) if x > start => segment_integral(delta_k, start * 1e-6, x * 1e-6) * d.sign as f64,
            _ => Complex64::new(0.0, 0.0),
        };
        out.push((x * 1e-3, (prefix + partial) / norm));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_stack_counts_and_length() {
        let s = DomainStack::periodic(46.22, 22.0).unwrap();
        // 22000 / 23.11 = 951.97: 951 full domains plus the remainder.
        assert_eq!(s.len(), 952);
        assert!(s.domains()[..951].iter().all(|d| d.width_um == 23.11));
        assert!(s.domains()[951].width_um < 23.11);
        assert_eq!(s.length_um(), 22_000.0);
        for w in s.domains().windows(2) {
            assert_eq!(w[0].sign, -w[1].sign);
        }
    }

    #[test]
    fn one_period_is_two_domains() {
        let s = DomainStack::periodic(40.0, 0.04).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.length_um(), 40.0);
    }

    #[test]
    fn rejects_invalid_stacks() {
        assert!(DomainStack::new(vec![], 1.0).is_err());
        assert!(DomainStack::new(vec![Domain::new(2, 1.0)], 1.0).is_err());
        assert!(DomainStack::new(vec![Domain::new(1, -1.0)], 1.0).is_err());
        assert!(DomainStack::periodic(0.0, 1.0).is_err());
    }

    #[test]
    fn single_domain_peak_and_first_zero() {
        let s = DomainStack::new(vec![Domain::new(1, 1000.0)], 10.0).unwrap();
        assert!((pmf(&s, 0.0).norm() - 1.0).abs() < 1e-15);
        let l = s.length_m();
        assert!(pmf(&s, 2.0 * PI / l).norm() < 1e-12);
    }

    #[test]
    fn periodic_stack_follows_qpm_sinc() {
        // Closed form for a whole number of periods: first-order Fourier
        // coefficient 2/π times the uniform-crystal sinc, plus small
        // contributions from the other orders.
        let period = 46.22;
        let s = DomainStack::periodic(period, 476.0 * period * 1e-3).unwrap();
        let l = s.length_m();
        let k = 2.0 * PI / (period * 1e-6);
        for off in [0.0, 50.0, -120.0, 200.0] {
            let dk = k + off;
            let got = pmf(&s, dk).norm();
            let x = off * l / 2.0;
            let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
            let expected = 2.0 / PI * sinc.abs();
            assert!((got - expected).abs() < 2e-3, "off {off}: {got} vs {expected}");
        }
        // Direct summation of the phasor series agrees with the closed form
        // at the peak to rounding for an exact number of periods.
        let whole = DomainStack::periodic(period, 476.0 * period * 1e-3).unwrap();
        assert_eq!(whole.len(), 952);
        let peak = pmf(&whole, k).norm();
        assert!((peak - 2.0 / PI).abs() < 1e-9, "{peak}");
    }

    #[test]
    fn flipping_negates_pmf() {
        let s = DomainStack::periodic(46.22, 1.0).unwrap();
        for dk in [0.0, 1.0e5, 1.36e5] {
            let a = pmf(&s, dk);
            let b = pmf(&s.flipped(), dk);
            assert!((a + b).norm() < 1e-15);
        }
    }

    #[test]
    fn profile_starts_at_zero_and_ends_at_pmf() {
        let s = DomainStack::periodic(46.22, 2.0).unwrap();
        let dk = 2.0 * PI / 46.22e-6;
        for n in [2, 7, 100, 1001] {
            let p = amplitude_profile(&s, dk, n).unwrap();
            assert_eq!(p.len(), n);
            assert_eq!(p[0].1, Complex64::new(0.0, 0.0));
            assert!((p[n - 1].1 - pmf(&s, dk)).norm() < 1e-12);
            assert!((p[n - 1].0 - 2.0).abs() < 1e-12);
        }
        assert!(amplitude_profile(&s, dk, 1).is_err());
    }

    #[test]
    fn periodic_profile_grows_as_a_staircase() {
        let s = DomainStack::periodic(46.22, 22.0).unwrap();
        let dk = -2.0 * PI / 46.22e-6;
        let p = amplitude_profile(&s, dk, 953).unwrap();
        let mags: Vec<f64> = p.iter().map(|(_, a)| a.norm()).collect();
        // Sampled once per domain the magnitude grows monotonically.
        assert!(mags.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!((mags[952] - 2.0 / PI).abs() < 2e-3);
    }

    #[test]
    fn profile_of_concatenation_is_phase_continuous() {
        let a = DomainStack::periodic(46.22, 1.0).unwrap();
        let b = DomainStack::new(vec![Domain::new(-1, 30.0), Domain::new(1, 17.5), Domain::new(-1, 400.0)], 46.22).unwrap();
        let ab = a.concat(&b);
        let dk = 1.2e5;
        let lhs = pmf(&ab, dk) * ab.length_m();
        let phase = Complex64::from_polar(1.0, dk * a.length_m());
        let rhs = pmf(&a, dk) * a.length_m() + phase * pmf(&b, dk) * b.length_m();
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn merging_preserves_pmf() {
        let s = DomainStack::new(
            vec![Domain::new(1, 10.0), Domain::new(1, 5.0), Domain::new(-1, 7.0), Domain::new(-1, 3.0), Domain::new(1, 2.0)],
            20.0,
        )
        .unwrap();
        let m = s.merged();
        assert_eq!(m.len(), 3);
        for dk in [0.0, 3e4, 2.5e5] {
            assert!((pmf(&s, dk) - pmf(&m, dk)).norm() < 1e-14);
        }
    }

    #[test]
    fn parseval_weight_is_order_independent() {
        // ∫|L pmf|² dΔk = 2π L for any ±1 profile; check a stack and a
        // permutation of its domains against direct quadrature.
        let widths = [3.0, 1.0, 4.0, 1.5, 5.0, 2.0, 6.0];
        let mk = |order: &[usize]| {
            DomainStack::new(
                order
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| Domain::new(if j % 2 == 0 { 1 } else { -1 }, widths[k]))
                    .collect(),
                4.0,
            )
            .unwrap()
        };
        let a = mk(&[0, 1, 2, 3, 4, 5, 6]);
        let b = mk(&[6, 2, 4, 0, 5, 3, 1]);
        let l = a.length_m();
        let integral = |s: &DomainStack| {
            let half = 2.0e9;
            let n = 400_000;
            let h = 2.0 * half / n as f64;
            let mut acc = 0.0;
            for k in 0..=n {
                let dk = -half + k as f64 * h;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += w * (pmf(s, dk) * l).norm_sqr();
            }
            acc * h
        };
        let ia = integral(&a);
        let ib = integral(&b);
        let expected = 2.0 * PI * l;
        assert!((ia - expected).abs() / expected < 1e-2, "{ia} vs {expected}");
        assert!((ib - expected).abs() / expected < 1e-2, "{ib} vs {expected}");
    }

    #[test]
    fn stack_file_round_trip() {
        let s = DomainStack::periodic(46.22, 0.5).unwrap();
        let text = serde_json::to_string(&s.to_file()).unwrap();
        assert!(text.starts_with("{\"seed_period_um\":46.22,\"domains\":[[1,23.11]"));
        let back = DomainStack::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
