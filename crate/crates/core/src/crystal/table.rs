use num_complex::Complex64;

use super::{pmf, DomainStack};
use crate::error::{Error, Result};

/// Exact PMF values and derivatives on a uniform Δk lattice, interpolated
/// with cubic Hermite polynomials in between.
///
/// Node values come from the closed-form phasor sum over domain edges, so
/// the only approximation is the Hermite step; with `h L ≤ 0.02` its
/// relative error stays below 1e-8.
#[derive(Debug, Clone)]
pub struct PmfTable {
    start: f64,
    step: f64,
    values: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

/// Target node spacing in units of 1/L.
const STEP_TIMES_LENGTH: f64 = 0.02;
/// Re-seed the phasor recurrence this often to bound rounding drift.
const RESEED: usize = 256;

impl PmfTable {
    /// Tabulates `stack` over `[dk_min, dk_max]` (rad/m).
    pub fn new(stack: &DomainStack, dk_min: f64, dk_max: f64) -> Result<Self> {
        if !(dk_min.is_finite() && dk_max.is_finite() && dk_max >= dk_min) {
            return Err(Error::param("dk range", format!("[{dk_min}, {dk_max}]")));
        }
        let length = stack.length_m();
        let span = (dk_max - dk_min).max(1e-9);
        let nodes = ((span * length / STEP_TIMES_LENGTH).ceil() as usize).max(1) + 1;
        let step = span / (nodes - 1) as f64;
        // Pad by one node on each side so boundary queries interpolate.
        let start = dk_min - step;
        let count = nodes + 2;

        let terms = stack.phasor_terms();
        let mut sum = vec![Complex64::new(0.0, 0.0); count];
        let mut dsum = vec![Complex64::new(0.0, 0.0); count];
        for &(x, weight) in &terms {
            let rot = Complex64::from_polar(1.0, step * x);
            let mut m = 0;
            while m < count {
                let end = (m + RESEED).min(count);
                let mut z = Complex64::from_polar(weight, (start + m as f64 * step) * x);
                for k in m..end {
                    sum[k] += z;
                    dsum[k] += z * x;
                    z *= rot;
                }
                m = end;
            }
        }
        // pmf = S / (i Δk L), pmf' = (i S' Δk − S) / (i Δk² L) with S' = i Σ c x e^{iΔk x}.
        let mut values = Vec::with_capacity(count);
        let mut slopes = Vec::with_capacity(count);
        let i = Complex64::i();
        for k in 0..count {
            let dk = start + k as f64 * step;
            if (dk * length).abs() < 1e-3 {
                // Cancellation in the edge form; use the per-domain sum.
                let h = 1e-3 / length;
                values.push(pmf(stack, dk));
                slopes.push((pmf(stack, dk + h) - pmf(stack, dk - h)) / (2.0 * h));
            } else {
                let s = sum[k];
                let ds = i * dsum[k];
                values.push(s / (i * dk * length));
                slopes.push((ds * dk - s) / (i * dk * dk * length));
            }
        }
        Ok(Self {
            start,
            step,
            values,
            slopes,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.start + self.step, self.start + (self.values.len() - 2) as f64 * self.step)
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    /// Interpolated PMF at `dk`; `None` outside the tabulated range.
    pub fn eval(&self, dk: f64) -> Option<Complex64> {
        let u = (dk - self.start) / self.step;
        if !(u >= 0.0) || u > (self.values.len() - 1) as f64 {
            return None;
        }
        let k = (u.floor() as usize).min(self.values.len() - 2);
        let t = u - k as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(
            self.values[k] * h00
                + self.slopes[k] * (h10 * self.step)
                + self.values[k + 1] * h01
                + self.slopes[k + 1] * (h11 * self.step),
        )
    }
}
