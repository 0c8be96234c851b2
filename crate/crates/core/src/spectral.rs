//! Pump envelopes, frequency grids and the joint spectral amplitude
//! `f(ωs, ωi) = α(ωs + ωi) · pmf(Δk(ωs, ωi))`.

use std::f64::consts::SQRT_2;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crystal::{pmf, DomainStack, PmfTable};
use crate::dispersion::{delta_k, DispersionBundle, PhaseMismatchQuery};
use crate::error::{Error, Result};
use crate::units::{bandwidth_omega, nm_from_omega, omega_from_nm, um_from_omega};

/// Default half-width of the grid around degeneracy (nm of wavelength).
pub const DEFAULT_HALF_SPAN_NM: f64 = 10.0;
pub const DEFAULT_SAMPLES: usize = 512;
pub const MIN_SAMPLES: usize = 16;

/// Uniform rectangular grid in (ωs, ωi). Samples include both ends of each
/// span: `ω_j = center − span/2 + j·span/(n − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub center_s: f64,
    pub center_i: f64,
    pub span_s: f64,
    pub span_i: f64,
    pub n_s: usize,
    pub n_i: usize,
}

impl FrequencyGrid {
    pub fn new(center_s: f64, center_i: f64, span_s: f64, span_i: f64, n_s: usize, n_i: usize) -> Result<Self> {
        if n_s < MIN_SAMPLES || n_i < MIN_SAMPLES {
            return Err(Error::param("grid samples", format!("need at least {MIN_SAMPLES} per axis, got {n_s}x{n_i}")));
        }
        if !(span_s > 0.0 && span_i > 0.0 && span_s.is_finite() && span_i.is_finite()) {
            return Err(Error::param("grid span", "must be positive"));
        }
        if !(center_s - span_s / 2.0 > 0.0 && center_i - span_i / 2.0 > 0.0) {
            return Err(Error::param("grid center", "grid must stay at positive frequencies"));
        }
        Ok(Self {
            center_s,
            center_i,
            span_s,
            span_i,
            n_s,
            n_i,
        })
    }

    /// Square grid centred on degeneracy for a pump at `pump_nm`, covering
    /// `±half_span_nm` of wavelength around `2·pump_nm` on both axes.
    pub fn degenerate(pump_nm: f64, half_span_nm: f64, n: usize) -> Result<Self> {
        let center = omega_from_nm(pump_nm) / 2.0;
        let span = 2.0 * bandwidth_omega(center, half_span_nm);
        Self::new(center, center, span, span, n, n)
    }

    pub fn degenerate_default(pump_nm: f64) -> Result<Self> {
        Self::degenerate(pump_nm, DEFAULT_HALF_SPAN_NM, DEFAULT_SAMPLES)
    }

    pub fn step_s(&self) -> f64 {
        self.span_s / (self.n_s - 1) as f64
    }

    pub fn step_i(&self) -> f64 {
        self.span_i / (self.n_i - 1) as f64
    }

    pub fn omega_s(&self, j: usize) -> f64 {
        self.center_s - self.span_s / 2.0 + j as f64 * self.step_s()
    }

    pub fn omega_i(&self, k: usize) -> f64 {
        self.center_i - self.span_i / 2.0 + k as f64 * self.step_i()
    }

    pub fn signal_axis(&self) -> Vec<f64> {
        (0..self.n_s).map(|j| self.omega_s(j)).collect()
    }

    pub fn idler_axis(&self) -> Vec<f64> {
        (0..self.n_i).map(|k| self.omega_i(k)).collect()
    }

    /// `[ωs_min, ωs_max, ωi_min, ωi_max]`.
    pub fn bounds(&self) -> [f64; 4] {
        [self.omega_s(0), self.omega_s(self.n_s - 1), self.omega_i(0), self.omega_i(self.n_i - 1)]
    }

    /// Signal and idler axes coincide, so `f(ωi, ωs)` is a transpose.
    pub fn is_exchange_symmetric(&self) -> bool {
        self.n_s == self.n_i && self.center_s == self.center_i && self.span_s == self.span_i
    }

    /// Checks every corner against the dispersion validity ranges.
    pub fn check_dispersion(&self, bundle: &DispersionBundle) -> Result<()> {
        let [s0, s1, i0, i1] = self.bounds();
        for (s, i) in [(s0, i0), (s0, i1), (s1, i0), (s1, i1)] {
            bundle.check_wavelengths(um_from_omega(s + i), um_from_omega(s), um_from_omega(i))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpShape {
    Gaussian,
    Sech2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpEnvelope {
    pub shape: PumpShape,
    pub center_nm: f64,
    /// FWHM of the temporal intensity (ps).
    pub duration_ps: f64,
    /// Group-delay dispersion (ps²); zero is transform limited.
    #[serde(default)]
    pub chirp_ps2: f64,
}

impl PumpEnvelope {
    pub fn new(shape: PumpShape, center_nm: f64, duration_ps: f64) -> Result<Self> {
        if !(duration_ps > 0.0 && duration_ps.is_finite()) {
            return Err(Error::param("pump duration", format!("must be positive, got {duration_ps}")));
        }
        if !(center_nm > 0.0) {
            return Err(Error::param("pump wavelength", format!("must be positive, got {center_nm}")));
        }
        Ok(Self {
            shape,
            center_nm,
            duration_ps,
            chirp_ps2: 0.0,
        })
    }

    pub fn sech2(center_nm: f64, duration_ps: f64) -> Result<Self> {
        Self::new(PumpShape::Sech2, center_nm, duration_ps)
    }

    pub fn gaussian(center_nm: f64, duration_ps: f64) -> Result<Self> {
        Self::new(PumpShape::Gaussian, center_nm, duration_ps)
    }

    pub fn center_omega(&self) -> f64 {
        omega_from_nm(self.center_nm)
    }

    /// FWHM of the spectral intensity |α|² in rad/s.
    pub fn spectral_fwhm(&self) -> f64 {
        let tau = self.duration_ps * 1e-12;
        match self.shape {
            // σ = 2√ln2/τ in exp(−Ω²/2σ²); intensity FWHM = 2σ√ln2.
            PumpShape::Gaussian => 4.0 * 2f64.ln() / tau,
            // sech²(πT₀Ω/2) halves at πT₀Ω/2 = ln(1+√2).
            PumpShape::Sech2 => 4.0 * (1.0 + SQRT_2).ln() / (std::f64::consts::PI * sech_t0(tau)),
        }
    }
}

fn sech_t0(tau: f64) -> f64 {
    tau / (2.0 * (1.0 + SQRT_2).ln())
}

/// Peak-normalized pump amplitude at `omega_sum = ωs + ωi`.
pub fn pump_amplitude(envelope: &PumpEnvelope, omega_sum: f64) -> Complex64 {
    let d = omega_sum - envelope.center_omega();
    let tau = envelope.duration_ps * 1e-12;
    let a = match envelope.shape {
        PumpShape::Gaussian => {
            let sigma = 2.0 * 2f64.ln().sqrt() / tau;
            (-d * d / (2.0 * sigma * sigma)).exp()
        }
        PumpShape::Sech2 => {
            let x = std::f64::consts::PI * sech_t0(tau) * d / 2.0;
            1.0 / x.cosh()
        }
    };
    if envelope.chirp_ps2 == 0.0 {
        Complex64::new(a, 0.0)
    } else {
        Complex64::from_polar(a, 0.5 * envelope.chirp_ps2 * 1e-24 * d * d)
    }
}

/// Sampled two-photon amplitude, row index = signal, column index = idler.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralAmplitude {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
    norm: f64,
}

impl JointSpectralAmplitude {
    /// Wraps row-major samples as given (no normalization).
    pub fn from_values(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_s * grid.n_i {
            return Err(Error::param(
                "jsa values",
                format!("expected {} samples, got {}", grid.n_s * grid.n_i, values.len()),
            ));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::param("jsa values", "non-finite sample"));
        }
        let norm = values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        Ok(Self { grid, values, norm })
    }

    /// Samples `f` on the grid and normalizes to unit L2 norm.
    pub fn sample<F>(grid: FrequencyGrid, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<Complex64> + Sync,
    {
        let rows: Vec<Vec<Complex64>> = (0..grid.n_s)
            .into_par_iter()
            .map(|j| {
                let ws = grid.omega_s(j);
                (0..grid.n_i).map(|k| f(ws, grid.omega_i(k))).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Self::from_values(grid, rows.concat())?.normalized()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.values[j * self.grid.n_i + k]
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.norm < 1e-300 || !self.norm.is_finite() {
            return Err(Error::Degenerate(self.norm));
        }
        let inv = 1.0 / self.norm;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * inv).collect(),
            norm: 1.0,
        })
    }

    /// Applies `g(f)` to every sample, keeping the grid.
    pub fn map(&self, g: impl Fn(Complex64) -> Complex64) -> Self {
        let values: Vec<Complex64> = self.values.iter().map(|&v| g(v)).collect();
        let norm = values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        Self {
            grid: self.grid,
            values,
            norm,
        }
    }

    /// Scales sample `(j, k)` by `w(j, k)`.
    pub fn weighted(&self, w: impl Fn(usize, usize) -> f64) -> Self {
        let n_i = self.grid.n_i;
        let values: Vec<Complex64> = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| v * w(idx / n_i, idx % n_i))
            .collect();
        let norm = values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        Self {
            grid: self.grid,
            values,
            norm,
        }
    }

    /// Sub-block of rows `rs` and columns `cs`.
    pub fn crop(&self, rs: std::ops::Range<usize>, cs: std::ops::Range<usize>) -> Result<Self> {
        let g = &self.grid;
        if rs.end > g.n_s || cs.end > g.n_i || rs.is_empty() || cs.is_empty() {
            return Err(Error::param("crop", "range outside grid"));
        }
        let (n_s, n_i) = (rs.len(), cs.len());
        let s0 = g.omega_s(rs.start);
        let s1 = g.omega_s(rs.end - 1);
        let i0 = g.omega_i(cs.start);
        let i1 = g.omega_i(cs.end - 1);
        let grid = FrequencyGrid::new(0.5 * (s0 + s1), 0.5 * (i0 + i1), s1 - s0, i1 - i0, n_s, n_i)?;
        let mut values = Vec::with_capacity(n_s * n_i);
        for j in rs {
            values.extend_from_slice(&self.values[j * g.n_i + cs.start..j * g.n_i + cs.end]);
        }
        Self::from_values(grid, values)
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.grid.n_s, self.grid.n_i, &self.values)
    }

    /// CSV with columns `omega_s, omega_i, re, im`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["omega_s", "omega_i", "re", "im"])?;
        for j in 0..self.grid.n_s {
            for k in 0..self.grid.n_i {
                let v = self.get(j, k);
                w.serialize((self.grid.omega_s(j), self.grid.omega_i(k), v.re, v.im))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Binary dump: a 64-byte header followed by `(re, im)` f64 pairs in
    /// row-major order, all little-endian.
    ///
    /// Header: `"JSA1"`, `n_s: u32`, `n_i: u32`, 4 zero bytes, then
    /// `ωs_min, ωs_max, ωi_min, ωi_max` as f64, padded with zeros to 64.
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        let mut header = [0u8; 64];
        header[0..4].copy_from_slice(b"JSA1");
        header[4..8].copy_from_slice(&(self.grid.n_s as u32).to_le_bytes());
        header[8..12].copy_from_slice(&(self.grid.n_i as u32).to_le_bytes());
        for (slot, b) in self.grid.bounds().iter().enumerate() {
            header[16 + 8 * slot..24 + 8 * slot].copy_from_slice(&b.to_le_bytes());
        }
        out.write_all(&header)?;
        let mut body = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            body.extend_from_slice(&v.re.to_le_bytes());
            body.extend_from_slice(&v.im.to_le_bytes());
        }
        out.write_all(&body)?;
        Ok(())
    }

    pub fn read_binary(mut input: impl Read) -> Result<Self> {
        let mut header = [0u8; 64];
        input.read_exact(&mut header)?;
        if &header[0..4] != b"JSA1" {
            return Err(Error::Format("missing JSA1 magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let (n_s, n_i) = (u32_at(4), u32_at(8));
        let (s0, s1, i0, i1) = (f64_at(16), f64_at(24), f64_at(32), f64_at(40));
        let grid = FrequencyGrid::new(0.5 * (s0 + s1), 0.5 * (i0 + i1), s1 - s0, i1 - i0, n_s, n_i)
            .map_err(|e| Error::Format(format!("bad grid in header: {e}")))?;
        let mut body = vec![0u8; n_s * n_i * 16];
        input.read_exact(&mut body)?;
        let values = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        Self::from_values(grid, values)
    }
}

/// How `build_jsa` evaluates the crystal PMF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmfEvaluation {
    /// Exact values on a fine Δk lattice with cubic Hermite interpolation.
    #[default]
    Tabulated,
    /// Direct per-domain sum at every grid point.
    Exact,
}

/// Δk at every grid point, row-major.
pub fn delta_k_map(grid: &FrequencyGrid, bundle: &DispersionBundle) -> Result<Vec<f64>> {
    grid.check_dispersion(bundle)?;
    let rows: Vec<Vec<f64>> = (0..grid.n_s)
        .into_par_iter()
        .map(|j| {
            let ws = grid.omega_s(j);
            (0..grid.n_i)
                .map(|k| delta_k(&PhaseMismatchQuery::new(ws, grid.omega_i(k))?, bundle))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

/// `α(ωs + ωi) · pmf(Δk)`, L2-normalized.
pub fn build_jsa(
    grid: &FrequencyGrid,
    envelope: &PumpEnvelope,
    stack: &DomainStack,
    bundle: &DispersionBundle,
    mode: PmfEvaluation,
) -> Result<JointSpectralAmplitude> {
    let dk = delta_k_map(grid, bundle)?;
    let values: Vec<Complex64> = match mode {
        PmfEvaluation::Exact => dk.par_iter().map(|&d| pmf(stack, d)).collect(),
        PmfEvaluation::Tabulated => {
            let (lo, hi) = dk.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
            let table = PmfTable::new(stack, lo, hi)?;
            dk.par_iter()
                .map(|&d| table.eval(d).unwrap_or_else(|| pmf(stack, d)))
                .collect()
        }
    };
    assemble(grid, envelope, values)
}

/// Same as [`build_jsa`] with an arbitrary phase-matching function of Δk.
pub fn build_jsa_from_pmf<F>(
    grid: &FrequencyGrid,
    envelope: &PumpEnvelope,
    bundle: &DispersionBundle,
    pmf_fn: F,
) -> Result<JointSpectralAmplitude>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let dk = delta_k_map(grid, bundle)?;
    let values = dk.par_iter().map(|&d| pmf_fn(d)).collect();
    assemble(grid, envelope, values)
}

fn assemble(grid: &FrequencyGrid, envelope: &PumpEnvelope, mut values: Vec<Complex64>) -> Result<JointSpectralAmplitude> {
    let n_i = grid.n_i;
    values.par_chunks_mut(n_i).enumerate().for_each(|(j, row)| {
        let ws = grid.omega_s(j);
        for (k, v) in row.iter_mut().enumerate() {
            *v *= pump_amplitude(envelope, ws + grid.omega_i(k));
        }
    });
    JointSpectralAmplitude::from_values(*grid, values)?.normalized()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginals {
    /// Signal spectrum (unit sum) on the grid's signal axis.
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
    pub signal_fwhm_nm: f64,
    pub idler_fwhm_nm: f64,
    /// Same widths in angular frequency (rad/s).
    pub signal_fwhm_omega: f64,
    pub idler_fwhm_omega: f64,
}

/// Row and column sums of |f|² and their FWHM.
pub fn marginal_spectra(jsa: &JointSpectralAmplitude) -> Result<Marginals> {
    let g = jsa.grid();
    let mut signal = vec![0.0; g.n_s];
    let mut idler = vec![0.0; g.n_i];
    for j in 0..g.n_s {
        for k in 0..g.n_i {
            let p = jsa.get(j, k).norm_sqr();
            signal[j] += p;
            idler[k] += p;
        }
    }
    for v in [&mut signal, &mut idler] {
        let total: f64 = v.iter().sum();
        if total <= 0.0 {
            return Err(Error::Degenerate(total));
        }
        v.iter_mut().for_each(|x| *x /= total);
    }
    let (s_lo, s_hi) = half_max_crossings(&signal, "signal")?;
    let (i_lo, i_hi) = half_max_crossings(&idler, "idler")?;
    let at = |c: f64, lo: f64, step: f64| lo + c * step;
    let [s0, _, i0, _] = g.bounds();
    let (ws_lo, ws_hi) = (at(s_lo, s0, g.step_s()), at(s_hi, s0, g.step_s()));
    let (wi_lo, wi_hi) = (at(i_lo, i0, g.step_i()), at(i_hi, i0, g.step_i()));
    Ok(Marginals {
        signal,
        idler,
        signal_fwhm_nm: nm_from_omega(ws_lo) - nm_from_omega(ws_hi),
        idler_fwhm_nm: nm_from_omega(wi_lo) - nm_from_omega(wi_hi),
        signal_fwhm_omega: ws_hi - ws_lo,
        idler_fwhm_omega: wi_hi - wi_lo,
    })
}

/// Fractional sample indices where `v` falls to half its maximum on either
/// side of the peak, by linear interpolation.
pub(crate) fn half_max_crossings(v: &[f64], axis: &'static str) -> Result<(f64, f64)> {
    let (peak, &max) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::FwhmUndefined {
            axis,
            reason: "empty spectrum".into(),
        })?;
    let half = max / 2.0;
    let edge = || Error::FwhmUndefined {
        axis,
        reason: "spectrum does not fall to half maximum inside the grid".into(),
    };
    let mut lo = peak;
    while v[lo] > half {
        if lo == 0 {
            return Err(edge());
        }
        lo -= 1;
    }
    let mut hi = peak;
    while v[hi] > half {
        if hi + 1 == v.len() {
            return Err(edge());
        }
        hi += 1;
    }
    let left = lo as f64 + (half - v[lo]) / (v[lo + 1] - v[lo]);
    let right = hi as f64 - (half - v[hi]) / (v[hi - 1] - v[hi]);
    Ok((left, right))
}
