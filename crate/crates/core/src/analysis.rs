//! Schmidt decomposition, purity variants, spectral filtering and the
//! purity/heralding trade-off.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{marginal_spectra, JointSpectralAmplitude, MIN_SAMPLES};
use crate::units::{bandwidth_omega, omega_from_nm};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtResult {
    /// Descending, with unit sum of squares.
    pub coefficients: Vec<f64>,
    pub purity: f64,
    pub schmidt_number: f64,
}

/// Singular values of the sampled amplitude, renormalized.
pub fn schmidt(jsa: &JointSpectralAmplitude) -> Result<SchmidtResult> {
    if !(jsa.norm() >= 1e-12) {
        return Err(Error::Degenerate(jsa.norm()));
    }
    let mut sv: Vec<f64> = jsa.to_matrix().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let total = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
    let coefficients: Vec<f64> = sv.iter().map(|s| s / total).collect();
    let purity = coefficients.iter().map(|c| c.powi(4)).sum::<f64>();
    Ok(SchmidtResult {
        coefficients,
        purity,
        schmidt_number: 1.0 / purity,
    })
}

/// Purity of `|f|`, i.e. of the square root of the joint spectral intensity.
pub fn purity_from_jsi(jsa: &JointSpectralAmplitude) -> Result<f64> {
    Ok(schmidt(&jsa.map(|v| v.norm().into()))?.purity)
}

/// Purity after cropping each axis symmetrically to `shrink_factor` of its
/// samples.
pub fn restricted_window_purity(jsa: &JointSpectralAmplitude, shrink_factor: f64) -> Result<f64> {
    if !(shrink_factor > 0.0 && shrink_factor <= 1.0) {
        return Err(Error::param("shrink_factor", format!("must lie in (0, 1], got {shrink_factor}")));
    }
    let g = jsa.grid();
    let keep = |n: usize| ((n as f64 * shrink_factor).round() as usize).min(n);
    let (ks, ki) = (keep(g.n_s), keep(g.n_i));
    if ks < MIN_SAMPLES || ki < MIN_SAMPLES {
        return Err(Error::param(
            "shrink_factor",
            format!("cropped grid {ks}x{ki} is below {MIN_SAMPLES} samples per axis"),
        ));
    }
    let rs = (g.n_s - ks) / 2;
    let cs = (g.n_i - ki) / 2;
    Ok(schmidt(&jsa.crop(rs..rs + ks, cs..cs + ki)?)?.purity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    /// `exp(−(ω−ω₀)²/2σ²)`
    Gaussian,
    /// `exp(−(ω−ω₀)⁴/2σ⁴)`
    Quartic,
    /// Unit transmission for `|ω−ω₀| ≤ σ`.
    Rect,
    None,
}

/// Intensity transmission `T(ω)` of a band-pass filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFilter {
    pub shape: FilterShape,
    /// ω₀ (rad/s).
    pub center: f64,
    /// σ (rad/s); half-width for `Rect`.
    pub sigma: f64,
    pub peak_transmission: f64,
}

impl SpectralFilter {
    pub fn none() -> Self {
        Self {
            shape: FilterShape::None,
            center: 0.0,
            sigma: f64::INFINITY,
            peak_transmission: 1.0,
        }
    }

    /// Filter with the given intensity FWHM (rad/s).
    pub fn with_fwhm(shape: FilterShape, center: f64, fwhm: f64) -> Result<Self> {
        if !(fwhm >= 0.0) {
            return Err(Error::param("filter fwhm", format!("must be >= 0, got {fwhm}")));
        }
        let half = fwhm / 2.0;
        let ln2 = 2f64.ln();
        let sigma = match shape {
            FilterShape::Gaussian => half / (2.0 * ln2).sqrt(),
            FilterShape::Quartic => half / (2.0 * ln2).powf(0.25),
            FilterShape::Rect => half,
            FilterShape::None => f64::INFINITY,
        };
        Ok(Self {
            shape,
            center,
            sigma,
            peak_transmission: 1.0,
        })
    }

    pub fn with_peak_transmission(mut self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::param("peak_transmission", format!("must lie in [0, 1], got {t}")));
        }
        self.peak_transmission = t;
        Ok(self)
    }

    pub fn transmission(&self, omega: f64) -> f64 {
        let x = omega - self.center;
        let shape = match self.shape {
            FilterShape::None => 1.0,
            _ if self.sigma == 0.0 => 0.0,
            FilterShape::Gaussian => (-x * x / (2.0 * self.sigma * self.sigma)).exp(),
            FilterShape::Quartic => (-(x / self.sigma).powi(4) / 2.0).exp(),
            FilterShape::Rect => {
                if x.abs() <= self.sigma {
                    1.0
                } else {
                    0.0
                }
            }
        };
        self.peak_transmission * shape
    }
}

/// Filter description as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub shape: FilterShape,
    pub center_nm: f64,
    pub fwhm_nm: f64,
    #[serde(default = "unit")]
    pub peak_transmission: f64,
}

fn unit() -> f64 {
    1.0
}

impl FilterSpec {
    pub fn to_filter(&self) -> Result<SpectralFilter> {
        if !(self.center_nm > 0.0) {
            return Err(Error::param("filter center_nm", "must be positive"));
        }
        let center = omega_from_nm(self.center_nm);
        SpectralFilter::with_fwhm(self.shape, center, bandwidth_omega(center, self.fwhm_nm))?
            .with_peak_transmission(self.peak_transmission)
    }
}

#[derive(Debug, Clone)]
pub struct Filtered {
    /// `f·√T_s·√T_i`, not renormalized.
    pub jsa: JointSpectralAmplitude,
    /// Surviving share of pairs, `‖f'‖²/‖f‖²`.
    pub transmitted: f64,
    /// Nothing got through; downstream purity is undefined.
    pub degenerate: bool,
}

pub fn apply_filters(jsa: &JointSpectralAmplitude, filter_s: &SpectralFilter, filter_i: &SpectralFilter) -> Filtered {
    let g = *jsa.grid();
    let ts: Vec<f64> = g.signal_axis().iter().map(|&w| filter_s.transmission(w).sqrt()).collect();
    let ti: Vec<f64> = g.idler_axis().iter().map(|&w| filter_i.transmission(w).sqrt()).collect();
    let out = jsa.weighted(|j, k| ts[j] * ti[k]);
    // Both sums over the same samples, so unit filters give exactly 1.
    let before: f64 = jsa.values().iter().map(|v| v.norm_sqr()).sum();
    let after: f64 = out.values().iter().map(|v| v.norm_sqr()).sum();
    let transmitted = if before > 0.0 { after / before } else { 0.0 };
    Filtered {
        degenerate: transmitted == 0.0,
        jsa: out,
        transmitted,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeraldingReport {
    pub eta_symmetric: f64,
    /// Probability the signal passes given the idler did.
    pub eta_signal: f64,
    pub eta_idler: f64,
    /// Both photons pass.
    pub brightness_factor: f64,
    pub fourfold_factor: f64,
    pub sixfold_factor: f64,
}

/// Loss-free spectral heralding for one pair of filters.
pub fn heralding(jsa: &JointSpectralAmplitude, filter_s: &SpectralFilter, filter_i: &SpectralFilter) -> HeraldingReport {
    let g = *jsa.grid();
    let ts: Vec<f64> = g.signal_axis().iter().map(|&w| filter_s.transmission(w)).collect();
    let ti: Vec<f64> = g.idler_axis().iter().map(|&w| filter_i.transmission(w)).collect();
    let (mut total, mut both, mut s_only, mut i_only) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..g.n_s {
        for k in 0..g.n_i {
            let p = jsa.get(j, k).norm_sqr();
            total += p;
            both += p * ts[j] * ti[k];
            s_only += p * ts[j];
            i_only += p * ti[k];
        }
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { (a / b).min(1.0) } else { 0.0 };
    let eta_signal = ratio(both, i_only);
    let eta_idler = ratio(both, s_only);
    let brightness = ratio(both, total);
    HeraldingReport {
        eta_symmetric: (eta_signal * eta_idler).sqrt(),
        eta_signal,
        eta_idler,
        brightness_factor: brightness,
        fourfold_factor: brightness * brightness,
        sixfold_factor: brightness * brightness * brightness,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub width_ratio: f64,
    /// Purity of the filtered, renormalized JSA; NaN when nothing passes.
    pub purity: f64,
    pub report: HeraldingReport,
}

/// Filters of `shape` centred on each arm's grid centre, with FWHM equal to
/// `ratio ×` that arm's unfiltered marginal FWHM.
pub fn heralding_tradeoff(jsa: &JointSpectralAmplitude, shape: FilterShape, ratios: &[f64]) -> Result<Vec<TradeoffPoint>> {
    let m = marginal_spectra(jsa)?;
    let g = *jsa.grid();
    ratios
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::param("width ratio", format!("must be positive, got {r}")));
            }
            let fs = SpectralFilter::with_fwhm(shape, g.center_s, r * m.signal_fwhm_omega)?;
            let fi = SpectralFilter::with_fwhm(shape, g.center_i, r * m.idler_fwhm_omega)?;
            let filtered = apply_filters(jsa, &fs, &fi);
            let purity = if filtered.degenerate {
                f64::NAN
            } else {
                schmidt(&filtered.jsa)?.purity
            };
            Ok(TradeoffPoint {
                width_ratio: r,
                purity,
                report: heralding(jsa, &fs, &fi),
            })
        })
        .collect()
}

/// Columns `width_ratio, purity, eta_sym, brightness, fourfold, sixfold`.
pub fn write_tradeoff_csv(points: &[TradeoffPoint], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["width_ratio", "purity", "eta_sym", "brightness", "fourfold", "sixfold"])?;
    for p in points {
        w.serialize((
            p.width_ratio,
            p.purity,
            p.report.eta_symmetric,
            p.report.brightness_factor,
            p.report.fourfold_factor,
            p.report.sixfold_factor,
        ))?;
    }
    w.flush()?;
    Ok(())
}
