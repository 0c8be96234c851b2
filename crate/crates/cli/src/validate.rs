use std::f64::consts::PI;
use std::path::Path;

use pdc_core::crystal::PmfTarget;
use pdc_core::dispersion::{DispersionBundle, Material};
use pdc_core::fock::MAX_TRUNCATION;
use pdc_core::spectral::{FrequencyGrid, PumpEnvelope, MIN_SAMPLES};
use serde::Serialize;

use crate::config::{Analysis, AnnealRequest, CrystalSpec, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Resolved physical setup shared by validation and the pipeline.
pub(crate) struct Prepared {
    pub bundle: DispersionBundle,
    pub pump: PumpEnvelope,
    pub grid: FrequencyGrid,
}

/// Reads and checks a config file without running anything.
pub fn validate_path(path: impl AsRef<Path>) -> Result<Vec<Diagnostic>, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    match RunConfig::from_json(&text, base) {
        Ok(cfg) => Ok(validate(&cfg)),
        Err(e) => Ok(vec![Diagnostic {
            code: "schema",
            message: e.to_string(),
        }]),
    }
}

/// Schema and semantic checks; an empty list means the config can run.
pub fn validate(cfg: &RunConfig) -> Vec<Diagnostic> {
    check(cfg).0
}

pub(crate) fn check(cfg: &RunConfig) -> (Vec<Diagnostic>, Option<Prepared>) {
    let mut diags = Vec::new();
    let mut push = |code, message: String| diags.push(Diagnostic { code, message });

    for f in cfg.input_files() {
        if !f.is_file() {
            push("missing_file", format!("{} does not exist", f.display()));
        }
    }
    if cfg.needs_seed() && cfg.rng_seed.is_none() {
        push("missing_seed", "rng_seed is required for annealing or Monte Carlo stages".into());
    }

    let material = match &cfg.material {
        None => Some(Material::ktp()),
        Some(p) => {
            let p = cfg.resolve(p);
            if p.is_file() {
                Material::load(&p)
                    .map_err(|e| push("material", format!("{}: {e}", p.display())))
                    .ok()
            } else {
                None
            }
        }
    };
    let bundle = material.and_then(|m| {
        m.bundle(&cfg.polarization)
            .map(|b| match cfg.temperature_c {
                Some(t) => b.with_temperature(t),
                None => b,
            })
            .map_err(|e| push("polarization", e.to_string()))
            .ok()
    });

    let pump = PumpEnvelope::new(cfg.pump.shape, cfg.pump.center_nm, cfg.pump.duration_ps)
        .map(|p| PumpEnvelope {
            chirp_ps2: cfg.pump.chirp_ps2,
            ..p
        })
        .map_err(|e| push("pump", e.to_string()))
        .ok();

    let grid = match pump {
        Some(p) if cfg.grid.samples >= MIN_SAMPLES => FrequencyGrid::degenerate(p.center_nm, cfg.grid.half_span_nm, cfg.grid.samples)
            .map_err(|e| push("grid", e.to_string()))
            .ok(),
        Some(_) => {
            push("grid", format!("need at least {MIN_SAMPLES} samples per axis, got {}", cfg.grid.samples));
            None
        }
        None => None,
    };
    if let (Some(b), Some(g)) = (&bundle, &grid) {
        if let Err(e) = g.check_dispersion(b) {
            push("grid_out_of_range", e.to_string());
        }
    }

    match &cfg.crystal {
        CrystalSpec::Periodic { period_um, length_mm } => {
            if !(*length_mm > 0.0) {
                push("crystal", format!("length_mm must be positive, got {length_mm}"));
            }
            if let Some(p) = period_um {
                if !(*p > 0.0) {
                    push("crystal", format!("period_um must be positive, got {p}"));
                }
            }
        }
        CrystalSpec::StackFile { .. } => {}
        CrystalSpec::Anneal(req) => {
            if let Err(e) = req.schedule.validate() {
                push("anneal_schedule", e.to_string());
            }
            if let (Some(b), Some(p)) = (&bundle, &pump) {
                match anneal_target(req, b, p) {
                    Ok((target, _)) => {
                        let limit = 2.0 * PI / (req.length_mm * 1e-3);
                        if target.intensity_fwhm() < limit {
                            push(
                                "infeasible_anneal",
                                format!(
                                    "target FWHM {:.1} rad/m is below 2π/L = {limit:.1} rad/m for {} mm",
                                    target.intensity_fwhm(),
                                    req.length_mm
                                ),
                            );
                        }
                    }
                    Err(m) => push("anneal_target", m),
                }
            }
        }
    }

    let degenerate_nm = pump.map(|p| 2.0 * p.center_nm);
    for a in &cfg.analyses {
        match a {
            Analysis::RestrictedWindow { shrink_factor } if !(*shrink_factor > 0.0 && *shrink_factor <= 1.0) => {
                push("restricted_window", format!("shrink_factor must lie in (0, 1], got {shrink_factor}"));
            }
            Analysis::Dip { points, half_range_ps, .. } if *points < 5 || !(*half_range_ps > 0.0) => {
                push("dip", "need at least 5 delays and a positive half range".into());
            }
            Analysis::Tradeoff { ratios, .. } if ratios.is_empty() || ratios.iter().any(|r| !(*r > 0.0)) => {
                push("tradeoff", "width ratios must be positive and non-empty".into());
            }
            Analysis::Heralding { signal_filter, idler_filter } => {
                for (arm, f) in [("signal", signal_filter), ("idler", idler_filter)] {
                    if let Err(e) = f.to_filter() {
                        push("filter", format!("{arm}: {e}"));
                    } else if let Some(d) = degenerate_nm {
                        if (f.center_nm - d).abs() > 0.5 * f.fwhm_nm {
                            push(
                                "filter_off_degeneracy",
                                format!(
                                    "{arm} filter centre {} nm is more than half its FWHM from degeneracy at {d} nm",
                                    f.center_nm
                                ),
                            );
                        }
                    }
                }
            }
            Analysis::JitterMc { fwhm_um, trials, .. } if *trials == 0 || !(*fwhm_um >= 0.0) => {
                push("jitter_mc", "need at least one trial and a non-negative FWHM".into());
            }
            Analysis::FockCurve {
                truncation_order,
                tau_constant,
                powers_mw,
            } => {
                if *truncation_order == 0 || *truncation_order > MAX_TRUNCATION {
                    push("fock_curve", format!("truncation_order must lie in 1..={MAX_TRUNCATION}"));
                }
                if powers_mw.iter().any(|p| !(*p >= 0.0 && p * tau_constant < 1.0)) || !(*tau_constant >= 0.0) {
                    push("fock_curve", "every power must give 0 <= λ² = Pτ < 1".into());
                }
            }
            _ => {}
        }
    }

    let prepared = match (bundle, pump, grid) {
        (Some(bundle), Some(pump), Some(grid)) if diags.is_empty() => Some(Prepared { bundle, pump, grid }),
        _ => None,
    };
    (diags, prepared)
}

/// Gaussian target and seed period for an anneal request.
pub(crate) fn anneal_target(
    req: &AnnealRequest,
    bundle: &DispersionBundle,
    pump: &PumpEnvelope,
) -> Result<(PmfTarget, f64), String> {
    if !(req.length_mm > 0.0) {
        return Err(format!("length_mm must be positive, got {}", req.length_mm));
    }
    let wp = pump.center_omega();
    let center = bundle.degenerate_delta_k(wp).map_err(|e| e.to_string())?;
    let target = match (req.target_sigma, req.reference_length_mm) {
        (Some(s), _) => PmfTarget::gaussian(center, s),
        (None, Some(l)) => PmfTarget::matched_to_periodic(center, l),
        (None, None) => return Err("give target_sigma or reference_length_mm".into()),
    }
    .map_err(|e| e.to_string())?;
    let period = match req.seed_period_um {
        Some(p) => p,
        None => bundle.qpm_period_um(wp).map_err(|e| e.to_string())?,
    };
    Ok((target, period))
}
