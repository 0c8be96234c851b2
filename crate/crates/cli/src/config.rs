use std::path::{Path, PathBuf};

use pdc_core::analysis::{FilterShape, FilterSpec};
use pdc_core::crystal::{AnnealSchedule, JitterModel};
use pdc_core::dispersion::PolarizationConfig;
use pdc_core::interference::FitKind;
use pdc_core::spectral::{PmfEvaluation, PumpEnvelope, DEFAULT_HALF_SPAN_NM, DEFAULT_SAMPLES};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level run description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    /// Coefficient file; the bundled KTP data is used when absent.
    #[serde(default)]
    pub material: Option<PathBuf>,
    #[serde(default)]
    pub polarization: PolarizationConfig,
    #[serde(default)]
    pub temperature_c: Option<f64>,
    pub pump: PumpEnvelope,
    pub crystal: CrystalSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    /// Directory that relative paths resolve against. Set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CrystalSpec {
    Periodic {
        /// Poling period (um); the first-order QPM period at the pump when absent.
        #[serde(default)]
        period_um: Option<f64>,
        length_mm: f64,
    },
    StackFile {
        path: PathBuf,
    },
    Anneal(AnnealRequest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealRequest {
    pub length_mm: f64,
    /// Gaussian target with the intensity FWHM of a uniform crystal this long.
    #[serde(default)]
    pub reference_length_mm: Option<f64>,
    /// Explicit target σ in Δk (rad/m); overrides `reference_length_mm`.
    #[serde(default)]
    pub target_sigma: Option<f64>,
    #[serde(default)]
    pub seed_period_um: Option<f64>,
    #[serde(default)]
    pub schedule: AnnealSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_half_span")]
    pub half_span_nm: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub pmf: PmfEvaluation,
}

fn default_half_span() -> f64 {
    DEFAULT_HALF_SPAN_NM
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_span_nm: DEFAULT_HALF_SPAN_NM,
            samples: DEFAULT_SAMPLES,
            pmf: PmfEvaluation::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    Purity,
    JsiPurity,
    RestrictedWindow {
        shrink_factor: f64,
    },
    Dip {
        /// Half-range of the delay scan about the dip centre (ps).
        #[serde(default = "default_dip_half_range")]
        half_range_ps: f64,
        #[serde(default = "default_dip_points")]
        points: usize,
        #[serde(default = "default_fit")]
        fit: FitKind,
    },
    Tradeoff {
        shape: FilterShape,
        ratios: Vec<f64>,
    },
    Heralding {
        signal_filter: FilterSpec,
        idler_filter: FilterSpec,
    },
    JitterMc {
        fwhm_um: f64,
        trials: usize,
        #[serde(default)]
        model: JitterModel,
    },
    FockCurve {
        truncation_order: usize,
        /// τ in λ = √(Pτ) (1/mW).
        tau_constant: f64,
        powers_mw: Vec<f64>,
    },
}

fn default_dip_half_range() -> f64 {
    10.0
}

fn default_dip_points() -> usize {
    401
}

fn default_fit() -> FitKind {
    FitKind::GaussianFit
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Purity => "purity",
            Analysis::JsiPurity => "jsi_purity",
            Analysis::RestrictedWindow { .. } => "restricted_window",
            Analysis::Dip { .. } => "dip",
            Analysis::Tradeoff { .. } => "tradeoff",
            Analysis::Heralding { .. } => "heralding",
            Analysis::JitterMc { .. } => "jitter_mc",
            Analysis::FockCurve { .. } => "fock_curve",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Analysis::JitterMc { .. })
    }

    /// Whether the stage consumes the joint spectral amplitude.
    pub fn needs_jsa(&self) -> bool {
        !matches!(self, Analysis::FockCurve { .. })
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
        cfg.base_dir = base_dir.into();
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Files the run reads, resolved.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut v = Vec::new();
        if let Some(m) = &self.material {
            v.push(self.resolve(m));
        }
        if let CrystalSpec::StackFile { path } = &self.crystal {
            v.push(self.resolve(path));
        }
        v
    }

    pub fn needs_seed(&self) -> bool {
        matches!(self.crystal, CrystalSpec::Anneal(_)) || self.analyses.iter().any(Analysis::is_stochastic)
    }
}
