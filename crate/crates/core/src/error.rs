use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {wavelength_um:.6} um outside valid range [{min:.4}, {max:.4}] um of axis `{axis}`")]
    OutOfRange {
        axis: String,
        wavelength_um: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid refractive-index model for axis `{axis}`: {reason}")]
    InvalidIndexModel { axis: String, reason: String },

    #[error("unknown Sellmeier form `{0}`")]
    UnknownForm(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible apodization target: {0}")]
    Infeasible(String),

    #[error("FWHM undefined for the {axis} marginal: {reason}; enlarge the frequency grid")]
    FwhmUndefined { axis: &'static str, reason: String },

    #[error("degenerate joint spectral amplitude (norm {0:e})")]
    Degenerate(f64),

    #[error("incompatible frequency grids: {0}")]
    IncompatibleGrids(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
