//! Refractive-index models and phase mismatch.
//!
//! Index coefficients are loaded from JSON coefficient files (see
//! `data/ktp.json`) so that new materials do not require a rebuild. Each
//! record describes one crystal axis:
//!
//! ```json
//! { "material": "KTP", "axis": "y", "form_id": "sellmeier_two_pole",
//!   "coefficients": [2.0993, 0.922683, 0.0467695, 0.0, 0.0, 0.0138408],
//!   "valid_range_um": [0.4, 3.0], "temperature_terms": [] }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{um_from_omega, C};

/// Temperature at which the Sellmeier polynomials are referenced (deg C).
pub const REFERENCE_TEMPERATURE_C: f64 = 25.0;

const KTP_JSON: &str = include_str!("../data/ktp.json");

/// Functional form of a refractive-index model.
///
/// `SellmeierTwoPole` evaluates
/// `n^2 = A + B/(1 - C/λ^2) + D/(1 - E/λ^2) - F λ^2` with λ in um and
/// coefficients `[A, B, C, D, E, F]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SellmeierForm {
    Constant,
    SellmeierTwoPole,
}

impl SellmeierForm {
    pub fn id(self) -> &'static str {
        match self {
            SellmeierForm::Constant => "constant",
            SellmeierForm::SellmeierTwoPole => "sellmeier_two_pole",
        }
    }

    fn coefficient_count(self) -> usize {
        match self {
            SellmeierForm::Constant => 1,
            SellmeierForm::SellmeierTwoPole => 6,
        }
    }
}

impl std::str::FromStr for SellmeierForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(SellmeierForm::Constant),
            "sellmeier_two_pole" => Ok(SellmeierForm::SellmeierTwoPole),
            other => Err(Error::UnknownForm(other.to_string())),
        }
    }
}

/// One record of a coefficient file, field names as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub material: String,
    pub axis: String,
    pub form_id: String,
    pub coefficients: Vec<f64>,
    pub valid_range_um: [f64; 2],
    #[serde(default)]
    pub temperature_terms: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CoefficientFile {
    Many(Vec<CoefficientRecord>),
    One(CoefficientRecord),
}

/// Refractive index of a single crystal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RefractiveIndexModel {
    axis_label: String,
    coefficients: Vec<f64>,
    form: SellmeierForm,
    valid_range_um: (f64, f64),
    /// Thermo-optic correction `Δn = n1(λ)ΔT + n2(λ)ΔT²` with
    /// `n_k(λ) = Σ_m a_km / λ^m`; the first half of the list holds the
    /// `n1` coefficients, the second half `n2`.
    temperature_terms: Option<Vec<f64>>,
}

impl RefractiveIndexModel {
    pub fn new(
        axis_label: impl Into<String>,
        form: SellmeierForm,
        coefficients: Vec<f64>,
        valid_range_um: (f64, f64),
        temperature_terms: Option<Vec<f64>>,
    ) -> Result<Self> {
        let axis_label = axis_label.into();
        let invalid = |reason: String| Error::InvalidIndexModel {
            axis: axis_label.clone(),
            reason,
        };
        if coefficients.len() != form.coefficient_count() {
            return Err(invalid(format!(
                "form `{}` needs {} coefficients, got {}",
                form.id(),
                form.coefficient_count(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite coefficient".into()));
        }
        let (lo, hi) = valid_range_um;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(invalid(format!("bad valid range [{lo}, {hi}]")));
        }
        let temperature_terms = temperature_terms.filter(|t| !t.is_empty());
        if let Some(t) = &temperature_terms {
            if t.len() % 2 != 0 {
                return Err(invalid("temperature_terms must have even length".into()));
            }
        }
        let model = Self {
            axis_label: axis_label.clone(),
            coefficients,
            form,
            valid_range_um,
            temperature_terms,
        };
        // n > 1 across the whole validity window, checked on a dense sample.
        let samples = 512;
        for s in 0..=samples {
            let lambda = lo + (hi - lo) * s as f64 / samples as f64;
            let n = model.sellmeier(lambda).0;
            if !(n.is_finite() && n > 1.0) {
                return Err(invalid(format!("n({lambda:.4} um) = {n} is not > 1")));
            }
        }
        Ok(model)
    }

    pub fn constant(axis_label: impl Into<String>, n0: f64, valid_range_um: (f64, f64)) -> Result<Self> {
        Self::new(axis_label, SellmeierForm::Constant, vec![n0], valid_range_um, None)
    }

    pub fn from_record(record: &CoefficientRecord) -> Result<Self> {
        let form = record.form_id.parse()?;
        Self::new(
            record.axis.clone(),
            form,
            record.coefficients.clone(),
            (record.valid_range_um[0], record.valid_range_um[1]),
            Some(record.temperature_terms.clone()),
        )
    }

    pub fn to_record(&self, material: &str) -> CoefficientRecord {
        CoefficientRecord {
            material: material.to_string(),
            axis: self.axis_label.clone(),
            form_id: self.form.id().to_string(),
            coefficients: self.coefficients.clone(),
            valid_range_um: [self.valid_range_um.0, self.valid_range_um.1],
            temperature_terms: self.temperature_terms.clone().unwrap_or_default(),
        }
    }

    pub fn axis_label(&self) -> &str {
        &self.axis_label
    }

    pub fn valid_range_um(&self) -> (f64, f64) {
        self.valid_range_um
    }

    pub fn form(&self) -> SellmeierForm {
        self.form
    }

    fn check_range(&self, wavelength_um: f64) -> Result<()> {
        let (lo, hi) = self.valid_range_um;
        if wavelength_um >= lo && wavelength_um <= hi {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                axis: self.axis_label.clone(),
                wavelength_um,
                min: lo,
                max: hi,
            })
        }
    }

    /// Sellmeier part only: `(n, dn/dλ)` with λ in um.
    fn sellmeier(&self, lambda: f64) -> (f64, f64) {
        match self.form {
            SellmeierForm::Constant => (self.coefficients[0], 0.0),
            SellmeierForm::SellmeierTwoPole => {
                let [a, b, c, d, e, f] = self.coefficients[..] else {
                    unreachable!("coefficient count checked at construction")
                };
                let l2 = lambda * lambda;
                let l3 = l2 * lambda;
                let p1 = 1.0 - c / l2;
                let p2 = 1.0 - e / l2;
                let n2 = a + b / p1 + d / p2 - f * l2;
                let dn2 = -b * 2.0 * c / (l3 * p1 * p1) - d * 2.0 * e / (l3 * p2 * p2) - 2.0 * f * lambda;
                let n = n2.sqrt();
                (n, dn2 / (2.0 * n))
            }
        }
    }

    /// Thermo-optic correction `(Δn, dΔn/dλ)`.
    fn thermal(&self, lambda: f64, temperature_c: f64) -> (f64, f64) {
        let Some(terms) = &self.temperature_terms else {
            return (0.0, 0.0);
        };
        let dt = temperature_c - REFERENCE_TEMPERATURE_C;
        if dt == 0.0 {
            return (0.0, 0.0);
        }
        let half = terms.len() / 2;
        let poly = |coeffs: &[f64]| {
            let mut value = 0.0;
            let mut deriv = 0.0;
            for (m, a) in coeffs.iter().enumerate() {
                let m = m as i32;
                value += a * lambda.powi(-m);
                deriv += -(m as f64) * a * lambda.powi(-m - 1);
            }
            (value, deriv)
        };
        let (n1, dn1) = poly(&terms[..half]);
        let (n2, dn2) = poly(&terms[half..]);
        (n1 * dt + n2 * dt * dt, dn1 * dt + dn2 * dt * dt)
    }

    /// Refractive index at `wavelength_um`, at the reference temperature.
    pub fn index(&self, wavelength_um: f64) -> Result<f64> {
        self.index_at(wavelength_um, REFERENCE_TEMPERATURE_C)
    }

    pub fn index_at(&self, wavelength_um: f64, temperature_c: f64) -> Result<f64> {
        self.check_range(wavelength_um)?;
        Ok(self.sellmeier(wavelength_um).0 + self.thermal(wavelength_um, temperature_c).0)
    }

    /// `(n, dn/dλ)` with λ in um.
    pub fn index_and_slope(&self, wavelength_um: f64, temperature_c: f64) -> Result<(f64, f64)> {
        self.check_range(wavelength_um)?;
        let (n, dn) = self.sellmeier(wavelength_um);
        let (tn, tdn) = self.thermal(wavelength_um, temperature_c);
        Ok((n + tn, dn + tdn))
    }

    /// Wavenumber `k = n ω / c` in rad/m.
    pub fn wavenumber(&self, omega: f64, temperature_c: f64) -> Result<f64> {
        let n = self.index_at(um_from_omega(omega), temperature_c)?;
        Ok(n * omega / C)
    }

    /// Group index `n - λ dn/dλ`, i.e. `c dk/dω`.
    pub fn group_index(&self, omega: f64, temperature_c: f64) -> Result<f64> {
        let lambda = um_from_omega(omega);
        let (n, dn) = self.index_and_slope(lambda, temperature_c)?;
        Ok(n - lambda * dn)
    }
}

/// Group velocity `dω/dk` (m/s) from the analytic index derivative.
pub fn group_velocity(axis: &RefractiveIndexModel, omega: f64) -> Result<f64> {
    Ok(C / axis.group_index(omega, REFERENCE_TEMPERATURE_C)?)
}

/// A named set of axis models loaded from a coefficient file.
#[derive(Debug, Clone)]
pub struct Material {
    pub name: String,
    axes: BTreeMap<String, RefractiveIndexModel>,
}

impl Material {
    pub fn from_records(records: &[CoefficientRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Format("coefficient file holds no records".into()))?;
        let mut axes = BTreeMap::new();
        for r in records {
            if r.material != first.material {
                return Err(Error::Format(format!(
                    "mixed materials `{}` and `{}` in one coefficient file",
                    first.material, r.material
                )));
            }
            axes.insert(r.axis.clone(), RefractiveIndexModel::from_record(r)?);
        }
        Ok(Self {
            name: first.material.clone(),
            axes,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let records = match serde_json::from_str::<CoefficientFile>(text)? {
            CoefficientFile::Many(v) => v,
            CoefficientFile::One(r) => vec![r],
        };
        Self::from_records(&records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Bundled KTP data: `y` from König & Wong (2004), `z` from Fradkin et
    /// al. (1999), thermo-optic terms from Emanueli & Arie (2003).
    pub fn ktp() -> Self {
        Self::from_json(KTP_JSON).expect("bundled KTP coefficients are valid")
    }

    pub fn axis(&self, label: &str) -> Result<&RefractiveIndexModel> {
        self.axes.get(label).ok_or_else(|| {
            Error::Format(format!("material `{}` has no axis `{label}`", self.name))
        })
    }

    pub fn axes(&self) -> impl Iterator<Item = &RefractiveIndexModel> {
        self.axes.values()
    }

    pub fn bundle(&self, config: &PolarizationConfig) -> Result<DispersionBundle> {
        Ok(DispersionBundle {
            pump: self.axis(&config.pump)?.clone(),
            signal: self.axis(&config.signal)?.clone(),
            idler: self.axis(&config.idler)?.clone(),
            temperature_c: REFERENCE_TEMPERATURE_C,
            grating_offset: 0.0,
        })
    }
}

/// Which crystal axis carries each field in a collinear interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarizationConfig {
    pub pump: String,
    pub signal: String,
    pub idler: String,
}

impl PolarizationConfig {
    /// Type-II ppKTP: pump and signal on y, idler on z.
    pub fn ktp_type_ii() -> Self {
        Self {
            pump: "y".into(),
            signal: "y".into(),
            idler: "z".into(),
        }
    }
}

impl Default for PolarizationConfig {
    fn default() -> Self {
        Self::ktp_type_ii()
    }
}

/// Axis models for pump, signal and idler plus operating temperature.
#[derive(Debug, Clone)]
pub struct DispersionBundle {
    pub pump: RefractiveIndexModel,
    pub signal: RefractiveIndexModel,
    pub idler: RefractiveIndexModel,
    pub temperature_c: f64,
    /// Constant added to every Δk (rad/m), e.g. a grating vector when the
    /// crystal is modelled as an effective uniform medium. Zero for poled
    /// stacks, whose grating is carried by the domain structure.
    pub grating_offset: f64,
}

impl DispersionBundle {
    /// Type-II KTP at the reference temperature.
    pub fn ktp() -> Self {
        Material::ktp()
            .bundle(&PolarizationConfig::ktp_type_ii())
            .expect("bundled KTP has y and z axes")
    }

    pub fn with_temperature(mut self, temperature_c: f64) -> Self {
        self.temperature_c = temperature_c;
        self
    }

    pub fn with_grating_offset(mut self, offset: f64) -> Self {
        self.grating_offset = offset;
        self
    }

    /// Checks that a wavelength (um) is valid on all three axes.
    pub fn check_wavelengths(&self, pump_um: f64, signal_um: f64, idler_um: f64) -> Result<()> {
        self.pump.check_range(pump_um)?;
        self.signal.check_range(signal_um)?;
        self.idler.check_range(idler_um)
    }

    /// Δk at the degenerate point of a pump at `pump_omega`.
    pub fn degenerate_delta_k(&self, pump_omega: f64) -> Result<f64> {
        delta_k(&PhaseMismatchQuery::degenerate(pump_omega)?, self)
    }

    /// First-order QPM period (um) that cancels Δk at degeneracy.
    pub fn qpm_period_um(&self, pump_omega: f64) -> Result<f64> {
        let dk = self.degenerate_delta_k(pump_omega)? - self.grating_offset;
        Ok(2.0 * std::f64::consts::PI / dk.abs() * 1e6)
    }

    /// Partial derivatives `(∂Δk/∂ωs, ∂Δk/∂ωi)` in s/m.
    pub fn delta_k_gradient(&self, query: &PhaseMismatchQuery) -> Result<(f64, f64)> {
        let t = self.temperature_c;
        let kp = self.pump.group_index(query.omega_p(), t)? / C;
        let ks = self.signal.group_index(query.omega_s(), t)? / C;
        let ki = self.idler.group_index(query.omega_i(), t)? / C;
        Ok((kp - ks, kp - ki))
    }
}

/// Signal/idler frequencies of a phase-mismatch evaluation. The pump
/// frequency is always `ωs + ωi` and cannot be set independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMismatchQuery {
    omega_s: f64,
    omega_i: f64,
}

impl PhaseMismatchQuery {
    pub fn new(omega_s: f64, omega_i: f64) -> Result<Self> {
        if !(omega_s > 0.0 && omega_i > 0.0 && omega_s.is_finite() && omega_i.is_finite()) {
            return Err(Error::param("omega", format!("frequencies must be positive, got ({omega_s}, {omega_i})")));
        }
        Ok(Self { omega_s, omega_i })
    }

    pub fn degenerate(pump_omega: f64) -> Result<Self> {
        Self::new(pump_omega / 2.0, pump_omega / 2.0)
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn omega_i(&self) -> f64 {
        self.omega_i
    }

    pub fn omega_p(&self) -> f64 {
        self.omega_s + self.omega_i
    }

    pub fn swapped(&self) -> Self {
        Self {
            omega_s: self.omega_i,
            omega_i: self.omega_s,
        }
    }
}

/// `Δk = k_p(ωs+ωi) − k_s(ωs) − k_i(ωi)` (+ the bundle's grating offset), rad/m.
pub fn delta_k(query: &PhaseMismatchQuery, bundle: &DispersionBundle) -> Result<f64> {
    let t = bundle.temperature_c;
    let kp = bundle.pump.wavenumber(query.omega_p(), t)?;
    let ks = bundle.signal.wavenumber(query.omega_s(), t)?;
    let ki = bundle.idler.wavenumber(query.omega_i(), t)?;
    Ok(kp - ks - ki + bundle.grating_offset)
}

/// Orientation (degrees) of the gradient of Δk in the (ωs, ωi) plane at the
/// degenerate point. Symmetric group-velocity matching gives −45°.
pub fn gvm_angle(bundle: &DispersionBundle, pump_omega: f64) -> Result<f64> {
    let (gs, gi) = bundle.delta_k_gradient(&PhaseMismatchQuery::degenerate(pump_omega)?)?;
    Ok(gi.atan2(gs).to_degrees())
}
