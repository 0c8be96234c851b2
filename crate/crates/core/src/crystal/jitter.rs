//! Fabrication tolerance: random domain-width errors and their effect on a
//! downstream figure of merit.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Domain, DomainStack};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Perturbed widths are never allowed below this (um).
pub const JITTER_MIN_WIDTH_UM: f64 = 0.1;

const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5; // 1 / (2√(2 ln 2))

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterModel {
    /// Each inverted domain changes width about its fixed centre; its
    /// neighbours absorb the difference, so wall positions stay local and
    /// the crystal length is preserved.
    #[default]
    DutyCycle,
    /// Every domain width is perturbed independently and the walls after it
    /// move along; errors accumulate down the crystal.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterSpec {
    pub fwhm_um: f64,
    pub trials: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub model: JitterModel,
}

impl JitterSpec {
    pub fn new(fwhm_um: f64, trials: usize, rng_seed: u64) -> Result<Self> {
        let spec = Self {
            fwhm_um,
            trials,
            rng_seed,
            model: JitterModel::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_model(mut self, model: JitterModel) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_um >= 0.0 && self.fwhm_um.is_finite()) {
            return Err(Error::param("fwhm_um", format!("must be >= 0, got {}", self.fwhm_um)));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JitterSummary {
    pub mean: f64,
    /// Sample standard deviation (0 for a single trial).
    pub std: f64,
    pub samples: Vec<f64>,
}

impl JitterSummary {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 {
            (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std, samples }
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.samples.len() as f64).sqrt()
    }
}

/// One perturbed copy of `stack`. A zero FWHM returns the stack unchanged.
pub fn jitter_stack(stack: &DomainStack, fwhm_um: f64, model: JitterModel, rng: &mut StreamRng) -> Result<DomainStack> {
    if fwhm_um == 0.0 {
        return Ok(stack.clone());
    }
    let normal = Normal::new(0.0, fwhm_um * FWHM_TO_SIGMA)
        .map_err(|e| Error::param("fwhm_um", e.to_string()))?;
    match model {
        JitterModel::Cumulative => {
            let domains = stack
                .domains()
                .iter()
                .map(|d| Domain::new(d.sign, (d.width_um + normal.sample(rng)).max(JITTER_MIN_WIDTH_UM)))
                .collect();
            stack.with_domains(domains)
        }
        JitterModel::DutyCycle => duty_cycle(stack, &normal, rng),
    }
}

fn duty_cycle(stack: &DomainStack, normal: &Normal<f64>, rng: &mut StreamRng) -> Result<DomainStack> {
    let merged = stack.merged();
    let doms = merged.domains();
    let n = doms.len();
    let length = merged.length_um();
    let mut walls = Vec::with_capacity(n + 1);
    walls.push(0.0);
    let mut x = 0.0;
    for d in doms {
        x += d.width_um;
        walls.push(x);
    }
    walls[n] = length;

    for (j, d) in doms.iter().enumerate() {
        if d.sign != -1 {
            continue;
        }
        let change = normal.sample(rng);
        match (j == 0, j == n - 1) {
            (true, true) => {}
            (true, false) => walls[1] += change,
            (false, true) => walls[n - 1] -= change,
            (false, false) => {
                walls[j] -= change / 2.0;
                walls[j + 1] += change / 2.0;
            }
        }
    }
    // Restore ordering with the minimum width; only bites for extreme draws.
    for b in 1..n {
        walls[b] = walls[b].max(walls[b - 1] + JITTER_MIN_WIDTH_UM);
    }
    for b in (1..n).rev() {
        walls[b] = walls[b].min(walls[b + 1] - JITTER_MIN_WIDTH_UM);
    }

    let mut domains = Vec::with_capacity(n);
    let mut acc = 0.0;
    for j in 0..n - 1 {
        let w = walls[j + 1] - walls[j];
        domains.push(Domain::new(doms[j].sign, w));
        acc += w;
    }
    domains.push(Domain::new(doms[n - 1].sign, length - acc));
    DomainStack::new(domains, stack.seed_period_um())
}

/// Runs `spec.trials` independent perturbations through `evaluate`.
///
/// Trial `t` draws from stream `t` of `spec.rng_seed`, so results do not
/// depend on thread count or scheduling.
pub fn jitter_monte_carlo<F>(stack: &DomainStack, spec: &JitterSpec, evaluate: F) -> Result<JitterSummary>
where
    F: Fn(&DomainStack) -> Result<f64> + Sync,
{
    spec.validate()?;
    let samples = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(spec.rng_seed, t as u64);
            let trial = jitter_stack(stack, spec.fwhm_um, spec.model, &mut rng)?;
            evaluate(&trial)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(JitterSummary::from_samples(samples))
}
