use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pdc_core::analysis::{apply_filters, heralding, heralding_tradeoff, purity_from_jsi, restricted_window_purity, schmidt, write_tradeoff_csv};
use pdc_core::crystal::{amplitude_profile, anneal_apodized, jitter_monte_carlo, DomainStack, JitterSpec};
use pdc_core::fock::{write_curve_csv, Configuration, FockModelParams};
use pdc_core::interference::{dip_center, fitted_dip};
use pdc_core::spectral::{build_jsa, marginal_spectra, JointSpectralAmplitude};
use pdc_core::units::nm_from_omega;
use serde::Serialize;

use crate::config::{Analysis, CrystalSpec, RunConfig};
use crate::manifest::{entry, sha256_hex, Manifest};
use crate::validate::{anneal_target, check, Prepared};
use crate::CliError;

/// Tracks written files so a failed run can remove them.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
    metrics: BTreeMap<String, f64>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output {
            stage: "setup".into(),
            path: dir.display().to_string(),
            source: e,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            metrics: BTreeMap::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn json(&mut self, stage: &str, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Output {
            stage: stage.into(),
            path: path.display().to_string(),
            source: e,
        })
    }

    fn metric(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), v);
    }

    fn cleanup(&self) {
        for f in &self.written {
            let _ = std::fs::remove_file(self.dir.join(f));
        }
        let _ = std::fs::remove_file(self.dir.join("manifest.json"));
    }

    fn finish(self, cfg: &RunConfig, command: &str) -> Result<Manifest, CliError> {
        let io = |path: &Path, e| CliError::Output {
            stage: "manifest".into(),
            path: path.display().to_string(),
            source: e,
        };
        let mut inputs = Vec::new();
        let mut labels: Vec<PathBuf> = cfg.material.iter().cloned().collect();
        if let CrystalSpec::StackFile { path } = &cfg.crystal {
            labels.push(path.clone());
        }
        for l in labels {
            let p = cfg.resolve(&l);
            inputs.push(entry(l.display().to_string(), &p).map_err(|e| io(&p, e))?);
        }
        let mut outputs = Vec::new();
        for f in &self.written {
            let p = self.dir.join(f);
            outputs.push(entry(f.clone(), &p).map_err(|e| io(&p, e))?);
        }
        let manifest = Manifest {
            schema: crate::SCHEMA_VERSION,
            tool: format!("pdcsim {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            config_sha256: sha256_hex(&serde_json::to_vec(cfg).expect("config serializes")),
            rng_seed: cfg.rng_seed,
            inputs,
            outputs,
            metrics: self.metrics,
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        Ok(manifest)
    }
}

fn stage_err(stage: &str) -> impl Fn(pdc_core::Error) -> CliError + '_ {
    move |source| CliError::Compute {
        stage: stage.to_string(),
        source,
    }
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let (diags, prepared) = check(cfg);
    match prepared {
        Some(p) => Ok(p),
        None => Err(CliError::Config(
            diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        )),
    }
}

/// Runs every requested stage and writes the manifest. On failure all
/// files written so far are removed.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, CliError> {
    let prepared = prepare(cfg)?;
    let mut out = Outputs::new(out_dir)?;
    match stages(cfg, &prepared, &mut out, false) {
        Ok(()) => out.finish(cfg, "run"),
        Err(e) => {
            out.cleanup();
            Err(e)
        }
    }
}

/// Crystal stage only: anneal and write the stack file.
pub fn engineer(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, CliError> {
    if !matches!(cfg.crystal, CrystalSpec::Anneal(_)) {
        return Err(CliError::Config("engineer needs an `anneal` crystal spec".into()));
    }
    let prepared = prepare(cfg)?;
    let mut out = Outputs::new(out_dir)?;
    match stages(cfg, &prepared, &mut out, true) {
        Ok(()) => out.finish(cfg, "engineer"),
        Err(e) => {
            out.cleanup();
            Err(e)
        }
    }
}

/// Writes `profile.csv` with the cumulative PMF along the stack at
/// `delta_k` (defaults to the stack's first-order mismatch `-2π/Λ`).
pub fn show_stack(stack_path: &Path, out_dir: &Path, delta_k: Option<f64>, points: Option<usize>) -> Result<PathBuf, CliError> {
    let stack = DomainStack::load(stack_path)
        .map_err(|e| CliError::Config(format!("cannot load {}: {e}", stack_path.display())))?;
    let dk = delta_k.unwrap_or(-2.0 * std::f64::consts::PI / (stack.seed_period_um() * 1e-6));
    let n = points.unwrap_or(stack.len() + 1);
    let profile = amplitude_profile(&stack, dk, n).map_err(stage_err("show-stack"))?;
    let mut out = Outputs::new(out_dir)?;
    let path = out.path("profile.csv");
    let write = || -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["x_mm", "re", "im", "abs"])?;
        for (x, a) in &profile {
            w.serialize((x, a.re, a.im, a.norm()))?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| stage_err("show-stack")(e.into()))?;
    Ok(path)
}

fn log(stage: &str, msg: impl std::fmt::Display) {
    eprintln!("[{stage}] {msg}");
}

fn stages(cfg: &RunConfig, p: &Prepared, out: &mut Outputs, crystal_only: bool) -> Result<(), CliError> {
    let seed = cfg.rng_seed.unwrap_or(0);
    if !crystal_only && cfg.analyses.is_empty() {
        log("run", "no analyses requested");
        return Ok(());
    }

    let stack = {
        let err = stage_err("crystal");
        let stack = match &cfg.crystal {
            CrystalSpec::Periodic { period_um, length_mm } => {
                let period = match period_um {
                    Some(v) => *v,
                    None => p.bundle.qpm_period_um(p.pump.center_omega()).map_err(&err)?,
                };
                DomainStack::periodic(period, *length_mm).map_err(&err)?
            }
            CrystalSpec::StackFile { path } => DomainStack::load(cfg.resolve(path)).map_err(&err)?,
            CrystalSpec::Anneal(req) => {
                let (target, period) = anneal_target(req, &p.bundle, &p.pump).map_err(CliError::Config)?;
                let res = anneal_apodized(&target, period, req.length_mm, &req.schedule, seed).map_err(&err)?;
                out.metric("anneal_fidelity", res.fidelity);
                out.metric("anneal_initial_fidelity", res.initial_fidelity);
                let path = out.path("anneal_trace.csv");
                let write = || -> Result<(), csv::Error> {
                    let mut w = csv::Writer::from_path(&path)?;
                    w.write_record(["sample", "fidelity"])?;
                    for (k, f) in res.trace.iter().enumerate() {
                        w.serialize((k, f))?;
                    }
                    w.flush()?;
                    Ok(())
                };
                write().map_err(|e| err(e.into()))?;
                res.stack
            }
        };
        let path = out.path("stack.json");
        stack.save(&path).map_err(&err)?;
        out.metric("crystal_length_mm", stack.length_mm());
        out.metric("crystal_domains", stack.len() as f64);
        log("crystal", format!("{} domains, {:.3} mm", stack.len(), stack.length_mm()));
        stack
    };
    if crystal_only {
        return Ok(());
    }

    let jsa = if cfg.analyses.iter().any(Analysis::needs_jsa) {
        let err = stage_err("jsa");
        let jsa = build_jsa(&p.grid, &p.pump, &stack, &p.bundle, cfg.grid.pmf).map_err(&err)?;
        let m = marginal_spectra(&jsa).map_err(&err)?;
        let path = out.path("marginals.csv");
        let g = *jsa.grid();
        let write = || -> Result<(), csv::Error> {
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["signal_nm", "signal", "idler_nm", "idler"])?;
            // Degenerate grids are square.
            for j in 0..g.n_s.min(g.n_i) {
                w.serialize((nm_from_omega(g.omega_s(j)), m.signal[j], nm_from_omega(g.omega_i(j)), m.idler[j]))?;
            }
            w.flush()?;
            Ok(())
        };
        write().map_err(|e| err(e.into()))?;
        out.metric("signal_fwhm_nm", m.signal_fwhm_nm);
        out.metric("idler_fwhm_nm", m.idler_fwhm_nm);
        log("jsa", format!("{}x{} grid, marginal FWHM {:.3}/{:.3} nm", g.n_s, g.n_i, m.signal_fwhm_nm, m.idler_fwhm_nm));
        Some(jsa)
    } else {
        None
    };

    for a in &cfg.analyses {
        let name = a.name();
        analysis(a, jsa.as_ref(), &stack, p, cfg, seed, out).map_err(|e| match e {
            Stage::Core(source) => CliError::Compute {
                stage: name.into(),
                source,
            },
            Stage::Cli(e) => e,
        })?;
    }
    Ok(())
}

enum Stage {
    Core(pdc_core::Error),
    Cli(CliError),
}

impl From<pdc_core::Error> for Stage {
    fn from(e: pdc_core::Error) -> Self {
        Stage::Core(e)
    }
}

impl From<csv::Error> for Stage {
    fn from(e: csv::Error) -> Self {
        Stage::Core(e.into())
    }
}

impl From<CliError> for Stage {
    fn from(e: CliError) -> Self {
        Stage::Cli(e)
    }
}

#[derive(Serialize)]
struct PurityReport<'a> {
    purity: f64,
    schmidt_number: f64,
    /// Leading Schmidt coefficients.
    coefficients: &'a [f64],
}

fn analysis(
    a: &Analysis,
    jsa: Option<&JointSpectralAmplitude>,
    stack: &DomainStack,
    p: &Prepared,
    cfg: &RunConfig,
    seed: u64,
    out: &mut Outputs,
) -> Result<(), Stage> {
    let name = a.name();
    let need = || jsa.expect("JSA is built whenever an analysis needs it");
    match a {
        Analysis::Purity => {
            let s = schmidt(need())?;
            let n = s.coefficients.len().min(16);
            out.json(name, "purity.json", &PurityReport {
                purity: s.purity,
                schmidt_number: s.schmidt_number,
                coefficients: &s.coefficients[..n],
            })?;
            out.metric("purity", s.purity);
            log(name, format!("purity {:.4}", s.purity));
        }
        Analysis::JsiPurity => {
            let v = purity_from_jsi(need())?;
            out.json(name, "jsi_purity.json", &BTreeMap::from([("jsi_purity", v)]))?;
            out.metric("jsi_purity", v);
            log(name, format!("purity from |JSA| {v:.4}"));
        }
        Analysis::RestrictedWindow { shrink_factor } => {
            let v = restricted_window_purity(need(), *shrink_factor)?;
            out.json(name, "restricted_window.json", &BTreeMap::from([("shrink_factor", *shrink_factor), ("purity", v)]))?;
            out.metric("restricted_window_purity", v);
            log(name, format!("purity {v:.4} at shrink factor {shrink_factor}"));
        }
        Analysis::Dip { half_range_ps, points, fit } => {
            let jsa = need();
            let c = dip_center(jsa)?;
            let n = *points;
            let delays: Vec<f64> = (0..n)
                .map(|k| c - half_range_ps + 2.0 * half_range_ps * k as f64 / (n - 1) as f64)
                .collect();
            let scan = fitted_dip(jsa, &delays, *fit)?;
            scan.write_csv(out.path("dip.csv"))?;
            out.metric("dip_center_ps", c);
            out.metric("dip_visibility_raw", scan.visibility);
            if let Some(f) = scan.fit {
                out.metric("dip_visibility_fit", f.visibility());
                out.metric("dip_fit_rms_residual", f.rms_residual);
                out.metric("dip_fit_width_ps", f.width_ps);
            }
            log(name, format!("centre {c:.3} ps, raw visibility {:.4}", scan.visibility));
        }
        Analysis::Tradeoff { shape, ratios } => {
            let pts = heralding_tradeoff(need(), *shape, ratios)?;
            write_tradeoff_csv(&pts, out.path("tradeoff.csv"))?;
            log(name, format!("{} filter widths", pts.len()));
        }
        Analysis::Heralding { signal_filter, idler_filter } => {
            let jsa = need();
            let fs = signal_filter.to_filter()?;
            let fi = idler_filter.to_filter()?;
            let filtered = apply_filters(jsa, &fs, &fi);
            let purity = if filtered.degenerate { f64::NAN } else { schmidt(&filtered.jsa)?.purity };
            let report = heralding(jsa, &fs, &fi);
            #[derive(Serialize)]
            struct Report {
                purity: f64,
                transmitted: f64,
                #[serde(flatten)]
                heralding: pdc_core::analysis::HeraldingReport,
            }
            out.json(name, "heralding.json", &Report {
                purity,
                transmitted: filtered.transmitted,
                heralding: report,
            })?;
            out.metric("filtered_purity", purity);
            out.metric("heralding_efficiency", report.eta_symmetric);
            log(name, format!("purity {purity:.4}, η {:.4}", report.eta_symmetric));
        }
        Analysis::JitterMc { fwhm_um, trials, model } => {
            let spec = JitterSpec::new(*fwhm_um, *trials, seed)?.with_model(*model);
            let summary = jitter_monte_carlo(stack, &spec, |s| {
                let jsa = build_jsa(&p.grid, &p.pump, s, &p.bundle, cfg.grid.pmf)?;
                Ok(schmidt(&jsa)?.purity)
            })?;
            let path = out.path("jitter.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["trial", "purity"])?;
            for (k, v) in summary.samples.iter().enumerate() {
                w.serialize((k, v))?;
            }
            w.flush().map_err(csv::Error::from)?;
            out.metric("jitter_mean_purity", summary.mean);
            out.metric("jitter_std_purity", summary.std);
            log(name, format!("{trials} trials, purity {:.4} ± {:.4}", summary.mean, summary.std));
        }
        Analysis::FockCurve {
            truncation_order,
            tau_constant,
            powers_mw,
        } => {
            let mut params = FockModelParams::new(0.0, *truncation_order, Configuration::SignalIdler)?;
            params.tau_constant = *tau_constant;
            params.power_grid = powers_mw.clone();
            write_curve_csv(&params, out.path("fock_curve.csv"))?;
            log(name, format!("{} powers, N = {truncation_order}", powers_mw.len()));
        }
    }
    Ok(())
}
