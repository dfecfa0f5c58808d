use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use rephase::fit::{
    fit_atom_number, fit_exponential_decay, read_series, FitRecord, RevivalDetector,
};
use rephase::ramsey::{contrast_scans, fringe_scan};
use rephase::rates::thermal_velocity;
use rephase::two_class::{
    evolve_two_class, two_class_rephasing_time, two_class_revival_estimate, TwoClassState,
};
use rephase::units::{hz, to_hz};
use rephase::{ContrastCurve, EnergyGrid, Error, KineticModel, RateSet, SpinField};

use crate::config::{config_error, RateSource, Resolved, RunConfig};
use crate::manifest::RunManifest;

pub struct Run {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Run {
    fn grid(&self) -> Result<EnergyGrid> {
        self.config
            .grid
            .build()
            .map_err(|e| config_error(format!("grid: {e}")))
    }

    fn model(&self, grid: &EnergyGrid, rates: &RateSet) -> Result<KineticModel> {
        KineticModel::new(grid, rates, &self.config.kernel).map_err(|e| match e {
            Error::KernelGrid(_) | Error::LengthMismatch { .. } => {
                config_error(format!("kernel: {e}"))
            }
            other => other.into(),
        })
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<String> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(name.to_string())
    }

    fn write_manifest(
        &self,
        command: &str,
        resolved: &[Resolved],
        grid: &EnergyGrid,
        outputs: Vec<String>,
        start: Instant,
    ) -> Result<()> {
        let m = RunManifest::new(
            command,
            &self.config,
            resolved,
            grid,
            outputs,
            start.elapsed(),
        );
        self.write(&format!("{command}.manifest.json"), to_json(&m)?)?;
        Ok(())
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn derive(cfg: &RunConfig) -> Result<String> {
    let r = cfg.resolve(None)?;
    let mut report = json!({
        "rates_rad_per_s": r.rates,
        "rates_hz": {
            "delta0": to_hz(r.rates.delta0),
            "omega_ex": to_hz(r.rates.omega_ex),
            "omega_ex_effective": to_hz(r.rates.effective_exchange()),
            "detuning": to_hz(r.rates.detuning),
        },
        "gamma_c": r.rates.gamma_c,
        "nbar": r.nbar,
        "regime": r.regime,
    });
    if let RateSource::Atomic { atomic, .. } = &cfg.rates {
        report["thermal_velocity"] = json!(thermal_velocity(atomic));
    }
    to_json(&report)
}

pub fn simulate(run: &Run) -> Result<()> {
    let start = Instant::now();
    let r = run.config.resolve(None)?;
    let grid = run.grid()?;
    let model = run.model(&grid, &r.rates)?;
    let t = &run.config.times;
    let traj = model.evolve(
        &SpinField::coherent(grid.len()),
        t.t_final,
        t.dt,
        t.sample_every,
    )?;
    let csv = run.write("simulate.csv", traj.curve.to_csv_string())?;
    run.write_manifest("simulate", &[r], &grid, vec![csv], start)
}

pub fn two_class(run: &Run) -> Result<()> {
    let start = Instant::now();
    let r = run.config.resolve(None)?;
    let (state, rates) = match &run.config.two_class {
        Some(tc) => {
            let rates = RateSet::new(0.0, hz(tc.omega_ex_hz), tc.gamma_x)
                .map_err(|e| config_error(format!("two_class: {e}")))?
                .with_renorm(run.config.exchange_renorm);
            (
                TwoClassState::coherent(
                    hz(tc.delta_split_hz),
                    rates.effective_exchange(),
                    tc.gamma_x,
                ),
                rates,
            )
        }
        None => (
            TwoClassState::coherent(
                r.rates.delta0,
                r.rates.effective_exchange(),
                r.rates.gamma_c,
            ),
            r.rates,
        ),
    };
    let t = &run.config.times;
    let curve = evolve_two_class(&state, t.t_final, t.dt)?;
    let csv = run.write("two_class.csv", curve.to_csv_string())?;
    let estimates = json!({
        "delta_split": state.delta_split,
        "omega_ex": state.omega_ex,
        "gamma_x": state.gamma_x,
        "revival_estimate_s": two_class_revival_estimate(&rates).ok(),
        "rephasing_time_s": two_class_rephasing_time(&rates).ok(),
        "detected_revival_s": RevivalDetector::default().detect(&curve).ok().map(|v| v.time),
    });
    let est = run.write("two_class.json", to_json(&estimates)?)?;
    let grid = run.grid()?;
    run.write_manifest("two_class", &[r], &grid, vec![csv, est], start)
}

#[derive(Debug, Serialize)]
struct DensitySummary {
    nbar: f64,
    file: String,
    omega_ex_effective_hz: f64,
    gamma_c: f64,
    revival_time_s: Option<f64>,
    revival_contrast: Option<f64>,
    note: Option<String>,
    exchange_period_s: Option<f64>,
    empirical_revival_s: Option<f64>,
    contrast_at: Vec<(f64, f64)>,
}

fn density_file(nbar: f64) -> String {
    format!("fig3_nbar_{nbar}.csv")
}

pub fn fig3(run: &Run) -> Result<()> {
    let start = Instant::now();
    let cfg = &run.config;
    let densities = cfg.densities()?;
    let trs = cfg.times.ramsey_times()?;
    let grid = run.grid()?;
    let seq = cfg.sequence.ramsey();
    let resolved = densities
        .iter()
        .map(|&n| cfg.resolve(Some(n)))
        .collect::<Result<Vec<_>>>()?;

    let results = resolved
        .par_iter()
        .map(|r| -> Result<(DensitySummary, String)> {
            let nbar = r.nbar.unwrap_or_default();
            let (curve, _) = contrast_scans(&grid, &r.rates, &cfg.kernel, &trs, &seq)?;
            let name = run.write(&density_file(nbar), curve.to_csv_string())?;
            let (revival_time_s, revival_contrast, note) =
                match RevivalDetector::default().detect(&curve) {
                    Ok(v) => (Some(v.time), Some(v.contrast), None),
                    Err(Error::NoRevival) => (None, None, Some("no revival".to_string())),
                    Err(e) => return Err(e.into()),
                };
            let w = r.rates.effective_exchange();
            let summary = DensitySummary {
                nbar,
                file: name.clone(),
                omega_ex_effective_hz: to_hz(w),
                gamma_c: r.rates.gamma_c,
                revival_time_s,
                revival_contrast,
                note,
                exchange_period_s: (w > 0.0).then(|| 2.0 * std::f64::consts::PI / w),
                empirical_revival_s: (nbar > 0.0).then(|| -0.02 + 0.3 / nbar),
                contrast_at: [0.1, 0.2, 0.3]
                    .iter()
                    .filter_map(|&t| curve_at(&curve, t).map(|c| (t, c)))
                    .collect(),
            };
            Ok((summary, name))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outputs: Vec<String> = results.iter().map(|(_, n)| n.clone()).collect();
    let mut summary = json!({ "densities": results.iter().map(|(s, _)| s).collect::<Vec<_>>() });

    if let Some(cf) = &cfg.counterfactuals {
        let base = cfg.resolve(Some(cf.nbar))?;
        let mut no_exchange = base.rates;
        no_exchange.omega_ex = 0.0;
        let mut no_collisions = base.rates;
        no_collisions.gamma_c = 0.0;
        let mut entries = Vec::new();
        for (label, rates) in [
            ("no_exchange", no_exchange),
            ("no_collisions", no_collisions),
        ] {
            let model = run.model(&grid, &rates)?;
            let curve = model
                .evolve(
                    &SpinField::coherent(grid.len()),
                    cf.t_final,
                    cfg.times.dt,
                    cfg.times.sample_every,
                )?
                .curve;
            let name = run.write(&format!("fig3_{label}.csv"), curve.to_csv_string())?;
            entries.push(json!({
                "case": label,
                "nbar": cf.nbar,
                "file": name,
                "revival_time_s": RevivalDetector::default().detect(&curve).ok().map(|v| v.time),
                "mean_contrast_0.5_1s": curve.mean_contrast(0.5, 1.0),
                "mean_contrast_1_2s": curve.mean_contrast(1.0, 2.0),
            }));
            outputs.push(name);
        }
        summary["counterfactuals"] = json!(entries);
    }

    outputs.push(run.write("fig3_summary.json", to_json(&summary)?)?);
    run.write_manifest("fig3", &resolved, &grid, outputs, start)
}

fn curve_at(curve: &ContrastCurve, t: f64) -> Option<f64> {
    let times = curve.times();
    let i = times.iter().position(|&x| (x - t).abs() < 1e-9)?;
    Some(curve.contrast()[i])
}

pub fn ramsey_scan(run: &Run) -> Result<()> {
    let start = Instant::now();
    let r = run.config.resolve(None)?;
    let grid = run.grid()?;
    let scan = fringe_scan(
        &grid,
        &r.rates,
        &run.config.kernel,
        &run.config.sequence.ramsey(),
    )?;
    let mut csv = String::from("detuning,detuning_hz,probability\n");
    for (d, p) in scan.detunings.iter().zip(&scan.probabilities) {
        writeln!(csv, "{d:.16e},{:.16e},{p:.16e}", to_hz(*d))?;
    }
    let data = run.write("ramsey_scan.csv", csv)?;
    let rec = FitRecord::from(rephase::fit::FringeFit {
        contrast: scan.fitted_contrast,
        phase: scan.fitted_phase,
        residual_rms: scan.residual_rms,
    });
    let fit = run.write("ramsey_scan.json", to_json(&rec)?)?;
    run.write_manifest("ramsey_scan", &[r], &grid, vec![data, fit], start)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitKind {
    #[value(name = "exp_decay", alias = "exp-decay")]
    ExpDecay,
    #[value(name = "atom_number", alias = "atom-number")]
    AtomNumber,
    Revival,
}

pub fn fit(kind: FitKind, input: &Path, min_rise: f64) -> Result<String> {
    let file = fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let (x, y) = read_series(file)?;
    let rec: FitRecord = match kind {
        FitKind::ExpDecay => fit_exponential_decay(&x, &y)?.into(),
        FitKind::AtomNumber => fit_atom_number(&x, &y)?.into(),
        FitKind::Revival => {
            let curve = ContrastCurve::from_contrast(&x, &y)?;
            let v = RevivalDetector { min_rise }.detect(&curve)?;
            let mut p = serde_json::Map::new();
            p.insert("time".into(), v.time.into());
            p.insert("contrast".into(), v.contrast.into());
            p.insert("minimum_time".into(), v.minimum_time.into());
            p.insert("minimum_contrast".into(), v.minimum_contrast.into());
            FitRecord {
                model: "revival".into(),
                parameters: p,
                residual_rms: 0.0,
            }
        }
    };
    to_json(&rec)
}
