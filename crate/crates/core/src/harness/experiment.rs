//! Monte-Carlo sweeps over measurements, SNR or path count.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RecoveryConfig, ScenarioConfig, SoundingConfig};
use crate::error::{Error, Result};
use crate::harness::denoiser::Denoiser;
use crate::harness::metrics::{nmse_ratio, ratio_to_db};
use crate::harness::pipeline::{run_trial, EstimationSetup};
use crate::recovery::final_channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    Measurements,
    SnrDb,
    Paths,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            SweepVariable::Measurements => "measurements",
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::Paths => "paths",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Estimator {
    #[default]
    #[serde(rename = "somp")]
    Somp,
    #[serde(rename = "somp+dncnn")]
    SompDncnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub estimator: Estimator,
}

fn default_trials() -> usize {
    100
}

/// Top-level TOML experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub sounding: SoundingConfig,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn from_setup(setup: EstimationSetup, sweep: Option<SweepConfig>) -> Self {
        Self {
            scenario: setup.scenario,
            sounding: setup.sounding,
            recovery: setup.recovery,
            sweep,
        }
    }

    pub fn setup(&self) -> EstimationSetup {
        EstimationSetup {
            scenario: self.scenario.clone(),
            sounding: self.sounding.clone(),
            recovery: self.recovery.clone(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// `10 log10` of the trial-averaged NMSE ratio.
    pub mean_nmse_db: Option<f64>,
    /// Standard deviation of the per-trial NMSE in dB.
    pub std_db: Option<f64>,
    pub trials: usize,
    pub enhanced_nmse_db: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub variable: SweepVariable,
    pub estimator: Estimator,
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
}

fn integral(value: f64, what: &str) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value < 1e9 {
        Ok(value as usize)
    } else {
        Err(Error::Config(format!(
            "{what} must be a positive integer, got {value}"
        )))
    }
}

fn point_setup(
    base: &EstimationSetup,
    variable: SweepVariable,
    value: f64,
) -> Result<EstimationSetup> {
    let mut s = base.clone();
    match variable {
        SweepVariable::Measurements => s.sounding.measurements = integral(value, "measurements")?,
        SweepVariable::SnrDb => s.sounding.snr_db = value,
        SweepVariable::Paths => s.scenario.paths = integral(value, "paths")?,
    }
    Ok(s)
}

fn infeasible(setup: &EstimationSetup) -> Option<String> {
    let n = setup.scenario.irs_elements();
    let m = setup.sounding.measurements;
    if m > n {
        return Some(format!("M = {m} exceeds the {n} IRS elements"));
    }
    setup.sounding.slots().err().map(|e| e.to_string())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every sweep point; trials run concurrently and are reduced in trial order.
pub fn run_sweep(
    config: &ExperimentConfig,
    denoiser: Option<&dyn Denoiser>,
) -> Result<SweepResults> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("experiment has no [sweep] section".into()))?;
    if sweep.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if sweep.values.is_empty() || sweep.values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "sweep values must be non-empty and strictly increasing".into(),
        ));
    }
    if sweep.estimator == Estimator::SompDncnn && denoiser.is_none() {
        return Err(Error::Denoiser(
            "somp+dncnn requested but no denoiser configured".into(),
        ));
    }
    let base = config.setup();
    base.scenario.validate()?;
    let master = base.scenario.seed;

    let mut rows = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let setup = point_setup(&base, sweep.variable, value)?;
        if let Some(reason) = infeasible(&setup) {
            rows.push(SweepRow {
                value,
                mean_nmse_db: None,
                std_db: None,
                trials: 0,
                enhanced_nmse_db: None,
                skipped: Some(reason),
            });
            continue;
        }
        setup.validate()?;
        let dict = setup.dictionary()?;
        let outputs = (0..sweep.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(&setup, &dict, master, t))
            .collect::<Result<Vec<_>>>()?;

        let ratios: Vec<f64> = outputs
            .iter()
            .map(|o| nmse_ratio(&o.truth, &o.reconstructed))
            .collect::<Result<_>>()?;
        let per_trial_db: Vec<f64> = outputs.iter().map(|o| o.nmse_db).collect();
        let (mean_ratio, _) = mean_std(&ratios);
        let (_, std_db) = mean_std(&per_trial_db);

        let enhanced_nmse_db = match (sweep.estimator, denoiser) {
            (Estimator::SompDncnn, Some(d)) => {
                let noisy: Vec<_> = outputs.iter().map(|o| o.noisy_grid()).collect();
                let enhanced = d.denoise(&noisy)?;
                if enhanced.len() != outputs.len() {
                    return Err(Error::Denoiser(format!(
                        "expected {} enhanced grids, got {}",
                        outputs.len(),
                        enhanced.len()
                    )));
                }
                let ratios = outputs
                    .iter()
                    .zip(&enhanced)
                    .map(|(o, g)| nmse_ratio(&o.truth, &final_channel(g, &dict)?))
                    .collect::<Result<Vec<_>>>()?;
                Some(ratio_to_db(mean_std(&ratios).0))
            }
            _ => None,
        };

        rows.push(SweepRow {
            value,
            mean_nmse_db: Some(ratio_to_db(mean_ratio)),
            std_db: Some(std_db),
            trials: sweep.trials,
            enhanced_nmse_db,
            skipped: None,
        });
    }
    Ok(SweepResults {
        variable: sweep.variable,
        estimator: sweep.estimator,
        master_seed: master,
        rows,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

impl SweepResults {
    /// Human-readable aligned table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>12}  {:>14}  {:>8}  {:>6}  {:>14}  note",
            self.variable.label(),
            "nmse_db",
            "std_db",
            "trials",
            "enhanced_db"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>12}  {:>14}  {:>8}  {:>6}  {:>14}  {}",
                r.value,
                fmt_opt(r.mean_nmse_db),
                fmt_opt(r.std_db),
                r.trials,
                fmt_opt(r.enhanced_nmse_db),
                r.skipped.as_deref().unwrap_or("")
            );
        }
        out
    }

    /// Whitespace-separated columns for plotting; skipped points are omitted.
    pub fn to_columns(&self) -> String {
        let mut out = format!(
            "# {} mean_nmse_db std_db trials enhanced_nmse_db\n",
            self.variable.label()
        );
        for r in self.rows.iter().filter(|r| r.skipped.is_none()) {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                r.value,
                r.mean_nmse_db.unwrap_or(f64::NAN),
                r.std_db.unwrap_or(f64::NAN),
                r.trials,
                r.enhanced_nmse_db.unwrap_or(f64::NAN)
            );
        }
        out
    }

    /// Writes `sweep.json`, `sweep.txt` and `sweep.dat` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format("results", e.to_string()))?;
        for (name, text) in [
            ("sweep.json", json),
            ("sweep.txt", self.to_table()),
            ("sweep.dat", self.to_columns()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format("results", e.to_string()))
    }
}
