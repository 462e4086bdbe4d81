//! Command-line front end for the estimation workbench.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use irs_chanest::channel::FrequencyChannel;
use irs_chanest::harness::container::write_sidecar;
use irs_chanest::harness::experiment::SweepConfig;
use irs_chanest::harness::{
    export_dataset, nmse_db, read_tensor, run_sweep, run_trial, write_tensor, Denoiser,
    EstimationSetup, Estimator, ExperimentConfig, ExternalDenoiser, SweepResults, SweepVariable,
    Tensor,
};
use irs_chanest::linalg::{CMat, CVec};
use irs_chanest::recovery::reconstruct_spatial;
use irs_chanest::sounding::MeasurementSet;
use irs_chanest::{Error, Result};

#[derive(Parser)]
#[command(
    name = "irs-chanest",
    version,
    about = "Compressive UE-IRS channel estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
    PaperLarge,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Somp,
    #[value(name = "somp+dncnn")]
    SompDncnn,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariableArg {
    Measurements,
    SnrDb,
    Paths,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta: Option<usize>,
    #[arg(long)]
    measurements: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Args)]
struct DenoiserArgs {
    /// Denoiser program and leading arguments, whitespace separated.
    #[arg(long)]
    denoiser_cmd: Option<String>,
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one channel realization.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Sound a stored channel and write `y.ctns`, `phi.ctns` and `meta.json`.
    Sound {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run SOMP on stored measurements, or on a fresh seeded trial.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Directory written by `sound`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Channel file for NMSE when `--input` is given.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        denoiser: DenoiserArgs,
        #[arg(long, value_enum)]
        sweep: Option<VariableArg>,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write noisy/clean angular-delay training pairs.
    ExportDataset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 256)]
        chunk: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare SOMP with SOMP followed by the external denoiser.
    DenoiseEval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        denoiser: DenoiserArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a table from a stored `sweep.json`.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let setup = match common.preset {
                Preset::Desk => EstimationSetup::desk(),
                Preset::Paper => EstimationSetup::paper(),
                Preset::PaperLarge => EstimationSetup::paper_large(),
            };
            ExperimentConfig::from_setup(setup, None)
        }
    };
    if let Some(seed) = common.seed {
        config.scenario.seed = seed;
    }
    if let Some(beta) = common.beta {
        config.recovery.beta = beta;
    }
    if let Some(m) = common.measurements {
        config.sounding.measurements = m;
    }
    if let Some(snr) = common.snr_db {
        config.sounding.snr_db = snr;
    }
    if let Some(l) = common.paths {
        config.scenario.paths = l;
    }
    Ok(config)
}

fn external_denoiser(args: &DenoiserArgs, scratch: &Path) -> Result<ExternalDenoiser> {
    let (Some(cmd), Some(weights)) = (&args.denoiser_cmd, &args.weights) else {
        return Err(Error::Config(
            "--denoiser-cmd and --weights are both required".into(),
        ));
    };
    let command = cmd.split_whitespace().map(String::from).collect();
    ExternalDenoiser::new(command, weights.clone(), scratch.to_path_buf())
}

/// `[K, rows, cols]` with row-major subchannels.
fn channel_to_tensor(h: &FrequencyChannel) -> Tensor {
    let (rows, cols) = h.dims();
    let mut data = Vec::with_capacity(h.subcarriers() * rows * cols);
    for hk in &h.subchannels {
        for r in 0..rows {
            data.extend(hk.row(r).iter().copied());
        }
    }
    Tensor {
        shape: vec![h.subcarriers(), rows, cols],
        data,
    }
}

fn tensor_to_channel(t: &Tensor) -> Result<FrequencyChannel> {
    let [k, rows, cols] = t.shape[..] else {
        return Err(Error::format(
            "shape",
            format!("expected [K, rows, cols], got {:?}", t.shape),
        ));
    };
    Ok(FrequencyChannel {
        subchannels: (0..k)
            .map(|s| {
                CMat::from_row_slice(rows, cols, &t.data[s * rows * cols..(s + 1) * rows * cols])
            })
            .collect(),
    })
}

fn matrix_to_tensor(m: &CMat) -> Tensor {
    let data = (0..m.nrows())
        .flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>())
        .collect();
    Tensor {
        shape: vec![m.nrows(), m.ncols()],
        data,
    }
}

fn tensor_to_matrix(t: &Tensor) -> Result<CMat> {
    let [rows, cols] = t.shape[..] else {
        return Err(Error::format(
            "shape",
            format!("expected a matrix, got {:?}", t.shape),
        ));
    };
    Ok(CMat::from_row_slice(rows, cols, &t.data))
}

#[derive(Serialize, Deserialize)]
struct SoundMeta {
    noise_var: f64,
    snr_db: f64,
    trial: u64,
    seed: u64,
}

#[derive(Serialize)]
struct EstimateReport {
    support: Vec<usize>,
    grid_shape: (usize, usize),
    residual_norms: Vec<f64>,
    rank_deficient: bool,
    nmse_db: Option<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format("json", e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            common,
            trial,
            output,
        } => {
            let config = resolve(&common)?;
            let setup = config.setup();
            setup.scenario.validate()?;
            let (paths, h) = setup.channel(config.scenario.seed, trial);
            write_sidecar(&output, &paths)?;
            write_tensor(&output, &channel_to_tensor(&h))?;
            println!(
                "wrote {} subcarriers of {}×{} to {}",
                h.subcarriers(),
                h.dims().0,
                h.dims().1,
                output.display()
            );
        }
        Command::Sound {
            common,
            trial,
            input,
            output,
        } => {
            let config = resolve(&common)?;
            let setup = config.setup();
            setup.validate()?;
            let h = tensor_to_channel(&read_tensor(&input)?)?;
            let meas = setup.measure(&h, config.scenario.seed, trial)?;
            std::fs::create_dir_all(&output).map_err(|e| Error::io(&output, e))?;
            write_tensor(&output.join("y.ctns"), &matrix_to_tensor(&meas.stacked()))?;
            write_tensor(&output.join("phi.ctns"), &matrix_to_tensor(&meas.phi))?;
            write_json(
                &output.join("meta.json"),
                &SoundMeta {
                    noise_var: meas.noise_var,
                    snr_db: meas.snr_db,
                    trial,
                    seed: config.scenario.seed,
                },
            )?;
            println!(
                "wrote {} measurements × {} subcarriers to {}",
                meas.measurements(),
                meas.observations.len(),
                output.display()
            );
        }
        Command::Estimate {
            common,
            trial,
            input,
            truth,
            output,
        } => {
            let config = resolve(&common)?;
            let setup = config.setup();
            setup.validate()?;
            let dict = setup.dictionary()?;
            let (estimate, nmse) = match input {
                Some(dir) => {
                    let y = tensor_to_matrix(&read_tensor(&dir.join("y.ctns"))?)?;
                    let phi = tensor_to_matrix(&read_tensor(&dir.join("phi.ctns"))?)?;
                    let meta_path = dir.join("meta.json");
                    let text = std::fs::read_to_string(&meta_path)
                        .map_err(|e| Error::io(&meta_path, e))?;
                    let meta: SoundMeta = serde_json::from_str(&text)
                        .map_err(|e| Error::format("meta", e.to_string()))?;
                    let meas = MeasurementSet {
                        observations: (0..y.ncols()).map(|k| CVec::from(y.column(k))).collect(),
                        phi,
                        noise_var: meta.noise_var,
                        snr_db: meta.snr_db,
                    };
                    let est = setup.estimate(&meas, &dict)?;
                    let nmse = match truth {
                        Some(p) => {
                            let h = tensor_to_channel(&read_tensor(&p)?)?;
                            Some(nmse_db(&h, &reconstruct_spatial(&est, &dict)?)?)
                        }
                        None => None,
                    };
                    (est, nmse)
                }
                None => {
                    let out = run_trial(&setup, &dict, config.scenario.seed, trial)?;
                    let nmse = out.nmse_db;
                    (out.estimate, Some(nmse))
                }
            };
            println!(
                "support ({} atoms): {:?}",
                estimate.support.len(),
                estimate.support
            );
            if let Some(n) = nmse {
                println!("nmse_db: {n:.3}");
            }
            if let Some(path) = output {
                write_json(
                    &path,
                    &EstimateReport {
                        support: estimate.support.clone(),
                        grid_shape: estimate.grid_shape,
                        residual_norms: estimate.residual_norms.clone(),
                        rank_deficient: estimate.rank_deficient,
                        nmse_db: nmse,
                    },
                )?;
            }
        }
        Command::Sweep {
            common,
            denoiser,
            sweep,
            values,
            trials,
            estimator,
            output,
        } => {
            let mut config = resolve(&common)?;
            if let Some(var) = sweep {
                let variable = match var {
                    VariableArg::Measurements => SweepVariable::Measurements,
                    VariableArg::SnrDb => SweepVariable::SnrDb,
                    VariableArg::Paths => SweepVariable::Paths,
                };
                config.sweep = Some(SweepConfig {
                    variable,
                    values: values.clone(),
                    trials: 100,
                    estimator: Estimator::Somp,
                });
            }
            let s = config.sweep.as_mut().ok_or_else(|| {
                Error::Config("pass --sweep or a config with a [sweep] section".into())
            })?;
            if !values.is_empty() {
                s.values = values;
            }
            if let Some(t) = trials {
                s.trials = t;
            }
            if let Some(e) = estimator {
                s.estimator = match e {
                    EstimatorArg::Somp => Estimator::Somp,
                    EstimatorArg::SompDncnn => Estimator::SompDncnn,
                };
            }
            let scratch = output.clone().unwrap_or_else(std::env::temp_dir);
            let ext = match s.estimator {
                Estimator::SompDncnn => Some(external_denoiser(&denoiser, &scratch)?),
                Estimator::Somp => None,
            };
            let results = run_sweep(&config, ext.as_ref().map(|d| d as &dyn Denoiser))?;
            print!("{}", results.to_table());
            if let Some(dir) = output {
                results.write(&dir)?;
            }
        }
        Command::ExportDataset {
            common,
            count,
            chunk,
            output,
        } => {
            let config = resolve(&common)?;
            let manifest =
                export_dataset(&config.setup(), count, chunk, config.scenario.seed, &output)?;
            println!(
                "exported {} pairs of {}×{} in {} chunks to {}",
                manifest.count,
                manifest.rows,
                manifest.delays,
                manifest.chunks.len(),
                output.display()
            );
        }
        Command::DenoiseEval {
            common,
            denoiser,
            trials,
            output,
        } => {
            let mut config = resolve(&common)?;
            config.sweep = Some(SweepConfig {
                variable: SweepVariable::SnrDb,
                values: vec![config.sounding.snr_db],
                trials,
                estimator: Estimator::SompDncnn,
            });
            let scratch = output.clone().unwrap_or_else(std::env::temp_dir);
            let ext = external_denoiser(&denoiser, &scratch)?;
            let results = run_sweep(&config, Some(&ext))?;
            print!("{}", results.to_table());
            if let Some(dir) = output {
                results.write(&dir)?;
            }
        }
        Command::Report { input } => {
            let path = if input.is_dir() {
                input.join("sweep.json")
            } else {
                input
            };
            print!("{}", SweepResults::load(&path)?.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
