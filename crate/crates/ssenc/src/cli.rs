//! The `ssenc` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssenc_core::data::{fit_normalizers, generate, Excitation};
use ssenc_core::metrics::{nstep_nrms, simulation_report};
use ssenc_core::optim::{train, Precision};
use ssenc_core::{Dataset, ModelDims, Real, SimInit, SsEncoderModel};

use crate::config::{parse_override, RunConfig};
use crate::csvio::{load_csv, load_csv_auto, load_inputs, save_csv, write_table};
use crate::error::{Error, Result};
use crate::modelfile::{load_model, save_model, AnyModel, InitMeta};
use crate::parallel::{Parallel, WallClock};
use crate::report::{format_metrics, render};
use crate::spectrum::error_spectrum;
use crate::system::{load_system, sample_period};
use crate::trainlog::write_log;

#[derive(Debug, Parser)]
#[command(name = "ssenc", version, about = "Encoder-initialized state-space model identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a TOML run configuration.
    Train(TrainArgs),
    /// Free-run a model on a dataset and report RMS and NRMS.
    Evaluate(EvaluateArgs),
    /// Free-run a model and write its predictions as CSV.
    Simulate(SimulateArgs),
    /// Write the n-step-ahead NRMS curve as CSV.
    Nstep(NstepArgs),
    /// Write DFT magnitudes of the simulation error and of the data.
    Spectrum(SpectrumArgs),
    /// Generate a dataset from a synthetic system description.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set max_epochs=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads for section evaluation (overrides `workers`).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Encoder state at t0 = max(n_a, n_b).
    Encoder,
    /// Zero state at t = 0.
    Zero,
}

impl InitArg {
    fn sim_init<S>(self) -> SimInit<S> {
        match self {
            InitArg::Encoder => SimInit::Encoder,
            InitArg::Zero => SimInit::Zero,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelData {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub io: ModelData,
    #[arg(long, value_enum, default_value = "encoder")]
    pub init: InitArg,
    /// Also compute the n-step NRMS for n = 0..=N.
    #[arg(long, value_name = "N")]
    pub nstep: Option<usize>,
    /// Where to write the n-step curve (default: next to the data).
    #[arg(long, requires = "nstep")]
    pub nstep_out: Option<PathBuf>,
    #[arg(long)]
    pub spectrum_out: Option<PathBuf>,
    /// Sample period in seconds for spectrum frequencies.
    #[arg(long)]
    pub sample_period: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub io: ModelData,
    #[arg(long, value_enum, default_value = "encoder")]
    pub init: InitArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NstepArgs {
    #[command(flatten)]
    pub io: ModelData,
    /// Largest n.
    #[arg(long)]
    pub max: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub io: ModelData,
    #[arg(long, value_enum, default_value = "encoder")]
    pub init: InitArg,
    #[arg(long)]
    pub sample_period: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    White,
    Lowpass,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML system description.
    #[arg(long)]
    pub system: PathBuf,
    /// Read the excitation from the `u1..` columns of this CSV.
    #[arg(long, conflicts_with_all = ["input", "samples"])]
    pub input_csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "white")]
    pub input: InputKind,
    #[arg(long, default_value_t = 1.0)]
    pub input_std: f64,
    /// AR(1) pole of the low-pass excitation, in [0, 1).
    #[arg(long, default_value_t = 0.9)]
    pub input_pole: f64,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Nstep(a) => cmd_nstep(&a, out),
        Command::Spectrum(a) => cmd_spectrum(&a, out),
        Command::Generate(a) => cmd_generate(&a, out),
    }
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let overrides = a.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    let mut cfg = RunConfig::load(&a.config, &overrides)?;
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    let train_data = load_csv_auto(&cfg.train_file)?;
    let (n_u, n_y) = (train_data.n_u(), train_data.n_y());
    let val = load_csv(&cfg.val_file, n_u, n_y)?;
    let test = cfg.test_file.as_ref().map(|p| load_csv(p, n_u, n_y)).transpose()?;
    create_dir(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join("resolved_config.toml"), &cfg.to_toml())?;
    let text = match cfg.train_config()?.precision {
        Precision::F32 => train_run::<f32>(&cfg, &train_data, &val, test.as_ref())?,
        Precision::F64 => train_run::<f64>(&cfg, &train_data, &val, test.as_ref())?,
    };
    write_text(&cfg.out_dir.join("report.txt"), &text)?;
    emit(out, &text)
}

fn train_run<S: Real>(cfg: &RunConfig, train_data: &Dataset, val: &Dataset, test: Option<&Dataset>) -> Result<String> {
    let tc = cfg.train_config()?;
    let scale = cfg.init_scale()?;
    let dims = ModelDims {
        n_x: cfg.n_x,
        n_u: train_data.n_u(),
        n_y: train_data.n_y(),
        n_a: cfg.n_a,
        n_b: cfg.n_b,
    };
    let (u_norm, y_norm) = fit_normalizers(train_data)?;
    let model = SsEncoderModel::<S>::init(dims, &cfg.hidden, scale, cfg.seed, u_norm, y_norm)?;
    let eval = Parallel::new(cfg.workers)?;
    log::info!(
        "training {} parameters ({}, {}) on {} samples with {} worker(s)",
        model.num_params(),
        tc.mode.as_str(),
        S::NAME,
        train_data.len(),
        eval.workers()
    );
    let outcome = train(model, train_data, val, &tc, &eval, &WallClock::start())?;
    save_model(
        cfg.out_dir.join("model.json"),
        &outcome.model,
        &InitMeta::new(scale, cfg.seed, &cfg.hidden),
    )?;
    write_log(cfg.out_dir.join("train_log.csv"), &outcome.log, cfg.record_time)?;

    let mut lines = vec![
        ("epochs".to_string(), outcome.log.records.len().to_string()),
        ("skipped_steps".into(), outcome.log.skipped_steps.to_string()),
        ("parameters".into(), outcome.model.num_params().to_string()),
    ];
    if let Some(v) = outcome.best_val_nrms {
        lines.push(("best_val_nrms".into(), format!("{:.4}%", 100.0 * v)));
        lines.push(("best_val_nrms_fraction".into(), v.to_string()));
    }
    if let Some(test) = test {
        let r = simulation_report(&outcome.model, test, &tc.val_init.sim_init())?;
        lines.extend(format_metrics(&r).into_iter().map(|(k, v)| (format!("test_{k}"), v)));
        if let Some(n) = cfg.nstep_max {
            let curve = nstep_nrms(&outcome.model, test, n)?;
            write_table(
                cfg.out_dir.join("test_nstep.csv"),
                &["n".into(), "nrms".into()],
                curve.values.iter().enumerate().map(|(i, v)| vec![i as f64, *v]),
            )?;
        }
    }
    Ok(render(&lines))
}

fn load_with_data(io: &ModelData) -> Result<(AnyModel, Dataset)> {
    let (model, _) = load_model(&io.model)?;
    let d = model.dims();
    let data = load_csv(&io.data, d.n_u, d.n_y)?;
    Ok((model, data))
}

macro_rules! dispatch {
    ($model:expr, $m:ident => $body:expr) => {
        match $model {
            AnyModel::F32($m) => $body,
            AnyModel::F64($m) => $body,
        }
    };
}

fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let (model, data) = load_with_data(&a.io)?;
    dispatch!(&model, m => evaluate_with(m, &data, a, out))
}

fn evaluate_with<S: Real>(m: &SsEncoderModel<S>, data: &Dataset, a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let init = a.init.sim_init();
    let r = simulation_report(m, data, &init)?;
    let mut lines = format_metrics(&r);
    if let Some(n) = a.nstep {
        let curve = nstep_nrms(m, data, n)?;
        let path = a.nstep_out.clone().unwrap_or_else(|| a.io.data.with_extension("nstep.csv"));
        write_nstep(&path, &curve.values)?;
        lines.push(("nstep_sections".into(), curve.count.to_string()));
        lines.push(("nstep_out".into(), path.display().to_string()));
    }
    if let Some(path) = &a.spectrum_out {
        spectrum_with(m, data, &init, a.sample_period, path)?;
        lines.push(("spectrum_out".into(), path.display().to_string()));
    }
    emit(out, &render(&lines))
}

fn write_nstep(path: &Path, values: &[f64]) -> Result<()> {
    write_table(
        path,
        &["n".into(), "nrms".into()],
        values.iter().enumerate().map(|(i, v)| vec![i as f64, *v]),
    )
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let (model, data) = load_with_data(&a.io)?;
    let sim = dispatch!(&model, m => m.simulate(&data, &a.init.sim_init())?);
    let n_y = sim.n_y;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n_y).map(|i| format!("y{i}_hat")))
        .collect();
    let rows = sim
        .outputs
        .chunks(n_y)
        .enumerate()
        .map(|(i, row)| std::iter::once((sim.t0 + i) as f64).chain(row.iter().copied()).collect());
    write_table(&a.out, &header, rows)?;
    emit(
        out,
        &render(&[
            ("t0".into(), sim.t0.to_string()),
            ("samples".into(), (sim.outputs.len() / n_y).to_string()),
        ]),
    )
}

fn cmd_nstep(a: &NstepArgs, out: &mut dyn Write) -> Result<()> {
    let (model, data) = load_with_data(&a.io)?;
    let curve = dispatch!(&model, m => nstep_nrms(m, &data, a.max)?);
    write_nstep(&a.out, &curve.values)?;
    let last = curve.values.last().copied().unwrap_or(f64::NAN);
    emit(
        out,
        &render(&[
            ("sections".into(), curve.count.to_string()),
            ("sigma_y".into(), curve.sigma_y.to_string()),
            (format!("nrms_{}", a.max), format!("{:.4}%", 100.0 * last)),
        ]),
    )
}

fn cmd_spectrum(a: &SpectrumArgs, out: &mut dyn Write) -> Result<()> {
    let (model, data) = load_with_data(&a.io)?;
    let bins = dispatch!(&model, m => spectrum_with(m, &data, &a.init.sim_init(), a.sample_period, &a.out)?);
    emit(out, &render(&[("bins".into(), bins.to_string())]))
}

/// Writes `frequency, residual_y1, reference_y1, ...` and returns the bin count.
fn spectrum_with<S: Real>(
    m: &SsEncoderModel<S>,
    data: &Dataset,
    init: &SimInit<S>,
    ts: Option<f64>,
    path: &Path,
) -> Result<usize> {
    let sim = m.simulate(data, init)?;
    let n_y = sim.n_y;
    let ts = ts.or(data.sample_period());
    let mut columns = Vec::new();
    let mut freq = Vec::new();
    for c in 0..n_y {
        let y_hat: Vec<f64> = sim.outputs.iter().skip(c).step_by(n_y).copied().collect();
        let y: Vec<f64> = data.y()[sim.t0 * n_y..].iter().skip(c).step_by(n_y).copied().collect();
        let s = error_spectrum(&y_hat, &y, ts)?;
        freq = s.frequency;
        columns.push(s.residual);
        columns.push(s.reference);
    }
    let mut header = vec!["frequency".to_string()];
    for c in 1..=n_y {
        header.push(format!("residual_y{c}"));
        header.push(format!("reference_y{c}"));
    }
    let bins = freq.len();
    let rows = (0..bins).map(|k| std::iter::once(freq[k]).chain(columns.iter().map(|col| col[k])).collect());
    write_table(path, &header, rows)?;
    Ok(bins)
}

fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let sys = load_system(&a.system)?;
    let n_u = sys.n_u();
    let u = match &a.input_csv {
        Some(p) => load_inputs(p, n_u)?,
        None => {
            if !(a.input_std.is_finite() && a.input_std >= 0.0) {
                return Err(Error::Usage(format!("--input-std must be >= 0, got {}", a.input_std)));
            }
            let exc = match a.input {
                InputKind::White => Excitation::WhiteGaussian { std: a.input_std },
                InputKind::Lowpass => {
                    if !(0.0..1.0).contains(&a.input_pole) {
                        return Err(Error::Usage(format!("--input-pole must lie in [0, 1), got {}", a.input_pole)));
                    }
                    Excitation::LowpassGaussian {
                        std: a.input_std,
                        pole: a.input_pole,
                    }
                }
            };
            exc.sample(a.samples, n_u, a.seed)
        }
    };
    let d = generate(&sys, &u, a.seed)?.with_sample_period(sample_period(&sys));
    save_csv(&a.out, &d)?;
    emit(
        out,
        &render(&[
            ("samples".into(), d.len().to_string()),
            ("n_u".into(), d.n_u().to_string()),
            ("n_y".into(), d.n_y().to_string()),
        ]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
