//! Command-line surface: `identify`, `simulate`, `validate` and `synth`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::io::{self, RunArtifacts, RunConfig};
use crate::ofr::Criterion;
use crate::rct::identify;
use crate::regressors::IoData;
use crate::sim::{predict_one_step, simulate_free_run, Model};
use crate::synth::{add_noise, dc_motor_reference, generate_signal, SignalKind, SignalSpec};
use crate::validation::{default_max_lag, residual_tests, ValidationReport};

#[derive(Debug, Parser)]
#[command(name = "narxid", version, about = "Polynomial ARX/NARX identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify a model from a run configuration.
    Identify(IdentifyArgs),
    /// Free-run a saved model against an input record.
    Simulate(SimulateArgs),
    /// Residual correlation tests for a saved model.
    Validate(ValidateArgs),
    /// Write a synthetic benchmark dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub u_column: Option<String>,
    #[arg(long)]
    pub y_column: Option<String>,
    #[arg(long)]
    pub sample_period: Option<f64>,
    #[arg(long)]
    pub train_start: Option<usize>,
    #[arg(long)]
    pub train_end: Option<usize>,
    #[arg(long)]
    pub n_a: Option<usize>,
    #[arg(long)]
    pub n_b: Option<usize>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub include_constant: Option<bool>,
    #[arg(long)]
    pub criterion: Option<Criterion>,
    #[arg(long)]
    pub rct: Option<String>,
    #[arg(long)]
    pub want_narx: Option<bool>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_terms: Option<usize>,
    #[arg(long)]
    pub validation_max_lag: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl IdentifyArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        apply!(
            data,
            out_dir,
            u_column,
            y_column,
            sample_period,
            train_start,
            n_a,
            n_b,
            degree,
            include_constant,
            criterion,
            rct,
            want_narx,
            max_iterations,
            epsilon,
            seed
        );
        if self.train_end.is_some() {
            cfg.train_end = self.train_end;
        }
        if self.max_terms.is_some() {
            cfg.max_terms = self.max_terms;
        }
        if self.validation_max_lag.is_some() {
            cfg.validation_max_lag = self.validation_max_lag;
        }
        // relative paths in a config file are taken from the file's directory
        if let (Some(path), None) = (&self.config, &self.data) {
            if cfg.data.is_relative() {
                cfg.data = path.parent().unwrap_or(Path::new("")).join(&cfg.data);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "u")]
    pub u_column: String,
    /// Initial conditions are read from this column; zero when omitted.
    #[arg(long)]
    pub y_column: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "u")]
    pub u_column: String,
    #[arg(long, default_value = "y")]
    pub y_column: String,
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Restrict the written curves, e.g. `acf,ccf`.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthCase {
    /// DC-motor system under N(0, 1) input.
    DcMotorWhite,
    /// DC-motor system under the four-tone input.
    DcMotorMultitone,
    /// DC-motor system under a ±1 PRBS.
    DcMotorPrbs,
    /// `y(t) = 0.5 y(t-1) + u(t-1)` under N(0, 1) input.
    Linear,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub case: SynthCase,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub sample_period: f64,
    #[arg(long, default_value_t = 10)]
    pub hold: usize,
    /// Standard deviation of additive output noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoStableModel { .. } | Error::Diverged { .. } | Error::Singular { .. } => 1,
        Error::Io { .. } | Error::Ingest { .. } => 3,
        _ => 2,
    }
}

/// One-step-ahead residuals and the aligned input, from the first sample
/// the model can predict.
pub fn one_step_residuals(model: &Model<f64>, data: &IoData<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let pred = predict_one_step(model, data)?;
    let start = data.len() - pred.len();
    let e = data.y()[start..].iter().zip(&pred).map(|(y, p)| y - p).collect();
    Ok((e, data.u()[start..].to_vec()))
}

fn validation_for(model: &Model<f64>, data: &IoData<f64>, max_lag: Option<usize>) -> Result<ValidationReport<f64>> {
    let (e, u) = one_step_residuals(model, data)?;
    residual_tests(&e, &u, max_lag.unwrap_or_else(|| default_max_lag(e.len())))
}

/// Runs the full identification described by `cfg` and writes the report.
pub fn run_identify(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = io::ingest_csv(&cfg.data, &cfg.u_column, &cfg.y_column)?;
    let (start, end) = cfg.train_range(data.len())?;
    let train = data.slice(start, end)?;
    let mut report = identify(&train, &cfg.lag_spec(), cfg.method()?, &cfg.iofrs_config(), cfg.want_narx)?;
    let hash = io::data_hash(&train);
    for stage in report.arx.iter_mut().chain(report.narx.iter_mut()) {
        for entry in &mut stage.result.pool.candidates {
            entry.model.provenance.data_hash = hash.clone();
        }
    }
    let model = report.model();
    let lag = model.max_lag();
    let simulated = simulate_free_run(model, data.u(), &data.y()[..lag.min(data.len())])?;
    let validation = validation_for(model, &train, cfg.validation_max_lag)?;
    let artifacts =
        RunArtifacts { config: cfg, data: &data, train: (start, end), simulated: &simulated, validation: &validation };
    io::render_report(&report, &artifacts)
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let model = io::load_model(&args.model)?;
    let (u, y) = io::read_columns(&args.data, &args.u_column, args.y_column.as_deref())?;
    let lag = model.max_lag();
    if u.len() <= lag {
        return Err(Error::InsufficientData { len: u.len(), required: lag });
    }
    let init = y.map_or_else(|| vec![0.0; lag], |y| y[..lag].to_vec());
    let sim = simulate_free_run(&model, &u, &init)?;
    let data = IoData::new(u, sim, 1.0)?;
    io::write_csv(&args.out, &data)
}

pub fn run_validate(args: &ValidateArgs) -> Result<ValidationReport<f64>> {
    let model = io::load_model(&args.model)?;
    let data = io::ingest_csv(&args.data, &args.u_column, &args.y_column)?;
    if data.len() <= model.max_lag() {
        return Err(Error::InsufficientData { len: data.len(), required: model.max_lag() });
    }
    let report = validation_for(&model, &data, args.max_lag)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io { path: args.out_dir.clone(), source })?;
    for t in &report.tests {
        if args.only.as_ref().is_some_and(|o| !o.contains(&t.name)) {
            continue;
        }
        let path = args.out_dir.join(format!("corr_{}.csv", t.name));
        std::fs::write(&path, report.to_csv(Some(&[t.name.as_str()]))).map_err(|source| Error::Io { path, source })?;
    }
    Ok(report)
}

/// Generates the dataset for `args` in memory.
pub fn synth_data(args: &SynthArgs) -> Result<IoData<f64>> {
    let u_spec = match args.case {
        SynthCase::DcMotorWhite | SynthCase::Linear => SignalSpec::white_noise(args.n, args.seed),
        SynthCase::DcMotorMultitone => SignalSpec::dc_motor_multitone(args.n, args.sample_period),
        SynthCase::DcMotorPrbs => SignalSpec {
            kind: SignalKind::Prbs { levels: (-1.0, 1.0), hold: args.hold, seed: args.seed },
            length: args.n,
        },
    };
    let u: Vec<f64> = generate_signal(&u_spec)?;
    let y = match args.case {
        SynthCase::Linear => {
            let mut y = vec![0.0; u.len()];
            for t in 1..u.len() {
                y[t] = 0.5 * y[t - 1] + u[t - 1];
            }
            y
        }
        _ => dc_motor_reference(&u)?,
    };
    let y = if args.noise > 0.0 { add_noise(&y, args.noise, args.seed.wrapping_add(1))? } else { y };
    IoData::new(u, y, 1.0)
}

pub fn run_synth(args: &SynthArgs) -> Result<()> {
    io::write_csv(&args.out, &synth_data(args)?)
}

/// Runs a parsed command, printing a one-line summary on success.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Identify(a) => {
            let cfg = a.resolve()?;
            let written = run_identify(&cfg)?;
            println!("wrote {} files to {}", written.len(), cfg.out_dir.display());
        }
        Command::Simulate(a) => {
            run_simulate(a)?;
            println!("wrote {}", a.out.display());
        }
        Command::Validate(a) => {
            let r = run_validate(a)?;
            let failed: Vec<&str> = r.tests.iter().filter(|t| !t.pass).map(|t| t.name.as_str()).collect();
            if failed.is_empty() {
                println!("all correlation tests inside bounds");
            } else {
                println!("outside bounds: {}", failed.join(", "));
            }
        }
        Command::Synth(a) => {
            run_synth(a)?;
            println!("wrote {}", a.out.display());
        }
    }
    Ok(())
}
