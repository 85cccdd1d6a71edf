//! `mixtest`: simulate weighted two-sample data, run the component-equality test,
//! calibrate thresholds and produce power tables.
//!
//! Exit codes: 0 accept (or success), 3 reject, 1 usage error, 2 data error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mixtest_core::calibration::mc_quantile_threshold;
use mixtest_core::io::{histogram, parse_sample_csv_with, write_histogram_csv, write_reports_csv, write_sample_csv, HISTOGRAM_BINS};
use mixtest_core::simulation::model_family;
use mixtest_core::{
    builtin_model, run_power_study, run_test, sample_mixture, Error, MixtureSpec, PowerStudyConfig, TestConfig,
    ThresholdMethod, ThresholdSpec,
};
use serde::Serialize;

const EXIT_REJECT: u8 = 3;
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "mixtest", version, about = "Wavelet two-sample test for mixture components with known weights")]
struct Cli {
    /// Worker threads for simulation and calibration (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a paired sample from a built-in model and write it with a histogram.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, env = "MIXTEST_SEED")]
        seed: u64,
        /// Sample CSV; the histogram goes to `<stem>_hist.csv` beside it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        hist_out: Option<PathBuf>,
    },
    /// Test equality of the mixture components behind a sample file.
    Test {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        s: f64,
        #[arg(long, value_enum, default_value_t = Method::Theoretical)]
        method: Method,
        /// Target error sum for the theoretical threshold.
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        /// Null rejection level for the Monte Carlo quantile.
        #[arg(long, default_value_t = 0.1)]
        gamma1: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Built-in model whose null variant calibrates `mc-quantile`.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, env = "MIXTEST_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value_t = mixtest_core::statistic::DEFAULT_R)]
        r: f64,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        /// Rescale weight rows that miss the unit sum instead of failing.
        #[arg(long)]
        renormalize: bool,
    },
    /// Print the Monte Carlo null quantile threshold for a model.
    Calibrate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4.0)]
        s: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma1: f64,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, env = "MIXTEST_SEED")]
        seed: u64,
    },
    /// Power study over several sample sizes, written as CSV.
    Power {
        #[arg(long)]
        model: String,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 4.0)]
        s: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma1: f64,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, env = "MIXTEST_SEED")]
        seed: u64,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Theoretical,
    McQuantile,
    Bootstrap,
}

/// Failure carried to `main`, with the exit code it maps to.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParam(msg) => Failure::Usage(msg),
            other => Failure::Data(other),
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return report(Failure::Usage(format!("cannot start {threads} threads: {e}")));
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => report(f),
    }
}

fn report(failure: Failure) -> ExitCode {
    let (kind, message, code) = match failure {
        Failure::Usage(msg) => ("usage", msg, EXIT_USAGE),
        Failure::Data(e) => (data_kind(&e), e.to_string(), EXIT_DATA),
    };
    let line = serde_json::to_string(&ErrorReport { error: kind, message }).expect("plain strings serialize");
    eprintln!("{line}");
    ExitCode::from(code)
}

fn data_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParam(_) => "invalid_parameter",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::NumericalFailure(_) => "numerical_failure",
        Error::Weight(_) => "weight",
        Error::Parse { .. } => "parse",
        Error::Schema(_) => "schema",
        Error::Io { .. } => "io",
        Error::Csv(_) => "csv",
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Simulate {
            model,
            n,
            seed,
            out,
            hist_out,
        } => {
            let spec = lookup(&model)?;
            let sample = sample_mixture(&spec, n, seed)?;
            write_with(&out, |w| write_sample_csv(w, &sample))?;
            let hist_path = hist_out.unwrap_or_else(|| histogram_path(&out));
            let bins = histogram(&sample, HISTOGRAM_BINS);
            write_with(&hist_path, |w| write_histogram_csv(w, &bins))?;
            Ok(0)
        }
        Command::Test {
            input,
            s,
            method,
            gamma,
            gamma1,
            alpha,
            model,
            seed,
            r,
            reps,
            resamples,
            renormalize,
        } => {
            let sample = parse_sample_csv_with(&input, renormalize)?;
            let need_seed = || seed.ok_or_else(|| Failure::Usage("--seed (or MIXTEST_SEED) is required for this method".into()));
            let method = match method {
                Method::Theoretical => ThresholdMethod::Theoretical { gamma },
                Method::McQuantile => {
                    let name = model.ok_or_else(|| Failure::Usage("--model is required for mc-quantile".into()))?;
                    let (h0, _) = model_family(&name)?;
                    ThresholdMethod::McQuantile {
                        model: h0,
                        gamma1,
                        reps,
                        seed: need_seed()?,
                    }
                }
                Method::Bootstrap => ThresholdMethod::Bootstrap {
                    alpha,
                    resamples,
                    seed: need_seed()?,
                },
            };
            let config = TestConfig { r, ..TestConfig::new(s) };
            let outcome = run_test(&sample, &config, &mut ThresholdSpec::new(method))?;
            let json = serde_json::to_string_pretty(&outcome).map_err(|e| Failure::Data(Error::NumericalFailure(e.to_string())))?;
            println!("{json}");
            Ok(if outcome.reject { EXIT_REJECT } else { 0 })
        }
        Command::Calibrate {
            model,
            n,
            s,
            gamma1,
            reps,
            seed,
        } => {
            let (h0, _) = model_family(&model)?;
            let t = mc_quantile_threshold(&h0, n, s, gamma1, reps, seed)?;
            println!("{t}");
            Ok(0)
        }
        Command::Power {
            model,
            n,
            s,
            gamma1,
            reps,
            seed,
            out,
        } => {
            let (h0, h1) = model_family(&model)?;
            let config = PowerStudyConfig {
                n_list: n,
                s,
                gamma1,
                reps,
                seed,
            };
            let reports = run_power_study(&h0, &h1, &config)?;
            match out {
                Some(path) => write_with(&path, |w| write_reports_csv(w, &reports))?,
                None => write_reports_csv(io::stdout().lock(), &reports)?,
            }
            Ok(0)
        }
    }
}

fn lookup(name: &str) -> Result<MixtureSpec, Failure> {
    builtin_model(name).ok_or_else(|| {
        let known: Vec<String> = mixtest_core::builtin_models().into_iter().map(|m| m.name).collect();
        Failure::Usage(format!("unknown model {name:?}; known models: {}", known.join(", ")))
    })
}

fn histogram_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
    out.with_file_name(format!("{stem}_hist.csv"))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> mixtest_core::Result<()>) -> Result<(), Failure> {
    let io_err = |source| Failure::Data(Error::Io {
        path: path.to_path_buf(),
        source,
    });
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    f(&mut w)?;
    w.flush().map_err(io_err)
}
