//! Command-line experiment runner: dataset generation, training, evaluation,
//! SNR sweeps and runtime benchmarks, with CSV output.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error, 3 refused.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ris_hybrid::channel::ChannelKind;
use ris_hybrid::dataio::DataError;
use ris_hybrid::dlmdc::DlmdcError;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Refused(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Refused(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DlmdcError> for CliError {
    fn from(e: DlmdcError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "ris-hybrid", version, about = "RIS hybrid precoding experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate and label a dataset.
    Generate(CommonArgs),
    /// Train the classifier bank on a dataset.
    Train(CommonArgs),
    /// Accuracy, rate-vs-SNR, rate CDF and runtime on the test split.
    Evaluate(CommonArgs),
    /// Rate versus SNR only.
    Sweep(CommonArgs),
    /// Runtime comparison only.
    Bench(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// File of `key = value` settings, applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Channel model: sv or gpp.
    #[arg(long)]
    pub model: Option<ChannelKind>,
    /// RIS elements.
    #[arg(long)]
    pub n: Option<usize>,
    /// Users (and RF chains).
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of samples to generate.
    #[arg(long)]
    pub q: Option<usize>,
    /// Comma-separated, strictly increasing SNR points in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_grid: Option<String>,
    /// Also evaluate exhaustive search (N ≤ 22).
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Dataset file (default: <out-dir>/dataset.bin).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Model file (default: <out-dir>/model.bin).
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Any config-file setting, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl CommonArgs {
    pub fn to_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = &self.snr_grid {
            cfg.snr_grid = config::parse_snr_grid(v)?;
        }
        if self.oracle {
            cfg.oracle = true;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = &self.dataset {
            cfg.dataset = Some(v.clone());
        }
        if let Some(v) = &self.bank {
            cfg.bank = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Runs one command and returns a printable summary.
pub fn execute(command: &Command) -> Result<String, CliError> {
    use commands::Scheme;
    match command {
        Command::Generate(a) => {
            let out = commands::generate(&a.to_config()?)?;
            Ok(format!(
                "wrote {} samples to {}\nmean labeled rate: {:.4} bits/s/Hz",
                out.dataset.len(),
                out.path.display(),
                out.dataset.mean_rate_label()
            ))
        }
        Command::Train(a) => {
            let out = commands::train(&a.to_config()?)?;
            let last = *out.history.mean().last().expect("epoch 0 recorded");
            Ok(format!(
                "trained {} classifiers, saved to {}\nfinal mean MSE at epoch {}: train {:.4}, validation {:.4}\nhistory: {}",
                out.bank.len(),
                out.model_path.display(),
                last.epoch,
                last.train_mse,
                last.val_mse,
                out.history_path.display()
            ))
        }
        Command::Evaluate(a) => {
            let cfg = a.to_config()?;
            let out = commands::evaluate(&cfg)?;
            let mut s = format!("mean per-element accuracy: {:.4}\n", mean(&out.accuracy));
            for &scheme in &out.cdf_rates.schemes {
                s.push_str(&format!(
                    "{} mean rate at {} dB: {:.4} bits/s/Hz\n",
                    scheme.name(),
                    cfg.snr_db,
                    out.cdf_rates.mean(scheme, 0)
                ));
            }
            let ratio = out.cdf_rates.mean(Scheme::Dlmdc, 0) / out.cdf_rates.mean(Scheme::Ceo, 0);
            s.push_str(&format!("dlmdc / ceo: {ratio:.4}\n"));
            for r in &out.runtime {
                s.push_str(&format!("batch {}: speedup {:.1}x\n", r.batch_size, r.speedup()));
            }
            s.push_str(&format!("CSV files in {}", cfg.out_dir.display()));
            Ok(s)
        }
        Command::Sweep(a) => {
            let cfg = a.to_config()?;
            let t = commands::sweep(&cfg)?;
            Ok(report::rate_csv(&t))
        }
        Command::Bench(a) => {
            let rows = commands::bench(&a.to_config()?)?;
            Ok(report::runtime_csv(&rows))
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
