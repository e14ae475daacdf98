//! Subcommand bodies. Each returns its results so callers other than the
//! binary can inspect them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use ris_hybrid::channel::{generate_channel, ChannelMatrix, FeederGains, SystemConfig};
use ris_hybrid::container::write_atomic;
use ris_hybrid::dataio::{generate_dataset, load_dataset, save_dataset, split_dataset, Dataset};
use ris_hybrid::dlmdc::{
    accuracy_table, load_bank, predict_batch, save_bank, train_bank, ClassifierBank, TrainHistory,
};
use ris_hybrid::optim::{ceo_optimize, exhaustive_search, matched_filter_baseline, CeoParams, EXHAUSTIVE_LIMIT};
use ris_hybrid::precoding::{AnalogBeamformer, RateEvaluator};
use ris_hybrid::seeding::{domain, substream};

use crate::config::ExperimentConfig;
use crate::report;
use crate::CliError;

pub const DATASET_FILE: &str = "dataset.bin";
pub const MODEL_FILE: &str = "model.bin";
pub const HISTORY_CSV: &str = "mse_history.csv";
pub const ACCURACY_CSV: &str = "accuracy.csv";
pub const RATE_CSV: &str = "rate_vs_snr.csv";
pub const CDF_CSV: &str = "rate_cdf.csv";
pub const RUNTIME_CSV: &str = "runtime.csv";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug)]
pub struct GenerateOutput {
    pub dataset: Dataset,
    pub path: PathBuf,
}

pub fn generate(cfg: &ExperimentConfig) -> Result<GenerateOutput, CliError> {
    cfg.validate()?;
    let ds = generate_dataset(cfg.q, &cfg.dataset_config())?;
    let ds = split_dataset(ds, cfg.test_fraction, cfg.train.validation_fraction, cfg.seed)?;
    let path = cfg.dataset_path();
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    save_dataset(&ds, &path)?;
    Ok(GenerateOutput { dataset: ds, path })
}

pub fn load(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let path = cfg.dataset_path();
    if !path.exists() {
        return Err(CliError::Usage(format!("dataset {} does not exist", path.display())));
    }
    Ok(load_dataset(&path)?)
}

#[derive(Debug)]
pub struct TrainOutput {
    pub bank: ClassifierBank,
    pub history: TrainHistory,
    pub model_path: PathBuf,
    pub history_path: PathBuf,
}

/// Trains on the dataset's training split, monitoring its validation split.
pub fn train_on(ds: &Dataset, cfg: &ExperimentConfig) -> Result<(ClassifierBank, TrainHistory), CliError> {
    let split = ds.split()?;
    let train = ds.labeled(&split.train)?;
    let val = ds.labeled(&split.validation)?;
    Ok(train_bank(&train, &val, &cfg.train_config())?)
}

pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutput, CliError> {
    cfg.validate()?;
    let ds = load(cfg)?;
    let (bank, history) = train_on(&ds, cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let model_path = cfg.bank_path();
    save_bank(&bank, &model_path)?;
    let history_path = cfg.out_dir.join(HISTORY_CSV);
    write_text(&history_path, &report::history_csv(&history))?;
    Ok(TrainOutput {
        bank,
        history,
        model_path,
        history_path,
    })
}

fn check_compatible(bank: &ClassifierBank, system: &SystemConfig) -> Result<(), CliError> {
    if bank.len() != system.n || bank.input_len() != system.k * system.n {
        return Err(CliError::Data(format!(
            "model expects N = {} with {} inputs, dataset has N = {}, K = {}",
            bank.len(),
            bank.input_len(),
            system.n,
            system.k
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Dlmdc,
    Ceo,
    MatchedFilter,
    Exhaustive,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Dlmdc => "dlmdc",
            Scheme::Ceo => "ceo",
            Scheme::MatchedFilter => "matched_filter",
            Scheme::Exhaustive => "exhaustive",
        }
    }
}

/// Sum-rates of each scheme on each test channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub snr_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    /// `rates[s][i][c]`: scheme `s`, SNR point `i`, channel `c`, bits/s/Hz.
    pub rates: Vec<Vec<Vec<f64>>>,
}

impl RateTable {
    pub fn scheme_index(&self, s: Scheme) -> Option<usize> {
        self.schemes.iter().position(|&x| x == s)
    }

    pub fn mean(&self, s: Scheme, snr_index: usize) -> f64 {
        let i = self.scheme_index(s).expect("scheme evaluated");
        let v = &self.rates[i][snr_index];
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sign vectors of each scheme for the listed test samples. The CEO vectors
/// are the stored labels, which the labeler produced on these same channels.
pub fn scheme_decisions(
    ds: &Dataset,
    bank: &ClassifierBank,
    indices: &[usize],
    oracle: bool,
) -> Result<(Vec<Scheme>, Vec<Vec<AnalogBeamformer>>), CliError> {
    let system = &ds.config.system;
    check_compatible(bank, system)?;
    if oracle && system.n > EXHAUSTIVE_LIMIT {
        return Err(CliError::Refused(format!(
            "exhaustive search over 2^{} vectors refused (limit N = {EXHAUSTIVE_LIMIT})",
            system.n
        )));
    }
    let g = ds.config.feeder_gains();
    let channels = ds.channels(indices);
    let mut schemes = vec![Scheme::Dlmdc, Scheme::Ceo, Scheme::MatchedFilter];
    let mut decisions = vec![
        predict_batch(bank, &channels)?,
        indices.iter().map(|&i| ds.samples[i].phi_label.clone()).collect(),
        channels
            .par_iter()
            .map(|h| matched_filter_baseline(h, &g, system).map(|r| r.phi))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(e.to_string()))?,
    ];
    if oracle {
        schemes.push(Scheme::Exhaustive);
        decisions.push(
            channels
                .par_iter()
                .map(|h| exhaustive_search(h, &g, system).map(|r| r.phi))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Data(e.to_string()))?,
        );
    }
    Ok((schemes, decisions))
}

/// Noise power giving `snr_db` at transmit power `rho`.
pub fn sigma2_for(rho: f64, snr_db: f64) -> f64 {
    rho / 10f64.powf(snr_db / 10.0)
}

pub fn rate_table(
    ds: &Dataset,
    indices: &[usize],
    schemes: Vec<Scheme>,
    decisions: &[Vec<AnalogBeamformer>],
    snr_db: &[f64],
) -> Result<RateTable, CliError> {
    let system = &ds.config.system;
    let g = ds.config.feeder_gains();
    let evaluators = indices
        .iter()
        .map(|&i| RateEvaluator::for_config(&ds.samples[i].h, &g, system))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Data(e.to_string()))?;
    let rates = decisions
        .iter()
        .map(|phis| {
            snr_db
                .iter()
                .map(|&s| {
                    let sigma2 = sigma2_for(system.rho, s);
                    evaluators
                        .iter()
                        .zip(phis)
                        .map(|(e, phi)| e.with_sigma2(sigma2).rate(phi.signs()))
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(RateTable {
        snr_db: snr_db.to_vec(),
        schemes,
        rates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub batch_size: usize,
    pub dlmdc_seconds: f64,
    pub ceo_seconds: f64,
    /// Sum-rate evaluations the CEO spent per channel.
    pub ceo_evaluations_per_channel: u64,
}

impl RuntimeRow {
    pub fn speedup(&self) -> f64 {
        self.ceo_seconds / self.dlmdc_seconds
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fresh channels that the dataset never contained: indices from `ds.len()` on.
pub fn fresh_channels(ds: &Dataset, count: usize) -> Result<Vec<ChannelMatrix>, CliError> {
    let c = &ds.config;
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_channel(&c.system, &c.channel, c.seed, ds.len() as u64 + i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Data(e.to_string()))
}

/// Wall-clock of labeling a batch with the bank and with the CEO (median of `repeats`).
pub fn runtime_rows(
    ds: &Dataset,
    bank: &ClassifierBank,
    ceo: &CeoParams,
    batches: &[usize],
    repeats: usize,
) -> Result<Vec<RuntimeRow>, CliError> {
    let system = &ds.config.system;
    check_compatible(bank, system)?;
    let g: FeederGains = ds.config.feeder_gains();
    let largest = batches.iter().copied().max().unwrap_or(0);
    let pool = fresh_channels(ds, largest)?;
    let mut rows = Vec::new();
    for &b in batches {
        let channels = &pool[..b];
        let mut dl = Vec::with_capacity(repeats);
        let mut ce = Vec::with_capacity(repeats);
        let mut evaluations = 0;
        for _ in 0..repeats {
            let start = Instant::now();
            let out = predict_batch(bank, channels)?;
            dl.push(start.elapsed().as_secs_f64());
            std::hint::black_box(out);

            let start = Instant::now();
            let results = channels
                .par_iter()
                .enumerate()
                .map(|(i, h)| ceo_optimize(h, &g, system, ceo, &mut substream(ds.config.seed, &[domain::EVAL, i as u64])))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Data(e.to_string()))?;
            ce.push(start.elapsed().as_secs_f64());
            evaluations = results[0].evaluations;
        }
        rows.push(RuntimeRow {
            batch_size: b,
            dlmdc_seconds: median(dl),
            ceo_seconds: median(ce),
            ceo_evaluations_per_channel: evaluations,
        });
    }
    Ok(rows)
}

fn load_both(cfg: &ExperimentConfig) -> Result<(Dataset, ClassifierBank), CliError> {
    let ds = load(cfg)?;
    let path = cfg.bank_path();
    if !path.exists() {
        return Err(CliError::Usage(format!("model {} does not exist", path.display())));
    }
    let bank = load_bank(&path)?;
    check_compatible(&bank, &ds.config.system)?;
    Ok((ds, bank))
}

#[derive(Debug)]
pub struct EvaluateOutput {
    pub accuracy: Vec<f64>,
    pub rates: RateTable,
    /// Rates at the configured SNR, used for the CDF.
    pub cdf_rates: RateTable,
    pub runtime: Vec<RuntimeRow>,
}

pub fn evaluate_on(ds: &Dataset, bank: &ClassifierBank, cfg: &ExperimentConfig) -> Result<EvaluateOutput, CliError> {
    let test = &ds.split()?.test;
    let accuracy = accuracy_table(bank, &ds.labeled(test)?)?;
    let (schemes, decisions) = scheme_decisions(ds, bank, test, cfg.oracle)?;
    let rates = rate_table(ds, test, schemes.clone(), &decisions, &cfg.snr_grid)?;
    let cdf_rates = rate_table(ds, test, schemes, &decisions, &[cfg.snr_db])?;
    let runtime = runtime_rows(ds, bank, &ds.config.ceo, &cfg.bench_batches, cfg.bench_repeats)?;
    Ok(EvaluateOutput {
        accuracy,
        rates,
        cdf_rates,
        runtime,
    })
}

pub fn evaluate(cfg: &ExperimentConfig) -> Result<EvaluateOutput, CliError> {
    cfg.validate()?;
    let (ds, bank) = load_both(cfg)?;
    let out = evaluate_on(&ds, &bank, cfg)?;
    ensure_dir(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join(ACCURACY_CSV), &report::accuracy_csv(&out.accuracy))?;
    write_text(&cfg.out_dir.join(RATE_CSV), &report::rate_csv(&out.rates))?;
    write_text(&cfg.out_dir.join(CDF_CSV), &report::cdf_csv(&out.cdf_rates))?;
    write_text(&cfg.out_dir.join(RUNTIME_CSV), &report::runtime_csv(&out.runtime))?;
    Ok(out)
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<RateTable, CliError> {
    cfg.validate()?;
    let (ds, bank) = load_both(cfg)?;
    let test = &ds.split()?.test;
    let (schemes, decisions) = scheme_decisions(&ds, &bank, test, cfg.oracle)?;
    let table = rate_table(&ds, test, schemes, &decisions, &cfg.snr_grid)?;
    ensure_dir(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join(RATE_CSV), &report::rate_csv(&table))?;
    Ok(table)
}

pub fn bench(cfg: &ExperimentConfig) -> Result<Vec<RuntimeRow>, CliError> {
    cfg.validate()?;
    let (ds, bank) = load_both(cfg)?;
    let rows = runtime_rows(&ds, &bank, &ds.config.ceo, &cfg.bench_batches, cfg.bench_repeats)?;
    ensure_dir(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join(RUNTIME_CSV), &report::runtime_csv(&rows))?;
    Ok(rows)
}
