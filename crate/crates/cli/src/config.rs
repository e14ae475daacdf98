//! Experiment settings: defaults, then the `--config` file, then flags.

use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use ris_hybrid::channel::{ChannelKind, ChannelModel, FeederMode, SystemConfig};
use ris_hybrid::dataio::meta::parse_key_values;
use ris_hybrid::dataio::DatasetConfig;
use ris_hybrid::dlmdc::{Architecture, TrainConfig};
use ris_hybrid::optim::CeoParams;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ChannelKind,
    /// RIS elements.
    pub n: usize,
    /// Users, equal to the RF chain count.
    pub k: usize,
    pub q: usize,
    /// SNR points of the rate sweep, dB.
    pub snr_grid: Vec<f64>,
    /// SNR of the labels, the CDF and the headline rate figures, dB.
    pub snr_db: f64,
    pub oracle: bool,
    pub out_dir: PathBuf,
    pub dataset: Option<PathBuf>,
    pub bank: Option<PathBuf>,
    pub feeder: FeederMode,
    pub ceo: CeoParams,
    pub train: TrainConfig,
    pub test_fraction: f64,
    pub bench_batches: Vec<usize>,
    pub bench_repeats: usize,
}

impl Default for ExperimentConfig {
    /// N = 16, K = M = 2, Q = 20 000 Saleh-Valenzuela samples, SNR −10…15 dB.
    fn default() -> Self {
        Self {
            seed: 1,
            model: ChannelKind::Sv,
            n: 16,
            k: 2,
            q: 20_000,
            snr_grid: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0],
            snr_db: 5.0,
            oracle: false,
            out_dir: PathBuf::from("out"),
            dataset: None,
            bank: None,
            feeder: FeederMode::AllOnes,
            ceo: CeoParams::default(),
            train: TrainConfig {
                hidden: Architecture::Desk.hidden().to_vec(),
                ..TrainConfig::default()
            },
            test_fraction: 0.2,
            bench_batches: vec![100, 500, 1000],
            bench_repeats: 5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("bad value {value:?} for {key}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

/// Parses a comma-separated SNR grid; it must be nonempty and strictly increasing.
pub fn parse_snr_grid(value: &str) -> Result<Vec<f64>, CliError> {
    let grid: Vec<f64> = parse_list("snr_grid", value)?;
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("SNR grid must be a nonempty list of finite values".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage("SNR grid must be strictly increasing".into()));
    }
    Ok(grid)
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let t = &mut self.train;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "model" | "channel_model" => {
                self.model = value.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            }
            "n" => self.n = parse(key, value)?,
            "k" | "m" => self.k = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "snr_grid" => self.snr_grid = parse_snr_grid(value)?,
            "snr_db" => self.snr_db = parse(key, value)?,
            "oracle" => self.oracle = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "bank" | "model_file" => self.bank = Some(PathBuf::from(value)),
            "feeder" => self.feeder = value.parse().map_err(|e| CliError::Usage(format!("{e}")))?,
            "ceo_iterations" => self.ceo.iterations = parse(key, value)?,
            "ceo_candidates" => self.ceo.candidates = parse(key, value)?,
            "ceo_elite_ratio" => self.ceo.elite_ratio = parse(key, value)?,
            "ceo_smoothing" => self.ceo.smoothing = parse(key, value)?,
            "ceo_p_floor" => self.ceo.p_floor = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs_max" | "epochs" => t.epochs_max = parse(key, value)?,
            "rmsprop_decay" => t.rmsprop_decay = parse(key, value)?,
            "rmsprop_epsilon" => t.rmsprop_epsilon = parse(key, value)?,
            "dropout_keep" => t.dropout_keep = parse(key, value)?,
            "validation_fraction" => t.validation_fraction = parse(key, value)?,
            "stop_threshold" => t.stop_threshold = parse(key, value)?,
            "marked_epoch_stride" => t.marked_epoch_stride = parse(key, value)?,
            "init_std" => t.init_std = parse(key, value)?,
            "adaptive" => t.adaptive = parse(key, value)?,
            "max_retrains" => t.max_retrains = parse(key, value)?,
            "hidden" => t.hidden = parse_list(key, value)?,
            "architecture" => {
                let a: Architecture = value.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
                t.hidden = a.hidden().to_vec();
            }
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "bench_batches" => self.bench_batches = parse_list(key, value)?,
            "bench_repeats" => self.bench_repeats = parse(key, value)?,
            // Sidecar bookkeeping that has no setting.
            "ns" | "created_unix" => {}
            other => return Err(CliError::Usage(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &std::path::Path) -> Result<(), CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let map = parse_key_values(&text).map_err(|e| CliError::Usage(e.to_string()))?;
        for (k, v) in &map {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k == 0 || self.n == 0 || !self.n.is_multiple_of(self.k) {
            return Err(CliError::Usage(format!("n = {} must be a positive multiple of k = {}", self.n, self.k)));
        }
        if self.q == 0 {
            return Err(CliError::Usage("q must be at least 1".into()));
        }
        if self.snr_grid.is_empty() || self.snr_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage("SNR grid must be nonempty and strictly increasing".into()));
        }
        if self.bench_batches.is_empty() || self.bench_batches.contains(&0) || self.bench_repeats == 0 {
            return Err(CliError::Usage("benchmark batches and repeats must be positive".into()));
        }
        self.system().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.ceo.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig::new(self.k, self.n / self.k.max(1)).with_snr_db(self.snr_db).with_seed(self.seed)
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let mut c = DatasetConfig::new(self.system(), ChannelModel::default_for(self.model), self.seed);
        c.feeder = self.feeder;
        c.ceo = self.ceo.clone();
        c
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out_dir.join("dataset.bin"))
    }

    pub fn bank_path(&self) -> PathBuf {
        self.bank.clone().unwrap_or_else(|| self.out_dir.join("model.bin"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_grid_rules() {
        assert_eq!(parse_snr_grid("-10,-5,0").unwrap(), vec![-10.0, -5.0, 0.0]);
        assert!(parse_snr_grid("0,0").is_err());
        assert!(parse_snr_grid("5,0").is_err());
        assert!(parse_snr_grid("").is_err());
        assert!(parse_snr_grid("a").is_err());
    }

    #[test]
    fn settings_apply() {
        let mut c = ExperimentConfig::default();
        c.set("model", "gpp").unwrap();
        c.set("hidden", "8, 4").unwrap();
        c.set("epochs", "7").unwrap();
        assert_eq!(c.model, ChannelKind::Gpp);
        assert_eq!(c.train.hidden, vec![8, 4]);
        assert_eq!(c.train.epochs_max, 7);
        assert!(c.set("bogus", "1").is_err());
        assert!(c.set("n", "x").is_err());
    }

    #[test]
    fn defaults_are_desk_scale() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let s = c.system();
        assert_eq!((s.n, s.m, s.k, s.ns), (16, 2, 2, 8));
        assert_eq!(c.q, 20_000);
        assert_eq!(c.train.hidden, vec![64, 32]);
    }

    #[test]
    fn n_must_split_evenly() {
        let c = ExperimentConfig {
            n: 15,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
