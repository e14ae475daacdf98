//! Labeled datasets: generation with the cross-entropy labeler, splitting,
//! and storage.

mod format;
pub mod meta;

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{
    generate_channel, seeded_feeder_gains, ChannelError, ChannelKind, ChannelMatrix, ChannelModel, FeederGains,
    FeederMode, SystemConfig,
};
use crate::container::FormatError;
use crate::dlmdc::{DlmdcError, LabeledSet};
use crate::optim::{canonicalize_subsurfaces, ceo_optimize, CeoParams, OptimError};
use crate::precoding::{AnalogBeamformer, PrecodingError, RateEvaluator};
use crate::seeding::{domain, substream};

pub use format::{dataset_from_bytes, dataset_to_bytes, load_dataset, save_dataset, MAGIC, VERSION};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Precoding(#[from] PrecodingError),
    #[error(transparent)]
    Dlmdc(#[from] DlmdcError),
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub system: SystemConfig,
    pub channel: ChannelModel,
    pub feeder: FeederMode,
    pub ceo: CeoParams,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn new(system: SystemConfig, channel: ChannelModel, seed: u64) -> Self {
        Self {
            system,
            channel,
            feeder: FeederMode::AllOnes,
            ceo: CeoParams::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        self.system.validate()?;
        self.channel.validate()?;
        self.ceo.validate()?;
        Ok(())
    }

    /// Feeder gains shared by every sample of the dataset.
    pub fn feeder_gains(&self) -> FeederGains {
        seeded_feeder_gains(&self.system, self.feeder, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSample {
    pub h: ChannelMatrix,
    /// Labeler output with every sub-surface starting at `+1`.
    pub phi_label: AnalogBeamformer,
    /// Sum-rate of `phi_label` in bits/s/Hz.
    pub rate_label: f64,
    pub channel_model: ChannelKind,
    pub sample_index: u64,
}

/// Disjoint sample indices, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub samples: Vec<DataSample>,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self) -> Result<&Split, DataError> {
        self.split.as_ref().ok_or_else(|| DataError::Config("dataset has not been split".into()))
    }

    /// Phase features and labels of the listed samples.
    pub fn labeled(&self, indices: &[usize]) -> Result<LabeledSet, DataError> {
        let cfg = &self.config.system;
        let mut set = LabeledSet::new(cfg.k * cfg.n, cfg.n);
        for &i in indices {
            let s = self
                .samples
                .get(i)
                .ok_or_else(|| DataError::Config(format!("sample index {i} out of range")))?;
            let (theta, labels) = crate::dlmdc::preprocess(&s.h, &s.phi_label)?;
            set.push(&theta, &labels)?;
        }
        Ok(set)
    }

    pub fn channels(&self, indices: &[usize]) -> Vec<ChannelMatrix> {
        indices.iter().map(|&i| self.samples[i].h.clone()).collect()
    }

    pub fn mean_rate_label(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.rate_label).sum::<f64>() / self.samples.len() as f64
    }
}

/// Draws channel `index` of the dataset and labels it.
pub fn generate_sample(cfg: &DatasetConfig, g: &FeederGains, index: u64) -> Result<DataSample, DataError> {
    let h = generate_channel(&cfg.system, &cfg.channel, cfg.seed, index)?;
    let mut rng = substream(cfg.seed, &[domain::CEO, index]);
    let best = ceo_optimize(&h, g, &cfg.system, &cfg.ceo, &mut rng)?;
    let phi_label = canonicalize_subsurfaces(&best.phi, cfg.system.ns);
    let rate_label = RateEvaluator::for_config(&h, g, &cfg.system)?.rate(phi_label.signs());
    Ok(DataSample {
        h,
        phi_label,
        rate_label,
        channel_model: cfg.channel.kind(),
        sample_index: index,
    })
}

/// `q` labeled samples. Each sample has its own random streams, so the
/// result does not depend on the thread count.
pub fn generate_dataset(q: usize, cfg: &DatasetConfig) -> Result<Dataset, DataError> {
    if q == 0 {
        return Err(DataError::Config("sample count must be at least 1".into()));
    }
    cfg.validate()?;
    let g = cfg.feeder_gains();
    let samples = (0..q as u64)
        .into_par_iter()
        .map(|i| generate_sample(cfg, &g, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        config: cfg.clone(),
        samples,
        split: None,
    })
}

/// Carves `round(test_fraction · len)` test samples, then splits the rest
/// into validation (`validation_fraction` of it) and training.
pub fn split_dataset(
    mut ds: Dataset,
    test_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    ds.split = Some(make_split(ds.len(), test_fraction, validation_fraction, seed)?);
    Ok(ds)
}

pub fn make_split(len: usize, test_fraction: f64, validation_fraction: f64, seed: u64) -> Result<Split, DataError> {
    let in_unit = |f: f64| f > 0.0 && f < 1.0;
    if !in_unit(test_fraction) || !in_unit(validation_fraction) {
        return Err(DataError::Config("split fractions must lie in (0, 1)".into()));
    }
    if test_fraction + validation_fraction >= 1.0 {
        return Err(DataError::Config("split fractions must sum to less than 1".into()));
    }
    let test = (test_fraction * len as f64).round() as usize;
    let validation = (validation_fraction * (len - test) as f64).round() as usize;
    if test + validation >= len {
        return Err(DataError::Config(format!("{len} samples leave no training data")));
    }
    let mut order: Vec<usize> = (0..len).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut substream(seed, &[domain::SPLIT]));
    let part = |r: std::ops::Range<usize>| {
        let mut v = order[r].to_vec();
        v.sort_unstable();
        v
    };
    Ok(Split {
        test: part(0..test),
        validation: part(test..test + validation),
        train: part(test + validation..len),
    })
}
