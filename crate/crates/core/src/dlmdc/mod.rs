//! Bank of per-element binary classifiers that predict the RIS signs from
//! channel phases.
//!
//! Classifier `n` sees the phases of all `K·N` channel entries and outputs the
//! posterior probability that element `n` should be `+1`. Each classifier is
//! trained and evaluated independently of the others.

pub mod io;
pub mod mlp;
pub mod rmsprop;
pub mod train;

use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::ChannelMatrix;
use crate::container::FormatError;
use crate::precoding::{AnalogBeamformer, PrecodingError};

pub use io::{load_bank, save_bank};
pub use mlp::{mse_loss, MlpClassifier};
pub use rmsprop::{rmsprop_step, RmspropParams};
pub use train::{train_bank, ClassifierHistory, HistoryPoint, TrainConfig, TrainHistory};

#[derive(Debug, Error)]
pub enum DlmdcError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input length {found} does not match expected {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Precoding(#[from] PrecodingError),
}

/// Hidden-layer presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Sized for N = 16 on a workstation.
    Desk,
    /// Large network used with the Saleh-Valenzuela channel at N = 64.
    WideSv,
    /// Larger network used with the 3GPP channel at N = 128.
    WideGpp,
}

impl Architecture {
    pub fn hidden(self) -> &'static [usize] {
        match self {
            Architecture::Desk => &[64, 32],
            Architecture::WideSv => &[256, 80, 80],
            Architecture::WideGpp => &[512, 256, 128],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Desk => "desk",
            Architecture::WideSv => "wide_sv",
            Architecture::WideGpp => "wide_gpp",
        }
    }
}

impl FromStr for Architecture {
    type Err = DlmdcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Architecture::Desk),
            "wide_sv" => Ok(Architecture::WideSv),
            "wide_gpp" => Ok(Architecture::WideGpp),
            other => Err(DlmdcError::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Phase of `z` in (−π, π].
fn phase(z: num_complex::Complex64) -> f64 {
    let p = z.arg();
    if p <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        p
    }
}

/// Channel phases in row-major order: entry `k·N + n` is `arg(H[k][n])`.
pub fn phase_features(h: &ChannelMatrix) -> Vec<f64> {
    h.matrix().as_slice().iter().map(|&z| phase(z)).collect()
}

/// Phase features and `{0, 1}` labels (`(φ_n + 1) / 2`) for one sample.
pub fn preprocess(h: &ChannelMatrix, phi: &AnalogBeamformer) -> Result<(Vec<f64>, Vec<u8>), DlmdcError> {
    if phi.len() != h.elements() {
        return Err(DlmdcError::Shape(format!(
            "{} signs for a channel with {} elements",
            phi.len(),
            h.elements()
        )));
    }
    Ok((phase_features(h), phi.labels()))
}

/// Feature rows with one `{0, 1}` label per element, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    dim: usize,
    elements: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl LabeledSet {
    pub fn new(dim: usize, elements: usize) -> Self {
        Self {
            dim,
            elements,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_samples<'a>(
        samples: impl IntoIterator<Item = (&'a ChannelMatrix, &'a AnalogBeamformer)>,
    ) -> Result<Self, DlmdcError> {
        let mut set: Option<Self> = None;
        for (h, phi) in samples {
            let (theta, labels) = preprocess(h, phi)?;
            set.get_or_insert_with(|| Self::new(theta.len(), labels.len())).push(&theta, &labels)?;
        }
        set.ok_or_else(|| DlmdcError::Config("no samples".into()))
    }

    pub fn push(&mut self, features: &[f64], labels: &[u8]) -> Result<(), DlmdcError> {
        if features.len() != self.dim || labels.len() != self.elements {
            return Err(DlmdcError::Shape(format!(
                "row of {} features and {} labels, expected {} and {}",
                features.len(),
                labels.len(),
                self.dim,
                self.elements
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(DlmdcError::Config("labels must be 0 or 1".into()));
        }
        self.features.extend_from_slice(features);
        self.labels.extend_from_slice(labels);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len().checked_div(self.elements).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn features(&self, row: usize) -> &[f64] {
        &self.features[row * self.dim..(row + 1) * self.dim]
    }

    pub fn labels(&self, row: usize) -> &[u8] {
        &self.labels[row * self.elements..(row + 1) * self.elements]
    }

    /// Labels of element `n` across all rows.
    pub fn column(&self, n: usize) -> Vec<f64> {
        self.labels.iter().skip(n).step_by(self.elements).map(|&l| f64::from(l)).collect()
    }
}

/// One trained classifier per RIS element, all with the same layer sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierBank {
    classifiers: Vec<MlpClassifier>,
    seed: u64,
}

impl ClassifierBank {
    pub fn new(classifiers: Vec<MlpClassifier>, seed: u64) -> Result<Self, DlmdcError> {
        let first = classifiers.first().ok_or_else(|| DlmdcError::Config("empty bank".into()))?;
        if classifiers.iter().any(|c| c.layer_sizes() != first.layer_sizes()) {
            return Err(DlmdcError::Config("classifiers have different layer sizes".into()));
        }
        Ok(Self { classifiers, seed })
    }

    pub fn classifiers(&self) -> &[MlpClassifier] {
        &self.classifiers
    }

    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classifiers.is_empty()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.classifiers[0].layer_sizes()
    }

    pub fn input_len(&self) -> usize {
        self.classifiers[0].input_len()
    }

    /// Master seed the bank was trained with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn posteriors(&self, theta: &[f64]) -> Result<Vec<f64>, DlmdcError> {
        if theta.len() != self.input_len() {
            return Err(DlmdcError::InputLength {
                expected: self.input_len(),
                found: theta.len(),
            });
        }
        Ok(self.classifiers.iter().map(|c| c.forward_unchecked(theta)).collect())
    }

    /// Thresholds each posterior at 0.5; exactly 0.5 maps to `+1`.
    pub fn predict_features(&self, theta: &[f64]) -> Result<AnalogBeamformer, DlmdcError> {
        let signs = self.posteriors(theta)?.into_iter().map(|p| if p >= 0.5 { 1 } else { -1 }).collect();
        Ok(AnalogBeamformer::new(signs)?)
    }

    fn check_channel(&self, h: &ChannelMatrix) -> Result<(), DlmdcError> {
        if h.elements() != self.len() {
            return Err(DlmdcError::Shape(format!(
                "channel has {} elements, bank has {} classifiers",
                h.elements(),
                self.len()
            )));
        }
        Ok(())
    }
}

pub fn predict_phi(bank: &ClassifierBank, h: &ChannelMatrix) -> Result<AnalogBeamformer, DlmdcError> {
    bank.check_channel(h)?;
    bank.predict_features(&phase_features(h))
}

/// Predictions for many channels, in parallel across channels.
pub fn predict_batch(bank: &ClassifierBank, channels: &[ChannelMatrix]) -> Result<Vec<AnalogBeamformer>, DlmdcError> {
    channels.par_iter().map(|h| predict_phi(bank, h)).collect()
}

/// Fraction of rows on which classifier `n` predicts label `n`, per element.
pub fn accuracy_table(bank: &ClassifierBank, set: &LabeledSet) -> Result<Vec<f64>, DlmdcError> {
    if set.elements() != bank.len() || set.dim() != bank.input_len() {
        return Err(DlmdcError::Shape(format!(
            "set has {} features and {} labels, bank expects {} and {}",
            set.dim(),
            set.elements(),
            bank.input_len(),
            bank.len()
        )));
    }
    if set.is_empty() {
        return Err(DlmdcError::Config("empty test set".into()));
    }
    let correct: Vec<usize> = (0..set.len())
        .into_par_iter()
        .map(|row| {
            let predicted = bank.predict_features(set.features(row)).expect("checked dims").labels();
            predicted.iter().zip(set.labels(row)).map(|(p, l)| usize::from(p == l)).collect::<Vec<_>>()
        })
        .reduce(
            || vec![0; bank.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(correct.into_iter().map(|c| c as f64 / set.len() as f64).collect())
}
