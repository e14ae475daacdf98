//! Mini-batch RMSprop training of the classifier bank with a held-out
//! validation set and an optional automatic retraining loop.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::mlp::{MlpClassifier, Trace};
use super::rmsprop::{rmsprop_step, RmspropParams};
use super::{ClassifierBank, DlmdcError, LabeledSet};
use crate::seeding::{domain, substream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs_max: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    /// Probability of keeping a hidden unit during training.
    pub dropout_keep: f64,
    pub validation_fraction: f64,
    pub stop_threshold: f64,
    pub marked_epoch_stride: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub init_std: f64,
    /// Retrain on detected over- or underfitting.
    pub adaptive: bool,
    pub max_retrains: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs_max: 500,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            dropout_keep: 0.9,
            validation_fraction: 0.2,
            stop_threshold: 0.01,
            marked_epoch_stride: 10,
            seed: 0,
            hidden: vec![64, 32],
            init_std: 0.1,
            adaptive: false,
            max_retrains: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DlmdcError> {
        let bad = |what: &str| Err(DlmdcError::Config(what.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.epochs_max == 0 || self.marked_epoch_stride == 0 {
            return bad("batch size, epochs and stride must be positive");
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if self.rmsprop_epsilon.is_nan() || self.rmsprop_epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return bad("dropout keep probability must lie in (0, 1]");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        if self.stop_threshold.is_nan() || self.stop_threshold <= 0.0 {
            return bad("stop threshold must be positive");
        }
        if self.hidden.contains(&0) || self.init_std.is_nan() || self.init_std <= 0.0 {
            return bad("hidden sizes and init std must be positive");
        }
        Ok(())
    }

    fn rmsprop(&self) -> RmspropParams {
        RmspropParams {
            learning_rate: self.learning_rate,
            decay: self.rmsprop_decay,
            epsilon: self.rmsprop_epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryPoint {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHistory {
    /// Marked epochs of the kept run, starting with epoch 0 (before any update).
    pub points: Vec<HistoryPoint>,
    /// Number of training runs, including the first.
    pub attempts: usize,
    pub batch_size: usize,
    pub dropout_keep: f64,
}

impl ClassifierHistory {
    pub fn last(&self) -> HistoryPoint {
        *self.points.last().expect("epoch 0 is always recorded")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub classifiers: Vec<ClassifierHistory>,
}

impl TrainHistory {
    /// Every marked epoch reached by at least one classifier, ascending.
    pub fn epochs(&self) -> Vec<usize> {
        let longest = self.classifiers.iter().max_by_key(|c| c.points.len()).expect("nonempty bank");
        longest.points.iter().map(|p| p.epoch).collect()
    }

    /// Mean over classifiers at each marked epoch. A classifier that stopped
    /// early contributes its last recorded values to later epochs.
    pub fn mean(&self) -> Vec<HistoryPoint> {
        let count = self.classifiers.len() as f64;
        self.epochs()
            .into_iter()
            .enumerate()
            .map(|(i, epoch)| {
                let (mut t, mut v) = (0.0, 0.0);
                for c in &self.classifiers {
                    let p = c.points.get(i).copied().unwrap_or_else(|| c.last());
                    t += p.train_mse;
                    v += p.val_mse;
                }
                HistoryPoint {
                    epoch,
                    train_mse: t / count,
                    val_mse: v / count,
                }
            })
            .collect()
    }
}

fn dataset_mse(net: &MlpClassifier, set: &LabeledSet, labels: &[f64]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let sum: f64 = labels
        .iter()
        .enumerate()
        .map(|(row, &l)| {
            let y = net.forward_unchecked(set.features(row));
            (y - l) * (y - l)
        })
        .sum();
    sum / labels.len() as f64
}

struct Run {
    net: MlpClassifier,
    points: Vec<HistoryPoint>,
}

/// One complete training run of classifier `n`.
fn train_once(
    n: usize,
    attempt: usize,
    train: &LabeledSet,
    val: &LabeledSet,
    cfg: &TrainConfig,
    batch_size: usize,
    keep: f64,
) -> Result<Run, DlmdcError> {
    let path = |d: u64| [d, n as u64, attempt as u64];
    let mut init_rng = substream(cfg.seed, &path(domain::INIT));
    let mut shuffle_rng = substream(cfg.seed, &path(domain::SHUFFLE));
    let mut dropout_rng = substream(cfg.seed, &path(domain::DROPOUT));

    let mut sizes = vec![train.dim()];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(1);
    let mut net = MlpClassifier::init(&sizes, cfg.init_std, &mut init_rng)?;

    let train_labels = train.column(n);
    let val_labels = val.column(n);
    let rms = cfg.rmsprop();
    let mut state = net.zero_gradients();
    let mut grads = net.zero_gradients();
    let mut trace = Trace::new(&sizes);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let record = |net: &MlpClassifier, epoch: usize| HistoryPoint {
        epoch,
        train_mse: dataset_mse(net, train, &train_labels),
        val_mse: dataset_mse(net, val, &val_labels),
    };
    let mut points = vec![record(&net, 0)];

    for epoch in 1..=cfg.epochs_max {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(batch_size) {
            for g in grads.iter_mut() {
                g.weights.fill(0.0);
                g.biases.fill(0.0);
            }
            for &row in batch {
                net.forward_trace(train.features(row), Some((keep, &mut dropout_rng)), &mut trace);
                net.accumulate_gradients(&mut trace, train_labels[row], &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grads.iter_mut() {
                g.weights.iter_mut().chain(g.biases.iter_mut()).for_each(|x| *x *= scale);
            }
            rmsprop_step(net.layers_mut(), &grads, &mut state, &rms);
        }
        if epoch % cfg.marked_epoch_stride == 0 {
            let p = record(&net, epoch);
            points.push(p);
            if p.train_mse <= cfg.stop_threshold && p.val_mse <= cfg.stop_threshold {
                break;
            }
        }
    }
    Ok(Run { net, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Diagnosis {
    Fine,
    Overfit,
    Underfit,
}

fn diagnose(points: &[HistoryPoint], cfg: &TrainConfig) -> Diagnosis {
    let overfit = points.windows(3).any(|w| w[0].val_mse < w[1].val_mse && w[1].val_mse < w[2].val_mse);
    if overfit {
        return Diagnosis::Overfit;
    }
    let half = cfg.epochs_max as f64 / 2.0;
    let last_epoch = points.last().map_or(0, |p| p.epoch);
    if last_epoch as f64 >= half {
        let mid = points
            .iter()
            .min_by(|a, b| (a.epoch as f64 - half).abs().total_cmp(&(b.epoch as f64 - half).abs()))
            .expect("nonempty");
        let limit = 5.0 * cfg.stop_threshold;
        if mid.train_mse > limit && mid.val_mse > limit {
            return Diagnosis::Underfit;
        }
    }
    Diagnosis::Fine
}

/// Trains classifier `n`, retrying with adjusted hyperparameters when
/// `cfg.adaptive` is set, and keeps the run with the lowest final validation MSE.
fn train_classifier(
    n: usize,
    train: &LabeledSet,
    val: &LabeledSet,
    cfg: &TrainConfig,
) -> Result<(MlpClassifier, ClassifierHistory), DlmdcError> {
    let mut batch = cfg.batch_size;
    let mut keep = cfg.dropout_keep;
    let mut best: Option<(Run, usize, f64)> = None;
    let mut attempts = 0;
    loop {
        let run = train_once(n, attempts, train, val, cfg, batch, keep)?;
        attempts += 1;
        let verdict = diagnose(&run.points, cfg);
        let final_val = run.points.last().expect("nonempty").val_mse;
        if best.as_ref().is_none_or(|(b, _, _)| final_val < b.points.last().expect("nonempty").val_mse) {
            best = Some((run, batch, keep));
        }
        if !cfg.adaptive || attempts > cfg.max_retrains {
            break;
        }
        match verdict {
            Diagnosis::Fine => break,
            Diagnosis::Overfit => batch = batch.saturating_mul(2),
            Diagnosis::Underfit => keep = (keep + 0.05).min(1.0),
        }
    }
    let (run, batch_size, dropout_keep) = best.expect("at least one run");
    Ok((
        run.net,
        ClassifierHistory {
            points: run.points,
            attempts,
            batch_size,
            dropout_keep,
        },
    ))
}

/// Trains one classifier per element on `train`, monitoring `val`.
///
/// Classifiers train in parallel; each draws its initialization, shuffling
/// and dropout from its own seeded streams, so the result does not depend on
/// scheduling or on which other classifiers are trained.
pub fn train_bank(
    train: &LabeledSet,
    val: &LabeledSet,
    cfg: &TrainConfig,
) -> Result<(ClassifierBank, TrainHistory), DlmdcError> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(DlmdcError::Config("training and validation sets must be nonempty".into()));
    }
    if train.dim() != val.dim() || train.elements() != val.elements() {
        return Err(DlmdcError::Shape("training and validation sets differ in shape".into()));
    }
    let elements: Vec<usize> = (0..train.elements()).collect();
    train_subset(train, val, cfg, &elements)
}

/// Trains only the classifiers listed in `elements`, in the given order.
pub fn train_subset(
    train: &LabeledSet,
    val: &LabeledSet,
    cfg: &TrainConfig,
    elements: &[usize],
) -> Result<(ClassifierBank, TrainHistory), DlmdcError> {
    if let Some(&bad) = elements.iter().find(|&&n| n >= train.elements()) {
        return Err(DlmdcError::Config(format!("element {bad} out of range")));
    }
    let trained = elements
        .par_iter()
        .map(|&n| train_classifier(n, train, val, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let (nets, histories): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    Ok((ClassifierBank::new(nets, cfg.seed)?, TrainHistory { classifiers: histories }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlmdc::accuracy_table;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Labels of element `n` are the sign of input coordinate `n`.
    fn separable(rows: usize, dim: usize, elements: usize, seed: u64) -> LabeledSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = LabeledSet::new(dim, elements);
        for _ in 0..rows {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
            let labels: Vec<u8> = (0..elements).map(|n| u8::from(x[n] >= 0.0)).collect();
            set.push(&x, &labels).unwrap();
        }
        set
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 32,
            epochs_max: 100,
            dropout_keep: 1.0,
            marked_epoch_stride: 5,
            hidden: vec![16, 8],
            seed: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_task_converges() {
        let train = separable(800, 4, 2, 1);
        let val = separable(200, 4, 2, 2);
        let (bank, history) = train_bank(&train, &val, &small_cfg()).unwrap();
        for c in &history.classifiers {
            assert!(c.last().val_mse <= 0.01, "{:?}", c.last());
            assert!(c.last().epoch <= 100);
        }
        for acc in accuracy_table(&bank, &val).unwrap() {
            assert!(acc > 0.97);
        }
    }

    #[test]
    fn history_epochs_are_marked_strides() {
        let train = separable(100, 3, 2, 5);
        let val = separable(50, 3, 2, 6);
        let cfg = TrainConfig {
            epochs_max: 23,
            marked_epoch_stride: 5,
            stop_threshold: 1e-9,
            hidden: vec![4],
            ..TrainConfig::default()
        };
        let (_, history) = train_bank(&train, &val, &cfg).unwrap();
        for c in &history.classifiers {
            let epochs: Vec<usize> = c.points.iter().map(|p| p.epoch).collect();
            assert_eq!(epochs, vec![0, 5, 10, 15, 20]);
        }
        assert_eq!(history.mean().len(), 5);
    }

    #[test]
    fn classifiers_are_independent_of_order_and_company() {
        let train = separable(120, 4, 4, 7);
        let val = separable(40, 4, 4, 8);
        let cfg = TrainConfig {
            epochs_max: 10,
            marked_epoch_stride: 5,
            hidden: vec![6],
            ..TrainConfig::default()
        };
        let (full, _) = train_bank(&train, &val, &cfg).unwrap();
        let (reversed, _) = train_subset(&train, &val, &cfg, &[3, 2, 1, 0]).unwrap();
        let (single, _) = train_subset(&train, &val, &cfg, &[2]).unwrap();
        for n in 0..4 {
            assert_eq!(full.classifiers()[n], reversed.classifiers()[3 - n]);
        }
        assert_eq!(full.classifiers()[2], single.classifiers()[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let train = separable(100, 3, 2, 9);
        let val = separable(30, 3, 2, 10);
        let cfg = TrainConfig {
            epochs_max: 10,
            hidden: vec![5],
            ..TrainConfig::default()
        };
        assert_eq!(train_bank(&train, &val, &cfg).unwrap(), train_bank(&train, &val, &cfg).unwrap());
    }

    #[test]
    fn rejects_empty_and_mismatched_sets() {
        let cfg = TrainConfig::default();
        let empty = LabeledSet::new(3, 2);
        let some = separable(10, 3, 2, 1);
        assert!(matches!(train_bank(&empty, &some, &cfg), Err(DlmdcError::Config(_))));
        assert!(train_bank(&some, &separable(10, 4, 2, 1), &cfg).is_err());
        let bad = TrainConfig {
            rmsprop_decay: 1.0,
            ..TrainConfig::default()
        };
        assert!(train_bank(&some, &some, &bad).is_err());
    }

    #[test]
    fn mean_carries_early_stoppers_forward() {
        let p = |epoch, v| HistoryPoint {
            epoch,
            train_mse: v,
            val_mse: v,
        };
        let history = TrainHistory {
            classifiers: vec![
                ClassifierHistory {
                    points: vec![p(0, 0.4), p(10, 0.0)],
                    attempts: 1,
                    batch_size: 1,
                    dropout_keep: 1.0,
                },
                ClassifierHistory {
                    points: vec![p(0, 0.2), p(10, 0.2), p(20, 0.1)],
                    attempts: 1,
                    batch_size: 1,
                    dropout_keep: 1.0,
                },
            ],
        };
        let mean = history.mean();
        assert_eq!(mean.iter().map(|m| m.epoch).collect::<Vec<_>>(), vec![0, 10, 20]);
        assert!((mean[0].val_mse - 0.3).abs() < 1e-15);
        assert!((mean[2].val_mse - 0.05).abs() < 1e-15);
    }

    #[test]
    fn diagnosis_rules() {
        let cfg = TrainConfig {
            epochs_max: 40,
            ..TrainConfig::default()
        };
        let p = |epoch, t, v| HistoryPoint {
            epoch,
            train_mse: t,
            val_mse: v,
        };
        let rising = [p(0, 0.2, 0.2), p(10, 0.1, 0.1), p(20, 0.05, 0.12), p(30, 0.01, 0.14)];
        assert_eq!(diagnose(&rising, &cfg), Diagnosis::Overfit);
        let stuck = [p(0, 0.25, 0.25), p(10, 0.2, 0.2), p(20, 0.2, 0.2), p(30, 0.2, 0.2)];
        assert_eq!(diagnose(&stuck, &cfg), Diagnosis::Underfit);
        let good = [p(0, 0.25, 0.25), p(10, 0.05, 0.06), p(20, 0.02, 0.03)];
        assert_eq!(diagnose(&good, &cfg), Diagnosis::Fine);
    }

    #[test]
    fn adaptive_loop_caps_retrains() {
        let train = separable(60, 3, 1, 3);
        let val = separable(20, 3, 1, 4);
        let cfg = TrainConfig {
            epochs_max: 20,
            marked_epoch_stride: 5,
            learning_rate: 1e-6,
            hidden: vec![3],
            adaptive: true,
            max_retrains: 2,
            ..TrainConfig::default()
        };
        let (_, history) = train_bank(&train, &val, &cfg).unwrap();
        let c = &history.classifiers[0];
        // A learning rate this small never reaches a healthy run, so every retry is used.
        assert_eq!(c.attempts, 3);
    }
}
