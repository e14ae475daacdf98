//! End-to-end checks across modules on small configurations.

use ris_hybrid::channel::{ChannelKind, ChannelModel, SystemConfig};
use ris_hybrid::dataio::{generate_dataset, load_dataset, save_dataset, split_dataset, DatasetConfig};
use ris_hybrid::dlmdc::{accuracy_table, load_bank, predict_phi, save_bank, train_bank, TrainConfig};
use ris_hybrid::optim::{exhaustive_search, matched_filter_baseline};
use ris_hybrid::precoding::RateEvaluator;

fn small_dataset(kind: ChannelKind, q: usize, seed: u64) -> ris_hybrid::dataio::Dataset {
    let mut cfg = DatasetConfig::new(SystemConfig::new(2, 3), ChannelModel::default_for(kind), seed);
    cfg.ceo.iterations = 10;
    cfg.ceo.candidates = 60;
    split_dataset(generate_dataset(q, &cfg).unwrap(), 0.2, 0.2, seed).unwrap()
}

#[test]
fn train_save_load_predict() {
    let ds = small_dataset(ChannelKind::Sv, 400, 3);
    let split = ds.split().unwrap();
    let train = ds.labeled(&split.train).unwrap();
    let val = ds.labeled(&split.validation).unwrap();
    let cfg = TrainConfig {
        epochs_max: 20,
        marked_epoch_stride: 5,
        hidden: vec![16, 8],
        learning_rate: 3e-3,
        seed: 7,
        ..TrainConfig::default()
    };
    let (bank, history) = train_bank(&train, &val, &cfg).unwrap();
    assert_eq!(bank.len(), 6);
    assert_eq!(history.classifiers.len(), 6);
    let mean = history.mean();
    assert!(mean.last().unwrap().train_mse < mean[0].train_mse);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.bin");
    save_bank(&bank, &path).unwrap();
    let loaded = load_bank(&path).unwrap();
    assert_eq!(loaded, bank);

    let test = ds.labeled(&split.test).unwrap();
    let acc = accuracy_table(&loaded, &test).unwrap();
    assert_eq!(acc.len(), 6);
    assert!(acc.iter().all(|a| (0.0..=1.0).contains(a)));
}

#[test]
fn predicted_rates_never_beat_the_optimum() {
    let ds = small_dataset(ChannelKind::Gpp, 60, 5);
    let split = ds.split().unwrap();
    let cfg = TrainConfig {
        epochs_max: 5,
        hidden: vec![8],
        ..TrainConfig::default()
    };
    let (bank, _) = train_bank(
        &ds.labeled(&split.train).unwrap(),
        &ds.labeled(&split.validation).unwrap(),
        &cfg,
    )
    .unwrap();
    let g = ds.config.feeder_gains();
    let system = &ds.config.system;
    for &i in &split.test {
        let h = &ds.samples[i].h;
        let eval = RateEvaluator::for_config(h, &g, system).unwrap();
        let best = exhaustive_search(h, &g, system).unwrap().rate;
        let predicted = eval.rate(predict_phi(&bank, h).unwrap().signs());
        let mf = matched_filter_baseline(h, &g, system).unwrap().rate;
        assert!(predicted <= best);
        assert!(mf <= best);
        assert!(ds.samples[i].rate_label <= best);
    }
}

#[test]
fn dataset_file_round_trip() {
    let ds = small_dataset(ChannelKind::Sv, 30, 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    save_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, ds);
    save_dataset(&back, &dir.path().join("e.bin")).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(dir.path().join("e.bin")).unwrap()
    );
}
