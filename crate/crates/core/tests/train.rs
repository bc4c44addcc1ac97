use lidf::dataset::{make_folds, Manifest, ManifestEntry};
use lidf::models::{Arch1DConfig, Arch2DConfig, ArchConfig};
use lidf::train::{
    confusion_to_percent, cross_validate, evaluate, evaluate_checkpoint, fit, init_model, load_report, predict,
    render_percent_cell, spread, train_fold, train_step, write_run, Confusion, EvalReport, FeatureSet, OptimizerConfig,
    TrainConfig, CONFUSION_CSV, REPORT_TXT,
};
use lidf::LidError;
use lidf_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEN: usize = 1200;

fn tiny_arch(dropout: f64) -> ArchConfig {
    arch_with_len(dropout, LEN)
}

fn arch_with_len(dropout: f64, len: usize) -> ArchConfig {
    ArchConfig::Conv1d(Arch1DConfig {
        first_layer_filters: 4,
        input_len: len,
        num_classes: 3,
        dropout_rate: dropout,
        ..Default::default()
    })
}

/// Sines at a class-specific period plus noise.
fn toy_set(per_class: usize, seed: u64) -> FeatureSet {
    toy_set_len(per_class, seed, LEN)
}

fn toy_set_len(per_class: usize, seed: u64, len: usize) -> FeatureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inputs, mut labels) = (Vec::new(), Vec::new());
    for c in 0..3 {
        for _ in 0..per_class {
            let phase: f32 = rng.random_range(0.0..6.28);
            let period = [8.0f32, 20.0, 50.0][c];
            let x: Vec<f32> = (0..len)
                .map(|i| (6.283 * i as f32 / period + phase).sin() * 0.5 + rng.random_range(-0.1..0.1))
                .collect();
            inputs.push(Tensor::new(vec![1, len], x).unwrap());
            labels.push(c);
        }
    }
    FeatureSet::new(inputs, labels, 3).unwrap()
}

fn toy_manifest(set: &FeatureSet) -> Manifest {
    Manifest {
        languages: vec!["a".into(), "b".into(), "c".into()],
        entries: set
            .labels
            .iter()
            .enumerate()
            .map(|(i, &label)| ManifestEntry { path: format!("{i}.wav").into(), label, duration_ms: 150, hash: i.to_string() })
            .collect(),
    }
}

fn config(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 8, ..TrainConfig::for_arch(tiny_arch(0.1)) }
}

fn weights(m: &lidf::models::Model<f32>) -> Vec<Vec<f32>> {
    m.store.named_tensors().map(|t| t.tensor.data().to_vec()).collect()
}

#[test]
fn zero_epochs_returns_the_initialisation() {
    let set = toy_set(4, 0);
    let r = fit(&config(0), &set, &(0..8).collect::<Vec<_>>(), &[8, 9], 0).unwrap();
    assert!(r.history.is_empty());
    assert_eq!(r.best_epoch, None);
    assert_eq!(weights(&r.model), weights(&init_model(&config(0), 3, 0).unwrap()));
}

#[test]
fn training_is_bitwise_deterministic() {
    let set = toy_set(6, 1);
    let train: Vec<usize> = (0..18).filter(|i| i % 3 != 0).collect();
    let val: Vec<usize> = (0..18).filter(|i| i % 3 == 0).collect();
    let mut cfg = config(2);
    cfg.mixup.enabled = true;
    cfg.mixup.waveform = true;
    let a = fit(&cfg, &set, &train, &val, 1).unwrap();
    let b = fit(&cfg, &set, &train, &val, 1).unwrap();
    let bits = |r: &lidf::train::FoldRun| -> Vec<u64> {
        r.history.iter().flat_map(|h| [h.train_loss.to_bits(), h.train_accuracy.to_bits()]).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.history, b.history);
    assert_eq!(weights(&a.model), weights(&b.model));
    let c = fit(&TrainConfig { seed: 9, ..cfg }, &set, &train, &val, 1).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn one_small_sgd_step_lowers_the_loss() {
    // Long enough that the last feature map keeps several positions for a batch of one.
    let set = toy_set_len(1, 2, 8000);
    let cfg = TrainConfig { optimizer: OptimizerConfig::sgd(1e-4), ..TrainConfig::for_arch(arch_with_len(0.0, 8000)) };
    let mut model = init_model(&cfg, 3, 0).unwrap();
    let mut opt = cfg.optimizer.build();
    let (x, y) = set.batch(&[1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let before = train_step(&mut model, opt.as_mut(), x.clone(), &y, &mut rng).unwrap().loss;
    let after = train_step(&mut model, opt.as_mut(), x, &y, &mut rng).unwrap().loss;
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn divergence_reports_epoch_and_batch() {
    let set = toy_set(4, 3);
    let mut cfg = config(3);
    cfg.optimizer.lr = 1e30;
    let err = fit(&cfg, &set, &(0..12).collect::<Vec<_>>(), &[], 0).unwrap_err();
    match err {
        LidError::Diverged { epoch, batch, .. } => assert!(epoch < 3 && batch < 2, "{epoch} {batch}"),
        other => panic!("expected divergence, got {other}"),
    }
    let plan = make_folds(&toy_manifest(&set), 2, 0).unwrap();
    let err = train_fold(&cfg, &set, &plan, 1).unwrap_err();
    assert!(matches!(err, LidError::Fold { fold: 1, .. }));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn overlapping_validation_is_rejected() {
    let set = toy_set(2, 0);
    assert!(matches!(fit(&config(1), &set, &[0, 1, 2], &[2], 0), Err(LidError::InvalidState(_))));
}

#[test]
fn eval_mode_is_deterministic_and_batch_independent() {
    let set = toy_set(5, 4);
    let r = fit(&config(1), &set, &(0..10).collect::<Vec<_>>(), &[], 0).unwrap();
    let all: Vec<usize> = (0..15).collect();
    let (x, _) = set.batch(&all).unwrap();
    let a = r.model.predict(x.clone()).unwrap();
    let b = r.model.predict(x).unwrap();
    assert_eq!(a.data(), b.data());
    let single: Vec<usize> = all.iter().flat_map(|&i| predict(&r.model, &set, &[i]).unwrap()).collect();
    assert_eq!(single, predict(&r.model, &set, &all).unwrap());
}

#[test]
fn perfect_and_constant_predictors() {
    let mut perfect = Confusion::new(6);
    let mut constant = Confusion::new(6);
    for c in 0..6 {
        for _ in 0..300 {
            perfect.add(c, c);
            constant.add(c, 0);
        }
    }
    assert_eq!(perfect.accuracy(), 1.0);
    assert!((constant.accuracy() - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(perfect.row_sums(), vec![300; 6]);
    assert_eq!(constant.row_sums(), vec![300; 6]);
    let p = confusion_to_percent(&perfect).unwrap();
    for (i, row) in p.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v, if i == j { 100.0 } else { 0.0 });
        }
    }
    assert_eq!(constant.precision()[0], Some(1.0 / 6.0));
    assert_eq!(constant.precision()[1], None);
    assert_eq!(constant.recall()[0], Some(1.0));
}

#[test]
fn percentages_and_asterisk_rule() {
    let mut c = Confusion::new(6);
    c.counts[0] = vec![299, 1, 0, 0, 0, 0];
    for i in 1..6 {
        c.counts[i][i] = 10;
    }
    let p = confusion_to_percent(&c).unwrap();
    assert!((p[0][0] - 99.666_666_666_666_67).abs() < 1e-9);
    assert!((p[0][1] - 0.333_333_333_333_333_3).abs() < 1e-9);
    assert_eq!(render_percent_cell(p[0][0]), "99.67");
    assert_eq!(render_percent_cell(p[0][1]), "0.33");
    assert_eq!(render_percent_cell(0.04), "*");
    assert_eq!(render_percent_cell(0.0), "0.00");
    assert_eq!(render_percent_cell(0.1), "0.10");
    c.counts[2][2] = 0;
    assert!(matches!(confusion_to_percent(&c), Err(LidError::InvalidArgument(_))));
}

#[test]
fn spread_of_two_folds() {
    let s = spread(&[0.9, 1.0]);
    assert!((s.mean - 0.95).abs() < 1e-12);
    assert!((s.std_population - 0.05).abs() < 1e-12);
    assert!((s.std_sample - 0.05 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(spread(&[0.7; 5]).std_population, 0.0);
}

#[test]
fn aggregate_trace_matches_mean_for_equal_folds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let folds: Vec<Confusion> = (0..5)
        .map(|_| {
            let mut c = Confusion::new(4);
            for t in 0..4 {
                for _ in 0..25 {
                    c.add(t, if rng.random_bool(0.8) { t } else { rng.random_range(0..4) });
                }
            }
            c
        })
        .collect();
    let r = EvalReport::from_folds(vec!["w".into(), "x".into(), "y".into(), "z".into()], &folds).unwrap();
    let trace = r.confusion.trace() as f64 / r.confusion.total() as f64;
    assert!((r.mean_accuracy - trace).abs() < 1e-9);
    assert_eq!(r.confusion.row_sums(), vec![125; 4]);
}

#[test]
fn cross_validation_writes_a_complete_run() {
    let set = toy_set(6, 6);
    let manifest = toy_manifest(&set);
    let mut cfg = config(3);
    cfg.folds.k = 3;
    cfg.workers = 2;
    let plan = make_folds(&manifest, 3, cfg.folds.seed).unwrap();
    let cv = cross_validate(&cfg, &set, &manifest.languages, &plan).unwrap();
    assert_eq!(cv.report.fold_accuracies.len(), 3);
    for (run, c) in cv.folds.iter().zip(&cv.confusions) {
        let mut per = [0u64; 3];
        for &i in &run.val_indices {
            per[set.labels[i]] += 1;
            assert!(!run.train_indices.contains(&i));
        }
        assert_eq!(c.row_sums(), per.to_vec());
        assert_eq!(run.history.len(), 3);
    }
    let serial = cross_validate(&TrainConfig { workers: 1, ..cfg.clone() }, &set, &manifest.languages, &plan).unwrap();
    assert_eq!(serial.report, cv.report);

    let dir = tempfile::tempdir().unwrap();
    let report = write_run(dir.path(), &cfg, &cv).unwrap();
    assert_eq!(load_report(dir.path()).unwrap(), report);
    let csv = std::fs::read_to_string(dir.path().join(CONFUSION_CSV)).unwrap();
    let sums: Vec<u64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()).sum())
        .collect();
    assert_eq!(sums, vec![6, 6, 6]);
    let txt = std::fs::read_to_string(dir.path().join(REPORT_TXT)).unwrap();
    assert!(txt.contains("fold") && txt.contains("mean"));

    let ckpt = dir.path().join(&report.folds[0].checkpoint);
    let val = &cv.folds[0].val_indices;
    assert_eq!(evaluate_checkpoint(&ckpt, &cfg.model, &set, val).unwrap(), evaluate(&cv.folds[0].model, &set, val).unwrap());
    let other = ArchConfig::Conv1d(Arch1DConfig { first_layer_filters: 5, input_len: LEN, num_classes: 3, ..Default::default() });
    assert!(matches!(evaluate_checkpoint(&ckpt, &other, &set, val), Err(LidError::InvalidCheckpoint(_))));
}

#[test]
fn mixup_applies_to_images_by_default_only() {
    let mut c1 = TrainConfig::for_arch(tiny_arch(0.1));
    c1.mixup.enabled = true;
    assert!(!c1.mixup_active());
    c1.mixup.waveform = true;
    assert!(c1.mixup_active());
    let mut c2 = TrainConfig::for_arch(ArchConfig::Conv2d(Arch2DConfig::default()));
    c2.mixup.enabled = true;
    assert!(c2.mixup_active());
}

#[test]
fn config_roundtrips_through_toml() {
    let mut cfg = TrainConfig::for_arch(ArchConfig::preset("2d-attn-gru").unwrap());
    cfg.mixup.enabled = true;
    cfg.optimizer = OptimizerConfig::sgd(0.01);
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(toml::from_str::<TrainConfig>(&text).unwrap(), cfg);
    assert!(toml::from_str::<TrainConfig>("epochs = 3\nbogus = 1\n").is_err());
    let partial: TrainConfig = toml::from_str("epochs = 3\n[model]\narch = \"2d\"\nimage_size = 64\n").unwrap();
    assert_eq!(partial.epochs, 3);
    assert_eq!(partial.batch_size, 32);
    assert!(partial.validate().is_err(), "feature size must follow the model");
}
