use std::path::Path;

use lidf_tensor::{Graph, Mode, Optimizer, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Confusion, EvalReport, FeatureSet, TrainConfig};
use crate::augment::mixup_batch;
use crate::checkpoint::load_checkpoint;
use crate::dataset::FoldPlan;
use crate::error::{LidError, Result};
use crate::models::{ArchConfig, Model};

const EVAL_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Purpose {
    Init = 0,
    Shuffle = 1,
    Dropout = 2,
    Mixup = 3,
}

/// Independent ChaCha stream per (fold, purpose) under one master seed.
fn stream(seed: u64, fold: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((fold as u64) << 8) | purpose as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub loss: f64,
    /// Rows whose argmax matches the argmax of the target.
    pub correct: usize,
}

fn argmax(row: &[f32]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// One forward/backward/update on a batch with soft targets `[B, C]`. A
/// non-finite loss is returned without touching the parameters.
pub fn train_step<R: Rng + ?Sized>(
    model: &mut Model<f32>,
    optimizer: &mut dyn Optimizer<f32>,
    x: Tensor<f32>,
    targets: &Tensor<f32>,
    rng: &mut R,
) -> Result<StepOutput> {
    let classes = targets.shape()[1];
    let (grads, updates, loss, correct) = {
        let mut g = Graph::new(&model.store);
        let xv = g.input(x);
        let logits = model.forward(&mut g, xv, Mode::Train, rng)?;
        let l = g.softmax_cross_entropy(logits, targets)?;
        let loss = g.value(l).item() as f64;
        let correct = g
            .value(logits)
            .data()
            .chunks(classes)
            .zip(targets.data().chunks(classes))
            .filter(|(z, t)| argmax(z) == argmax(t))
            .count();
        if !loss.is_finite() {
            return Ok(StepOutput { loss, correct });
        }
        (g.backward(l)?, g.take_buffer_updates(), loss, correct)
    };
    model.store.accumulate(&grads)?;
    model.store.apply_buffer_updates(updates);
    optimizer.step(&mut model.store)?;
    Ok(StepOutput { loss, correct })
}

fn params_finite(model: &Model<f32>) -> bool {
    model.store.params().iter().all(|p| p.tensor.data().iter().all(|v| v.is_finite()))
}

/// Predictions, or `None` as soon as a batch yields a non-finite logit.
fn predict_finite(model: &Model<f32>, set: &FeatureSet, indices: &[usize]) -> Result<Option<Vec<usize>>> {
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let (x, _) = set.batch(chunk)?;
        let logits = model.predict(x)?;
        if logits.data().iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        out.extend(logits.data().chunks(set.num_classes).map(argmax));
    }
    Ok(Some(out))
}

/// Eval-mode predictions for `indices` of `set`, in order.
pub fn predict(model: &Model<f32>, set: &FeatureSet, indices: &[usize]) -> Result<Vec<usize>> {
    predict_finite(model, set, indices)?.ok_or_else(|| LidError::InvalidState("model produced non-finite logits".into()))
}

fn confusion(set: &FeatureSet, indices: &[usize], predicted: Vec<usize>) -> Confusion {
    let mut c = Confusion::new(set.num_classes);
    for (&i, p) in indices.iter().zip(predicted) {
        c.add(set.labels[i], p);
    }
    c
}

pub fn evaluate(model: &Model<f32>, set: &FeatureSet, indices: &[usize]) -> Result<Confusion> {
    if model.arch.num_classes() != set.num_classes {
        return Err(LidError::InvalidArgument(format!(
            "model has {} classes, data has {}",
            model.arch.num_classes(),
            set.num_classes
        )));
    }
    Ok(confusion(set, indices, predict(model, set, indices)?))
}

/// [`evaluate`] on a saved checkpoint that must match `arch`.
pub fn evaluate_checkpoint(path: impl AsRef<Path>, arch: &ArchConfig, set: &FeatureSet, indices: &[usize]) -> Result<Confusion> {
    evaluate(&load_checkpoint(path, Some(arch))?, set, indices)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    /// Weights from the epoch with the best validation accuracy (the last
    /// epoch when there is no validation data).
    pub model: Model<f32>,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// The untrained model [`fit`] starts from for `fold`.
pub fn init_model(config: &TrainConfig, num_classes: usize, fold: usize) -> Result<Model<f32>> {
    let mut arch = config.model.clone();
    arch.set_num_classes(num_classes);
    Model::new(&arch, &mut stream(config.seed, fold, Purpose::Init))
}

/// Trains a fresh model on `train`, validating on `val` after every epoch.
pub fn fit(config: &TrainConfig, set: &FeatureSet, train: &[usize], val: &[usize], fold: usize) -> Result<FoldRun> {
    config.validate()?;
    if train.is_empty() {
        return Err(LidError::InvalidArgument("no training examples".into()));
    }
    let train_set: std::collections::HashSet<_> = train.iter().collect();
    if val.iter().any(|i| train_set.contains(i)) {
        return Err(LidError::InvalidState("validation indices overlap the training set".into()));
    }
    let mut model = init_model(config, set.num_classes, fold)?;
    let mut optimizer = config.optimizer.build();
    let mut shuffle_rng = stream(config.seed, fold, Purpose::Shuffle);
    let mut dropout_rng = stream(config.seed, fold, Purpose::Dropout);
    let mut mixup_rng = stream(config.seed, fold, Purpose::Mixup);
    let mixup = config.mixup_active();

    let mut order = train.to_vec();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Model<f32>)> = None;
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = set.batch(idx)?;
            let (x, y_soft) = if mixup {
                let (mx, my, _) = mixup_batch(&x, &y, &mut mixup_rng, &config.mixup)?;
                (mx, my)
            } else {
                (x, y.clone())
            };
            let out = train_step(&mut model, optimizer.as_mut(), x, &y_soft, &mut dropout_rng)?;
            if !out.loss.is_finite() || !params_finite(&model) {
                return Err(LidError::Diverged { epoch, batch, loss: out.loss });
            }
            loss_sum += out.loss * idx.len() as f64;
            correct += out.correct;
            seen += idx.len();
        }
        let val_accuracy = if val.is_empty() {
            None
        } else {
            let batches = order.len().div_ceil(config.batch_size);
            let predicted = predict_finite(&model, set, val)?
                .ok_or(LidError::Diverged { epoch, batch: batches - 1, loss: f64::NAN })?;
            Some(confusion(set, val, predicted).accuracy())
        };
        log::debug!("fold {fold} epoch {epoch}: loss {:.4} val {val_accuracy:?}", loss_sum / seen as f64);
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            val_accuracy,
        });
        let score = val_accuracy.unwrap_or(f64::NEG_INFINITY);
        if val.is_empty() || best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (best_epoch, model) = match best {
        Some((_, e, m)) => (Some(e), m),
        None => (None, model),
    };
    Ok(FoldRun { fold, model, best_epoch, history, train_indices: train.to_vec(), val_indices: val.to_vec() })
}

pub fn train_fold(config: &TrainConfig, set: &FeatureSet, plan: &FoldPlan, fold: usize) -> Result<FoldRun> {
    if fold >= plan.k {
        return Err(LidError::InvalidArgument(format!("fold {fold} out of range for k = {}", plan.k)));
    }
    if plan.assignments.len() != set.len() {
        return Err(LidError::InvalidArgument(format!(
            "fold plan covers {} entries but the feature set has {}",
            plan.assignments.len(),
            set.len()
        )));
    }
    let (train, val) = plan.split(fold);
    fit(config, set, &train, &val, fold).map_err(|e| LidError::Fold { fold, source: Box::new(e) })
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub folds: Vec<FoldRun>,
    pub confusions: Vec<Confusion>,
    pub report: EvalReport,
}

/// Trains and evaluates every fold; up to `config.workers` folds at once.
pub fn cross_validate(config: &TrainConfig, set: &FeatureSet, languages: &[String], plan: &FoldPlan) -> Result<CrossValidation> {
    let run = |fold: usize| -> Result<(FoldRun, Confusion)> {
        let r = train_fold(config, set, plan, fold)?;
        let c = evaluate(&r.model, set, &r.val_indices).map_err(|e| LidError::Fold { fold, source: Box::new(e) })?;
        Ok((r, c))
    };
    let folds: Vec<usize> = (0..plan.k).collect();
    let workers = config.workers.clamp(1, plan.k);
    let results: Vec<Result<(FoldRun, Confusion)>> = if workers == 1 {
        folds.into_iter().map(run).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = folds
                .chunks(plan.k.div_ceil(workers))
                .map(|part| s.spawn(move || part.iter().map(|&f| run(f)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("fold worker panicked")).collect()
        })
    };
    let (mut runs, mut confusions) = (Vec::new(), Vec::new());
    for r in results {
        let (run, c) = r?;
        runs.push(run);
        confusions.push(c);
    }
    let report = EvalReport::from_folds(languages.to_vec(), &confusions)?;
    Ok(CrossValidation { folds: runs, confusions, report })
}
