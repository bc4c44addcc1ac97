use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::space::{sample_config, Choices, SearchSpace};
use crate::dataset::{make_folds, Manifest};
use crate::error::{LidError, Result};
use crate::features::FeatureCache;
use crate::train::{evaluate, train_fold, FeatureSet, TrainConfig};

pub const TRIALS_LOG: &str = "trials.jsonl";
pub const DEFAULT_TRIAL_EPOCHS: usize = 10;
/// Learning rate forced onto [`SearchOptions::fault_trial`].
pub const FAULT_LR: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Done,
    Diverged,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub choices: Choices,
    pub config: TrainConfig,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: Option<f64>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub trials: usize,
    /// Epochs per trial, overriding the base config.
    pub epochs: usize,
    /// The single fold each trial trains and validates on.
    pub fold: usize,
    pub seed: u64,
    pub workers: usize,
    /// Trial whose learning rate is replaced by [`FAULT_LR`], to exercise
    /// divergence handling.
    pub fault_trial: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { trials: 10, epochs: DEFAULT_TRIAL_EPOCHS, fold: 0, seed: 0, workers: 1, fault_trial: None }
    }
}

/// Supplies model inputs for a trial's configuration.
pub trait FeatureSource: Sync {
    fn features(&self, config: &TrainConfig) -> Result<Arc<FeatureSet>>;
}

impl<F> FeatureSource for F
where
    F: Fn(&TrainConfig) -> Result<Arc<FeatureSet>> + Sync,
{
    fn features(&self, config: &TrainConfig) -> Result<Arc<FeatureSet>> {
        self(config)
    }
}

/// Loads manifest features once per distinct input format.
pub struct ManifestFeatures<'a> {
    pub manifest: &'a Manifest,
    pub cache: Option<FeatureCache>,
    pub workers: usize,
    memo: Mutex<HashMap<String, Arc<FeatureSet>>>,
}

impl<'a> ManifestFeatures<'a> {
    pub fn new(manifest: &'a Manifest, cache: Option<FeatureCache>, workers: usize) -> Self {
        Self { manifest, cache, workers, memo: Mutex::new(HashMap::new()) }
    }
}

impl FeatureSource for ManifestFeatures<'_> {
    fn features(&self, config: &TrainConfig) -> Result<Arc<FeatureSet>> {
        let key = format!("{:?}|{:?}", config.model.input(), config.features);
        let mut memo = self.memo.lock().expect("feature memo poisoned");
        if let Some(set) = memo.get(&key) {
            return Ok(Arc::clone(set));
        }
        let (set, _) =
            crate::train::load_features(self.manifest, &config.model, &config.features, self.cache.as_ref(), self.workers)?;
        let set = Arc::new(set);
        memo.insert(key, Arc::clone(&set));
        Ok(set)
    }
}

/// Config and training seed for every trial id, fixed by the master seed
/// alone.
pub fn plan_trials(space: &SearchSpace, base: &TrainConfig, opts: &SearchOptions) -> Result<Vec<(TrainConfig, Choices, u64)>> {
    (0..opts.trials)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let (mut config, choices) = sample_config(space, base, &mut rng)?;
            let seed = rng.next_u64();
            config.seed = seed;
            config.epochs = opts.epochs;
            if opts.fault_trial == Some(i) {
                config.optimizer.lr = FAULT_LR;
            }
            Ok((config, choices, seed))
        })
        .collect()
}

/// Complete records from an existing log; a torn final line is ignored.
pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    let path = path.as_ref();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(LidError::io(path, e)),
    };
    let mut out = Vec::new();
    let mut offset = 0u64;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let complete = line.ends_with('\n');
        match serde_json::from_str::<TrialResult>(line.trim_end()) {
            Ok(r) if complete => out.push(r),
            _ if i + 1 == lines.len() => log::warn!("ignoring incomplete final record in {}", path.display()),
            Err(e) => return Err(LidError::Parse { offset, message: format!("{}: {e}", path.display()) }),
            Ok(_) => unreachable!("only the last line can lack a newline"),
        }
        offset += line.len() as u64;
    }
    Ok(out)
}

struct Appender {
    path: PathBuf,
    file: Mutex<fs::File>,
}

impl Appender {
    fn open(path: PathBuf) -> Result<Self> {
        let existing = fs::read(&path).unwrap_or_default();
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| LidError::io(&path, e))?;
        if existing.last().is_some_and(|&b| b != b'\n') {
            // Drop the torn record left by an interrupted write.
            let keep = existing.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            file.set_len(keep as u64).map_err(|e| LidError::io(&path, e))?;
        }
        Ok(Self { path, file: Mutex::new(file) })
    }

    fn append(&self, r: &TrialResult) -> Result<()> {
        let mut line = serde_json::to_string(r).map_err(|e| LidError::InvalidState(e.to_string()))?;
        line.push('\n');
        let mut f = self.file.lock().expect("trial log poisoned");
        f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(|e| LidError::io(&self.path, e))
    }
}

fn run_trial(
    trial: usize,
    plan: &(TrainConfig, Choices, u64),
    manifest: &Manifest,
    source: &dyn FeatureSource,
    fold: usize,
) -> TrialResult {
    let (config, choices, seed) = plan;
    let start = Instant::now();
    let outcome = (|| -> Result<f64> {
        let set = source.features(config)?;
        let folds = make_folds(manifest, config.folds.k, config.folds.seed)?;
        let run = train_fold(config, &set, &folds, fold)?;
        Ok(evaluate(&run.model, &set, &run.val_indices)?.accuracy())
    })();
    let (status, accuracies, message) = match outcome {
        Ok(a) => (TrialStatus::Done, vec![a], None),
        Err(e) if e.is_divergence() => (TrialStatus::Diverged, Vec::new(), Some(e.to_string())),
        Err(e) => (TrialStatus::Error, Vec::new(), Some(e.to_string())),
    };
    if let Some(m) = &message {
        log::warn!("trial {trial}: {m}");
    }
    TrialResult {
        trial,
        seed: *seed,
        status,
        choices: choices.clone(),
        config: config.clone(),
        mean_accuracy: (!accuracies.is_empty()).then(|| accuracies.iter().sum::<f64>() / accuracies.len() as f64),
        accuracies,
        wall_seconds: start.elapsed().as_secs_f64(),
        message,
    }
}

/// Runs trials `0..opts.trials` that are not yet recorded in
/// `out_dir/trials.jsonl`, appending each result as it finishes. Returns all
/// records sorted by trial id.
pub fn run_search(
    space: &SearchSpace,
    base: &TrainConfig,
    opts: &SearchOptions,
    manifest: &Manifest,
    source: &dyn FeatureSource,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<TrialResult>> {
    if opts.trials == 0 {
        return Err(LidError::InvalidArgument("need at least one trial".into()));
    }
    if opts.workers == 0 {
        return Err(LidError::InvalidArgument("workers must be at least 1".into()));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| LidError::io(out_dir, e))?;
    let log_path = out_dir.join(TRIALS_LOG);
    let previous = read_trials(&log_path)?;
    let plans = plan_trials(space, base, opts)?;
    let done: std::collections::HashSet<usize> = previous.iter().map(|r| r.trial).collect();
    let pending: Vec<usize> = (0..opts.trials).filter(|i| !done.contains(i)).collect();
    if !done.is_empty() {
        log::info!("resuming: {} trials recorded, {} to run", done.len(), pending.len());
    }
    let appender = Appender::open(log_path)?;
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::new());
    let work = || -> Result<()> {
        loop {
            let k = next.fetch_add(1, Ordering::SeqCst);
            let Some(&trial) = pending.get(k) else { return Ok(()) };
            let r = run_trial(trial, &plans[trial], manifest, source, opts.fold);
            appender.append(&r)?;
            results.lock().expect("results poisoned").push(r);
        }
    };
    std::thread::scope(|s| -> Result<()> {
        let handles: Vec<_> = (0..opts.workers.min(pending.len()).max(1)).map(|_| s.spawn(work)).collect();
        for h in handles {
            h.join().expect("search worker panicked")?;
        }
        Ok(())
    })?;
    let mut all = previous;
    all.extend(results.into_inner().expect("results poisoned"));
    all.sort_by_key(|r| r.trial);
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub dimension: String,
    pub value: f64,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub done: usize,
    pub diverged: usize,
    pub errors: usize,
    pub groups: Vec<GroupSummary>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Accuracy samples of completed trials grouped by each dimension's value.
pub fn report_search(results: &[TrialResult]) -> Result<SearchReport> {
    let done: Vec<&TrialResult> = results.iter().filter(|r| r.status == TrialStatus::Done).collect();
    if done.is_empty() {
        return Err(LidError::EmptyReport);
    }
    let mut by: BTreeMap<(String, u64), (f64, Vec<f64>)> = BTreeMap::new();
    for r in &done {
        let acc = r.mean_accuracy.expect("done trials carry an accuracy");
        for (dim, &v) in &r.choices {
            // Order by the value's numeric rank; to_bits on non-negative floats is monotone.
            let key = (dim.clone(), if v >= 0.0 { v.to_bits() } else { !v.to_bits() >> 1 });
            by.entry(key).or_insert_with(|| (v, Vec::new())).1.push(acc);
        }
    }
    let groups = by
        .into_iter()
        .map(|((dimension, _), (value, samples))| {
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            GroupSummary {
                dimension,
                value,
                count: samples.len(),
                mean: samples.iter().sum::<f64>() / samples.len() as f64,
                median: median(&sorted),
                min: sorted[0],
                max: sorted[sorted.len() - 1],
                samples,
            }
        })
        .collect();
    let count = |s| results.iter().filter(|r| r.status == s).count();
    Ok(SearchReport { done: done.len(), diverged: count(TrialStatus::Diverged), errors: count(TrialStatus::Error), groups })
}

impl SearchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dimension,value,count,mean,median,min,max,samples\n");
        for g in &self.groups {
            let samples: Vec<String> = g.samples.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                g.dimension,
                g.value,
                g.count,
                g.mean,
                g.median,
                g.min,
                g.max,
                samples.join(";")
            ));
        }
        out
    }

    pub fn render(&self) -> String {
        // Continuous dimensions yield long values; the CSV keeps them exact.
        let short = |v: f64| if v == v.trunc() || v.abs() >= 0.01 { format!("{v}") } else { format!("{v:.3e}") };
        let mut out = format!("trials: {} done, {} diverged, {} failed\n\n", self.done, self.diverged, self.errors);
        out.push_str(&format!(
            "{:<14} {:>10} {:>5} {:>8} {:>8} {:>8} {:>8}\n",
            "dimension", "value", "n", "mean", "median", "min", "max"
        ));
        for g in &self.groups {
            out.push_str(&format!(
                "{:<14} {:>10} {:>5} {:>7.2}% {:>7.2}% {:>7.2}% {:>7.2}%\n",
                g.dimension,
                short(g.value),
                g.count,
                100.0 * g.mean,
                100.0 * g.median,
                100.0 * g.min,
                100.0 * g.max
            ));
        }
        out
    }
}
