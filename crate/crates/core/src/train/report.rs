use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Confusion, CrossValidation, EpochRecord, EvalReport, TrainConfig};
use crate::checkpoint::save_checkpoint;
use crate::error::{LidError, Result};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub best_epoch: Option<usize>,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub history: Vec<EpochRecord>,
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub arch: String,
    pub mixup: bool,
    pub config: TrainConfig,
    pub folds: Vec<FoldSummary>,
    pub eval: EvalReport,
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "architecture {}  mixup {}  epochs {}  batch {}  seed {}\n\n",
            self.arch,
            if self.mixup { "yes" } else { "no" },
            self.config.epochs,
            self.config.batch_size,
            self.config.seed
        );
        out.push_str(&format!("{:<5} {:>6} {:>6} {:>10} {:>9}\n", "fold", "train", "val", "best epoch", "accuracy"));
        for f in &self.folds {
            let best = f.best_epoch.map_or("-".to_string(), |e| e.to_string());
            out.push_str(&format!(
                "{:<5} {:>6} {:>6} {:>10} {:>8.2}%\n",
                f.fold,
                f.train_size,
                f.val_size,
                best,
                100.0 * f.accuracy
            ));
        }
        out.push('\n');
        out.push_str(&self.eval.render());
        out
    }
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| LidError::io(path, e))
}

/// Saves per-fold checkpoints plus `report.json`, `report.txt` and
/// `confusion.csv` under `dir`.
pub fn write_run(dir: impl AsRef<Path>, config: &TrainConfig, cv: &CrossValidation) -> Result<RunReport> {
    let dir = dir.as_ref();
    let ckpt_dir = dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir).map_err(|e| LidError::io(&ckpt_dir, e))?;
    let mut folds = Vec::new();
    for (run, confusion) in cv.folds.iter().zip(&cv.confusions) {
        let rel = format!("{CHECKPOINT_DIR}/fold{}.lidf", run.fold);
        let extra = json!({ "fold": run.fold, "best_epoch": run.best_epoch, "accuracy": confusion.accuracy() });
        save_checkpoint(&run.model, extra, dir.join(&rel))?;
        folds.push(FoldSummary {
            fold: run.fold,
            train_size: run.train_indices.len(),
            val_size: run.val_indices.len(),
            best_epoch: run.best_epoch,
            accuracy: confusion.accuracy(),
            confusion: confusion.clone(),
            history: run.history.clone(),
            checkpoint: rel,
        });
    }
    let report = RunReport {
        arch: config.model.id().to_string(),
        mixup: config.mixup_active(),
        config: config.clone(),
        folds,
        eval: cv.report.clone(),
    };
    save_report(dir, &report)?;
    Ok(report)
}

pub fn save_report(dir: impl AsRef<Path>, report: &RunReport) -> Result<()> {
    let dir = dir.as_ref();
    let json = serde_json::to_string_pretty(report).map_err(|e| LidError::InvalidState(e.to_string()))?;
    write(dir.join(REPORT_JSON), json + "\n")?;
    write(dir.join(REPORT_TXT), report.render())?;
    write(dir.join(CONFUSION_CSV), report.eval.confusion.to_csv(&report.eval.languages))
}

pub fn load_report(dir: impl AsRef<Path>) -> Result<RunReport> {
    let path = dir.as_ref().join(REPORT_JSON);
    let text = fs::read_to_string(&path).map_err(|e| LidError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| LidError::Parse { offset: e.column() as u64, message: format!("{}: {e}", path.display()) })
}
