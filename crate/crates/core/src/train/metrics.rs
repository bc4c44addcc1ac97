use serde::{Deserialize, Serialize};

use crate::error::{LidError, Result};

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn merge(&mut self, other: &Confusion) -> Result<()> {
        if other.classes() != self.classes() {
            return Err(LidError::InvalidArgument(format!(
                "cannot merge {}-class and {}-class confusion matrices",
                self.classes(),
                other.classes()
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.row_sums().iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// Per predicted class; `None` when the class was never predicted.
    pub fn precision(&self) -> Vec<Option<f64>> {
        (0..self.classes())
            .map(|j| {
                let col: u64 = self.counts.iter().map(|r| r[j]).sum();
                (col > 0).then(|| self.counts[j][j] as f64 / col as f64)
            })
            .collect()
    }

    /// Per true class; `None` when the class has no samples.
    pub fn recall(&self) -> Vec<Option<f64>> {
        self.row_sums()
            .iter()
            .enumerate()
            .map(|(i, &n)| (n > 0).then(|| self.counts[i][i] as f64 / n as f64))
            .collect()
    }

    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("true\\predicted");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in labels.iter().zip(&self.counts) {
            out.push_str(l);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Row-normalised percentages.
pub fn confusion_to_percent(confusion: &Confusion) -> Result<Vec<Vec<f64>>> {
    confusion
        .counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: u64 = row.iter().sum();
            if n == 0 {
                return Err(LidError::InvalidArgument(format!("confusion row {i} is all zero")));
            }
            Ok(row.iter().map(|&v| 100.0 * v as f64 / n as f64).collect())
        })
        .collect()
}

/// Two decimals, or `*` for a nonzero share below 0.1%.
pub fn render_percent_cell(pct: f64) -> String {
    if pct > 0.0 && pct < 0.1 {
        "*".to_string()
    } else {
        format!("{pct:.2}")
    }
}

pub fn render_percent_matrix(percent: &[Vec<f64>], labels: &[String]) -> String {
    let cells: Vec<Vec<String>> = percent.iter().map(|r| r.iter().map(|&v| render_percent_cell(v)).collect()).collect();
    let width = labels
        .iter()
        .map(String::len)
        .chain(cells.iter().flatten().map(String::len))
        .max()
        .unwrap_or(1)
        .max(6);
    let mut out = format!("{:>width$}", "");
    for l in labels {
        out.push_str(&format!(" {l:>width$}"));
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(&cells) {
        out.push_str(&format!("{l:>width$}"));
        for c in row {
            out.push_str(&format!(" {c:>width$}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    pub mean: f64,
    pub std_population: f64,
    pub std_sample: f64,
}

pub fn spread(values: &[f64]) -> SpreadStats {
    let n = values.len() as f64;
    if values.is_empty() {
        return SpreadStats { mean: 0.0, std_population: 0.0, std_sample: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let std_sample = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    SpreadStats { mean, std_population: (ss / n).sqrt(), std_sample }
}

/// Cross-validated accuracy with the confusion matrix summed over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub languages: Vec<String>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_population: f64,
    pub std_sample: f64,
    pub confusion: Confusion,
    pub precision: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
}

impl EvalReport {
    pub fn from_folds(languages: Vec<String>, folds: &[Confusion]) -> Result<Self> {
        let mut confusion = Confusion::new(languages.len());
        for f in folds {
            confusion.merge(f)?;
        }
        let fold_accuracies: Vec<f64> = folds.iter().map(Confusion::accuracy).collect();
        let s = spread(&fold_accuracies);
        Ok(Self {
            languages,
            mean_accuracy: s.mean,
            std_population: s.std_population,
            std_sample: s.std_sample,
            fold_accuracies,
            precision: confusion.precision(),
            recall: confusion.recall(),
            confusion,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.fold_accuracies.iter().enumerate() {
            out.push_str(&format!("fold {i:<3} accuracy {:>7.2}%\n", 100.0 * a));
        }
        out.push_str(&format!(
            "mean      accuracy {:>7.2}%  std {:.2}% (population) {:.2}% (sample)\n\n",
            100.0 * self.mean_accuracy,
            100.0 * self.std_population,
            100.0 * self.std_sample
        ));
        let fmt = |v: &Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
        let w = self.languages.iter().map(String::len).max().unwrap_or(0).max(8);
        out.push_str(&format!("{:<w$} {:>9} {:>9}\n", "language", "precision", "recall"));
        for (i, l) in self.languages.iter().enumerate() {
            out.push_str(&format!("{l:<w$} {:>9} {:>9}\n", fmt(&self.precision[i]), fmt(&self.recall[i])));
        }
        out.push_str("\nconfusion (% of true class, rows true, columns predicted)\n");
        match confusion_to_percent(&self.confusion) {
            Ok(p) => out.push_str(&render_percent_matrix(&p, &self.languages)),
            Err(e) => out.push_str(&format!("unavailable: {e}\n")),
        }
        out
    }
}
