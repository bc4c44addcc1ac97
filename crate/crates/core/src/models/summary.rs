use std::fmt;

use lidf_tensor::{ParamStore, Scalar};
use serde::Serialize;

use super::layers::LayerInfo;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub kind: String,
    pub output_shape: Vec<usize>,
    /// Convolution, dense and recurrent weights.
    pub params: usize,
    /// Batch-norm scale and shift.
    pub norm_params: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub arch: String,
    pub rows: Vec<SummaryRow>,
    pub total_params: usize,
    pub total_norm_params: usize,
    pub trainable: usize,
}

impl Summary {
    pub(crate) fn new<T: Scalar>(
        arch: &str,
        store: &ParamStore<T>,
        layers: &[LayerInfo],
        trace: &[(String, Vec<usize>)],
    ) -> Self {
        let count = |ids: &[lidf_tensor::ParamId]| ids.iter().map(|&p| store.param(p).len()).sum::<usize>();
        let rows: Vec<SummaryRow> = layers
            .iter()
            .map(|l| SummaryRow {
                name: l.name.clone(),
                kind: l.kind.to_string(),
                output_shape: trace.iter().find(|(n, _)| *n == l.name).map(|(_, s)| s.clone()).unwrap_or_default(),
                params: count(&l.weights),
                norm_params: count(&l.norm),
            })
            .collect();
        let total_params = rows.iter().map(|r| r.params).sum();
        let total_norm_params = rows.iter().map(|r| r.norm_params).sum();
        Self { arch: arch.to_string(), rows, total_params, total_norm_params, trainable: store.trainable_count() }
    }

    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Weight counts of every row of the given kind prefix, in order.
    pub fn params_of(&self, kind_prefix: &str) -> Vec<usize> {
        self.rows.iter().filter(|r| r.kind.starts_with(kind_prefix)).map(|r| r.params).collect()
    }
}

fn shape_str(s: &[usize]) -> String {
    let parts: Vec<String> = s.iter().map(usize::to_string).collect();
    format!("({})", parts.join(", "))
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        let kind_w = self.rows.iter().map(|r| r.kind.len()).max().unwrap_or(4).max(4);
        writeln!(f, "model {}", self.arch)?;
        writeln!(f, "{:<name_w$}  {:<kind_w$}  {:<18}  {:>12}  {:>8}", "layer", "type", "output", "params", "norm")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<name_w$}  {:<kind_w$}  {:<18}  {:>12}  {:>8}",
                r.name,
                r.kind,
                shape_str(&r.output_shape),
                thousands(r.params),
                thousands(r.norm_params)
            )?;
        }
        writeln!(f, "{:<name_w$}  {:<kind_w$}  {:<18}  {:>12}  {:>8}", "total", "", "", thousands(self.total_params), thousands(self.total_norm_params))?;
        write!(f, "trainable parameters: {}", thousands(self.trainable))
    }
}
