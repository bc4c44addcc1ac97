//! Corpus manifests, stratified k-fold plans and a synthetic test corpus.

mod folds;
mod manifest;
mod scan;
mod synth;

pub use folds::{make_folds, FoldPlan, DEFAULT_K};
pub use manifest::{Manifest, ManifestEntry};
pub use scan::{scan_corpus, ScanReport};
pub use synth::{render_clip, signature, synth_corpus, Signature, SynthSpec};
