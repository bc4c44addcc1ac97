//! Random hyper-parameter search over a small 1D space, with one trial forced
//! to diverge. Re-running with the same output directory resumes the search.
//!
//! `cargo run --release --example random_search [OUT_DIR]`

use std::collections::BTreeMap;

use lidf::dataset::{synth_corpus, SynthSpec};
use lidf::hpo::{report_search, run_search, Dimension, ManifestFeatures, SearchOptions, SearchSpace};
use lidf::models::{Arch1DConfig, ArchConfig};
use lidf::train::{FoldConfig, TrainConfig};

fn main() -> lidf::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("lidf-search"));
    let corpus = synth_corpus(out.join("corpus"), &SynthSpec { n_classes: 3, n_per_class: 12, seed: 3, ..Default::default() })?;

    let mut dimensions = BTreeMap::new();
    dimensions.insert("filters".to_string(), Dimension::Choice(vec![2.0, 4.0]));
    dimensions.insert("dropout".to_string(), Dimension::Choice(vec![0.05, 0.1, 0.25]));
    dimensions.insert("lr".to_string(), Dimension::Range { min: 1e-4, max: 1e-2, log: true });
    let space = SearchSpace { arch: "1d".into(), dimensions };

    let arch = ArchConfig::Conv1d(Arch1DConfig { num_classes: 3, ..Default::default() });
    let base = TrainConfig { batch_size: 8, folds: FoldConfig { k: 3, seed: 0 }, ..TrainConfig::for_arch(arch) };
    let opts = SearchOptions { trials: 4, epochs: 8, seed: 1, fault_trial: Some(2), ..Default::default() };
    let source = ManifestFeatures::new(&corpus, None, 1);

    let results = run_search(&space, &base, &opts, &corpus, &source, out.join("search"))?;
    for r in &results {
        println!("trial {} {:?} {:?} -> {:?}", r.trial, r.status, r.choices, r.mean_accuracy);
    }
    println!("{}", report_search(&results)?.render());
    Ok(())
}
