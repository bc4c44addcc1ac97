//! Trains a small 1D model with k-fold cross-validation on a synthetic corpus
//! and writes checkpoints and reports.
//!
//! `cargo run --release --example cross_validate [OUT_DIR]`

use lidf::dataset::{make_folds, synth_corpus, SynthSpec};
use lidf::features::MelConfig;
use lidf::models::{Arch1DConfig, ArchConfig};
use lidf::train::{cross_validate, load_features, write_run, TrainConfig};

fn main() -> lidf::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("lidf-cv"));
    let corpus = synth_corpus(out.join("corpus"), &SynthSpec { n_classes: 3, n_per_class: 16, seed: 2, ..Default::default() })?;

    let arch = ArchConfig::Conv1d(Arch1DConfig { first_layer_filters: 4, num_classes: 3, ..Default::default() });
    let config = TrainConfig { epochs: 20, batch_size: 8, ..TrainConfig::for_arch(arch) };
    let (set, _) = load_features(&corpus, &config.model, &MelConfig::default(), None, 1)?;
    let plan = make_folds(&corpus, 3, config.folds.seed)?;

    let cv = cross_validate(&config, &set, &corpus.languages, &plan)?;
    for run in &cv.folds {
        let last = run.history.last().expect("at least one epoch");
        println!("fold {}: best epoch {:?}, final loss {:.3}", run.fold, run.best_epoch, last.train_loss);
    }
    let report = write_run(out.join("run"), &config, &cv)?;
    println!("{}", report.render());
    Ok(())
}
