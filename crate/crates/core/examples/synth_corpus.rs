//! Writes a small synthetic corpus, rescans it from disk and saves the manifest.
//!
//! `cargo run --example synth_corpus [OUT_DIR]`

use lidf::dataset::{scan_corpus, synth_corpus, Manifest, SynthSpec};

fn main() -> lidf::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("lidf-synth"));
    let spec = SynthSpec { n_classes: 4, n_per_class: 5, ..Default::default() };
    let written = synth_corpus(&out, &spec)?;
    println!("wrote {} clips under {}", written.entries.len(), out.display());

    let (scanned, report) = scan_corpus(&out, &written.languages)?;
    println!("scan: {:?} per class, {report:?}", scanned.class_counts());
    let path = out.join("manifest.tsv");
    scanned.write(&path)?;
    let back = Manifest::read(&path)?;
    assert_eq!(back, scanned);
    println!("manifest round-trips through {}", path.display());
    Ok(())
}
