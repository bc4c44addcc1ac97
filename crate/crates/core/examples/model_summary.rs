//! Prints the layer table of every built-in architecture.
//!
//! `cargo run --example model_summary [1d|2d|2d-attn-gru]`

use lidf::models::{ArchConfig, Model};

fn main() -> lidf::Result<()> {
    let ids: Vec<String> = match std::env::args().nth(1) {
        Some(id) => vec![id],
        None => ["1d", "2d", "2d-attn-gru"].map(String::from).to_vec(),
    };
    for id in ids {
        let model = Model::<f32>::seeded(&ArchConfig::preset(&id)?, 0)?;
        println!("{}\n", model.summarize()?);
    }
    Ok(())
}
