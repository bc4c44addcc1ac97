//! Turns one synthetic clip into a 128x128 log-Mel image and saves it as PNG.
//!
//! `cargo run --example mel_image [OUT.png]`

use lidf::audio::{prepare, AudioClip};
use lidf::dataset::{render_clip, signature};
use lidf::features::{log_mel, render_image, write_png, MelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lidf::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("lidf-mel.png"));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let raw = AudioClip::new(render_clip(&signature(2), 6.5, 16000, &mut rng), 16000);
    // Resample to 8 kHz and pad to 10 s.
    let clip = prepare(&raw)?;
    let config = MelConfig::default();
    let spec = log_mel(&clip, &config)?;
    let (lo, hi) = spec.values.iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("{} mels x {} frames, {lo:.1}..{hi:.1} dB", spec.n_mels, spec.n_frames);
    let image = render_image(&spec, config.image_size)?;
    write_png(&image, &out)?;
    println!("saved {}x{} image to {}", image.size(), image.size(), out.display());
    Ok(())
}
