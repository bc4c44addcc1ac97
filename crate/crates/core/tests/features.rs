use std::f64::consts::PI;

use lidf::audio::{AudioClip, CLIP_LEN};
use lidf::features::*;
use lidf_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tone(freq: f64, n: usize) -> Vec<f32> {
    (0..n).map(|i| (0.5 * (2.0 * PI * freq * i as f64 / 8000.0).sin()) as f32).collect()
}

fn noise(n: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-0.5f32..0.5)).collect()
}

#[test]
fn zero_input_has_zero_power() {
    let p = stft_power(&vec![0.0; 4096], 256, 64).unwrap();
    assert!(p.data.iter().all(|&v| v == 0.0));
    assert_eq!(p.frames, 4096 / 64 + 1);
    assert_eq!(p.bins, 129);
}

#[test]
fn non_power_of_two_rejected() {
    assert!(stft_power(&vec![0.0; 4096], 1000, 64).is_err());
}

#[test]
fn bin_centered_sine_peaks_at_its_bin() {
    for k in [5usize, 40, 100] {
        let x = tone(k as f64 * 8000.0 / 256.0, 8192);
        let p = stft_power(&x, 256, 128).unwrap();
        for f in 2..p.frames - 2 {
            let argmax = (0..p.bins).max_by(|&a, &b| p.at(a, f).total_cmp(&p.at(b, f))).unwrap();
            assert_eq!(argmax, k, "frame {f}");
        }
    }
}

#[test]
fn parseval_with_hann_gain() {
    let (n_fft, hop) = (512, 128);
    let x = noise(40000, 3);
    let p = stft_power(&x, n_fft, hop).unwrap();
    // One-sided spectrum: interior bins stand for two conjugate bins.
    let spectral: f64 = (0..p.bins)
        .map(|k| {
            let c = if k == 0 || k == p.bins - 1 { 1.0 } else { 2.0 };
            c * (0..p.frames).map(|f| p.at(k, f)).sum::<f64>()
        })
        .sum::<f64>()
        / n_fft as f64;
    let w2: f64 = hann(n_fft).iter().map(|w| w * w).sum();
    let energy: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum();
    let expected = energy * w2 / hop as f64;
    assert!((spectral / expected - 1.0).abs() < 0.10, "{spectral} vs {expected}");
}

#[test]
fn mel_scale_closed_form() {
    assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-9);
    assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
    assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
}

#[test]
fn filters_are_triangles_within_support() {
    let fb = mel_filterbank(128, 1024, 8000, 0.0, 4000.0).unwrap();
    for m in 0..fb.n_mels {
        let row = fb.row(m);
        let (lo, hi) = (fb.edges[m], fb.edges[m + 2]);
        for (k, &w) in row.iter().enumerate() {
            let f = bin_hz(k, 1024, 8000);
            assert!(w >= 0.0);
            if f <= lo || f >= hi {
                assert_eq!(w, 0.0, "filter {m} leaks at {f} Hz");
            }
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        let argmaxes: Vec<usize> = (0..row.len()).filter(|&k| row[k] == peak).collect();
        assert_eq!(argmaxes.len(), 1, "filter {m}");
        let a = argmaxes[0];
        assert!(row[..=a].windows(2).all(|w| w[0] <= w[1]));
        assert!(row[a..].windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn filters_cover_interior_bins() {
    let fb = mel_filterbank(128, 1024, 8000, 0.0, 4000.0).unwrap();
    for k in 1..512 {
        let f = bin_hz(k, 1024, 8000);
        let total: f64 = (0..fb.n_mels).map(|m| fb.unnormalized(m, f)).sum();
        assert!(total > 0.0, "bin {k} uncovered");
    }
}

#[test]
fn too_many_mels_rejected() {
    assert!(mel_filterbank(400, 256, 8000, 0.0, 4000.0).is_err());
    assert!(mel_filterbank(10, 256, 8000, 0.0, 5000.0).is_err());
}

#[test]
fn default_geometry_is_128_square() {
    let clip = AudioClip::new(noise(CLIP_LEN, 1), 8000);
    let p = stft_power(&clip.samples, 1024, 625).unwrap();
    assert_eq!(p.frames, 80000 / 625 + 1);
    let spec = log_mel(&clip, &MelConfig::default()).unwrap();
    assert_eq!((spec.n_mels, spec.n_frames), (128, 128));
    assert!(spec.values.iter().all(|v| (-80.0..=0.0).contains(v)));
    assert_eq!(spec.values.iter().cloned().fold(f32::MIN, f32::max), 0.0);
}

#[test]
fn silence_maps_to_floor() {
    let spec = log_mel(&AudioClip::new(vec![0.0; CLIP_LEN], 8000), &MelConfig::default()).unwrap();
    assert!(spec.values.iter().all(|&v| v == -80.0));
}

#[test]
fn unprepared_clip_rejected() {
    let err = log_mel(&AudioClip::new(vec![0.0; 1000], 8000), &MelConfig::default()).unwrap_err();
    assert!(matches!(err, lidf::LidError::InvalidState(_)));
}

#[test]
fn one_khz_lands_on_nearest_center() {
    let spec = log_mel(&AudioClip::new(tone(1000.0, CLIP_LEN), 8000), &MelConfig::default()).unwrap();
    // Centers from the closed-form mel scale, independent of the filterbank code.
    let top = 2595.0 * (1.0 + 4000.0f64 / 700.0).log10();
    let centers: Vec<f64> = (1..=128).map(|i| 700.0 * (10f64.powf(top * i as f64 / 129.0 / 2595.0) - 1.0)).collect();
    let nearest = (0..128).min_by(|&a, &b| (centers[a] - 1000.0).abs().total_cmp(&(centers[b] - 1000.0).abs())).unwrap();
    for f in 2..126 {
        let argmax = (0..128).max_by(|&a, &b| spec.at(a, f).total_cmp(&spec.at(b, f))).unwrap();
        assert_eq!(argmax, nearest, "frame {f}");
    }
}

#[test]
fn hop_shift_moves_interior_columns() {
    let cfg = MelConfig::default();
    let mut x = noise(CLIP_LEN + cfg.hop, 9);
    for v in &mut x[40000..41000] {
        *v *= 8.0;
    }
    let a = log_mel_samples(&x[..CLIP_LEN], &cfg).unwrap();
    let b = log_mel_samples(&x[cfg.hop..], &cfg).unwrap();
    for m in 0..a.n_mels {
        for f in 1..a.n_frames - 2 {
            assert!((b.at(m, f) - a.at(m, f + 1)).abs() < 1e-4, "mel {m} frame {f}");
        }
    }
}

#[test]
fn colormap_anchors_and_midpoint() {
    for (t, rgb) in COLORMAP {
        assert_eq!(colormap(t), rgb);
    }
    let c = colormap(0.375);
    for (got, want) in c.iter().zip([0.0, 0.75, 0.75]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn colormap_monotone_per_segment() {
    for w in COLORMAP.windows(2) {
        let (t0, t1) = (w[0].0, w[1].0);
        for ch in 0..3 {
            let dir = (w[1].1[ch] - w[0].1[ch]).signum();
            let mut prev = colormap(t0)[ch];
            for i in 1..=20 {
                let v = colormap(t0 + (t1 - t0) * i as f64 / 20.0)[ch];
                assert!((v - prev) * dir >= -1e-12);
                prev = v;
            }
        }
    }
}

fn flat(db: f32) -> MelSpectrogram {
    MelSpectrogram { values: vec![db; 128 * 128], n_mels: 128, n_frames: 128 }
}

#[test]
fn flat_images_hit_anchor_colors() {
    for (db, rgb) in [(-80.0, [0.0, 0.0, 0.5]), (0.0, [1.0, 0.0, 0.0])] {
        for size in [64, 128] {
            let img = render_image(&flat(db), size).unwrap();
            assert_eq!(img.pixels.shape(), &[3, size, size]);
            for r in 0..size {
                for c in 0..size {
                    assert_eq!(img.rgb(r, c), rgb.map(|v: f64| v as f32));
                }
            }
        }
    }
}

#[test]
fn out_of_range_spectrogram_rejected() {
    assert!(render_image(&flat(1.0), 64).is_err());
    assert!(render_image(&flat(-81.0), 64).is_err());
}

#[test]
fn bilinear_identity_and_constant() {
    let src: Vec<f64> = (0..12).map(|v| v as f64).collect();
    assert_eq!(resize_bilinear(&src, 3, 4, 3, 4), src);
    let down = resize_bilinear(&[1.0, 3.0, 1.0, 3.0], 2, 2, 1, 1);
    assert_eq!(down, vec![2.0]);
}

#[test]
fn pipeline_is_bitwise_deterministic() {
    let clip = AudioClip::new(noise(CLIP_LEN, 5), 8000);
    let cfg = MelConfig { image_size: 64, ..MelConfig::default() };
    let a = mel_image(&clip, &cfg).unwrap();
    let b = mel_image(&clip, &cfg).unwrap();
    assert_eq!(a.pixels.data(), b.pixels.data());
    assert!(a.pixels.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn png_export_decodes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.png");
    let img = render_image(&flat(-80.0), 64).unwrap();
    write_png(&img, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
}

#[test]
fn cache_hits_and_recovers_from_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cache = FeatureCache::new(dir.path());
    let key = cache_key(b"audio", &MelConfig::default());
    assert_ne!(key, cache_key(b"audio", &MelConfig { image_size: 64, ..MelConfig::default() }));
    let t = Tensor::from_fn(vec![3, 4, 4], |i| i as f32 / 48.0);
    let (_, o) = cache.get_or_compute(&key, || Ok(t.clone())).unwrap();
    assert_eq!(o, CacheOutcome::Computed);
    let (got, o) = cache.get_or_compute(&key, || panic!("should hit")).unwrap();
    assert_eq!((o, got.data()), (CacheOutcome::Hit, t.data()));
    let path = cache.path_for(&key);
    let mut bytes = std::fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 3] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    let (got, o) = cache.get_or_compute(&key, || Ok(t.clone())).unwrap();
    assert_eq!((o, got.data()), (CacheOutcome::Recomputed, t.data()));
}
