use std::fs;
use std::path::Path;

use lidf_tensor::Tensor;

use super::{MelSpectrogram, DB_FLOOR};
use crate::error::{LidError, Result};

/// Anchor points `(t, [r, g, b])` of the piecewise-linear colormap.
pub const COLORMAP: [(f64, [f64; 3]); 5] = [
    (0.0, [0.0, 0.0, 0.5]),
    (0.25, [0.0, 0.5, 1.0]),
    (0.5, [0.0, 1.0, 0.5]),
    (0.75, [1.0, 1.0, 0.0]),
    (1.0, [1.0, 0.0, 0.0]),
];

pub fn colormap(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    let seg = COLORMAP.windows(2).find(|w| t <= w[1].0).unwrap_or(&COLORMAP[3..5]);
    let ((t0, c0), (t1, c1)) = (seg[0], seg[1]);
    let u = (t - t0) / (t1 - t0);
    [0, 1, 2].map(|ch| c0[ch] + u * (c1[ch] - c0[ch]))
}

/// Bilinear resize of a `[h, w]` plane with half-pixel centers and edge clamping.
pub fn resize_bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let axis = |i: usize, n_in: usize, n_out: usize| {
        let pos = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, pos - i0 as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        let (r0, r1, fr) = axis(r, h, out_h);
        for c in 0..out_w {
            let (c0, c1, fc) = axis(c, w, out_w);
            let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
            let bot = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
            out.push(top * (1.0 - fr) + bot * fr);
        }
    }
    out
}

/// Three-channel image in [0, 1], shape `[3, size, size]`. Row 0 holds the
/// lowest mel band.
#[derive(Debug, Clone, PartialEq)]
pub struct MelImage {
    pub pixels: Tensor<f32>,
}

impl MelImage {
    pub fn size(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn rgb(&self, row: usize, col: usize) -> [f32; 3] {
        [0, 1, 2].map(|c| self.pixels.at(&[c, row, col]))
    }
}

pub fn render_image(spec: &MelSpectrogram, size: usize) -> Result<MelImage> {
    if size == 0 {
        return Err(LidError::InvalidArgument("image size must be positive".into()));
    }
    if let Some(v) = spec.values.iter().find(|v| !(DB_FLOOR as f32..=0.0).contains(*v)) {
        return Err(LidError::InvalidArgument(format!("dB value {v} outside [{DB_FLOOR}, 0]")));
    }
    let (h, w) = (spec.n_mels, spec.n_frames);
    let mut planes = vec![Vec::with_capacity(h * w); 3];
    for &v in &spec.values {
        let rgb = colormap((v as f64 - DB_FLOOR) / -DB_FLOOR);
        for (plane, c) in planes.iter_mut().zip(rgb) {
            plane.push(c);
        }
    }
    let mut data = Vec::with_capacity(3 * size * size);
    for plane in &planes {
        data.extend(resize_bilinear(plane, h, w, size, size).into_iter().map(|v| v.clamp(0.0, 1.0) as f32));
    }
    Ok(MelImage { pixels: Tensor::new(vec![3, size, size], data)? })
}

/// Writes an 8-bit RGB PNG with the highest mel band at the top.
pub fn write_png(image: &MelImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let s = image.size();
    let mut rgb = Vec::with_capacity(3 * s * s);
    for row in (0..s).rev() {
        for col in 0..s {
            rgb.extend(image.rgb(row, col).map(|v| (v * 255.0).round() as u8));
        }
    }
    let file = fs::File::create(path).map_err(|e| LidError::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), s as u32, s as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| LidError::io(path, std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(to_io)?;
    writer.write_image_data(&rgb).map_err(to_io)?;
    writer.finish().map_err(to_io)
}
