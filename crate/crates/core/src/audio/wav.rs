//! RIFF/WAVE reader and 16-bit PCM writer.

use std::fs;
use std::path::Path;

use crate::audio::AudioClip;
use crate::error::{LidError, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavFormat {
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub float: bool,
}

/// Decoded header plus the byte range of the sample data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub format: WavFormat,
    pub data_offset: usize,
    pub data_len: usize,
}

impl WavInfo {
    pub fn frames(&self) -> usize {
        self.data_len / (self.format.channels as usize * (self.format.bits_per_sample as usize / 8))
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames() as f64 / self.format.sample_rate as f64
    }
}

fn parse_err(offset: usize, message: impl Into<String>) -> LidError {
    LidError::Parse { offset: offset as u64, message: message.into() }
}

fn u16_at(b: &[u8], off: usize) -> Result<u16> {
    b.get(off..off + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| parse_err(off, "unexpected end of file"))
}

fn u32_at(b: &[u8], off: usize) -> Result<u32> {
    b.get(off..off + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| parse_err(off, "unexpected end of file"))
}

/// Walks the chunk list and validates the `fmt ` chunk.
pub fn parse_header(bytes: &[u8]) -> Result<WavInfo> {
    if bytes.len() < 12 {
        return Err(parse_err(bytes.len(), "file shorter than the 12-byte RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(parse_err(0, "missing RIFF signature"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(parse_err(8, "missing WAVE form type"));
    }
    let mut off = 12;
    let mut format = None;
    let mut data = None;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32_at(bytes, off + 4)? as usize;
        let body = off + 8;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(parse_err(off + 4, format!("fmt chunk of {size} bytes is too small")));
                }
                let mut tag = u16_at(bytes, body)?;
                let channels = u16_at(bytes, body + 2)?;
                let sample_rate = u32_at(bytes, body + 4)?;
                let bits = u16_at(bytes, body + 14)?;
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(parse_err(off + 4, "extensible fmt chunk is truncated"));
                    }
                    // Sub-format GUID starts with the actual format tag.
                    tag = u16_at(bytes, body + 24)?;
                }
                let float = match (tag, bits) {
                    (FORMAT_PCM, 8 | 16 | 24 | 32) => false,
                    (FORMAT_FLOAT, 32 | 64) => true,
                    (FORMAT_PCM | FORMAT_FLOAT, b) => {
                        return Err(LidError::UnsupportedFormat(format!("{b}-bit samples (format tag {tag})")))
                    }
                    (t, _) => {
                        return Err(LidError::UnsupportedFormat(format!(
                            "compressed or unknown codec (format tag {t:#06x})"
                        )))
                    }
                };
                if channels == 0 {
                    return Err(parse_err(body + 2, "zero channels"));
                }
                if sample_rate == 0 {
                    return Err(parse_err(body + 4, "zero sample rate"));
                }
                format = Some(WavFormat { channels, sample_rate, bits_per_sample: bits, float });
            }
            b"data" => {
                let avail = bytes.len() - body;
                // Streaming writers sometimes leave the size unset; clamp.
                data = Some((body, size.min(avail)));
            }
            _ => {}
        }
        if data.is_some() && format.is_some() {
            break;
        }
        off = body + size + (size & 1);
    }
    let format = format.ok_or_else(|| parse_err(off, "no fmt chunk found"))?;
    let (data_offset, data_len) = data.ok_or_else(|| parse_err(off, "no data chunk found"))?;
    Ok(WavInfo { format, data_offset, data_len })
}

/// Decodes interleaved samples and downmixes by channel mean into [−1, 1].
pub fn decode_samples(bytes: &[u8], info: &WavInfo) -> Vec<f32> {
    let f = info.format;
    let width = f.bits_per_sample as usize / 8;
    let channels = f.channels as usize;
    let data = &bytes[info.data_offset..info.data_offset + info.frames() * channels * width];
    let decode = |s: &[u8]| -> f64 {
        match (f.float, width) {
            (false, 1) => (s[0] as f64 - 128.0) / 128.0,
            (false, 2) => i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0,
            (false, 3) => {
                let v = i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            (false, 4) => i32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64 / 2_147_483_648.0,
            (true, 4) => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
            (true, 8) => f64::from_le_bytes(s.try_into().unwrap()),
            _ => unreachable!("validated in parse_header"),
        }
    };
    data.chunks_exact(channels * width)
        .map(|frame| {
            let sum: f64 = frame.chunks_exact(width).map(decode).sum();
            let v = sum / channels as f64;
            if v.is_finite() {
                v.clamp(-1.0, 1.0) as f32
            } else {
                0.0
            }
        })
        .collect()
}

pub fn read_wav_bytes(bytes: &[u8], source: &str) -> Result<AudioClip> {
    let info = parse_header(bytes)?;
    Ok(AudioClip {
        samples: decode_samples(bytes, &info),
        sample_rate: info.format.sample_rate,
        label: None,
        source_path: source.to_string(),
    })
}

/// Reads a PCM or IEEE-float WAV file at its native rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| LidError::io(path, e))?;
    read_wav_bytes(&bytes, &path.to_string_lossy())
}

/// Header-only probe used by corpus scanning.
pub fn probe_wav(bytes: &[u8]) -> Result<WavInfo> {
    parse_header(bytes)
}

/// Encodes mono 16-bit little-endian PCM.
pub fn encode_wav16(samples: &[f32], sample_rate: u32) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav16(&clip.samples, clip.sample_rate)).map_err(|e| LidError::io(path, e))
}
