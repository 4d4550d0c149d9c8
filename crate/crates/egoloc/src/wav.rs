//! Multichannel RIFF WAV reading and writing.
//!
//! Integer PCM (8, 16, 24 and 32 bit, plain or extensible headers) is normalized by full-scale
//! division, so the most negative code maps to exactly -1. Float32 passes through unchanged.

use std::io::Cursor;
use std::path::Path;

use egoloc_core::MultichannelRecording;
use serde::{Deserialize, Serialize};

use crate::error::{read_file, write_file, IoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    #[default]
    Float32,
    Pcm16,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelRecording> {
    decode_wav(&read_file(path.as_ref())?)
}

pub fn write_wav(recording: &MultichannelRecording, path: impl AsRef<Path>, format: WavFormat) -> Result<()> {
    write_file(path.as_ref(), &encode_wav(recording, format)?)
}

/// Tag and sample width from the first `fmt ` chunk, for error reporting.
fn peek_format(bytes: &[u8]) -> (u16, u16) {
    let u16_at = |i: usize| bytes.get(i..i + 2).map_or(0, |b| u16::from_le_bytes([b[0], b[1]]));
    let mut pos = 12;
    while let Some(header) = bytes.get(pos..pos + 8) {
        let len = u32::from_le_bytes([header[4], header[5], header[6], header[7]]) as usize;
        if &header[..4] == b"fmt " {
            let mut tag = u16_at(pos + 8);
            // WAVE_FORMAT_EXTENSIBLE keeps the real tag at the start of the subformat GUID.
            if tag == 0xfffe && len >= 40 {
                tag = u16_at(pos + 32);
            }
            return (tag, u16_at(pos + 22));
        }
        pos = pos.saturating_add(8).saturating_add(len).saturating_add(len & 1);
    }
    (0, 0)
}

fn convert(e: hound::Error, bytes: &[u8]) -> IoError {
    match e {
        hound::Error::Unsupported | hound::Error::TooWide => {
            let (tag, bits) = peek_format(bytes);
            IoError::UnsupportedFormat { tag, bits }
        }
        hound::Error::FormatError(msg) => IoError::CorruptHeader(msg.to_string()),
        hound::Error::IoError(e) => IoError::CorruptHeader(format!("truncated file ({e})")),
        other => IoError::CorruptHeader(other.to_string()),
    }
}

fn collect<S, F>(reader: hound::WavReader<Cursor<&[u8]>>, bytes: &[u8], scale: F) -> Result<Vec<f64>>
where
    S: hound::Sample,
    F: Fn(S) -> f64,
{
    // The declared sample count is untrusted; never reserve more than the file can hold.
    let mut out = Vec::with_capacity((reader.len() as usize).min(bytes.len()));
    for s in reader.into_samples::<S>() {
        out.push(scale(s.map_err(|e| convert(e, bytes))?));
    }
    Ok(out)
}

pub fn decode_wav(bytes: &[u8]) -> Result<MultichannelRecording> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| convert(e, bytes))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(IoError::CorruptHeader("header declares zero channels".into()));
    }
    let interleaved = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                let (tag, _) = peek_format(bytes);
                return Err(IoError::UnsupportedFormat { tag, bits: spec.bits_per_sample });
            }
            collect(reader, bytes, |s: f32| f64::from(s))?
        }
        hound::SampleFormat::Int => {
            if !(1..=32).contains(&spec.bits_per_sample) {
                let (tag, _) = peek_format(bytes);
                return Err(IoError::UnsupportedFormat { tag, bits: spec.bits_per_sample });
            }
            let full_scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            collect(reader, bytes, |s: i32| f64::from(s) / full_scale)?
        }
    };
    if interleaved.len() % channels != 0 {
        return Err(IoError::CorruptHeader("data chunk ends inside a sample frame".into()));
    }
    let frames = interleaved.len() / channels;
    let mut data = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, &s) in data.iter_mut().zip(frame) {
            ch.push(s);
        }
    }
    MultichannelRecording::new(data, f64::from(spec.sample_rate))
        .map_err(|e| IoError::CorruptHeader(format!("unusable header: {e}")))
}

/// Quantizes to 16 bits: clamp to [-1, 1], scale by 32768, round half away from zero and
/// saturate at 32767.
pub fn quantize_pcm16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(recording: &MultichannelRecording, format: WavFormat) -> Result<Vec<u8>> {
    let rate = recording.sample_rate();
    if rate.fract() != 0.0 || rate > f64::from(u32::MAX) {
        return Err(
            egoloc_core::Error::InvalidConfig(format!("sample rate {rate} cannot be stored in a WAV header")).into()
        );
    }
    let channels = u16::try_from(recording.channel_count())
        .map_err(|_| egoloc_core::Error::InvalidConfig("too many channels for a WAV file".into()))?;
    let spec = hound::WavSpec {
        channels,
        sample_rate: rate as u32,
        bits_per_sample: match format {
            WavFormat::Float32 => 32,
            WavFormat::Pcm16 => 16,
        },
        sample_format: match format {
            WavFormat::Float32 => hound::SampleFormat::Float,
            WavFormat::Pcm16 => hound::SampleFormat::Int,
        },
    };
    let mut buf = Cursor::new(Vec::new());
    let fail = |e: hound::Error| IoError::CorruptHeader(format!("cannot encode: {e}"));
    {
        let mut writer = hound::WavWriter::new(&mut buf, spec).map_err(fail)?;
        for t in 0..recording.len() {
            for ch in recording.channels() {
                match format {
                    WavFormat::Float32 => writer.write_sample(ch[t] as f32),
                    WavFormat::Pcm16 => writer.write_sample(quantize_pcm16(ch[t])),
                }
                .map_err(fail)?;
            }
        }
        writer.finalize().map_err(fail)?;
    }
    Ok(buf.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(channels: Vec<Vec<f64>>) -> MultichannelRecording {
        MultichannelRecording::new(channels, 44100.0).unwrap()
    }

    #[test]
    fn float_round_trip_is_bit_exact() {
        let data: Vec<Vec<f64>> =
            (0..8).map(|c| (0..500).map(|t| f64::from(((t * 7 + c * 13) as f32 * 0.37).sin())).collect()).collect();
        let r = rec(data);
        let back = decode_wav(&encode_wav(&r, WavFormat::Float32).unwrap()).unwrap();
        assert_eq!(back.sample_rate(), 44100.0);
        for (a, b) in r.channels().iter().zip(back.channels()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn pcm16_clamps_and_quantizes() {
        let r = rec(vec![vec![1.5, 0.5, -1.0, -2.0, 1.0 / 65536.0, -1.0 / 65536.0, 0.0]]);
        let back = decode_wav(&encode_wav(&r, WavFormat::Pcm16).unwrap()).unwrap();
        let s = back.channel(0);
        assert_eq!(s[0], 32767.0 / 32768.0);
        assert!((s[0] - 1.0).abs() <= 1.0 / 32768.0);
        assert_eq!(s[1], 0.5);
        assert_eq!(s[2], -1.0);
        assert_eq!(s[3], -1.0);
        // Half a code rounds away from zero.
        assert_eq!(s[4], 1.0 / 32768.0);
        assert_eq!(s[5], -1.0 / 32768.0);
        assert_eq!(s[6], 0.0);
    }

    #[test]
    fn rejects_fractional_rates() {
        let r = MultichannelRecording::new(vec![vec![0.0; 4]], 44100.5).unwrap();
        assert!(encode_wav(&r, WavFormat::Float32).is_err());
    }

    #[test]
    fn reports_the_format_tag() {
        let mut bytes = encode_wav(&rec(vec![vec![0.1; 16]]), WavFormat::Pcm16).unwrap();
        // Plain 16-bit mono uses a 16-byte fmt chunk starting at offset 12.
        assert_eq!(&bytes[12..16], b"fmt ");
        bytes[20] = 2;
        match decode_wav(&bytes) {
            Err(IoError::UnsupportedFormat { tag: 2, bits: 16 }) => {}
            other => panic!("{other:?}"),
        }
    }
}
