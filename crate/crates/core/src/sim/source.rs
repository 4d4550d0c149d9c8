use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::fft::{next_pow2, Fft};

/// RMS level of generated source signals.
pub const SOURCE_RMS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SourceKind {
    /// Noise with a long-term speech-like spectrum (100 Hz to 8 kHz, falling 6 dB per octave
    /// above 500 Hz) and a 4 Hz syllabic amplitude modulation.
    SpeechLike,
    WhiteNoise,
    Sinusoid {
        freq_hz: f64,
    },
}

fn normalize(mut x: Vec<f64>, rms: f64) -> Vec<f64> {
    let power = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    if power > 0.0 {
        let g = rms / power.sqrt();
        x.iter_mut().for_each(|v| *v *= g);
    }
    x
}

pub(crate) fn gaussian_noise<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn speech_like<R: Rng>(len: usize, sample_rate: f64, rng: &mut R) -> Vec<f64> {
    let n = next_pow2(len.max(2));
    let fft = Fft::new(n).expect("power of two");
    let mut buf: Vec<Complex64> = gaussian_noise(len, rng).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    fft.forward(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * sample_rate / n as f64;
        let gain = if !(100.0..=8000.0).contains(&f) {
            0.0
        } else if f <= 500.0 {
            1.0
        } else {
            500.0 / f
        };
        *v *= gain;
    }
    fft.inverse(&mut buf);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let x = buf[..len]
        .iter()
        .enumerate()
        .map(|(t, v)| v.re * (0.55 + 0.45 * (2.0 * PI * 4.0 * t as f64 / sample_rate + phase).sin()))
        .collect();
    x
}

/// Source waveform of `len` samples at `SOURCE_RMS`.
pub fn source_signal<R: Rng>(kind: SourceKind, len: usize, sample_rate: f64, rng: &mut R) -> Vec<f64> {
    let x = match kind {
        SourceKind::SpeechLike => speech_like(len, sample_rate, rng),
        SourceKind::WhiteNoise => gaussian_noise(len, rng),
        SourceKind::Sinusoid { freq_hz } => {
            let phase = rng.gen_range(0.0..2.0 * PI);
            (0..len).map(|t| (2.0 * PI * freq_hz * t as f64 / sample_rate + phase).sin()).collect()
        }
    };
    normalize(x, SOURCE_RMS)
}
