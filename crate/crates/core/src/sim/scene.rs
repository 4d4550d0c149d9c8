use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::delay::{add_delayed, fractional_delay};
use super::source::{source_signal, SourceKind};
use crate::geometry::{angle_between, slerp, tdoa, ArrayGeometry, Direction};
use crate::{Error, MultichannelRecording, Result};

/// Seconds between direction updates when rendering a moving source.
pub const MOTION_STEP_S: f64 = 0.01;

/// Source direction over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourcePath {
    Static(Direction),
    /// `(time_s, direction)` keyframes with strictly increasing times, interpolated along great
    /// circles at constant angular rate and held constant outside the keyframe span.
    Keyframes(Vec<(f64, Direction)>),
}

impl SourcePath {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Static(_) => Ok(()),
            Self::Keyframes(k) if k.is_empty() => Err(Error::EmptyInput),
            Self::Keyframes(k) => {
                if k.iter().any(|(t, _)| !t.is_finite()) || k.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    Err(Error::NonIncreasingTimestamps)
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn at(&self, t: f64) -> Direction {
        match self {
            Self::Static(d) => *d,
            Self::Keyframes(k) => {
                let next = k.partition_point(|(kt, _)| *kt <= t);
                if next == 0 {
                    return k[0].1;
                }
                if next == k.len() {
                    return k[k.len() - 1].1;
                }
                let (t0, d0) = k[next - 1];
                let (t1, d1) = k[next];
                let u = slerp(&d0.unit_vector(), &d1.unit_vector(), (t - t0) / (t1 - t0));
                Direction::from_vector(&u)
            }
        }
    }

    /// Largest angular rate between keyframes, degrees per second.
    pub fn max_rate(&self) -> f64 {
        match self {
            Self::Static(_) => 0.0,
            Self::Keyframes(k) => k
                .windows(2)
                .map(|w| angle_between(&w[0].1.unit_vector(), &w[1].1.unit_vector()) / (w[1].0 - w[0].0))
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub path: SourcePath,
    pub source_kind: SourceKind,
    pub snr_db: f64,
    pub duration: f64,
    pub sample_rate: f64,
    pub geometry: ArrayGeometry,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidConfig(format!("duration {} must be positive", self.duration)));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!("SNR {} dB must be finite", self.snr_db)));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("sample rate {} must be positive", self.sample_rate)));
        }
        if let SourceKind::Sinusoid { freq_hz } = self.source_kind {
            if !(freq_hz > 0.0 && freq_hz < self.sample_rate / 2.0) {
                return Err(Error::InvalidConfig(format!("sinusoid frequency {freq_hz} Hz is out of band")));
            }
        }
        self.path.validate()
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }
}

/// Far-field rendering of the clean source: channel `k` is the source delayed by the TDOA
/// between microphone 0 and microphone `k`. Moving sources are re-steered every 10 ms.
pub fn render_source(spec: &SceneSpec) -> Result<MultichannelRecording> {
    spec.validate()?;
    let len = spec.sample_count();
    let fs = spec.sample_rate;
    let geom = &spec.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let signal = source_signal(spec.source_kind, len, fs, &mut rng);
    let delays =
        |d: &Direction| -> Result<Vec<f64>> { (0..geom.mic_count()).map(|k| Ok(tdoa(d, geom, 0, k)? * fs)).collect() };
    let channels = match &spec.path {
        SourcePath::Static(d) => {
            delays(d)?.into_iter().map(|delay| fractional_delay(&signal, delay)).collect::<Result<Vec<_>>>()?
        }
        path @ SourcePath::Keyframes(_) => {
            let step = ((MOTION_STEP_S * fs).round() as usize).max(1);
            let mut channels = vec![vec![0.0; len]; geom.mic_count()];
            let mut start = 0;
            while start < len {
                let end = (start + step).min(len);
                let t_mid = (start + end) as f64 / 2.0 / fs;
                for (ch, delay) in channels.iter_mut().zip(delays(&path.at(t_mid))?) {
                    if delay.abs() * 4.0 >= len as f64 {
                        return Err(Error::DelayTooLarge { delay, len });
                    }
                    add_delayed(&signal, delay, 1.0, start..end, ch);
                }
                start = end;
            }
            channels
        }
    };
    MultichannelRecording::new(channels, fs)
}

/// A mixture and its exact decomposition: `mixed = clean + scaled_noise` sample by sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Mix {
    pub mixed: MultichannelRecording,
    pub scaled_noise: MultichannelRecording,
    pub noise_gain: f64,
}

/// Adds `noise`, truncated to the clean length and scaled so that the ratio of mean powers
/// (over all channels and samples) equals `snr_db`.
pub fn mix_at_snr(clean: &MultichannelRecording, noise: &MultichannelRecording, snr_db: f64) -> Result<Mix> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("SNR {snr_db} dB must be finite")));
    }
    if clean.channel_count() != noise.channel_count() || clean.sample_rate() != noise.sample_rate() {
        return Err(Error::ShapeMismatch(format!(
            "clean has {} channels at {} Hz, noise {} channels at {} Hz",
            clean.channel_count(),
            clean.sample_rate(),
            noise.channel_count(),
            noise.sample_rate()
        )));
    }
    if noise.len() < clean.len() {
        return Err(Error::ShapeMismatch(format!("noise has {} samples, clean {}", noise.len(), clean.len())));
    }
    let noise = noise.slice(0..clean.len());
    let p_noise = noise.mean_power();
    if !(p_noise > 0.0) {
        return Err(Error::ZeroSignal);
    }
    let gain = (clean.mean_power() / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<Vec<f64>> = noise.channels().iter().map(|ch| ch.iter().map(|v| v * gain).collect()).collect();
    let mixed: Vec<Vec<f64>> =
        clean.channels().iter().zip(&scaled).map(|(c, n)| c.iter().zip(n).map(|(a, b)| a + b).collect()).collect();
    Ok(Mix {
        mixed: MultichannelRecording::with_channel_map(mixed, clean.sample_rate(), clean.channel_map().to_vec())?,
        scaled_noise: MultichannelRecording::with_channel_map(
            scaled,
            clean.sample_rate(),
            clean.channel_map().to_vec(),
        )?,
        noise_gain: gain,
    })
}
