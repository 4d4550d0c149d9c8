use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::delay::add_delayed;
use super::source::gaussian_noise;
use crate::enhance::{MotorProfile, MotorTemplate, TemplateBank, MOTOR_COUNT};
use crate::fft::Fft;
use crate::geometry::{norm, sub, ArrayGeometry, Vec3};
use crate::signal::WindowKind;
use crate::{Error, MultichannelRecording, Result};

/// Seconds between speed updates of the random walk.
const SPEED_STEP_S: f64 = 0.01;

pub const DEFAULT_ROTOR_POSITIONS: [Vec3; MOTOR_COUNT] =
    [[0.2, 0.2, 0.15], [-0.2, 0.2, 0.15], [-0.2, -0.2, 0.15], [0.2, -0.2, 0.15]];

/// Synthetic rotor noise: each motor is a point source emitting a harmonic comb at its
/// rotation frequency with 1/h amplitudes over a white floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicNoise {
    /// Mean speed per motor.
    pub rpm: [f64; MOTOR_COUNT],
    pub harmonics: usize,
    /// Broadband floor power relative to the harmonic power, dB.
    pub floor_db: f64,
    /// Maximum relative deviation of the speed random walk.
    pub rpm_walk: f64,
    /// Metres, in the array frame.
    pub rotor_positions: [Vec3; MOTOR_COUNT],
}

impl Default for HarmonicNoise {
    fn default() -> Self {
        Self {
            rpm: [5000.0; MOTOR_COUNT],
            harmonics: 30,
            floor_db: -20.0,
            rpm_walk: 0.05,
            rotor_positions: DEFAULT_ROTOR_POSITIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// A recorded multichannel noise track with its mean motor speeds.
    Recorded {
        recording: MultichannelRecording,
        mean_rpm: [f64; MOTOR_COUNT],
    },
    Harmonic(HarmonicNoise),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSource {
    pub kind: NoiseKind,
    /// Optional extra gain per channel.
    pub channel_gains: Option<Vec<f64>>,
}

impl NoiseSource {
    pub fn harmonic(cfg: HarmonicNoise) -> Self {
        Self { kind: NoiseKind::Harmonic(cfg), channel_gains: None }
    }
}

/// Rendered ego-noise and the mean motor speeds over the rendered interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoNoise {
    pub recording: MultichannelRecording,
    pub mean_rpm: [f64; MOTOR_COUNT],
}

impl EgoNoise {
    pub fn motor_profile(&self, template_bank: TemplateBank) -> MotorProfile {
        MotorProfile { speeds: self.mean_rpm, template_bank }
    }
}

impl HarmonicNoise {
    fn validate(&self) -> Result<()> {
        if self.rpm.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidConfig(format!("motor speeds must be positive, got {:?}", self.rpm)));
        }
        if self.harmonics == 0 {
            return Err(Error::InvalidConfig("harmonic count must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rpm_walk) || !self.floor_db.is_finite() {
            return Err(Error::InvalidConfig("speed walk must lie in [0, 1) and the floor must be finite".into()));
        }
        Ok(())
    }

    fn amplitudes(&self) -> Vec<f64> {
        (1..=self.harmonics).map(|h| 1.0 / h as f64).collect()
    }

    fn floor_std(&self) -> f64 {
        let harmonic_power: f64 = self.amplitudes().iter().map(|a| a * a / 2.0).sum();
        (harmonic_power * 10f64.powf(self.floor_db / 10.0)).sqrt()
    }

    /// Motor speed per update step: a reflected random walk within `±rpm_walk` of the mean.
    fn speed_trace<R: Rng>(&self, mean: f64, steps: usize, rng: &mut R) -> Vec<f64> {
        let step_std = self.rpm_walk / 10.0;
        let mut dev: f64 = 0.0;
        (0..steps)
            .map(|_| {
                let rpm = mean * (1.0 + dev);
                if self.rpm_walk > 0.0 {
                    dev += step_std * rng.sample::<f64, _>(StandardNormal);
                    while dev.abs() > self.rpm_walk {
                        dev = dev.signum() * 2.0 * self.rpm_walk - dev;
                    }
                }
                rpm
            })
            .collect()
    }

    /// Single motor waveform at the given per-step speeds.
    fn motor_signal<R: Rng>(&self, speeds: &[f64], len: usize, sample_rate: f64, rng: &mut R) -> Vec<f64> {
        let amps = self.amplitudes();
        let mut phasors: Vec<Complex64> =
            amps.iter().map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))).collect();
        let floor = self.floor_std();
        let mut out = gaussian_noise(len, rng);
        out.iter_mut().for_each(|v| *v *= floor);
        let step = ((SPEED_STEP_S * sample_rate).round() as usize).max(1);
        let nyquist_guard = 0.45 * sample_rate;
        for (s, chunk) in out.chunks_mut(step).enumerate() {
            let f0 = speeds[s.min(speeds.len() - 1)] / 60.0;
            for (h, (z, a)) in phasors.iter_mut().zip(&amps).enumerate() {
                let f = f0 * (h + 1) as f64;
                if f >= nyquist_guard {
                    break;
                }
                let w = Complex64::from_polar(1.0, 2.0 * PI * f / sample_rate);
                for v in chunk.iter_mut() {
                    *z *= w;
                    *v += a * z.im;
                }
                *z /= z.norm();
            }
        }
        out
    }
}

/// Distances from each rotor to each microphone, `[motor][mic]`.
fn rotor_distances(rotors: &[Vec3; MOTOR_COUNT], geometry: &ArrayGeometry) -> Vec<Vec<f64>> {
    rotors.iter().map(|r| geometry.mic_positions().iter().map(|m| norm(&sub(r, m))).collect()).collect()
}

fn apply_channel_gains(recording: &mut MultichannelRecording, gains: Option<&Vec<f64>>) -> Result<()> {
    if let Some(g) = gains {
        if g.len() != recording.channel_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} channel gains for {} channels",
                g.len(),
                recording.channel_count()
            )));
        }
        for (ch, gain) in recording.channels_mut().iter_mut().zip(g) {
            ch.iter_mut().for_each(|v| *v *= gain);
        }
    }
    Ok(())
}

/// Renders drone ego-noise onto the array. Each synthetic motor is rendered as a point source
/// with inverse-distance gains and propagation delays from its rotor position; recorded noise
/// is tiled or truncated to `duration`.
pub fn synth_ego_noise(
    noise: &NoiseSource,
    duration: f64,
    geometry: &ArrayGeometry,
    sample_rate: f64,
    seed: u64,
) -> Result<EgoNoise> {
    if !(duration > 0.0) || !duration.is_finite() || !(sample_rate > 0.0) {
        return Err(Error::InvalidConfig(format!("duration {duration} s at {sample_rate} Hz is invalid")));
    }
    let len = (duration * sample_rate).round() as usize;
    let mut ego = match &noise.kind {
        NoiseKind::Recorded { recording, mean_rpm } => {
            if recording.is_empty() {
                return Err(Error::EmptyInput);
            }
            let channels = recording.channels().iter().map(|ch| (0..len).map(|t| ch[t % ch.len()]).collect()).collect();
            let recording = MultichannelRecording::with_channel_map(
                channels,
                recording.sample_rate(),
                recording.channel_map().to_vec(),
            )?;
            EgoNoise { recording, mean_rpm: *mean_rpm }
        }
        NoiseKind::Harmonic(cfg) => {
            cfg.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let step = ((SPEED_STEP_S * sample_rate).round() as usize).max(1);
            let steps = len.div_ceil(step).max(1);
            let dist = rotor_distances(&cfg.rotor_positions, geometry);
            let d_min = dist.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            let c = geometry.speed_of_sound();
            let mut channels = vec![vec![0.0; len]; geometry.mic_count()];
            let mut mean_rpm = [0.0; MOTOR_COUNT];
            for motor in 0..MOTOR_COUNT {
                let speeds = cfg.speed_trace(cfg.rpm[motor], steps, &mut rng);
                // Mean over the steps actually rendered, weighted by their sample counts.
                mean_rpm[motor] = speeds
                    .iter()
                    .enumerate()
                    .map(|(s, r)| r * (len.min((s + 1) * step) - s * step) as f64)
                    .sum::<f64>()
                    / len as f64;
                let signal = cfg.motor_signal(&speeds, len, sample_rate, &mut rng);
                for (k, ch) in channels.iter_mut().enumerate() {
                    let d = dist[motor][k];
                    add_delayed(&signal, (d - d_min) / c * sample_rate, d_min / d, 0..len, ch);
                }
            }
            EgoNoise { recording: MultichannelRecording::new(channels, sample_rate)?, mean_rpm }
        }
    };
    apply_channel_gains(&mut ego.recording, noise.channel_gains.as_ref())?;
    Ok(ego)
}

/// Per-motor noise power templates measured on steady synthetic motors (no speed walk) at
/// each of `rpms`, averaged over the array's microphones. Bins follow a Hann-windowed STFT of
/// `fft_size` samples.
pub fn template_bank(
    cfg: &HarmonicNoise,
    geometry: &ArrayGeometry,
    sample_rate: f64,
    fft_size: usize,
    rpms: &[f64],
    seed: u64,
) -> Result<TemplateBank> {
    let fft = Fft::new(fft_size)?;
    let window = WindowKind::Hann.coefficients(fft_size);
    let dist = rotor_distances(&cfg.rotor_positions, geometry);
    let d_min = dist.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let frames = 32;
    let len = fft_size * (frames + 1) / 2 + fft_size / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut templates = Vec::with_capacity(rpms.len());
    for &rpm in rpms {
        let steady = HarmonicNoise { rpm: [rpm; MOTOR_COUNT], rpm_walk: 0.0, ..cfg.clone() };
        steady.validate()?;
        let power = (0..MOTOR_COUNT)
            .map(|motor| {
                let mean_gain_sq =
                    dist[motor].iter().map(|d| (d_min / d).powi(2)).sum::<f64>() / dist[motor].len() as f64;
                let x = steady.motor_signal(&[rpm], len, sample_rate, &mut rng);
                let mut acc = vec![0.0; fft_size / 2 + 1];
                for f in 0..frames {
                    let start = f * fft_size / 2;
                    let frame: Vec<f64> = x[start..start + fft_size].iter().zip(&window).map(|(a, w)| a * w).collect();
                    for (a, v) in acc.iter_mut().zip(fft.forward_real(&frame)) {
                        *a += v.norm_sqr() * mean_gain_sq / frames as f64;
                    }
                }
                acc
            })
            .collect();
        templates.push(MotorTemplate { rpm, power });
    }
    TemplateBank::new(templates, sample_rate / fft_size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enhance::estimate_noise_motor;
    use crate::fft::next_pow2;

    #[test]
    fn single_harmonic_peak_dominates() {
        let cfg = HarmonicNoise { rpm: [6000.0; 4], harmonics: 1, rpm_walk: 0.0, ..Default::default() };
        let geom = ArrayGeometry::default_cube();
        let ego = synth_ego_noise(&NoiseSource::harmonic(cfg), 2.0, &geom, 44100.0, 1).unwrap();
        assert_eq!(ego.recording.len(), 88200);
        assert_eq!(ego.recording.channel_count(), 8);
        let n = next_pow2(88200) / 2;
        let fft = Fft::new(n).unwrap();
        let spec: Vec<f64> = fft.forward_real(&ego.recording.channel(3)[..n]).iter().map(|v| v.norm_sqr()).collect();
        let mut sorted = spec.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let bin_100 = (100.0 * n as f64 / 44100.0).round() as usize;
        let peak = (bin_100 - 2..=bin_100 + 2).map(|k| spec[k]).fold(0.0, f64::max);
        assert!(10.0 * (peak / median).log10() >= 20.0);
        let argmax = (0..spec.len()).fold(0, |b, k| if spec[k] > spec[b] { k } else { b });
        assert!((argmax as f64 * 44100.0 / n as f64 - 100.0).abs() < 1.0);
        assert_eq!(ego.mean_rpm, [6000.0; 4]);
    }

    #[test]
    fn deterministic_and_walk_bounded() {
        let cfg = HarmonicNoise { rpm: [4800.0, 5000.0, 5200.0, 5400.0], ..Default::default() };
        let geom = ArrayGeometry::default_cube();
        let a = synth_ego_noise(&NoiseSource::harmonic(cfg.clone()), 0.5, &geom, 16000.0, 9).unwrap();
        let b = synth_ego_noise(&NoiseSource::harmonic(cfg.clone()), 0.5, &geom, 16000.0, 9).unwrap();
        assert_eq!(a, b);
        let c = synth_ego_noise(&NoiseSource::harmonic(cfg.clone()), 0.5, &geom, 16000.0, 10).unwrap();
        assert_ne!(a.recording, c.recording);
        for (m, r) in a.mean_rpm.iter().enumerate() {
            assert!((r / cfg.rpm[m] - 1.0).abs() <= 0.05);
        }
        let trace = cfg.speed_trace(5000.0, 10000, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(trace.iter().all(|r| (r / 5000.0 - 1.0).abs() <= 0.05 + 1e-12));
        assert!(trace.iter().any(|r| (r / 5000.0 - 1.0).abs() > 0.02));
    }

    #[test]
    fn nearer_microphones_are_louder() {
        let cfg = HarmonicNoise { rpm: [5000.0; 4], ..Default::default() };
        let geom = ArrayGeometry::default_cube();
        let single = NoiseSource::harmonic(HarmonicNoise {
            rotor_positions: [[0.3, 0.3, 0.3], [0.3, 0.3, 0.3], [0.3, 0.3, 0.3], [0.3, 0.3, 0.3]],
            ..cfg
        });
        let ego = synth_ego_noise(&single, 1.0, &geom, 16000.0, 4).unwrap();
        let power = |k: usize| ego.recording.channel(k).iter().map(|v| v * v).sum::<f64>();
        // Mic 7 sits at (+,+,+), mic 0 at (-,-,-).
        assert!(power(7) > power(0));
    }

    #[test]
    fn recorded_noise_is_tiled_and_gained() {
        let rec = MultichannelRecording::new(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], 10.0).unwrap();
        let src = NoiseSource {
            kind: NoiseKind::Recorded { recording: rec, mean_rpm: [1.0, 2.0, 3.0, 4.0] },
            channel_gains: Some(vec![1.0, 2.0]),
        };
        let geom = ArrayGeometry::default_cube();
        let ego = synth_ego_noise(&src, 0.7, &geom, 10.0, 0).unwrap();
        assert_eq!(ego.recording.channel(0), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0]);
        assert_eq!(ego.recording.channel(1), &[8.0, 10.0, 12.0, 8.0, 10.0, 12.0, 8.0]);
        assert_eq!(ego.mean_rpm, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn template_bank_drives_the_motor_estimator() {
        let cfg = HarmonicNoise::default();
        let geom = ArrayGeometry::default_cube();
        let rpms: Vec<f64> = (0..=10).map(|k| 3000.0 + 500.0 * k as f64).collect();
        let bank = template_bank(&cfg, &geom, 44100.0, 1024, &rpms, 1).unwrap();
        assert_eq!(bank.bin_count(), 513);
        let profile = MotorProfile { speeds: [5000.0; 4], template_bank: bank.clone() };
        let model = estimate_noise_motor(&profile, 1024, 8).unwrap();
        // Fundamental at 83.3 Hz falls in bin 2 (43 Hz bins); the comb dominates the floor.
        let p = |b: usize| model.noise_cov.at_bin(b).unwrap()[(0, 0)].re;
        assert!(p(2) > 100.0 * p(400));
        assert_eq!(bank.rpm_range(), (3000.0, 8000.0));
    }
}
