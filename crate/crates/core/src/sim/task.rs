use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ego::{synth_ego_noise, template_bank, EgoNoise, HarmonicNoise, NoiseSource, DEFAULT_ROTOR_POSITIONS};
use super::scene::{mix_at_snr, render_source, Mix, SceneSpec, SourcePath, MOTION_STEP_S};
use super::source::SourceKind;
use crate::enhance::{TemplateBank, MOTOR_COUNT};
use crate::geometry::{cross, norm, ArrayGeometry, Direction, Vec3};
use crate::{Error, MultichannelRecording, Result};

/// Ground-truth timestamps per flight recording.
pub const FLIGHT_TIMESTAMPS: usize = 15;
/// Width of the averaging window around each flight ground-truth timestamp, seconds.
pub const TRUTH_WINDOW_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Static,
    Flight,
}

/// `FLIGHT_TIMESTAMPS` regularly spaced times, a half window in from each end.
pub fn flight_timestamps(duration: f64) -> Vec<f64> {
    let first = TRUTH_WINDOW_S / 2.0;
    let span = duration - TRUTH_WINDOW_S;
    (0..FLIGHT_TIMESTAMPS).map(|k| first + k as f64 * span / (FLIGHT_TIMESTAMPS - 1) as f64).collect()
}

/// Uniform direction on the sphere.
pub fn random_direction<R: Rng>(rng: &mut R) -> Direction {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let az: f64 = rng.gen_range(-180.0..180.0);
    Direction::new(az, z.asin().to_degrees()).expect("in range")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub count: usize,
    pub snr_range_db: (f64, f64),
    pub seed: u64,
    pub source_kind: SourceKind,
    pub geometry: ArrayGeometry,
    pub sample_rate: f64,
    /// Recording length; defaults to 2 s for static and 4 s for flight tasks.
    pub duration: Option<f64>,
    /// Cap on the source's angular rate in flight tasks, degrees per second.
    pub max_rate_deg_s: f64,
    /// Mean motor speeds are drawn uniformly from this range per recording.
    pub rpm_range: (f64, f64),
    pub harmonics: usize,
    pub floor_db: f64,
    pub rpm_walk: f64,
    pub rotor_positions: [Vec3; MOTOR_COUNT],
}

impl TaskConfig {
    pub fn new(kind: TaskKind, count: usize, snr_range_db: (f64, f64), seed: u64) -> Self {
        let noise = HarmonicNoise::default();
        Self {
            kind,
            count,
            snr_range_db,
            seed,
            source_kind: SourceKind::SpeechLike,
            geometry: ArrayGeometry::default_cube(),
            sample_rate: 44100.0,
            duration: None,
            max_rate_deg_s: 30.0,
            rpm_range: (4000.0, 6000.0),
            harmonics: noise.harmonics,
            floor_db: noise.floor_db,
            rpm_walk: noise.rpm_walk,
            rotor_positions: DEFAULT_ROTOR_POSITIONS,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or(match self.kind {
            TaskKind::Static => 2.0,
            TaskKind::Flight => 4.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.count == 0 {
            problems.push(String::from("recording count must be at least 1"));
        }
        let (lo, hi) = self.snr_range_db;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            problems.push(format!("SNR range [{lo}, {hi}] is invalid"));
        }
        let (rlo, rhi) = self.rpm_range;
        if !(rlo > 0.0) || !rhi.is_finite() || rlo > rhi {
            problems.push(format!("speed range [{rlo}, {rhi}] is invalid"));
        }
        if !(self.max_rate_deg_s >= 0.0) || !self.max_rate_deg_s.is_finite() {
            problems.push(format!("angular rate cap {} is invalid", self.max_rate_deg_s));
        }
        let d = self.duration();
        if !(d > 0.0) || !d.is_finite() || (self.kind == TaskKind::Flight && d <= TRUTH_WINDOW_S) {
            problems.push(format!("duration {d} s is invalid"));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            problems.push(format!("sample rate {} is invalid", self.sample_rate));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    fn harmonic_noise(&self, rpm: [f64; MOTOR_COUNT]) -> HarmonicNoise {
        HarmonicNoise {
            rpm,
            harmonics: self.harmonics,
            floor_db: self.floor_db,
            rpm_walk: self.rpm_walk,
            rotor_positions: self.rotor_positions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SceneTruth {
    Static(Direction),
    /// `(timestamp_s, direction)` per ground-truth timestamp.
    Flight(Vec<(f64, Direction)>),
}

/// One generated recording with everything needed to score or re-mix it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub id: String,
    pub spec: SceneSpec,
    pub clean: MultichannelRecording,
    /// Ego-noise before SNR scaling.
    pub ego: EgoNoise,
    pub mix: Mix,
    pub truth: SceneTruth,
}

impl GeneratedScene {
    pub fn recording(&self) -> &MultichannelRecording {
        &self.mix.mixed
    }

    /// The same scene mixed at another SNR.
    pub fn remix(&self, snr_db: f64) -> Result<Mix> {
        mix_at_snr(&self.clean, &self.ego.recording, snr_db)
    }
}

/// Lazily generates the recordings of a task; scene `i` depends only on the seed and `i`.
#[derive(Debug, Clone)]
pub struct TaskGenerator {
    config: TaskConfig,
}

/// Rotates `from` by `angle` degrees towards the tangent `heading`.
fn step_towards(from: &Direction, heading: f64, angle: f64) -> Direction {
    let u = from.unit_vector();
    // Tangent basis at u: east and north.
    let pole = if u[2].abs() > 0.999 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let e = cross(&pole, &u);
    let ne = norm(&e);
    let east = [e[0] / ne, e[1] / ne, e[2] / ne];
    let north = cross(&u, &east);
    let (s, c) = heading.to_radians().sin_cos();
    let t = [c * east[0] + s * north[0], c * east[1] + s * north[1], c * east[2] + s * north[2]];
    let (sa, ca) = angle.to_radians().sin_cos();
    Direction::from_vector(&[ca * u[0] + sa * t[0], ca * u[1] + sa * t[1], ca * u[2] + sa * t[2]])
}

impl TaskGenerator {
    pub fn new(config: TaskConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.config.count
    }

    pub fn is_empty(&self) -> bool {
        self.config.count == 0
    }

    pub fn recording_id(index: usize) -> String {
        format!("rec{:04}", index + 1)
    }

    /// Scene `index` (0-based).
    pub fn scene(&self, index: usize) -> Result<GeneratedScene> {
        let cfg = &self.config;
        if index >= cfg.count {
            return Err(Error::InvalidConfig(format!("scene {index} requested from a task of {}", cfg.count)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
        let duration = cfg.duration();
        let start = random_direction(&mut rng);
        let path = match cfg.kind {
            TaskKind::Static => SourcePath::Static(start),
            TaskKind::Flight => {
                let mut keys = Vec::new();
                let mut t = 0.0;
                let mut d = start;
                keys.push((t, d));
                while t < duration {
                    let dt = (duration - t).min(1.0);
                    let rate = rng.gen_range(0.0..=cfg.max_rate_deg_s);
                    let heading = rng.gen_range(0.0..360.0);
                    d = step_towards(&d, heading, rate * dt);
                    t += dt;
                    keys.push((t, d));
                }
                SourcePath::Keyframes(keys)
            }
        };
        let (lo, hi) = cfg.snr_range_db;
        let snr_db = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        let (rlo, rhi) = cfg.rpm_range;
        let mut rpm = [0.0; MOTOR_COUNT];
        for r in rpm.iter_mut() {
            *r = if rlo == rhi { rlo } else { rng.gen_range(rlo..=rhi) };
        }
        let spec = SceneSpec {
            path,
            source_kind: cfg.source_kind,
            snr_db,
            duration,
            sample_rate: cfg.sample_rate,
            geometry: cfg.geometry.clone(),
            seed: rng.gen(),
        };
        let clean = render_source(&spec)?;
        let ego = synth_ego_noise(
            &NoiseSource::harmonic(cfg.harmonic_noise(rpm)),
            duration,
            &cfg.geometry,
            cfg.sample_rate,
            rng.gen(),
        )?;
        let mix = mix_at_snr(&clean, &ego.recording, snr_db)?;
        let truth = match &spec.path {
            SourcePath::Static(d) => SceneTruth::Static(*d),
            path => {
                SceneTruth::Flight(flight_timestamps(duration).into_iter().map(|t| (t, window_mean(path, t))).collect())
            }
        };
        Ok(GeneratedScene { id: Self::recording_id(index), spec, clean, ego, mix, truth })
    }

    /// Motor noise templates matching the generated ego-noise, over a speed grid covering the
    /// configured range.
    pub fn template_bank(&self, fft_size: usize) -> Result<TemplateBank> {
        let cfg = &self.config;
        let (lo, hi) = cfg.rpm_range;
        let lo = (lo * (1.0 - cfg.rpm_walk)).floor();
        let hi = (hi * (1.0 + cfg.rpm_walk)).ceil();
        let steps = 10;
        let rpms: Vec<f64> = if hi > lo {
            (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect()
        } else {
            alloc::vec![lo]
        };
        template_bank(&cfg.harmonic_noise([lo; MOTOR_COUNT]), &cfg.geometry, cfg.sample_rate, fft_size, &rpms, cfg.seed)
    }
}

/// Spherical mean of a path over the ground-truth window centred on `t`, sampled at the
/// rendering granularity.
fn window_mean(path: &SourcePath, t: f64) -> Direction {
    let n = (TRUTH_WINDOW_S / MOTION_STEP_S).round() as usize;
    let mut sum = [0.0; 3];
    for k in 0..=n {
        let u = path.at(t - TRUTH_WINDOW_S / 2.0 + k as f64 * MOTION_STEP_S).unit_vector();
        for i in 0..3 {
            sum[i] += u[i];
        }
    }
    if norm(&sum) < 1e-12 {
        return path.at(t);
    }
    Direction::from_vector(&sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{great_circle_distance, tdoa};
    use crate::signal::{stft, StftConfig, WindowKind};
    use crate::spectrum::{gcc, Weighting};

    fn small(kind: TaskKind, count: usize) -> TaskGenerator {
        let mut cfg = TaskConfig::new(kind, count, (-5.0, 5.0), 7);
        cfg.sample_rate = 16000.0;
        cfg.duration = Some(if kind == TaskKind::Static { 0.5 } else { 2.0 });
        TaskGenerator::new(cfg).unwrap()
    }

    #[test]
    fn flight_timestamps_are_regular() {
        let ts = flight_timestamps(4.0);
        assert_eq!(ts.len(), 15);
        assert!((ts[0] - 0.25).abs() < 1e-12 && (ts[14] - 3.75).abs() < 1e-12);
        assert!(ts.windows(2).all(|w| (w[1] - w[0] - 0.25).abs() < 1e-12));
    }

    #[test]
    fn spherical_uniformity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sum = [0.0; 3];
        for _ in 0..10000 {
            let u = random_direction(&mut rng).unit_vector();
            for i in 0..3 {
                sum[i] += u[i];
            }
        }
        assert!(norm(&sum) / 10000.0 < 0.05);
    }

    #[test]
    fn scenes_are_deterministic_and_independent() {
        let g = small(TaskKind::Static, 3);
        let a = g.scene(1).unwrap();
        assert_eq!(a, g.scene(1).unwrap());
        assert_ne!(a.mix.mixed, g.scene(2).unwrap().mix.mixed);
        assert_eq!(a.id, "rec0002");
        let snr = 10.0 * (a.clean.mean_power() / a.mix.scaled_noise.mean_power()).log10();
        assert!((snr - a.spec.snr_db).abs() < 0.01 && (-5.0..=5.0).contains(&a.spec.snr_db));
        assert!(g.scene(3).is_err());
        let mut bad = g.config().clone();
        bad.count = 0;
        assert!(TaskGenerator::new(bad).is_err());
    }

    #[test]
    fn truth_matches_measured_delays_on_clean_signal() {
        let g = small(TaskKind::Static, 4);
        for i in 0..4 {
            let s = g.scene(i).unwrap();
            let SceneTruth::Static(d) = s.truth else { panic!() };
            let blocks =
                stft(&s.clean, &StftConfig { fft_size: 4096, hop: 4096, window: WindowKind::Rectangular }).unwrap();
            for k in 1..8 {
                let lag = gcc(&blocks[0].bins[0], &blocks[0].bins[k], Weighting::Phat, 10).unwrap().argmax_lag();
                let expected = tdoa(&d, &s.spec.geometry, 0, k).unwrap() * 16000.0;
                assert!((lag as f64 - expected).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn flight_scenes_respect_the_rate_cap() {
        let g = small(TaskKind::Flight, 2);
        let s = g.scene(0).unwrap();
        assert!(s.spec.path.max_rate() <= 30.0 + 1e-9);
        let SceneTruth::Flight(truth) = &s.truth else { panic!() };
        assert_eq!(truth.len(), 15);
        for ((t, d), expected_t) in truth.iter().zip(flight_timestamps(2.0)) {
            assert_eq!(*t, expected_t);
            // Every path point in the window lies within rate * half-window of the centre.
            assert!(great_circle_distance(d, &s.spec.path.at(*t)) <= 30.0 * TRUTH_WINDOW_S / 2.0);
        }
    }

    #[test]
    fn remix_reuses_the_scene() {
        let g = small(TaskKind::Static, 1);
        let s = g.scene(0).unwrap();
        let m = s.remix(-15.0).unwrap();
        let snr = 10.0 * (s.clean.mean_power() / m.scaled_noise.mean_power()).log10();
        assert!((snr + 15.0).abs() < 0.01);
        let bank = g.template_bank(512).unwrap();
        assert_eq!(bank.bin_count(), 257);
        let (lo, hi) = bank.rpm_range();
        assert!(s.ego.mean_rpm.iter().all(|r| (lo..=hi).contains(r)));
    }
}
