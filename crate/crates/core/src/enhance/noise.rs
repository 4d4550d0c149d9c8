use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::signal::{accumulate_covariance, accumulate_covariance_selected, SpatialCovariance, SpectralBlock};
use crate::{Error, Result};

pub const MOTOR_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Vad,
    MotorTemplate,
    Recursive,
    Oracle,
}

/// Noise spatial statistics together with how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub noise_cov: SpatialCovariance,
    pub source: EstimatorKind,
}

impl NoiseModel {
    /// True when every bin's smallest eigenvalue is at least `-1e-9` times its largest.
    pub fn is_psd(&self) -> bool {
        self.noise_cov.min_eigen_ratio() >= -1e-9
    }
}

/// Noise taken directly from a noise-only recording of the same scene.
pub fn estimate_noise_oracle(noise_blocks: &[SpectralBlock]) -> Result<NoiseModel> {
    let bins = noise_blocks.first().ok_or(Error::EmptyInput)?.bin_count();
    Ok(NoiseModel { noise_cov: accumulate_covariance(noise_blocks, 0..bins)?, source: EstimatorKind::Oracle })
}

/// Averages the covariance of the frames whose broadband energy is at or below the
/// `energy_percentile` quantile of all frame energies.
pub fn estimate_noise_vad(blocks: &[SpectralBlock], energy_percentile: f64) -> Result<NoiseModel> {
    const MIN_FRAMES: usize = 10;
    if blocks.len() < MIN_FRAMES {
        return Err(Error::TooFewFrames { got: blocks.len(), needed: MIN_FRAMES });
    }
    if !(energy_percentile > 0.0 && energy_percentile <= 1.0) {
        return Err(Error::InvalidConfig(format!("energy percentile {energy_percentile} must lie in (0, 1]")));
    }
    let energies: Vec<f64> = blocks.iter().map(SpectralBlock::energy).collect();
    if energies.iter().all(|&e| e == 0.0) {
        return Err(Error::ZeroSignal);
    }
    let mut sorted = energies.clone();
    sorted.sort_by(f64::total_cmp);
    let idx = ((sorted.len() - 1) as f64 * energy_percentile).floor() as usize;
    let threshold = sorted[idx];
    let selected = blocks.iter().zip(&energies).filter(|(_, &e)| e <= threshold).map(|(b, _)| b);
    let bins = blocks[0].bin_count();
    let noise_cov = accumulate_covariance_selected(selected, 0..bins)?;
    Ok(NoiseModel { noise_cov, source: EstimatorKind::Vad })
}

/// Exponential recursive average `R_t = α R_{t-1} + (1-α) x_t x_t^H`, starting from zero.
pub fn estimate_noise_recursive(blocks: &[SpectralBlock], alpha: f64) -> Result<NoiseModel> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let first = blocks.first().ok_or(Error::EmptyInput)?;
    let channels = first.channel_count();
    let bins = first.bin_count();
    let mut matrices: Vec<CMatrix> = (0..bins).map(|_| CMatrix::zeros(channels)).collect();
    let mut snap = alloc::vec![Complex64::new(0.0, 0.0); channels];
    for block in blocks {
        if block.channel_count() != channels || block.bin_count() != bins {
            return Err(Error::InconsistentBlocks);
        }
        for (bin, m) in matrices.iter_mut().enumerate() {
            for (s, ch) in snap.iter_mut().zip(&block.bins) {
                *s = ch[bin];
            }
            m.scale(alpha);
            m.add_outer(&snap, 1.0 - alpha);
        }
    }
    Ok(NoiseModel {
        noise_cov: SpatialCovariance { matrices, bins: 0..bins, bin_hz: first.bin_hz, frame_count: blocks.len() },
        source: EstimatorKind::Recursive,
    })
}

/// Per-motor noise power spectra recorded at one rotational speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorTemplate {
    pub rpm: f64,
    /// `power[motor][bin]`.
    pub power: Vec<Vec<f64>>,
}

/// Templates sorted by ascending speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBank {
    templates: Vec<MotorTemplate>,
    bin_hz: f64,
}

impl TemplateBank {
    pub fn new(mut templates: Vec<MotorTemplate>, bin_hz: f64) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::EmptyTemplateBank);
        }
        let bins = templates[0].power.first().map_or(0, Vec::len);
        for t in &templates {
            if !(t.rpm >= 0.0) || !t.rpm.is_finite() {
                return Err(Error::InvalidConfig(format!("template speed {} is invalid", t.rpm)));
            }
            if t.power.len() != MOTOR_COUNT || t.power.iter().any(|p| p.len() != bins) {
                return Err(Error::ShapeMismatch(format!(
                    "template at {} rpm must hold {MOTOR_COUNT} spectra of {bins} bins",
                    t.rpm
                )));
            }
            if t.power.iter().flatten().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidConfig(format!("template at {} rpm has negative power", t.rpm)));
            }
        }
        templates.sort_by(|a, b| a.rpm.total_cmp(&b.rpm));
        if templates.windows(2).any(|w| w[0].rpm == w[1].rpm) {
            return Err(Error::InvalidConfig("duplicate template speeds".into()));
        }
        Ok(Self { templates, bin_hz })
    }

    pub fn templates(&self) -> &[MotorTemplate] {
        &self.templates
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn bin_count(&self) -> usize {
        self.templates[0].power[0].len()
    }

    pub fn rpm_range(&self) -> (f64, f64) {
        (self.templates[0].rpm, self.templates[self.templates.len() - 1].rpm)
    }

    /// Power spectrum of `motor` at `rpm`, linearly interpolated between the two nearest
    /// template speeds. Speeds outside the bank are clamped if within 20% of its range.
    pub fn interpolate(&self, motor: usize, rpm: f64) -> Result<Vec<f64>> {
        let (min, max) = self.rpm_range();
        if !rpm.is_finite() || rpm < 0.0 || rpm < 0.8 * min || rpm > 1.2 * max {
            return Err(Error::SpeedOutOfRange { rpm, min, max });
        }
        let clamped = rpm.clamp(min, max);
        if clamped != rpm {
            warn!("motor {motor} speed {rpm} rpm clamped to template range [{min}, {max}]");
        }
        let upper = self.templates.partition_point(|t| t.rpm < clamped);
        if upper < self.templates.len() && self.templates[upper].rpm == clamped {
            return Ok(self.templates[upper].power[motor].clone());
        }
        let (a, b) = (&self.templates[upper - 1], &self.templates[upper]);
        let w = (clamped - a.rpm) / (b.rpm - a.rpm);
        Ok(a.power[motor].iter().zip(&b.power[motor]).map(|(pa, pb)| (1.0 - w) * pa + w * pb).collect())
    }
}

/// Current speeds of the four motors and the template bank used to model their noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorProfile {
    pub speeds: [f64; MOTOR_COUNT],
    pub template_bank: TemplateBank,
}

/// Diagonal noise covariance whose per-bin power is the sum over motors of the interpolated
/// templates. Templates carry no inter-channel phase, so every channel gets the same power.
pub fn estimate_noise_motor(profile: &MotorProfile, fft_size: usize, channels: usize) -> Result<NoiseModel> {
    let bank = &profile.template_bank;
    let bins = fft_size / 2 + 1;
    if bank.bin_count() != bins {
        return Err(Error::TemplateSizeMismatch { got: bank.bin_count(), expected: bins });
    }
    if profile.speeds.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidConfig("motor speeds must be non-negative".into()));
    }
    let mut power = alloc::vec![0.0; bins];
    for (motor, &rpm) in profile.speeds.iter().enumerate() {
        for (acc, p) in power.iter_mut().zip(bank.interpolate(motor, rpm)?) {
            *acc += p;
        }
    }
    let matrices = power
        .iter()
        .map(|&p| {
            let mut m = CMatrix::zeros(channels);
            for c in 0..channels {
                m[(c, c)] = Complex64::new(p, 0.0);
            }
            m
        })
        .collect();
    Ok(NoiseModel {
        noise_cov: SpatialCovariance { matrices, bins: 0..bins, bin_hz: bank.bin_hz(), frame_count: 1 },
        source: EstimatorKind::MotorTemplate,
    })
}
