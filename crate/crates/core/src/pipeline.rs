//! Configurable end-to-end processing of one recording: enhancement chain, angular spectrum,
//! post-processing and, for moving sources, tracking.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::enhance::{
    estimate_noise_motor, estimate_noise_oracle, estimate_noise_recursive, estimate_noise_vad, highpass, mwf,
    select_pairs, MotorProfile, NoiseModel, PairMask,
};
use crate::geometry::{build_grid, dot, ArrayGeometry, Direction, DirectionGrid};
use crate::signal::{accumulate_covariance, band_bins, istft, stft, SpatialCovariance, SpectralBlock, StftConfig};
use crate::sim::TRUTH_WINDOW_S;
use crate::spectrum::{
    cluster_estimates, gevd_music, mask_rotors, max_filter, music, pick_peak_as, srp, AngularSpectrum,
    LocalizationEstimate, MethodKind, Weighting, DEFAULT_BAND_HZ,
};
use crate::tracking::{
    coarse_to_fine_prepared, kalman_smooth, sample_at_timestamps, viterbi_smooth, KalmanConfig, Trajectory,
};
use crate::{Error, MultichannelRecording, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseEstimator {
    /// Frames at or below the given energy percentile.
    Vad {
        percentile: f64,
    },
    Recursive {
        alpha: f64,
    },
    /// Motor speed metadata and a template bank.
    MotorTemplate,
    /// A separate noise-only recording aligned with the input.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnhanceStep {
    Highpass { cutoff_hz: f64 },
    Mwf { mu: f64 },
    PairSelection { snr_floor_db: f64 },
}

impl EnhanceStep {
    fn is_spectral(&self) -> bool {
        !matches!(self, Self::Highpass { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LocalizeMethod {
    #[default]
    SrpPhat,
    SrpNonlin {
        gamma: f64,
    },
    Music {
        n_sources: usize,
    },
    GevdMusic {
        n_sources: usize,
    },
}

impl LocalizeMethod {
    pub fn kind(&self) -> MethodKind {
        match self {
            Self::SrpPhat => MethodKind::SrpPhat,
            Self::SrpNonlin { .. } => MethodKind::SrpNonlin,
            Self::Music { .. } => MethodKind::Music,
            Self::GevdMusic { .. } => MethodKind::GevdMusic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub az_step: f64,
    pub el_step: f64,
    pub el_min: f64,
    pub el_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { az_step: 5.0, el_step: 5.0, el_min: -90.0, el_max: 90.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorMask {
    pub directions: Vec<Direction>,
    pub radius_deg: f64,
}

/// Combination of per-segment estimates by spherical k-means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub top_m: usize,
    pub segment_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostConfig {
    /// 0 disables the max filter.
    pub max_filter_radius_deg: f64,
    pub rotor_mask: Option<RotorMask>,
    pub cluster: Option<ClusterConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrackingMethod {
    /// Raw per-window estimates.
    #[default]
    None,
    Kalman(KalmanConfig),
    Viterbi {
        penalty_per_deg: f64,
        top_k: Option<usize>,
    },
    CoarseToFine {
        search_radius_deg: f64,
    },
}

/// Sliding-window analysis of moving sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightConfig {
    pub window_s: f64,
    pub hop_s: f64,
    /// Averaging window around each query time, seconds.
    pub sample_window_s: f64,
}

impl Default for FlightConfig {
    fn default() -> Self {
        Self { window_s: 0.5, hop_s: 0.125, sample_window_s: TRUTH_WINDOW_S }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stft: StftConfig,
    pub band_hz: (f64, f64),
    pub grid: GridConfig,
    /// Required by MWF, pair selection and GEVD-MUSIC.
    pub noise: Option<NoiseEstimator>,
    pub enhance: Vec<EnhanceStep>,
    pub method: LocalizeMethod,
    pub post: PostConfig,
    pub tracking: TrackingMethod,
    pub flight: FlightConfig,
}

impl Default for PipelineConfig {
    /// SRP-PHAT on a 5° grid without enhancement.
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            band_hz: DEFAULT_BAND_HZ,
            grid: GridConfig::default(),
            noise: None,
            enhance: Vec::new(),
            method: LocalizeMethod::SrpPhat,
            post: PostConfig::default(),
            tracking: TrackingMethod::None,
            flight: FlightConfig::default(),
        }
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl PipelineConfig {
    /// Every problem with the configuration, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if let Err(e) = self.stft.validate() {
            p.push(format!("stft: {e}"));
        }
        let (lo, hi) = self.band_hz;
        if !(lo >= 0.0) || !(hi > lo) || !hi.is_finite() {
            p.push(format!("band [{lo}, {hi}] Hz is invalid"));
        }
        let g = &self.grid;
        if let Err(e) = build_grid(g.az_step, g.el_step, (g.el_min, g.el_max)) {
            p.push(format!("grid: {e}"));
        }
        match self.noise {
            Some(NoiseEstimator::Vad { percentile }) if !(0.0..=1.0).contains(&percentile) => {
                p.push(format!("noise: VAD percentile {percentile} must lie in [0, 1]"))
            }
            Some(NoiseEstimator::Recursive { alpha }) if !(0.0..1.0).contains(&alpha) => {
                p.push(format!("noise: smoothing factor {alpha} must lie in [0, 1)"))
            }
            _ => {}
        }
        let mut seen_spectral = false;
        for (i, step) in self.enhance.iter().enumerate() {
            match *step {
                EnhanceStep::Highpass { cutoff_hz } => {
                    if !positive(cutoff_hz) {
                        p.push(format!("enhance[{i}]: highpass cutoff {cutoff_hz} Hz must be positive"));
                    }
                    if seen_spectral {
                        p.push(format!("enhance[{i}]: highpass must precede spectral steps"));
                    }
                }
                EnhanceStep::Mwf { mu } if !positive(mu) => {
                    p.push(format!("enhance[{i}]: MWF trade-off {mu} must be positive"))
                }
                EnhanceStep::PairSelection { snr_floor_db } if snr_floor_db.is_nan() => {
                    p.push(format!("enhance[{i}]: pair SNR floor must be a number"))
                }
                _ => {}
            }
            seen_spectral |= step.is_spectral();
            if step.is_spectral() && self.noise.is_none() {
                p.push(format!("enhance[{i}]: needs a noise estimator"));
            }
        }
        match self.method {
            LocalizeMethod::SrpNonlin { gamma } if !(gamma > 0.0 && gamma <= 1.0) => {
                p.push(format!("localize: GCC-NONLIN exponent {gamma} must lie in (0, 1]"))
            }
            LocalizeMethod::Music { n_sources } | LocalizeMethod::GevdMusic { n_sources } if n_sources == 0 => {
                p.push(String::from("localize: source count must be at least 1"))
            }
            LocalizeMethod::GevdMusic { .. } if self.noise.is_none() => {
                p.push(String::from("localize: GEVD-MUSIC needs a noise estimator"))
            }
            _ => {}
        }
        if !(self.post.max_filter_radius_deg >= 0.0) || !self.post.max_filter_radius_deg.is_finite() {
            p.push(format!("post: max filter radius {} must be non-negative", self.post.max_filter_radius_deg));
        }
        if let Some(m) = &self.post.rotor_mask {
            if !(m.radius_deg >= 0.0) {
                p.push(format!("post: rotor mask radius {} must be non-negative", m.radius_deg));
            }
        }
        if let Some(c) = &self.post.cluster {
            if c.k == 0 || c.top_m == 0 || !positive(c.segment_s) {
                p.push(String::from("post: clustering needs positive k, top_m and segment length"));
            }
        }
        match self.tracking {
            TrackingMethod::Kalman(k) => {
                if let Err(e) = k.validate() {
                    p.push(format!("track: {e}"));
                }
            }
            TrackingMethod::Viterbi { penalty_per_deg, top_k } => {
                if !(penalty_per_deg >= 0.0) || !penalty_per_deg.is_finite() {
                    p.push(format!("track: Viterbi penalty {penalty_per_deg} must be non-negative"));
                }
                if top_k == Some(0) {
                    p.push(String::from("track: Viterbi candidate count must be positive"));
                }
            }
            TrackingMethod::CoarseToFine { search_radius_deg } if !(search_radius_deg > 0.0) => {
                p.push(format!("track: search radius {search_radius_deg} must be positive"))
            }
            _ => {}
        }
        let f = &self.flight;
        if !positive(f.window_s) || !positive(f.hop_s) || !positive(f.sample_window_s) {
            p.push(String::from("flight: window, hop and sampling window must be positive"));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p.join("; ")))
        }
    }

    fn needs_noise(&self) -> bool {
        self.enhance.iter().any(EnhanceStep::is_spectral) || matches!(self.method, LocalizeMethod::GevdMusic { .. })
    }
}

/// Templates carry the spectral shape of the ego-noise but not its level at the microphones,
/// which depends on gain staging. One scalar per recording is fitted so that the template's
/// total power matches the quietest fifth of the frames.
fn calibrate_template_level(model: &mut NoiseModel, blocks: &[SpectralBlock]) {
    const FLOOR_PERCENTILE: f64 = 0.2;
    let Ok(floor) = estimate_noise_vad(blocks, FLOOR_PERCENTILE) else {
        return;
    };
    let power = |c: &SpatialCovariance| c.matrices.iter().map(|m| m.trace().re).sum::<f64>();
    let (observed, template) = (power(&floor.noise_cov), power(&model.noise_cov));
    if observed > 0.0 && template > 0.0 && observed.is_finite() && template.is_finite() {
        let scale = observed / template;
        model.noise_cov.matrices.iter_mut().for_each(|m| m.scale(scale));
    }
}

/// Mirrors each channel around its first and last sample without repeating them. Channels
/// shorter than the padding wrap around the mirrored extension.
fn reflect_pad(recording: &MultichannelRecording, before: usize, after: usize) -> Result<MultichannelRecording> {
    let channels = recording
        .channels()
        .iter()
        .map(|ch| {
            let n = ch.len();
            if n < 2 {
                return alloc::vec![ch.first().copied().unwrap_or(0.0); n + before + after];
            }
            // Even extension with period 2(n - 1).
            let period = 2 * (n - 1);
            let at = |i: isize| {
                let k = i.rem_euclid(period as isize) as usize;
                ch[if k < n { k } else { period - k }]
            };
            (-(before as isize)..(n + after) as isize).map(at).collect()
        })
        .collect();
    MultichannelRecording::with_channel_map(channels, recording.sample_rate(), recording.channel_map().to_vec())
}

/// Side information available for a recording.
#[derive(Debug, Clone, Copy)]
pub struct PipelineInputs<'a> {
    pub geometry: &'a ArrayGeometry,
    pub motor: Option<&'a MotorProfile>,
    /// Noise-only signal aligned with the recording, for the oracle estimator.
    pub oracle_noise: Option<&'a MultichannelRecording>,
}

impl<'a> PipelineInputs<'a> {
    pub fn new(geometry: &'a ArrayGeometry) -> Self {
        Self { geometry, motor: None, oracle_noise: None }
    }
}

/// A recording after the enhancement chain, ready for spectrum computation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub blocks: Vec<SpectralBlock>,
    pub noise: Option<NoiseModel>,
    pub mask: PairMask,
    pub sample_rate: f64,
    pub hop: usize,
    pub fft_size: usize,
}

impl Prepared {
    /// Centre time of a range of blocks, seconds.
    pub fn time_of(&self, blocks: &Range<usize>) -> f64 {
        let start = blocks.start * self.hop;
        let end = (blocks.end.max(blocks.start + 1) - 1) * self.hop + self.fft_size;
        (start + end) as f64 / 2.0 / self.sample_rate
    }

    /// Consecutive block ranges of `window_s` seconds, one every `hop_s` seconds.
    pub fn windows(&self, window_s: f64, hop_s: f64) -> Result<Vec<Range<usize>>> {
        let window_samples = (window_s * self.sample_rate).round() as usize;
        let needed = window_samples.max(self.fft_size);
        let total = self.blocks.len();
        let available = if total == 0 { 0 } else { (total - 1) * self.hop + self.fft_size };
        if available < needed {
            return Err(Error::RecordingTooShort { len: available, needed });
        }
        let per_window = ((needed - self.fft_size) as f64 / self.hop as f64).round() as usize + 1;
        let stride = ((hop_s * self.sample_rate / self.hop as f64).round() as usize).max(1);
        Ok((0..).map(|k| k * stride).take_while(|s| s + per_window <= total).map(|s| s..s + per_window).collect())
    }
}

/// Per-timestamp output for a moving source.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightOutput {
    pub raw: Trajectory,
    pub tracked: Trajectory,
    pub estimates: Vec<Direction>,
}

/// A validated pipeline with its direction grid.
#[derive(Debug, Clone)]
pub struct Localizer {
    config: PipelineConfig,
    grid: Arc<DirectionGrid>,
}

impl Localizer {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let g = &config.grid;
        let grid = Arc::new(build_grid(g.az_step, g.el_step, (g.el_min, g.el_max))?);
        Ok(Self { config, grid })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    fn check_channels(&self, recording: &MultichannelRecording, inputs: &PipelineInputs) -> Result<()> {
        if recording.channel_count() != inputs.geometry.mic_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} channels but {} microphones",
                recording.channel_count(),
                inputs.geometry.mic_count()
            )));
        }
        Ok(())
    }

    fn estimate_noise(
        &self,
        blocks: &[SpectralBlock],
        oracle: Option<&MultichannelRecording>,
        inputs: &PipelineInputs,
    ) -> Result<NoiseModel> {
        let cfg = &self.config;
        match cfg.noise.ok_or_else(|| Error::InvalidConfig("no noise estimator configured".into()))? {
            NoiseEstimator::Vad { percentile } => estimate_noise_vad(blocks, percentile),
            NoiseEstimator::Recursive { alpha } => estimate_noise_recursive(blocks, alpha),
            NoiseEstimator::MotorTemplate => {
                let profile = inputs.motor.ok_or_else(|| Error::MissingInput("motor speed profile".into()))?;
                let mut model = estimate_noise_motor(
                    profile,
                    cfg.stft.fft_size,
                    blocks.first().ok_or(Error::EmptyInput)?.channel_count(),
                )?;
                calibrate_template_level(&mut model, blocks);
                Ok(model)
            }
            NoiseEstimator::Oracle => {
                let noise = oracle.ok_or_else(|| Error::MissingInput("oracle noise recording".into()))?;
                estimate_noise_oracle(&stft(noise, &cfg.stft)?)
            }
        }
    }

    /// Runs the enhancement chain and the STFT.
    pub fn prepare(&self, recording: &MultichannelRecording, inputs: &PipelineInputs) -> Result<Prepared> {
        self.check_channels(recording, inputs)?;
        let cfg = &self.config;
        let mut time_domain = recording.clone();
        let mut oracle = inputs.oracle_noise.cloned();
        let mut steps = cfg.enhance.iter().peekable();
        while let Some(EnhanceStep::Highpass { cutoff_hz }) = steps.peek() {
            time_domain = highpass(&time_domain, *cutoff_hz)?;
            if let Some(o) = &oracle {
                oracle = Some(highpass(o, *cutoff_hz)?);
            }
            steps.next();
        }
        let mut blocks = stft(&time_domain, &cfg.stft)?;
        let mut noise = None;
        if cfg.needs_noise() {
            noise = Some(self.estimate_noise(&blocks, oracle.as_ref(), inputs)?);
        }
        let mut mask = PairMask::all(recording.channel_count());
        for step in steps {
            let model = noise.as_ref().expect("noise model present for spectral steps");
            match *step {
                EnhanceStep::Mwf { mu } => blocks = mwf(&blocks, model, mu)?,
                EnhanceStep::PairSelection { snr_floor_db } => {
                    mask = select_pairs(&blocks, model, snr_floor_db, cfg.band_hz)?
                }
                EnhanceStep::Highpass { .. } => unreachable!("rejected by validation"),
            }
        }
        Ok(Prepared {
            blocks,
            noise,
            mask,
            sample_rate: recording.sample_rate(),
            hop: cfg.stft.hop,
            fft_size: cfg.stft.fft_size,
        })
    }

    /// Enhanced time-domain signal: the enhancement chain followed by inverse STFT when any
    /// spectral step ran. The output has the input's length. The input is reflect-padded by
    /// one frame on each side first, so that every original sample lies under full window
    /// overlap; otherwise the overlap-add normalization amplifies filtered edge frames.
    pub fn enhance_recording(
        &self,
        recording: &MultichannelRecording,
        inputs: &PipelineInputs,
    ) -> Result<MultichannelRecording> {
        if self.config.enhance.is_empty() {
            return Ok(recording.clone());
        }
        if !self.config.enhance.iter().any(EnhanceStep::is_spectral) {
            let mut out = recording.clone();
            for step in &self.config.enhance {
                if let EnhanceStep::Highpass { cutoff_hz } = step {
                    out = highpass(&out, *cutoff_hz)?;
                }
            }
            return Ok(out);
        }
        let (before, after) = (self.config.stft.fft_size, self.config.stft.fft_size + self.config.stft.hop);
        let padded = reflect_pad(recording, before, after)?;
        let padded_noise = inputs.oracle_noise.map(|n| reflect_pad(n, before, after)).transpose()?;
        let padded_inputs = PipelineInputs { oracle_noise: padded_noise.as_ref(), ..*inputs };
        let prepared = self.prepare(&padded, &padded_inputs)?;
        let rebuilt = istft(&prepared.blocks, self.config.stft.hop, self.config.stft.window)?;
        let len = recording.len();
        let channels = rebuilt
            .into_channels()
            .into_iter()
            .map(|ch| {
                let mut ch: Vec<f64> = ch.into_iter().skip(before).take(len).collect();
                ch.resize(len, 0.0);
                ch
            })
            .collect();
        MultichannelRecording::with_channel_map(channels, recording.sample_rate(), recording.channel_map().to_vec())
    }

    /// Angular spectrum over `blocks` on `grid`, post-processed (max filter, rotor mask).
    pub fn spectrum(
        &self,
        prepared: &Prepared,
        blocks: Range<usize>,
        grid: &Arc<DirectionGrid>,
        geometry: &ArrayGeometry,
    ) -> Result<AngularSpectrum> {
        let cfg = &self.config;
        let slice = prepared.blocks.get(blocks.clone()).ok_or(Error::InconsistentBlocks)?;
        let first = slice.first().ok_or(Error::EmptyInput)?;
        let covariance =
            || accumulate_covariance(slice, band_bins(first.bin_hz, first.bin_count(), cfg.band_hz.0, cfg.band_hz.1));
        let mut spectrum = match cfg.method {
            LocalizeMethod::SrpPhat => {
                srp(slice, grid, geometry, &prepared.mask, Weighting::Phat, cfg.band_hz)?.spectrum
            }
            LocalizeMethod::SrpNonlin { gamma } => {
                srp(slice, grid, geometry, &prepared.mask, Weighting::Nonlin { gamma }, cfg.band_hz)?.spectrum
            }
            LocalizeMethod::Music { n_sources } => music(&covariance()?, grid, geometry, n_sources)?.spectrum,
            LocalizeMethod::GevdMusic { n_sources } => {
                let noise = prepared.noise.as_ref().ok_or_else(|| Error::MissingInput("noise model".into()))?;
                gevd_music(&covariance()?, noise, grid, geometry, n_sources)?.spectrum
            }
        };
        spectrum.time_s = prepared.time_of(&blocks);
        spectrum.block_range = blocks;
        if cfg.post.max_filter_radius_deg > 0.0 {
            spectrum = max_filter(&spectrum, cfg.post.max_filter_radius_deg);
        }
        if let Some(m) = &cfg.post.rotor_mask {
            spectrum = mask_rotors(&spectrum, &m.directions, m.radius_deg)?;
        }
        Ok(spectrum)
    }

    fn peak(&self, spectrum: &AngularSpectrum) -> Result<LocalizationEstimate> {
        pick_peak_as(spectrum, self.config.method.kind())
    }

    /// Single direction for a static source.
    pub fn localize(&self, recording: &MultichannelRecording, inputs: &PipelineInputs) -> Result<LocalizationEstimate> {
        let prepared = self.prepare(recording, inputs)?;
        let all = 0..prepared.blocks.len();
        match self.config.post.cluster {
            None => self.peak(&self.spectrum(&prepared, all, &self.grid, inputs.geometry)?),
            Some(c) => {
                let spectra = prepared
                    .windows(c.segment_s, c.segment_s)?
                    .into_iter()
                    .map(|w| self.spectrum(&prepared, w, &self.grid, inputs.geometry))
                    .collect::<Result<Vec<_>>>()?;
                let direction = cluster_estimates(&spectra, c.k, c.top_m)?;
                let global = self.spectrum(&prepared, all, &self.grid, inputs.geometry)?;
                let u = direction.unit_vector();
                let units = self.grid.unit_vectors();
                let nearest =
                    (0..units.len()).fold(0, |b, i| if dot(&units[i], &u) > dot(&units[b], &u) { i } else { b });
                let confidence = global.scores[nearest];
                Ok(LocalizationEstimate { direction, confidence, method: MethodKind::Clustered })
            }
        }
    }

    /// Sliding-window spectra over the whole recording.
    pub fn window_spectra(&self, prepared: &Prepared, geometry: &ArrayGeometry) -> Result<Vec<AngularSpectrum>> {
        let f = &self.config.flight;
        prepared
            .windows(f.window_s, f.hop_s)?
            .into_iter()
            .map(|w| self.spectrum(prepared, w, &self.grid, geometry))
            .collect()
    }

    /// Per-window peaks.
    pub fn raw_trajectory(&self, spectra: &[AngularSpectrum]) -> Result<Trajectory> {
        let peaks = spectra.iter().map(|s| self.peak(s)).collect::<Result<Vec<_>>>()?;
        Trajectory::new(
            spectra.iter().map(|s| s.time_s).collect(),
            peaks.iter().map(|p| p.direction).collect(),
            peaks.iter().map(|p| p.confidence).collect(),
        )
    }

    /// Directions of a moving source at `query_times`.
    pub fn track(
        &self,
        recording: &MultichannelRecording,
        inputs: &PipelineInputs,
        query_times: &[f64],
    ) -> Result<FlightOutput> {
        let prepared = self.prepare(recording, inputs)?;
        let f = self.config.flight;
        let spectra = self.window_spectra(&prepared, inputs.geometry)?;
        let raw = self.raw_trajectory(&spectra)?;
        let tracked = match self.config.tracking {
            TrackingMethod::None => raw.clone(),
            TrackingMethod::Kalman(k) => kalman_smooth(&raw, &k)?,
            TrackingMethod::Viterbi { penalty_per_deg, top_k } => viterbi_smooth(&spectra, penalty_per_deg, top_k)?,
            TrackingMethod::CoarseToFine { search_radius_deg } => {
                coarse_to_fine_prepared(&prepared, self, inputs.geometry, f.window_s, f.hop_s, search_radius_deg)?
            }
        };
        let estimates = sample_at_timestamps(&tracked, query_times, f.sample_window_s)?;
        Ok(FlightOutput { raw, tracked, estimates })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn default_config_is_valid() {
        assert!(PipelineConfig::default().problems().is_empty());
        assert!(Localizer::new(PipelineConfig::default()).is_ok());
    }

    #[test]
    fn problems_are_aggregated() {
        let cfg = PipelineConfig {
            method: LocalizeMethod::SrpNonlin { gamma: -1.0 },
            enhance: vec![EnhanceStep::Mwf { mu: 1.0 }, EnhanceStep::Highpass { cutoff_hz: 100.0 }],
            grid: GridConfig { az_step: 7.0, ..Default::default() },
            ..Default::default()
        };
        let p = cfg.problems();
        assert_eq!(p.len(), 4, "{p:?}");
        assert!(p.iter().any(|m| m.contains("exponent -1")));
        assert!(p.iter().any(|m| m.contains("precede")));
        assert!(p.iter().any(|m| m.contains("noise estimator")));
        assert!(p.iter().any(|m| m.contains("grid")));
    }

    #[test]
    fn reflect_padding_mirrors_the_edges() {
        let r = MultichannelRecording::new(vec![vec![1.0, 2.0, 3.0, 4.0]], 8.0).unwrap();
        let p = reflect_pad(&r, 3, 4).unwrap();
        assert_eq!(p.channel(0), &[4.0, 3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0, 2.0]);
        let short = MultichannelRecording::new(vec![vec![5.0]], 8.0).unwrap();
        assert_eq!(reflect_pad(&short, 2, 1).unwrap().channel(0), &[5.0; 4]);
    }

    #[test]
    fn windows_cover_the_recording() {
        let prepared = Prepared {
            blocks: vec![SpectralBlock { bins: vec![vec![]], bin_hz: 1.0, frame_index: 0 }; 171],
            noise: None,
            mask: PairMask::all(2),
            sample_rate: 44100.0,
            hop: 512,
            fft_size: 1024,
        };
        let w = prepared.windows(0.5, 0.125).unwrap();
        assert_eq!(w[0], 0..42);
        assert_eq!(w[1].start, 11);
        assert!(w.last().unwrap().end <= 171);
        assert!((prepared.time_of(&w[0]) - 22016.0 / 2.0 / 44100.0).abs() < 1e-12);
        assert!(matches!(prepared.windows(5.0, 0.1), Err(Error::RecordingTooShort { .. })));
    }
}
