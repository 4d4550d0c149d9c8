//! Time-frequency primitives: recordings, framing, STFT/ISTFT and spatial covariances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::Fft;
use crate::linalg::CMatrix;
use crate::{Error, Result};

/// Synchronized multichannel audio, one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelRecording {
    channels: Vec<Vec<f64>>,
    sample_rate: f64,
    channel_map: Vec<usize>,
}

impl MultichannelRecording {
    /// Channel `k` is microphone `k`.
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        let map = (0..channels.len()).collect();
        Self::with_channel_map(channels, sample_rate, map)
    }

    pub fn with_channel_map(channels: Vec<Vec<f64>>, sample_rate: f64, channel_map: Vec<usize>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::ShapeMismatch("recording needs at least one channel".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::ShapeMismatch("channels differ in length".into()));
        }
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("sample rate {sample_rate} must be positive")));
        }
        if channel_map.len() != channels.len() {
            return Err(Error::ShapeMismatch("channel map length differs from channel count".into()));
        }
        Ok(Self { channels, sample_rate, channel_map })
    }

    pub fn silence(channels: usize, len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![vec![0.0; len]; channels], sample_rate)
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel_map(&self) -> &[usize] {
        &self.channel_map
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.channels[k]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Mean power over all channels and samples.
    pub fn mean_power(&self) -> f64 {
        let n = (self.channel_count() * self.len()).max(1) as f64;
        self.channels.iter().flatten().map(|x| x * x).sum::<f64>() / n
    }

    /// Samples `range` of every channel, keeping rate and channel map.
    pub fn slice(&self, range: Range<usize>) -> Self {
        let channels = self.channels.iter().map(|c| c[range.clone()].to_vec()).collect();
        Self { channels, sample_rate: self.sample_rate, channel_map: self.channel_map.clone() }
    }

    pub fn frame(&self, start_sample: usize, len: usize) -> Frame {
        Frame {
            samples_per_channel: self.channels.iter().map(|c| c[start_sample..start_sample + len].to_vec()).collect(),
            start_sample,
            sample_rate: self.sample_rate,
        }
    }
}

/// Analysis window cut from a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples_per_channel: Vec<Vec<f64>>,
    pub start_sample: usize,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    /// Periodic Hann, which overlap-adds to a constant at half-frame hops.
    Hann,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hann => (0..len).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { fft_size: 1024, hop: 512, window: WindowKind::Hann }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size == 0 || !self.fft_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("fft_size {} must be a power of two", self.fft_size)));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(Error::InvalidConfig(format!("hop {} must lie in 1..={}", self.hop, self.fft_size)));
        }
        Ok(())
    }

    /// Number of blocks produced for a signal of `len` samples.
    pub fn block_count(&self, len: usize) -> usize {
        if len < self.fft_size {
            0
        } else {
            (len - self.fft_size) / self.hop + 1
        }
    }
}

/// One-sided spectra of every channel for one analysis frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    /// `bins[channel][frequency]`.
    pub bins: Vec<Vec<Complex64>>,
    pub bin_hz: f64,
    pub frame_index: usize,
}

impl SpectralBlock {
    pub fn channel_count(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_count(&self) -> usize {
        self.bins.first().map_or(0, Vec::len)
    }

    pub fn fft_size(&self) -> usize {
        2 * (self.bin_count().saturating_sub(1))
    }

    pub fn sample_rate(&self) -> f64 {
        self.bin_hz * self.fft_size() as f64
    }

    /// Vector of all channels at one frequency bin.
    pub fn snapshot(&self, bin: usize) -> Vec<Complex64> {
        self.bins.iter().map(|c| c[bin]).collect()
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().flatten().map(|c| c.norm_sqr()).sum()
    }
}

/// Bins of a one-sided spectrum whose centre frequency lies in `[low_hz, high_hz]`.
pub fn band_bins(bin_hz: f64, bin_count: usize, low_hz: f64, high_hz: f64) -> Range<usize> {
    let lo = (low_hz / bin_hz).ceil().max(0.0) as usize;
    let hi = ((high_hz / bin_hz).floor() as usize + 1).min(bin_count);
    lo.min(hi)..hi
}

pub fn stft(recording: &MultichannelRecording, config: &StftConfig) -> Result<Vec<SpectralBlock>> {
    config.validate()?;
    let n = config.fft_size;
    if recording.len() < n {
        return Err(Error::RecordingTooShort { len: recording.len(), needed: n });
    }
    let fft = Fft::new(n)?;
    let window = config.window.coefficients(n);
    let bin_hz = recording.sample_rate() / n as f64;
    let count = config.block_count(recording.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];

    let blocks = (0..count)
        .map(|t| {
            let start = t * config.hop;
            let bins = recording
                .channels()
                .iter()
                .map(|ch| {
                    for (i, b) in buf.iter_mut().enumerate() {
                        *b = Complex64::new(ch[start + i] * window[i], 0.0);
                    }
                    fft.forward(&mut buf);
                    buf[..n / 2 + 1].to_vec()
                })
                .collect();
            SpectralBlock { bins, bin_hz, frame_index: t }
        })
        .collect();
    Ok(blocks)
}

/// Weighted overlap-add inverse of [`stft`]. Samples are normalized by the summed analysis
/// window, so every sample covered by a nonzero window weight is reconstructed exactly.
pub fn istft(blocks: &[SpectralBlock], hop: usize, window: WindowKind) -> Result<MultichannelRecording> {
    let first = blocks.first().ok_or(Error::EmptyInput)?;
    let channels = first.channel_count();
    let bins = first.bin_count();
    if channels == 0 || bins < 2 {
        return Err(Error::InconsistentBlocks);
    }
    if blocks.iter().any(|b| b.channel_count() != channels || b.bins.iter().any(|c| c.len() != bins)) {
        return Err(Error::InconsistentBlocks);
    }
    let n = first.fft_size();
    if hop == 0 || hop > n {
        return Err(Error::InvalidConfig(format!("hop {hop} must lie in 1..={n}")));
    }
    let fft = Fft::new(n)?;
    let win = window.coefficients(n);
    let len = (blocks.len() - 1) * hop + n;
    let mut out = vec![vec![0.0; len]; channels];
    let mut norm = vec![0.0; len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    let mut frame = vec![0.0; n];

    for (t, block) in blocks.iter().enumerate() {
        let start = t * hop;
        for (ch, spec) in block.bins.iter().enumerate() {
            fft.inverse_real_into(spec, &mut scratch, &mut frame);
            for i in 0..n {
                out[ch][start + i] += frame[i] * win[i];
            }
        }
        for i in 0..n {
            norm[start + i] += win[i] * win[i];
        }
    }
    for ch in &mut out {
        for (x, &w) in ch.iter_mut().zip(&norm) {
            *x = if w > 1e-12 { *x / w } else { 0.0 };
        }
    }
    MultichannelRecording::new(out, first.sample_rate())
}

/// Per-bin channel covariance matrices averaged over frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCovariance {
    /// One matrix per bin of `bins`.
    pub matrices: Vec<CMatrix>,
    pub bins: Range<usize>,
    pub bin_hz: f64,
    pub frame_count: usize,
}

impl SpatialCovariance {
    pub fn channel_count(&self) -> usize {
        self.matrices.first().map_or(0, CMatrix::dim)
    }

    /// Matrix of absolute bin index `bin`, if covered.
    pub fn at_bin(&self, bin: usize) -> Option<&CMatrix> {
        if self.bins.contains(&bin) {
            Some(&self.matrices[bin - self.bins.start])
        } else {
            None
        }
    }

    /// Zero covariance over the given bins.
    pub fn zeros(channels: usize, bins: Range<usize>, bin_hz: f64) -> Self {
        let matrices = bins.clone().map(|_| CMatrix::zeros(channels)).collect();
        Self { matrices, bins, bin_hz, frame_count: 1 }
    }

    /// Smallest eigenvalue over largest, per bin (worst bin). Values near or above zero mean PSD.
    pub fn min_eigen_ratio(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| {
                let e = m.hermitian_eigen();
                let max = e.values[0].abs();
                let min = *e.values.last().unwrap();
                if max == 0.0 {
                    0.0
                } else {
                    min / max
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `(1/T) Σ_t x_t x_t^H` for each bin of `bin_range`.
pub fn accumulate_covariance(blocks: &[SpectralBlock], bin_range: Range<usize>) -> Result<SpatialCovariance> {
    accumulate_covariance_selected(blocks.iter(), bin_range)
}

pub(crate) fn accumulate_covariance_selected<'a>(
    blocks: impl Iterator<Item = &'a SpectralBlock> + Clone,
    bin_range: Range<usize>,
) -> Result<SpatialCovariance> {
    let mut iter = blocks.clone().peekable();
    let first = *iter.peek().ok_or(Error::EmptyInput)?;
    let channels = first.channel_count();
    let bins = first.bin_count();
    if bin_range.end > bins || bin_range.start > bin_range.end {
        return Err(Error::InvalidConfig(format!("bin range {bin_range:?} outside 0..{bins}")));
    }
    let mut matrices: Vec<CMatrix> = bin_range.clone().map(|_| CMatrix::zeros(channels)).collect();
    let mut count = 0usize;
    let mut snap = vec![Complex64::new(0.0, 0.0); channels];
    for block in blocks {
        if block.channel_count() != channels || block.bin_count() != bins {
            return Err(Error::InconsistentBlocks);
        }
        for (m, bin) in matrices.iter_mut().zip(bin_range.clone()) {
            for (s, ch) in snap.iter_mut().zip(&block.bins) {
                *s = ch[bin];
            }
            m.add_outer(&snap, 1.0);
        }
        count += 1;
    }
    let inv = 1.0 / count as f64;
    for m in &mut matrices {
        m.scale(inv);
    }
    Ok(SpatialCovariance { matrices, bins: bin_range, bin_hz: first.bin_hz, frame_count: count })
}
