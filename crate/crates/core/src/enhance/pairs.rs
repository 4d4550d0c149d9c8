use alloc::vec::Vec;
use core::ops::Range;
#[allow(unused_imports)]
use num_traits::Float;

use crate::signal::{band_bins, SpectralBlock};
use crate::{Error, Result};

use super::NoiseModel;

/// Accepted flag per unordered microphone pair `(i, j)`, `i < j`, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMask {
    pairs: Vec<(usize, usize)>,
    accepted: Vec<bool>,
}

impl PairMask {
    pub fn all(channels: usize) -> Self {
        let pairs: Vec<_> = (0..channels).flat_map(|i| (i + 1..channels).map(move |j| (i, j))).collect();
        let accepted = alloc::vec![true; pairs.len()];
        Self { pairs, accepted }
    }

    /// Fails if no pair would be accepted.
    pub fn from_flags(channels: usize, accepted: Vec<bool>) -> Result<Self> {
        let mut mask = Self::all(channels);
        if accepted.len() != mask.pairs.len() {
            return Err(Error::ShapeMismatch("pair flag count".into()));
        }
        if !accepted.iter().any(|&a| a) {
            return Err(Error::InvalidConfig("at least one microphone pair must be accepted".into()));
        }
        mask.accepted = accepted;
        Ok(mask)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_accepted(&self, i: usize, j: usize) -> bool {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().zip(&self.accepted).any(|(&p, &a)| a && p == (i, j))
    }

    pub fn accepted_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().zip(&self.accepted).filter(|(_, &a)| a).map(|(&p, _)| p)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }
}

/// Per-pair SNR in dB: excess band energy of the two channels over their noise-model energy.
pub fn pair_snrs_db(blocks: &[SpectralBlock], noise: &NoiseModel, band_hz: (f64, f64)) -> Result<Vec<f64>> {
    let first = blocks.first().ok_or(Error::EmptyInput)?;
    let channels = first.channel_count();
    if noise.noise_cov.channel_count() != channels {
        return Err(Error::ShapeMismatch("noise model channel count".into()));
    }
    let band: Range<usize> = band_bins(first.bin_hz, first.bin_count(), band_hz.0, band_hz.1);
    let mut signal = alloc::vec![0.0; channels];
    let mut noise_power = alloc::vec![0.0; channels];
    for block in blocks {
        for (c, ch) in block.bins.iter().enumerate() {
            signal[c] += ch[band.clone()].iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
    }
    for bin in band.clone() {
        if let Some(m) = noise.noise_cov.at_bin(bin) {
            for (c, p) in noise_power.iter_mut().enumerate() {
                *p += m[(c, c)].re;
            }
        }
    }
    let frames = blocks.len() as f64;
    let pairs = PairMask::all(channels);
    Ok(pairs
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let n = noise_power[i] + noise_power[j];
            let excess = (signal[i] + signal[j]) / frames - n;
            if n <= 0.0 {
                f64::INFINITY
            } else if excess <= 0.0 {
                f64::NEG_INFINITY
            } else {
                10.0 * (excess / n).log10()
            }
        })
        .collect())
}

/// Keeps pairs whose SNR reaches `snr_floor_db`; if none does, the single best pair.
pub fn select_pairs(
    blocks: &[SpectralBlock],
    noise: &NoiseModel,
    snr_floor_db: f64,
    band_hz: (f64, f64),
) -> Result<PairMask> {
    let channels = blocks.first().ok_or(Error::EmptyInput)?.channel_count();
    if channels < 2 {
        return Err(Error::InvalidConfig("pair selection needs at least two channels".into()));
    }
    let snrs = pair_snrs_db(blocks, noise, band_hz)?;
    let mut accepted: Vec<bool> = snrs.iter().map(|&s| s >= snr_floor_db).collect();
    if !accepted.iter().any(|&a| a) {
        let best = (0..snrs.len()).fold(0, |best, k| if snrs[k] > snrs[best] { k } else { best });
        accepted[best] = true;
    }
    PairMask::from_flags(channels, accepted)
}
