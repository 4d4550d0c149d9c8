use alloc::sync::Arc;
use alloc::vec;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;

use crate::enhance::PairMask;
use crate::geometry::{ArrayGeometry, DirectionGrid};
use crate::signal::{band_bins, SpectralBlock};
use crate::{Error, Result};

use super::gcc::{GccEngine, Weighting};
use super::AngularSpectrum;

#[derive(Debug, Clone, PartialEq)]
pub struct SrpOutput {
    pub spectrum: AngularSpectrum,
    /// Block/pair combinations skipped for lack of cross-spectral energy.
    pub skipped: usize,
}

/// Steered response power: for each direction, the GCC of every accepted pair read at the
/// pair's far-field delay (linear interpolation between integer lags), summed over pairs
/// and blocks.
///
/// The GCC is linear in the weighted cross-spectrum, so the block sum is taken in the
/// frequency domain and each pair needs a single inverse transform.
pub fn srp(
    blocks: &[SpectralBlock],
    grid: &Arc<DirectionGrid>,
    geom: &ArrayGeometry,
    mask: &PairMask,
    weighting: Weighting,
    band_hz: (f64, f64),
) -> Result<SrpOutput> {
    let first = blocks.first().ok_or(Error::EmptyInput)?;
    let channels = first.channel_count();
    if channels != geom.mic_count() {
        return Err(Error::ShapeMismatch(alloc::format!("{channels} channels but {} microphones", geom.mic_count())));
    }
    if mask.accepted_count() == 0 {
        return Err(Error::InvalidConfig("no accepted microphone pair".into()));
    }
    let bins = first.bin_count();
    if blocks.iter().any(|b| b.channel_count() != channels || b.bin_count() != bins) {
        return Err(Error::InconsistentBlocks);
    }
    let band = band_bins(first.bin_hz, bins, band_hz.0, band_hz.1);
    let mut engine = GccEngine::new(bins)?;
    let n = engine.fft_size() as isize;
    let fs = first.sample_rate();

    let mut scores = vec![0.0; grid.len()];
    let mut skipped = 0usize;
    let mut used = 0usize;
    let mut cross = vec![Complex64::new(0.0, 0.0); bins];
    for (i, j) in mask.accepted_pairs() {
        cross.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let mut pair_used = false;
        for block in blocks {
            match GccEngine::accumulate_cross(&block.bins[i], &block.bins[j], weighting, band.clone(), &mut cross) {
                Ok(()) => pair_used = true,
                Err(Error::InsufficientEnergy) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if !pair_used {
            continue;
        }
        used += 1;
        let r = engine.correlation(&cross);
        let at = |l: isize| r[l.rem_euclid(n) as usize];
        for (score, u) in scores.iter_mut().zip(grid.unit_vectors()) {
            let lag = geom.tdoa_unit(u, i, j) * fs;
            let lo = lag.floor();
            let frac = lag - lo;
            let lo = lo as isize;
            *score += (1.0 - frac) * at(lo) + frac * at(lo + 1);
        }
    }
    if used == 0 {
        return Err(Error::InsufficientEnergy);
    }
    let block_range = first.frame_index..blocks[blocks.len() - 1].frame_index + 1;
    Ok(SrpOutput { spectrum: AngularSpectrum::new(scores, grid.clone(), block_range, 0.0), skipped })
}
