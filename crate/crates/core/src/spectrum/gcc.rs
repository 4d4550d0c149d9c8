use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::Fft;
use crate::{Error, Result};

pub const DEFAULT_NONLIN_GAMMA: f64 = 0.3;

const MIN_CROSS_POWER: f64 = 1e-12;

/// Cross-spectrum weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Weighting {
    /// Unit magnitude, phase only.
    Phat,
    /// Magnitude compressed to `|C|^gamma`; `gamma = 0` is PHAT.
    Nonlin { gamma: f64 },
}

impl Weighting {
    fn weight(self, c: Complex64) -> Complex64 {
        let mag = c.norm();
        if mag < MIN_CROSS_POWER {
            return Complex64::new(0.0, 0.0);
        }
        match self {
            Weighting::Phat => c / mag,
            Weighting::Nonlin { gamma } => c * mag.powf(gamma - 1.0),
        }
    }
}

/// Generalized cross-correlation indexed by integer lag in `-max_lag..=max_lag`.
///
/// A positive lag means channel `j` is delayed with respect to channel `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gcc {
    pub values: Vec<f64>,
    pub max_lag: usize,
}

impl Gcc {
    pub fn at_lag(&self, lag: isize) -> f64 {
        self.values[(lag + self.max_lag as isize) as usize]
    }

    /// Lag of the largest value, earliest lag on ties.
    pub fn argmax_lag(&self) -> isize {
        let best = (0..self.values.len()).fold(0, |b, k| if self.values[k] > self.values[b] { k } else { b });
        best as isize - self.max_lag as isize
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Reusable FFT state for cross-correlations of one spectrum size.
#[derive(Debug, Clone)]
pub struct GccEngine {
    fft: Fft,
    scratch: Vec<Complex64>,
}

impl GccEngine {
    pub fn new(bin_count: usize) -> Result<Self> {
        let fft = Fft::new(2 * bin_count.saturating_sub(1))?;
        let scratch = vec![Complex64::new(0.0, 0.0); fft.size()];
        Ok(Self { fft, scratch })
    }

    pub fn fft_size(&self) -> usize {
        self.fft.size()
    }

    /// Adds the weighted cross-spectrum `w(X_j X_i^*)` over `bins` into `acc`.
    /// Fails with `InsufficientEnergy` when every bin is below the PHAT floor.
    pub fn accumulate_cross(
        xi: &[Complex64],
        xj: &[Complex64],
        weighting: Weighting,
        bins: Range<usize>,
        acc: &mut [Complex64],
    ) -> Result<()> {
        let mut any = false;
        for k in bins.clone() {
            if (xj[k] * xi[k].conj()).norm() >= MIN_CROSS_POWER {
                any = true;
                break;
            }
        }
        if !any {
            return Err(Error::InsufficientEnergy);
        }
        for k in bins {
            acc[k] += weighting.weight(xj[k] * xi[k].conj());
        }
        Ok(())
    }

    /// Circular correlation sequence (length `fft_size`) of a one-sided cross-spectrum.
    pub fn correlation(&mut self, cross: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; self.fft.size()];
        self.fft.inverse_real_into(cross, &mut self.scratch, &mut out);
        out
    }
}

pub fn gcc(block_i: &[Complex64], block_j: &[Complex64], weighting: Weighting, max_lag: usize) -> Result<Gcc> {
    if block_i.len() != block_j.len() || block_i.len() < 2 {
        return Err(Error::ShapeMismatch("spectra must have equal length of at least two bins".into()));
    }
    let mut engine = GccEngine::new(block_i.len())?;
    let n = engine.fft_size();
    if max_lag >= n / 2 {
        return Err(Error::InvalidConfig(alloc::format!("max lag {max_lag} must be below {}", n / 2)));
    }
    let mut cross = vec![Complex64::new(0.0, 0.0); block_i.len()];
    GccEngine::accumulate_cross(block_i, block_j, weighting, 0..block_i.len(), &mut cross)?;
    let circ = engine.correlation(&cross);
    let values = (-(max_lag as isize)..=max_lag as isize).map(|l| circ[l.rem_euclid(n as isize) as usize]).collect();
    Ok(Gcc { values, max_lag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spectrum(x: &[f64]) -> Vec<Complex64> {
        Fft::new(x.len()).unwrap().forward_real(x)
    }

    fn white(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Brute-force circular cross-correlation `Σ_t x_i[t] x_j[t + l]`, normalized.
    fn brute_force_argmax(xi: &[f64], xj: &[f64], max_lag: isize) -> isize {
        let n = xi.len() as isize;
        let norm = (xi.iter().map(|v| v * v).sum::<f64>() * xj.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let score = |l: isize| -> f64 {
            (0..n).map(|t| xi[t as usize] * xj[((t + l).rem_euclid(n)) as usize]).sum::<f64>() / norm
        };
        (-max_lag..=max_lag).fold(-max_lag, |b, l| if score(l) > score(b) { l } else { b })
    }

    #[test]
    fn identical_frames_peak_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = white(512, &mut rng);
        let s = spectrum(&x);
        for w in [Weighting::Phat, Weighting::Nonlin { gamma: 0.3 }] {
            assert_eq!(gcc(&s, &s, w, 20).unwrap().argmax_lag(), 0);
        }
    }

    #[test]
    fn circular_delay_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = white(512, &mut rng);
        let delayed: Vec<f64> = (0..512).map(|t| x[(t + 512 - 5) % 512]).collect();
        let g = gcc(&spectrum(&x), &spectrum(&delayed), Weighting::Phat, 30).unwrap();
        assert_eq!(g.argmax_lag(), 5);
        assert_eq!(brute_force_argmax(&x, &delayed, 30), 5);
    }

    #[test]
    fn independent_frames_have_weak_peaks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut matched, mut unmatched) = (0.0, 0.0);
        for _ in 0..100 {
            let a = white(512, &mut rng);
            let b = white(512, &mut rng);
            let (sa, sb) = (spectrum(&a), spectrum(&b));
            matched += gcc(&sa, &sa, Weighting::Phat, 30).unwrap().max();
            unmatched += gcc(&sa, &sb, Weighting::Phat, 30).unwrap().max();
        }
        assert!(unmatched < 0.5 * matched);
    }

    #[test]
    fn silent_input_is_an_error() {
        let z = vec![Complex64::new(0.0, 0.0); 33];
        assert_eq!(gcc(&z, &z, Weighting::Phat, 4), Err(Error::InsufficientEnergy));
        assert!(matches!(gcc(&z, &z[..17], Weighting::Phat, 4), Err(Error::ShapeMismatch(_))));
    }
}
