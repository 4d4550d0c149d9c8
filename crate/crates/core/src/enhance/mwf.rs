use alloc::format;
use alloc::vec::Vec;

use crate::linalg::CMatrix;
use crate::signal::{accumulate_covariance, SpectralBlock};
use crate::{Error, Result};

use super::NoiseModel;

/// Relative diagonal loading applied before every inversion.
pub const DIAGONAL_LOADING: f64 = 1e-9;

/// Multichannel Wiener filter.
///
/// Per bin, the speech covariance is `Φs = P(Φx - Φn)` where `P` clamps negative eigenvalues,
/// the filter is `W = (Φs + μ Φn)^-1 Φs`, and each frame vector `x` becomes `W^H x`, the
/// estimate of the speech image at every microphone.
pub fn mwf(blocks: &[SpectralBlock], noise: &NoiseModel, mu: f64) -> Result<Vec<SpectralBlock>> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidConfig(format!("mu {mu} must be non-negative")));
    }
    let first = blocks.first().ok_or(Error::EmptyInput)?;
    let channels = first.channel_count();
    let bins = first.bin_count();
    let noise_cov = &noise.noise_cov;
    if noise_cov.channel_count() != channels || noise_cov.bins.start > 0 || noise_cov.bins.end < bins {
        return Err(Error::ShapeMismatch(format!(
            "noise model covers {} channels, bins {:?}; input has {channels} channels, {bins} bins",
            noise_cov.channel_count(),
            noise_cov.bins
        )));
    }
    let noisy = accumulate_covariance(blocks, 0..bins)?;
    let mut out: Vec<SpectralBlock> = blocks.to_vec();

    for bin in 0..bins {
        let phi_x = &noisy.matrices[bin];
        let phi_n = noise_cov.at_bin(bin).expect("bin covered");
        let phi_s = phi_x.sub(phi_n).psd_projection();
        let system = phi_s.add(&phi_n.scaled(mu)).diagonal_loaded(DIAGONAL_LOADING);
        let inv = system.inverse().ok_or(Error::SingularNoiseCovariance(bin))?;
        let filter_h: CMatrix = inv.mul(&phi_s).adjoint();
        for (src, dst) in blocks.iter().zip(out.iter_mut()) {
            let y = filter_h.mul_vec(&src.snapshot(bin));
            for (ch, v) in dst.bins.iter_mut().zip(y) {
                ch[bin] = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enhance::{estimate_noise_oracle, EstimatorKind};
    use crate::signal::SpatialCovariance;
    use alloc::vec;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(gaussian(rng), gaussian(rng)) * core::f64::consts::FRAC_1_SQRT_2
    }

    /// Frames `x = s v + n` with a planted speech steering `v` and spatially coloured noise.
    fn scene(
        seed: u64,
        frames: usize,
        channels: usize,
        bins: usize,
        speech_gain: f64,
    ) -> (Vec<SpectralBlock>, Vec<SpectralBlock>, Vec<SpectralBlock>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix: Vec<Vec<Complex64>> =
            (0..channels).map(|_| (0..channels).map(|_| cgauss(&mut rng)).collect()).collect();
        let steer: Vec<Vec<Complex64>> = (0..bins)
            .map(|_| {
                (0..channels).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..core::f64::consts::TAU))).collect()
            })
            .collect();
        let mut clean = Vec::new();
        let mut noise = Vec::new();
        let mut noisy = Vec::new();
        for t in 0..frames {
            let mut cb = vec![vec![Complex64::new(0.0, 0.0); bins]; channels];
            let mut nb = cb.clone();
            for k in 0..bins {
                let s = cgauss(&mut rng) * speech_gain;
                let w: Vec<Complex64> = (0..channels).map(|_| cgauss(&mut rng)).collect();
                for c in 0..channels {
                    cb[c][k] = s * steer[k][c];
                    nb[c][k] = (0..channels).map(|j| mix[c][j] * w[j]).sum();
                }
            }
            let xb: Vec<Vec<Complex64>> =
                cb.iter().zip(&nb).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect()).collect();
            clean.push(SpectralBlock { bins: cb, bin_hz: 10.0, frame_index: t });
            noise.push(SpectralBlock { bins: nb, bin_hz: 10.0, frame_index: t });
            noisy.push(SpectralBlock { bins: xb, bin_hz: 10.0, frame_index: t });
        }
        (clean, noise, noisy)
    }

    fn energy(blocks: &[SpectralBlock]) -> f64 {
        blocks.iter().map(SpectralBlock::energy).sum()
    }

    #[test]
    fn zero_noise_is_identity() {
        let (_, _, noisy) = scene(1, 50, 4, 6, 1.0);
        let zero = NoiseModel { noise_cov: SpatialCovariance::zeros(4, 0..6, 10.0), source: EstimatorKind::Oracle };
        let out = mwf(&noisy, &zero, 1.0).unwrap();
        for (a, b) in out.iter().zip(&noisy) {
            for (ca, cb) in a.bins.iter().zip(&b.bins) {
                for (x, y) in ca.iter().zip(cb) {
                    assert!((x - y).norm() <= 1e-6 * y.norm().max(1e-3));
                }
            }
        }
    }

    #[test]
    fn pure_noise_is_attenuated() {
        let (_, noise, _) = scene(2, 100, 8, 4, 0.0);
        let model = estimate_noise_oracle(&noise).unwrap();
        let out = mwf(&noise, &model, 1.0).unwrap();
        assert!(energy(&out) < 0.2 * energy(&noise));
    }

    #[test]
    fn improves_snr_of_planted_source() {
        let (clean, noise, noisy) = scene(3, 200, 8, 8, 1.0);
        let model = estimate_noise_oracle(&noise).unwrap();
        let out = mwf(&noisy, &model, 1.0).unwrap();
        let input_snr = energy(&clean) / energy(&noise);
        let residual: f64 = out
            .iter()
            .zip(&clean)
            .map(|(o, c)| {
                o.bins.iter().flatten().zip(c.bins.iter().flatten()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
            })
            .sum();
        let output_snr = energy(&clean) / residual;
        let gain_db = 10.0 * libm::log10(output_snr / input_snr);
        assert!(gain_db >= 6.0, "gain {gain_db} dB");
    }

    #[test]
    fn shape_mismatch() {
        let (_, noise, noisy) = scene(4, 20, 3, 4, 1.0);
        let model = estimate_noise_oracle(&noise[..]).unwrap();
        let other = NoiseModel { noise_cov: SpatialCovariance::zeros(2, 0..4, 10.0), source: EstimatorKind::Oracle };
        assert!(matches!(mwf(&noisy, &other, 1.0), Err(Error::ShapeMismatch(_))));
        assert!(mwf(&noisy, &model, 1.0).is_ok());
        assert!(matches!(mwf(&noisy, &model, -1.0), Err(Error::InvalidConfig(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn filter_is_not_explosive(seed in any::<u64>(), mu in 1.0f64..10.0, gain in 0.0f64..3.0) {
            let (_, noise, noisy) = scene(seed, 40, 4, 2, gain);
            let model = estimate_noise_oracle(&noise).unwrap();
            let out = mwf(&noisy, &model, mu).unwrap();
            // Energy of each bin across all frames: with Φn = L L^H the filter acts as
            // L S(S+μ)^-1 L^-1, which cannot add energy to the noisy covariance in aggregate.
            let kappa = 1.0 + 1.0 / mu;
            for bin in 0..2 {
                let energy = |bs: &[SpectralBlock]| bs.iter().map(|b| b.snapshot(bin).iter().map(|c| c.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt();
                prop_assert!(energy(&out) <= kappa * energy(&noisy) + 1e-12);
            }
        }
    }
}
