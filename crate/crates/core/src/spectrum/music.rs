use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use log::warn;
use num_complex::Complex64;

use crate::enhance::{NoiseModel, DIAGONAL_LOADING};
use crate::geometry::{steering_vector_unit, ArrayGeometry, DirectionGrid};
use crate::signal::SpatialCovariance;
use crate::{Error, Result};

use super::AngularSpectrum;

/// Eigenvalue ratio `λ1/λ2` below which a bin is flagged as having no clear dominant source.
const DEGENERATE_EIGENGAP: f64 = 1.1;

/// Floor on the noise-subspace projection, keeping pseudospectra finite for exact models.
const MIN_PROJECTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MusicOutput {
    pub spectrum: AngularSpectrum,
    /// Bins whose leading generalized eigenvalue gap was below 1.1.
    pub degenerate_bins: usize,
}

/// Classical MUSIC averaged over the bins of `noisy`.
pub fn music(
    noisy: &SpatialCovariance,
    grid: &Arc<DirectionGrid>,
    geom: &ArrayGeometry,
    n_sources: usize,
) -> Result<MusicOutput> {
    subspace_spectrum(noisy, None, grid, geom, n_sources)
}

/// MUSIC on the generalized eigenproblem `Φx v = λ Φn v`, solved in the domain whitened by
/// the Cholesky factor of the (diagonally loaded) noise covariance.
pub fn gevd_music(
    noisy: &SpatialCovariance,
    noise: &NoiseModel,
    grid: &Arc<DirectionGrid>,
    geom: &ArrayGeometry,
    n_sources: usize,
) -> Result<MusicOutput> {
    subspace_spectrum(noisy, Some(&noise.noise_cov), grid, geom, n_sources)
}

fn subspace_spectrum(
    noisy: &SpatialCovariance,
    noise: Option<&SpatialCovariance>,
    grid: &Arc<DirectionGrid>,
    geom: &ArrayGeometry,
    n_sources: usize,
) -> Result<MusicOutput> {
    let channels = noisy.channel_count();
    if channels != geom.mic_count() {
        return Err(Error::ShapeMismatch(alloc::format!("{channels} channels but {} microphones", geom.mic_count())));
    }
    if n_sources == 0 || n_sources >= channels {
        return Err(Error::InvalidConfig(alloc::format!("source count {n_sources} must lie in 1..{channels}")));
    }
    if noisy.matrices.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(n) = noise {
        if n.channel_count() != channels || noisy.bins.clone().any(|b| n.at_bin(b).is_none()) {
            return Err(Error::ShapeMismatch("noise covariance does not cover the analysis bins".into()));
        }
    }

    let mut scores = vec![0.0; grid.len()];
    let mut degenerate = 0usize;
    let mut proj = vec![Complex64::new(0.0, 0.0); channels];
    for (offset, phi_x) in noisy.matrices.iter().enumerate() {
        let bin = noisy.bins.start + offset;
        let freq = bin as f64 * noisy.bin_hz;
        let whitening = match noise {
            Some(n) => {
                let loaded = n.at_bin(bin).expect("checked").diagonal_loaded(DIAGONAL_LOADING);
                let l = loaded.cholesky().ok_or(Error::SingularNoiseCovariance(bin))?;
                Some(l.lower_inverse())
            }
            None => None,
        };
        let target = match &whitening {
            Some(w) => w.mul(phi_x).mul(&w.adjoint()),
            None => phi_x.clone(),
        };
        let eig = target.hermitian_eigen();
        if eig.values.len() > 1 && eig.values[0] < DEGENERATE_EIGENGAP * eig.values[1] {
            degenerate += 1;
        }
        let noise_space: Vec<Vec<Complex64>> = (n_sources..channels).map(|k| eig.vector(k)).collect();

        for (score, u) in scores.iter_mut().zip(grid.unit_vectors()) {
            let a = steering_vector_unit(u, geom, freq);
            let v: Vec<Complex64> = match &whitening {
                Some(w) => w.mul_vec(&a),
                None => a,
            };
            let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            for (p, c) in proj.iter_mut().zip(&v) {
                *p = c / norm;
            }
            let p: f64 = noise_space
                .iter()
                .map(|e| e.iter().zip(&proj).map(|(ek, vk)| ek.conj() * vk).sum::<Complex64>().norm_sqr())
                .sum();
            *score += 1.0 / p.max(MIN_PROJECTION);
        }
    }
    if degenerate > 0 {
        warn!("{degenerate} of {} bins have a degenerate eigengap", noisy.matrices.len());
    }
    let count = noisy.matrices.len() as f64;
    scores.iter_mut().for_each(|s| *s /= count);
    Ok(MusicOutput {
        spectrum: AngularSpectrum::new(scores, grid.clone(), 0..noisy.frame_count, 0.0),
        degenerate_bins: degenerate,
    })
}
