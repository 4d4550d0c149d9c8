use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{angle_between, dot, Direction, DirectionGrid, Vec3};
use crate::{Error, Result};

use super::{AngularSpectrum, LocalizationEstimate, MethodKind};

/// Score given to masked directions.
pub const MASKED: f64 = f64::MIN;

fn is_masked(score: f64) -> bool {
    score <= MASKED || score.is_nan()
}

/// Grid indices within `radius` degrees of each grid point.
fn neighbourhoods(grid: &DirectionGrid, radius: f64) -> Vec<Vec<usize>> {
    let units = grid.unit_vectors();
    // Cheap dot-product prefilter, exact angle test on the survivors.
    let cos_limit = (radius + 1e-6).min(180.0).to_radians().cos();
    units
        .iter()
        .map(|u| {
            units
                .iter()
                .enumerate()
                .filter(|(_, v)| dot(u, v) >= cos_limit - 1e-12 && angle_between(u, v) <= radius)
                .map(|(k, _)| k)
                .collect()
        })
        .collect()
}

/// Replaces each score by the maximum over the grid points within `radius` degrees.
pub fn max_filter(spectrum: &AngularSpectrum, radius: f64) -> AngularSpectrum {
    if radius <= 0.0 {
        return spectrum.clone();
    }
    let hoods = neighbourhoods(&spectrum.grid, radius);
    let scores =
        hoods.iter().map(|h| h.iter().map(|&k| spectrum.scores[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    spectrum.with_scores(scores)
}

/// Masks every direction within `radius` degrees of a rotor direction.
pub fn mask_rotors(spectrum: &AngularSpectrum, rotor_dirs: &[Direction], radius: f64) -> Result<AngularSpectrum> {
    let rotors: Vec<Vec3> = rotor_dirs.iter().map(Direction::unit_vector).collect();
    let scores: Vec<f64> = spectrum
        .scores
        .iter()
        .zip(spectrum.grid.unit_vectors())
        .map(|(&s, u)| if rotors.iter().any(|r| angle_between(u, r) <= radius) { MASKED } else { s })
        .collect();
    if scores.iter().all(|&s| is_masked(s)) {
        return Err(Error::AllMasked);
    }
    Ok(spectrum.with_scores(scores))
}

/// Grid argmax; the lowest index wins ties.
pub fn pick_peak(spectrum: &AngularSpectrum) -> Result<LocalizationEstimate> {
    pick_peak_as(spectrum, MethodKind::SrpPhat)
}

pub(crate) fn pick_peak_as(spectrum: &AngularSpectrum, method: MethodKind) -> Result<LocalizationEstimate> {
    let mut best: Option<usize> = None;
    for (k, &s) in spectrum.scores.iter().enumerate() {
        if is_masked(s) {
            continue;
        }
        if best.is_none_or(|b| s > spectrum.scores[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or(Error::AllMasked)?;
    Ok(LocalizationEstimate { direction: spectrum.direction(k), confidence: spectrum.scores[k], method })
}

/// Indices of unmasked points scoring at least as high as every neighbour in the 1-ring
/// (points within 1.5 grid steps), sorted by descending score.
pub fn local_maxima(spectrum: &AngularSpectrum) -> Vec<usize> {
    let grid = &spectrum.grid;
    let ring = 1.5 * grid.az_step().max(grid.el_step());
    let hoods = neighbourhoods(grid, ring);
    let scores = &spectrum.scores;
    let mut peaks: Vec<usize> = (0..scores.len())
        .filter(|&k| !is_masked(scores[k]) && hoods[k].iter().all(|&n| scores[n] <= scores[k]))
        .collect();
    peaks.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    peaks
}

const KMEANS_ITERATIONS: usize = 50;
const KMEANS_TOLERANCE: f64 = 1e-6;

/// Spherical k-means over the `top_m` strongest local maxima of every spectrum; returns the
/// centroid of the most populated cluster. If that centroid is undefined (its members cancel
/// out), the highest-confidence peak is returned instead.
pub fn cluster_estimates(spectra: &[AngularSpectrum], k: usize, top_m: usize) -> Result<Direction> {
    if k == 0 || top_m == 0 {
        return Err(Error::InvalidConfig("cluster and peak counts must be positive".into()));
    }
    if spectra.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut points: Vec<(Vec3, f64)> = Vec::new();
    for s in spectra {
        for idx in local_maxima(s).into_iter().take(top_m) {
            points.push((s.grid.unit_vectors()[idx], s.scores[idx]));
        }
    }
    if points.is_empty() {
        return Err(Error::AllMasked);
    }
    let strongest = (0..points.len()).fold(0, |b, i| if points[i].1 > points[b].1 { i } else { b });
    let fallback = Direction::from_vector(&points[strongest].0);

    // Farthest-point initialization from the strongest peak.
    let k = k.min(points.len());
    let mut centroids: Vec<Vec3> = vec![points[strongest].0];
    while centroids.len() < k {
        let far = (0..points.len())
            .map(|i| {
                let closest = centroids.iter().map(|c| dot(c, &points[i].0)).fold(f64::NEG_INFINITY, f64::max);
                (i, closest)
            })
            .fold((0, f64::INFINITY), |b, (i, c)| if c < b.1 { (i, c) } else { b });
        centroids.push(points[far.0].0);
    }

    let mut labels = vec![0usize; points.len()];
    let mut degenerate = vec![false; k];
    for _ in 0..KMEANS_ITERATIONS {
        for (label, (p, _)) in labels.iter_mut().zip(&points) {
            *label = (0..k).fold(0, |b, c| if dot(&centroids[c], p) > dot(&centroids[b], p) { c } else { b });
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let mut sum = [0.0; 3];
            let mut members = 0;
            for (label, (p, _)) in labels.iter().zip(&points) {
                if *label == c {
                    members += 1;
                    for d in 0..3 {
                        sum[d] += p[d];
                    }
                }
            }
            let norm = dot(&sum, &sum).sqrt();
            degenerate[c] = members > 0 && norm < 1e-9;
            if members == 0 || degenerate[c] {
                continue;
            }
            let next = [sum[0] / norm, sum[1] / norm, sum[2] / norm];
            shift = shift.max(angle_between(&next, &centroids[c]));
            centroids[c] = next;
        }
        if shift < KMEANS_TOLERANCE {
            break;
        }
    }
    let counts: Vec<usize> = (0..k).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
    let winner = (0..k).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
    if degenerate[winner] {
        return Ok(fallback);
    }
    Ok(Direction::from_vector(&centroids[winner]))
}
