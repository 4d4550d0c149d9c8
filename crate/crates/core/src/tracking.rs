//! Temporal smoothing of in-flight direction estimates.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::geometry::{angle_between, norm, slerp, ArrayGeometry, Direction};
use crate::pipeline::{Localizer, PipelineInputs, Prepared};
use crate::spectrum::{pick_peak, AngularSpectrum};
use crate::{Error, MultichannelRecording, Result};

/// Directions over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    timestamps: Vec<f64>,
    directions: Vec<Direction>,
    confidences: Vec<f64>,
}

impl Trajectory {
    pub fn new(timestamps: Vec<f64>, directions: Vec<Direction>, confidences: Vec<f64>) -> Result<Self> {
        if timestamps.len() != directions.len() || timestamps.len() != confidences.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} timestamps, {} directions and {} confidences",
                timestamps.len(),
                directions.len(),
                confidences.len()
            )));
        }
        if timestamps.iter().any(|t| !t.is_finite()) || timestamps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::NonIncreasingTimestamps);
        }
        Ok(Self { timestamps, directions, confidences })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    fn with_directions(&self, directions: Vec<Direction>) -> Self {
        Self { timestamps: self.timestamps.clone(), directions, confidences: self.confidences.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanConfig {
    /// Degrees per step.
    pub process_noise_std: f64,
    /// Degrees.
    pub measurement_noise_std: f64,
    /// Degrees squared.
    pub initial_var: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self { process_noise_std: 5.0, measurement_noise_std: 15.0, initial_var: 900.0 }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.process_noise_std, self.measurement_noise_std, self.initial_var]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("Kalman parameters must be positive, got {self:?}")))
        }
    }
}

/// Fixed-interval Kalman smoother with a constant-position model on the unit sphere. The state
/// is a unit vector with an isotropic tangent-plane variance; the forward pass moves along the
/// geodesic towards each measurement and a Rauch-Tung-Striebel backward pass pulls every
/// filtered state towards its smoothed successor, which removes the lag of the forward filter.
pub fn kalman_smooth(raw: &Trajectory, cfg: &KalmanConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if raw.is_empty() {
        return Ok(raw.clone());
    }
    let q = cfg.process_noise_std * cfg.process_noise_std;
    let r = cfg.measurement_noise_std * cfg.measurement_noise_std;
    let mut states = Vec::with_capacity(raw.len());
    let mut vars = Vec::with_capacity(raw.len());
    states.push(raw.directions[0].unit_vector());
    vars.push(cfg.initial_var);
    for z in &raw.directions[1..] {
        let prior = vars[vars.len() - 1] + q;
        let gain = prior / (prior + r);
        let next = slerp(&states[states.len() - 1], &z.unit_vector(), gain);
        states.push(next);
        vars.push(prior * (1.0 - gain));
    }
    for k in (0..states.len().saturating_sub(1)).rev() {
        let back = vars[k] / (vars[k] + q);
        states[k] = slerp(&states[k], &states[k + 1], back);
    }
    Ok(raw.with_directions(states.iter().map(Direction::from_vector).collect()))
}

/// Best path through a sequence of angular spectra: maximizes the summed scores minus
/// `transition_penalty` times the summed great-circle step lengths. With `top_k` set, each
/// frame only considers its `top_k` highest-scoring grid points, which makes the result an
/// approximation; `None` runs the exact dynamic program over the full grid.
pub fn viterbi_smooth(
    spectra: &[AngularSpectrum],
    transition_penalty: f64,
    top_k: Option<usize>,
) -> Result<Trajectory> {
    let first = spectra.first().ok_or(Error::EmptyInput)?;
    if !(transition_penalty >= 0.0) || !transition_penalty.is_finite() {
        return Err(Error::InvalidConfig(format!("transition penalty {transition_penalty} must be non-negative")));
    }
    if top_k == Some(0) {
        return Err(Error::InvalidConfig("candidate count must be positive".into()));
    }
    if spectra.iter().any(|s| !Arc::ptr_eq(&s.grid, &first.grid) && s.grid != first.grid) {
        return Err(Error::ShapeMismatch("spectra are on different grids".into()));
    }
    let grid = &first.grid;
    let units = grid.unit_vectors();

    let candidates: Vec<Vec<usize>> = spectra
        .iter()
        .map(|s| {
            let mut idx: Vec<usize> = (0..s.scores.len()).collect();
            if let Some(k) = top_k {
                if k < idx.len() {
                    idx.sort_by(|&a, &b| s.scores[b].total_cmp(&s.scores[a]).then(a.cmp(&b)));
                    idx.truncate(k);
                    idx.sort_unstable();
                }
            }
            idx
        })
        .collect();

    let mut score: Vec<f64> = candidates[0].iter().map(|&i| spectra[0].scores[i]).collect();
    let mut back: Vec<Vec<usize>> = vec![Vec::new()];
    for t in 1..spectra.len() {
        let prev = &candidates[t - 1];
        let mut next = Vec::with_capacity(candidates[t].len());
        let mut from = Vec::with_capacity(candidates[t].len());
        for &s in &candidates[t] {
            let mut best = (0, f64::NEG_INFINITY);
            for (p, &ps) in prev.iter().enumerate() {
                let v = score[p] - transition_penalty * angle_between(&units[ps], &units[s]);
                if v > best.1 {
                    best = (p, v);
                }
            }
            next.push(best.1 + spectra[t].scores[s]);
            from.push(best.0);
        }
        score = next;
        back.push(from);
    }

    let mut pos = (0..score.len()).fold(0, |b, i| if score[i] > score[b] { i } else { b });
    let mut path = vec![0usize; spectra.len()];
    for t in (0..spectra.len()).rev() {
        path[t] = candidates[t][pos];
        if t > 0 {
            pos = back[t][pos];
        }
    }
    Trajectory::new(
        spectra.iter().map(|s| s.time_s).collect(),
        path.iter().map(|&i| grid.get(i)).collect(),
        path.iter().zip(spectra).map(|(&i, s)| s.scores[i]).collect(),
    )
}

/// Two-stage search: one global direction from the whole recording, then sliding windows of
/// `window_s` every `hop_s` seconds localized only on grid points within `search_radius`
/// degrees of it.
pub fn coarse_to_fine(
    recording: &MultichannelRecording,
    localizer: &Localizer,
    inputs: &PipelineInputs,
    window_s: f64,
    hop_s: f64,
    search_radius: f64,
) -> Result<Trajectory> {
    let prepared = localizer.prepare(recording, inputs)?;
    coarse_to_fine_prepared(&prepared, localizer, inputs.geometry, window_s, hop_s, search_radius)
}

pub(crate) fn coarse_to_fine_prepared(
    prepared: &Prepared,
    localizer: &Localizer,
    geometry: &ArrayGeometry,
    window_s: f64,
    hop_s: f64,
    search_radius: f64,
) -> Result<Trajectory> {
    if !(search_radius >= 0.0) {
        return Err(Error::InvalidConfig(format!("search radius {search_radius} must be non-negative")));
    }
    let windows = prepared.windows(window_s, hop_s)?;
    let grid = localizer.grid();
    let global = localizer.spectrum(prepared, 0..prepared.blocks.len(), grid, geometry)?;
    let g = pick_peak(&global)?.direction;
    let local = Arc::new(grid.subset(&grid.indices_within(&g, search_radius)));
    if local.is_empty() {
        return Err(Error::AllMasked);
    }
    let mut times = Vec::with_capacity(windows.len());
    let mut dirs = Vec::with_capacity(windows.len());
    let mut conf = Vec::with_capacity(windows.len());
    for w in windows {
        let s = localizer.spectrum(prepared, w, &local, geometry)?;
        let p = pick_peak(&s)?;
        times.push(s.time_s);
        dirs.push(p.direction);
        conf.push(p.confidence);
    }
    Trajectory::new(times, dirs, conf)
}

/// Spherical mean of the trajectory points within `window` seconds centred on each query time,
/// or the nearest point when the window holds none.
pub fn sample_at_timestamps(traj: &Trajectory, query_times: &[f64], window: f64) -> Result<Vec<Direction>> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let half = window / 2.0;
    let ts = &traj.timestamps;
    Ok(query_times
        .iter()
        .map(|&t| {
            let lo = ts.partition_point(|&x| x < t - half);
            let hi = ts.partition_point(|&x| x <= t + half);
            let mut sum = [0.0; 3];
            for d in &traj.directions[lo..hi] {
                let u = d.unit_vector();
                for k in 0..3 {
                    sum[k] += u[k];
                }
            }
            if hi > lo && norm(&sum) > 1e-12 {
                return Direction::from_vector(&sum);
            }
            let nearest = (0..ts.len()).fold(0, |b, i| if (ts[i] - t).abs() < (ts[b] - t).abs() { i } else { b });
            traj.directions[nearest]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, dot, great_circle_distance, DirectionGrid, Vec3};
    use alloc::sync::Arc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traj(dirs: Vec<Direction>) -> Trajectory {
        let n = dirs.len();
        Trajectory::new((0..n).map(|k| k as f64 * 0.25).collect(), dirs, vec![1.0; n]).unwrap()
    }

    #[test]
    fn trajectory_invariants() {
        let d = Direction::new(0.0, 0.0).unwrap();
        assert_eq!(Trajectory::new(vec![0.0, 0.0], vec![d, d], vec![0.0, 0.0]), Err(Error::NonIncreasingTimestamps));
        assert!(matches!(Trajectory::new(vec![0.0], vec![d, d], vec![0.0]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn kalman_fixed_point_and_single_point() {
        let d = Direction::new(33.0, -12.0).unwrap();
        let out = kalman_smooth(&traj(vec![d; 20]), &KalmanConfig::default()).unwrap();
        assert!(out.directions().iter().all(|o| great_circle_distance(o, &d) < 1e-6));
        let single = traj(vec![d]);
        assert_eq!(kalman_smooth(&single, &KalmanConfig::default()).unwrap(), single);
        assert!(kalman_smooth(&single, &KalmanConfig { initial_var: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn kalman_matches_scalar_filter_on_a_great_circle() {
        let cfg = KalmanConfig { process_noise_std: 1.0, measurement_noise_std: 15.0, initial_var: 900.0 };
        let offsets: Vec<f64> = (0..30).map(|k| if k % 2 == 0 { 15.0 } else { -15.0 }).collect();
        let dirs: Vec<Direction> = offsets.iter().map(|o| Direction::new(20.0 + o, 0.0).unwrap()).collect();
        let out = kalman_smooth(&traj(dirs), &cfg).unwrap();

        // Scalar oracle on the azimuth axis.
        let (q, r) = (cfg.process_noise_std.powi(2), cfg.measurement_noise_std.powi(2));
        let (mut x, mut p) = (offsets[0], cfg.initial_var);
        let (mut expected, mut vars) = (vec![x], vec![p]);
        for z in &offsets[1..] {
            p += q;
            let k = p / (p + r);
            x += k * (z - x);
            p *= 1.0 - k;
            expected.push(x);
            vars.push(p);
        }
        for k in (0..expected.len() - 1).rev() {
            let c = vars[k] / (vars[k] + q);
            expected[k] += c * (expected[k + 1] - expected[k]);
        }
        for (step, (o, e)) in out.directions().iter().zip(&expected).enumerate() {
            assert!((o.azimuth() - 20.0 - e).abs() < 1e-9, "step {step}");
            assert!(o.elevation().abs() < 1e-9);
            if step >= 3 {
                assert!((o.azimuth() - 20.0).abs() < 5.0, "step {step}: {}", o.azimuth());
            }
        }
    }

    #[test]
    fn kalman_handles_azimuth_wraparound() {
        let dirs: Vec<Direction> =
            (0..10).map(|k| Direction::wrapped(if k % 2 == 0 { 178.0 } else { -178.0 }, 0.0)).collect();
        let out = kalman_smooth(&traj(dirs), &KalmanConfig::default()).unwrap();
        let back = Direction::new(-180.0, 0.0).unwrap();
        assert!(out.directions().iter().all(|d| great_circle_distance(d, &back) <= 2.0 + 1e-9));
    }

    fn rotation(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
        let n = norm(&axis);
        let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    }

    fn apply(m: &[[f64; 3]; 3], d: &Direction) -> Direction {
        let u = d.unit_vector();
        Direction::from_vector(&[dot(&m[0], &u), dot(&m[1], &u), dot(&m[2], &u)])
    }

    fn dir_strategy() -> impl Strategy<Value = Direction> {
        (-1.0f64..1.0, -180.0f64..180.0).prop_map(|(z, az)| Direction::new(az, z.asin().to_degrees()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn kalman_outputs_valid_directions_and_keeps_timestamps(dirs in prop::collection::vec(dir_strategy(), 1..30)) {
            let raw = traj(dirs);
            let out = kalman_smooth(&raw, &KalmanConfig::default()).unwrap();
            prop_assert_eq!(out.timestamps(), raw.timestamps());
            for d in out.directions() {
                prop_assert!(Direction::new(d.azimuth(), d.elevation()).is_ok());
                prop_assert!((norm(&d.unit_vector()) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn kalman_is_rotation_invariant(
            dirs in prop::collection::vec(dir_strategy(), 1..20),
            axis in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
            angle in -3.1f64..3.1,
        ) {
            let axis = [axis.0, axis.1, axis.2 + 2.0];
            let m = rotation(axis, angle);
            let a = kalman_smooth(&traj(dirs.clone()), &KalmanConfig::default()).unwrap();
            let rotated: Vec<Direction> = dirs.iter().map(|d| apply(&m, d)).collect();
            let b = kalman_smooth(&traj(rotated), &KalmanConfig::default()).unwrap();
            for (x, y) in a.directions().iter().zip(b.directions()) {
                prop_assert!(great_circle_distance(&apply(&m, x), y) < 1e-6);
            }
        }
    }

    fn spectra_from(grid: &Arc<DirectionGrid>, scores: &[Vec<f64>]) -> Vec<AngularSpectrum> {
        scores
            .iter()
            .enumerate()
            .map(|(t, s)| AngularSpectrum::new(s.clone(), grid.clone(), t..t + 1, t as f64 * 0.25))
            .collect()
    }

    fn path_value(grid: &DirectionGrid, scores: &[Vec<f64>], path: &[usize], penalty: f64) -> f64 {
        let u = grid.unit_vectors();
        let gain: f64 = path.iter().zip(scores).map(|(&i, s)| s[i]).sum();
        let steps: f64 = path.windows(2).map(|w| angle_between(&u[w[0]], &u[w[1]])).sum();
        gain - penalty * steps
    }

    /// Enumerates every path; returns the best value and path.
    fn exhaustive(grid: &DirectionGrid, scores: &[Vec<f64>], penalty: f64) -> (f64, Vec<usize>) {
        let n = grid.len();
        let frames = scores.len();
        let mut path = vec![0usize; frames];
        let mut best = (f64::NEG_INFINITY, path.clone());
        loop {
            let v = path_value(grid, scores, &path, penalty);
            if v > best.0 {
                best = (v, path.clone());
            }
            let mut t = frames;
            loop {
                if t == 0 {
                    return best;
                }
                t -= 1;
                path[t] += 1;
                if path[t] < n {
                    break;
                }
                path[t] = 0;
            }
        }
    }

    fn index_path(grid: &DirectionGrid, t: &Trajectory) -> Vec<usize> {
        t.directions().iter().map(|d| grid.directions().iter().position(|g| g == d).unwrap()).collect()
    }

    #[test]
    fn viterbi_hand_built_case() {
        let grid = Arc::new(DirectionGrid::from_directions(
            [(0.0, 0.0), (90.0, 0.0), (-180.0, 0.0), (0.0, 60.0)]
                .iter()
                .map(|&(a, e)| Direction::new(a, e).unwrap())
                .collect(),
            90.0,
            60.0,
        ));
        let scores = vec![vec![5.0, 1.0, 0.0, 4.0], vec![0.0, 9.0, 0.0, 3.0], vec![4.0, 0.0, 1.0, 3.5]];
        for penalty in [0.0, 0.01, 0.05, 0.2, 1.0] {
            let out = viterbi_smooth(&spectra_from(&grid, &scores), penalty, None).unwrap();
            let (best, path) = exhaustive(&grid, &scores, penalty);
            assert_eq!(index_path(&grid, &out), path, "penalty {penalty}");
            assert!((path_value(&grid, &scores, &path, penalty) - best).abs() < 1e-12);
        }
        let free = viterbi_smooth(&spectra_from(&grid, &scores), 0.0, None).unwrap();
        assert_eq!(index_path(&grid, &free), vec![0, 1, 0]);
        let stiff = viterbi_smooth(&spectra_from(&grid, &scores), 1e6, None).unwrap();
        assert_eq!(index_path(&grid, &stiff), vec![3, 3, 3]);
        assert_eq!(viterbi_smooth(&[], 1.0, None), Err(Error::EmptyInput));
    }

    #[test]
    fn viterbi_matches_exhaustive_on_a_200_point_grid() {
        let grid = Arc::new(build_grid(18.0, 18.0, (-81.0, 81.0)).unwrap());
        assert_eq!(grid.len(), 200);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for penalty in [0.0, 0.02, 0.1] {
            let scores: Vec<Vec<f64>> = (0..3).map(|_| (0..grid.len()).map(|_| rng.gen::<f64>()).collect()).collect();
            let out = viterbi_smooth(&spectra_from(&grid, &scores), penalty, None).unwrap();
            let (_, path) = exhaustive(&grid, &scores, penalty);
            assert_eq!(index_path(&grid, &out), path);
        }
    }

    /// Optimal value by a backward recursion, independent of the forward implementation.
    fn backward_optimum(grid: &DirectionGrid, scores: &[Vec<f64>], penalty: f64) -> f64 {
        let u = grid.unit_vectors();
        let mut tail = scores[scores.len() - 1].clone();
        for t in (0..scores.len() - 1).rev() {
            tail = (0..grid.len())
                .map(|i| {
                    scores[t][i]
                        + (0..grid.len())
                            .map(|j| tail[j] - penalty * angle_between(&u[i], &u[j]))
                            .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
        }
        tail.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn viterbi_matches_backward_recursion_on_200_points_and_6_frames() {
        let grid = Arc::new(build_grid(18.0, 18.0, (-81.0, 81.0)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for penalty in [0.005, 0.05] {
            let scores: Vec<Vec<f64>> = (0..6).map(|_| (0..grid.len()).map(|_| rng.gen::<f64>()).collect()).collect();
            let out = viterbi_smooth(&spectra_from(&grid, &scores), penalty, None).unwrap();
            let value = path_value(&grid, &scores, &index_path(&grid, &out), penalty);
            assert!((value - backward_optimum(&grid, &scores, penalty)).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn viterbi_matches_exhaustive_on_small_grids(
            seed in any::<u64>(),
            points in 1usize..7,
            frames in 1usize..7,
            penalty in 0.0f64..0.05,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dirs: Vec<Direction> = (0..points)
                .map(|_| Direction::new(rng.gen_range(-180.0..180.0), rng.gen_range(-90.0..=90.0)).unwrap())
                .collect();
            let grid = Arc::new(DirectionGrid::from_directions(dirs, 1.0, 1.0));
            let scores: Vec<Vec<f64>> = (0..frames).map(|_| (0..points).map(|_| rng.gen::<f64>()).collect()).collect();
            let out = viterbi_smooth(&spectra_from(&grid, &scores), penalty, None).unwrap();
            let (best, _) = exhaustive(&grid, &scores, penalty);
            let path: Vec<usize> = out
                .directions()
                .iter()
                .map(|d| grid.directions().iter().position(|g| g == d).unwrap())
                .collect();
            prop_assert!((path_value(&grid, &scores, &path, penalty) - best).abs() < 1e-9);
            prop_assert_eq!(out.timestamps().len(), frames);
        }
    }

    #[test]
    fn viterbi_pruned_is_exact_when_true_path_survives() {
        let grid = Arc::new(build_grid(5.0, 5.0, (-90.0, 90.0)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scores: Vec<Vec<f64>> = (0..6)
            .map(|t| (0..grid.len()).map(|i| if i == 1000 + 2 * t { 10.0 } else { rng.gen::<f64>() }).collect())
            .collect();
        let spectra = spectra_from(&grid, &scores);
        let exact = viterbi_smooth(&spectra, 0.01, None).unwrap();
        let pruned = viterbi_smooth(&spectra, 0.01, Some(50)).unwrap();
        assert_eq!(exact, pruned);
        assert_eq!(index_path(&grid, &exact), vec![1000, 1002, 1004, 1006, 1008, 1010]);
    }

    #[test]
    fn sampling() {
        let d = Direction::new(-45.0, 30.0).unwrap();
        let constant = traj(vec![d; 8]);
        for x in sample_at_timestamps(&constant, &[0.3, 1.0, 1.7], 0.5).unwrap() {
            assert!(great_circle_distance(&x, &d) < 1e-9);
        }
        let two = Trajectory::new(
            vec![1.0, 1.1],
            vec![Direction::new(10.0, 0.0).unwrap(), Direction::new(20.0, 0.0).unwrap()],
            vec![0.0, 0.0],
        )
        .unwrap();
        let m = sample_at_timestamps(&two, &[1.05], 0.5).unwrap()[0];
        assert!((m.azimuth() - 15.0).abs() < 0.1 && m.elevation().abs() < 0.1);
        let early = sample_at_timestamps(&two, &[0.0], 0.5).unwrap()[0];
        assert_eq!(early, two.directions()[0]);
        let empty = Trajectory::new(vec![], vec![], vec![]).unwrap();
        assert_eq!(sample_at_timestamps(&empty, &[0.0], 0.5), Err(Error::EmptyTrajectory));
    }
}
