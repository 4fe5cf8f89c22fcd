//! Complete-data PFCM: the membership, typicality and centroid updates and
//! the alternating-optimization loop that drives them.

use ndarray::{Array1, Array2, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{squared_distances, Centroids, DataSet, Parameters, Partition, RunResult};

/// Distances below this are treated as exact coincidence.
pub const ZERO_DISTANCE: f64 = 1e-12;

/// Lower bound on a typicality scale.
pub const DELTA_MIN: f64 = 1e-10;

/// RNG stream used for centroid initialization. Imputation draws use a
/// different stream of the same seed, so a complete dataset follows the
/// same trajectory through either entry point.
pub(crate) const INIT_STREAM: u64 = 0;

/// Fuzzy memberships from squared distances.
///
/// A column with a (near) zero distance is made crisp: the lowest-index
/// coincident cluster gets 1, the others 0.
pub fn fuzzy_memberships(d2: &Array2<f64>, m: f64) -> Array2<f64> {
    let exponent = 1.0 / (m - 1.0);
    let mut u = Array2::zeros(d2.dim());
    for (k, col) in d2.columns().into_iter().enumerate() {
        if let Some(hit) = col.iter().position(|&d| d < ZERO_DISTANCE) {
            u[[hit, k]] = 1.0;
            continue;
        }
        // ratios against the column minimum stay in (0, 1] and cannot overflow
        let nearest = col.iter().copied().fold(f64::INFINITY, f64::min);
        let ratios: Vec<f64> = col.iter().map(|&d| (nearest / d).powf(exponent)).collect();
        let total: f64 = ratios.iter().sum();
        for (i, r) in ratios.into_iter().enumerate() {
            u[[i, k]] = r / total;
        }
    }
    u
}

/// Per-cluster typicality scale: the `u^m`-weighted mean squared distance,
/// floored at [`DELTA_MIN`].
pub fn typicality_scales(u: &Array2<f64>, d2: &Array2<f64>, m: f64) -> Array1<f64> {
    Array1::from_iter(u.rows().into_iter().zip(d2.rows()).map(|(ui, di)| {
        let (num, den) = ui
            .iter()
            .zip(di.iter())
            .fold((0.0, 0.0), |(num, den), (&u, &d)| {
                let w = u.powf(m);
                (num + w * d, den + w)
            });
        if den > 0.0 {
            (num / den).max(DELTA_MIN)
        } else {
            DELTA_MIN
        }
    }))
}

/// Possibilistic memberships `t = 1 / (1 + ((beta / delta) d2)^(1/(tau-1)))`.
pub fn possibilistic_memberships(d2: &Array2<f64>, delta: &Array1<f64>, beta: f64, tau: f64) -> Array2<f64> {
    let exponent = 1.0 / (tau - 1.0);
    let mut t = Array2::zeros(d2.dim());
    for ((i, k), &d) in d2.indexed_iter() {
        let scaled = (beta / delta[i]) * d;
        let value = 1.0 / (1.0 + scaled.powf(exponent));
        t[[i, k]] = value.max(f64::MIN_POSITIVE);
    }
    t
}

/// Point weights used by the centroid update, `c x n`.
pub fn centroid_weights(u: &Array2<f64>, t: &Array2<f64>, p: &Parameters) -> Array2<f64> {
    let mut w = Array2::zeros(u.dim());
    ndarray::Zip::from(&mut w)
        .and(u)
        .and(t)
        .for_each(|w, &u, &t| *w = p.weight_form.weight(u, t, p));
    w
}

/// Weighted-mean centroid update.
pub fn update_centroids(data: &DataSet, u: &Array2<f64>, t: &Array2<f64>, p: &Parameters) -> Result<Centroids> {
    if u.dim() != t.dim() || u.ncols() != data.n() {
        return Err(Error::Dimension(format!(
            "memberships {:?} / {:?} do not match {} points",
            u.dim(),
            t.dim(),
            data.n()
        )));
    }
    let w = centroid_weights(u, t, p);
    let x = data.values();
    let mut v = w.dot(x);
    for (i, (mut row, wi)) in v.rows_mut().into_iter().zip(w.rows()).enumerate() {
        let total = wi.sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::DegenerateCluster { cluster: i });
        }
        row.mapv_inplace(|a| a / total);
    }
    Centroids::new(v)
}

/// PFCM objective at the given state, always with the `alpha u^m + beta t^tau`
/// interior weights.
pub fn objective_value(
    data: &DataSet,
    u: &Array2<f64>,
    t: &Array2<f64>,
    delta: &Array1<f64>,
    centroids: &Centroids,
    p: &Parameters,
) -> Result<f64> {
    let d2 = squared_distances(data, centroids)?;
    if d2.dim() != u.dim() || u.dim() != t.dim() || delta.len() != u.nrows() {
        return Err(Error::Dimension("objective inputs disagree in shape".into()));
    }
    let mut fit = 0.0;
    let mut penalty = 0.0;
    for ((i, k), &d) in d2.indexed_iter() {
        let (uik, tik) = (u[[i, k]], t[[i, k]]);
        fit += (p.alpha * uik.powf(p.m) + p.beta * tik.powf(p.tau)) * d;
        penalty += delta[i] * (1.0 - tik).powf(p.tau);
    }
    Ok(fit + penalty)
}

/// Picks `c` distinct rows of `data` as starting centroids.
pub fn initial_centroids(data: &DataSet, c: usize, seed: u64) -> Result<Centroids> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let picks = index::sample(&mut rng, data.n(), c).into_vec();
    Centroids::new(data.values().select(Axis(0), &picks))
}

/// One pass of the membership, typicality and centroid updates.
pub(crate) struct Step {
    pub partition: Partition,
    pub centroids: Centroids,
}

pub(crate) fn step(data: &DataSet, centroids: &Centroids, p: &Parameters) -> Result<Step> {
    let d2 = squared_distances(data, centroids)?;
    let u = fuzzy_memberships(&d2, p.m);
    let delta = typicality_scales(&u, &d2, p.m);
    let t = possibilistic_memberships(&d2, &delta, p.beta, p.tau);
    let centroids = update_centroids(data, &u, &t, p)?;
    Ok(Step {
        partition: Partition { u, t, delta },
        centroids,
    })
}

/// Shared driver for complete and incomplete data. `data` must already hold
/// usable values in every cell; `on_continue` runs after every failed
/// convergence check and may rewrite unobserved cells.
pub(crate) fn alternate<F>(mut data: DataSet, p: &Parameters, seed: u64, mut on_continue: F) -> Result<RunResult>
where
    F: FnMut(&mut DataSet, &Step) -> Result<()>,
{
    p.validate(data.n())?;
    let mut centroids = initial_centroids(&data, p.c, seed)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut last = None;

    while iterations < p.max_iter {
        iterations += 1;
        let next = step(&data, &centroids, p)?;
        let Partition { u, t, delta } = &next.partition;
        trace.push(objective_value(&data, u, t, delta, &next.centroids, p)?);
        let shift = next.centroids.shift(&centroids);
        centroids = next.centroids.clone();
        if shift < p.epsilon {
            converged = true;
            last = Some(next);
            break;
        }
        on_continue(&mut data, &next)?;
        last = Some(next);
    }

    let last = last.expect("max_iter >= 1 guarantees one step");
    Ok(RunResult {
        partition: last.partition,
        centroids,
        iterations,
        imputed: data.into_complete(),
        objective_trace: trace,
        converged,
    })
}

/// Runs PFCM on a fully observed dataset.
pub fn run_pfcm(data: &DataSet, p: &Parameters, seed: u64) -> Result<RunResult> {
    if !data.is_complete() {
        return Err(Error::InvalidData(format!(
            "run_pfcm needs complete data, found {} missing cells",
            data.missing_count()
        )));
    }
    alternate(data.clone(), p, seed, |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array};
    use rand::Rng;

    #[test]
    fn equidistant_is_uniform() {
        let u = fuzzy_memberships(&array![[4.0], [4.0]], 2.0);
        assert_eq!(u, array![[0.5], [0.5]]);
    }

    #[test]
    fn membership_one_to_four() {
        // (1 + 1/4)^-1 = 0.8, (4 + 1)^-1 = 0.2
        let u = fuzzy_memberships(&array![[1.0], [4.0]], 2.0);
        assert_abs_diff_eq!(u[[0, 0]], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(u[[1, 0]], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn zero_distance_is_crisp() {
        let u = fuzzy_memberships(&array![[0.0], [9.0]], 2.0);
        assert_eq!(u, array![[1.0], [0.0]]);
        let tie = fuzzy_memberships(&array![[5.0], [0.0], [0.0]], 2.0);
        assert_eq!(tie, array![[0.0], [1.0], [0.0]]);
    }

    #[test]
    fn typicality_scale_direct() {
        let delta = typicality_scales(&array![[1.0, 1.0]], &array![[2.0, 4.0]], 2.0);
        assert_abs_diff_eq!(delta[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn typicality_scale_floor_and_homogeneity() {
        let delta = typicality_scales(&array![[1.0, 1.0]], &array![[0.0, 0.0]], 2.0);
        assert_eq!(delta[0], DELTA_MIN);
        let u = array![[0.3, 0.9, 0.5], [0.7, 0.1, 0.5]];
        let d2 = array![[1.0, 2.0, 3.0], [4.0, 0.5, 6.0]];
        let base = typicality_scales(&u, &d2, 2.0);
        let scaled = typicality_scales(&u, &(&d2 * 10.0), 2.0);
        for (a, b) in base.iter().zip(scaled.iter()) {
            assert_abs_diff_eq!(a * 10.0, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn typicality_values() {
        let t = possibilistic_memberships(&array![[0.0, 1.0]], &array![1.0], 1.0, 2.0);
        assert_eq!(t[[0, 0]], 1.0);
        assert_abs_diff_eq!(t[[0, 1]], 0.5, epsilon = 1e-15);
        let flat = possibilistic_memberships(&array![[3.0, 100.0], [7.0, 0.1]], &array![1.0, 2.0], 0.0, 2.0);
        assert!(flat.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn centroid_updates() {
        let data = DataSet::complete(array![[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]).unwrap();
        let p = Parameters::new(2);
        let flat = Array::from_elem((2, 3), 0.5);
        let v = update_centroids(&data, &flat, &flat, &p).unwrap();
        assert_abs_diff_eq!(v.as_array()[[0, 0]], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.as_array()[[1, 1]], 3.0, epsilon = 1e-12);

        let single = Parameters::new(1).with_beta(0.0);
        let ones = Array::from_elem((1, 3), 1.0);
        let v = update_centroids(&data, &ones, &ones, &single).unwrap();
        assert_eq!(v.as_array(), &array![[2.0, 3.0]]);
    }

    #[test]
    fn weighted_mean_on_a_line() {
        // (alpha u)^m with beta = 0 and m = 2: weights 0.9 and 0.1 need u = sqrt(w)
        let data = DataSet::complete(array![[0.0], [10.0]]).unwrap();
        let p = Parameters::new(1).with_beta(0.0);
        let u = array![[0.9f64.sqrt(), 0.1f64.sqrt()]];
        let v = update_centroids(&data, &u, &Array::ones((1, 2)), &p).unwrap();
        assert_abs_diff_eq!(v.as_array()[[0, 0]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_weight_row_is_degenerate() {
        let data = DataSet::complete(array![[0.0], [10.0]]).unwrap();
        let p = Parameters::new(2).with_beta(0.0);
        let u = array![[1.0, 1.0], [0.0, 0.0]];
        let err = update_centroids(&data, &u, &Array::ones((2, 2)), &p).unwrap_err();
        assert!(matches!(err, Error::DegenerateCluster { cluster: 1 }));
    }

    #[test]
    fn objective_examples() {
        let data = DataSet::complete(array![[1.0], [1.0]]).unwrap();
        let v = Centroids::new(array![[1.0]]).unwrap();
        let u = Array::ones((1, 2));
        let t = Array::ones((1, 2));
        let j = objective_value(&data, &u, &t, &array![1.0], &v, &Parameters::new(1)).unwrap();
        assert_eq!(j, 0.0);

        let one = DataSet::complete(array![[1.0], [0.0]]).unwrap();
        let v = Centroids::new(array![[0.0]]).unwrap();
        // only the first point matters: give the second zero weight and t = 1
        let u = array![[1.0, 0.0]];
        let t = array![[0.5, 1.0]];
        let j = objective_value(&one, &u, &t, &array![1.0], &v, &Parameters::new(1)).unwrap();
        assert_abs_diff_eq!(j, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn objective_linear_in_alpha() {
        let data = DataSet::complete(array![[0.0, 1.0], [3.0, -1.0], [2.0, 2.0]]).unwrap();
        let v = Centroids::new(array![[0.5, 0.5], [2.5, 0.0]]).unwrap();
        let d2 = squared_distances(&data, &v).unwrap();
        let u = fuzzy_memberships(&d2, 2.0);
        let delta = typicality_scales(&u, &d2, 2.0);
        let t = possibilistic_memberships(&d2, &delta, 1.0, 2.0);
        let p1 = Parameters::new(2);
        let p2 = Parameters { alpha: 2.0, ..p1.clone() };
        let j1 = objective_value(&data, &u, &t, &delta, &v, &p1).unwrap();
        let j2 = objective_value(&data, &u, &t, &delta, &v, &p2).unwrap();
        let fuzzy_term: f64 = u.iter().zip(d2.iter()).map(|(u, d)| u * u * d).sum();
        assert_abs_diff_eq!(j2 - j1, fuzzy_term, epsilon = 1e-12);
    }

    fn two_groups(seed: u64) -> (DataSet, [f64; 2], [f64; 2]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for &(cx, cy) in &[(0.0, 0.0), (100.0, 100.0)] {
            for _ in 0..20 {
                rows.push([cx + rng.random_range(-1e-5..1e-5), cy + rng.random_range(-1e-5..1e-5)]);
            }
        }
        let mean = |g: &[[f64; 2]]| {
            let n = g.len() as f64;
            [g.iter().map(|r| r[0]).sum::<f64>() / n, g.iter().map(|r| r[1]).sum::<f64>() / n]
        };
        let (a, b) = (mean(&rows[..20]), mean(&rows[20..]));
        let x = Array2::from_shape_fn((40, 2), |(k, j)| rows[k][j]);
        (DataSet::complete(x).unwrap(), a, b)
    }

    #[test]
    fn separated_groups_land_on_group_means() {
        let (data, a, b) = two_groups(3);
        let r = run_pfcm(&data, &Parameters::new(2), 11).unwrap();
        assert!(r.converged);
        let v = r.centroids.as_array();
        let (lo, hi) = if v[[0, 0]] < v[[1, 0]] { (0, 1) } else { (1, 0) };
        for j in 0..2 {
            assert_abs_diff_eq!(v[[lo, j]], a[j], epsilon = 1e-6);
            assert_abs_diff_eq!(v[[hi, j]], b[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn run_is_deterministic_and_within_hull() {
        let (data, _, _) = two_groups(5);
        let p = Parameters::new(3);
        let a = run_pfcm(&data, &p, 42).unwrap();
        let b = run_pfcm(&data, &p, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.objective_trace.len(), a.iterations);
        for (j, col) in data.values().columns().into_iter().enumerate() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for &v in a.centroids.as_array().column(j) {
                assert!(v >= lo && v <= hi);
            }
        }
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let (data, _, _) = two_groups(9);
        let p = Parameters { max_iter: 1, epsilon: 1e-300, ..Parameters::new(2) };
        let r = run_pfcm(&data, &p, 1).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(!r.converged);
    }

    #[test]
    fn rejects_incomplete_input() {
        let values = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let mask = array![[true, false], [true, true], [true, true]];
        let data = DataSet::new(values, mask).unwrap();
        assert!(run_pfcm(&data, &Parameters::new(2), 0).is_err());
    }

    #[test]
    fn initial_centroids_are_distinct_rows() {
        let x = Array2::from_shape_fn((10, 1), |(k, _)| k as f64);
        let data = DataSet::complete(x).unwrap();
        for seed in 0..50 {
            let v = initial_centroids(&data, 9, seed).unwrap();
            let mut picked: Vec<i64> = v.as_array().iter().map(|&x| x as i64).collect();
            picked.sort();
            picked.dedup();
            assert_eq!(picked.len(), 9);
        }
    }
}
