//! Incomplete-data PFCM. Missing cells are seeded from observed values of
//! the same feature and then re-estimated after every non-final iteration,
//! either as a weighted blend of centroid coordinates (optimal completion)
//! or by copying the nearest centroid (nearest prototype).

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{alternate, centroid_weights};
use crate::error::{Error, Result};
use crate::model::{squared_distances, Centroids, DataSet, Parameters, RunResult};

const IMPUTE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Optimal completion strategy.
    Ocs,
    /// Nearest prototype strategy.
    Nps,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Ocs, Strategy::Nps];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Ocs => "ocs",
            Strategy::Nps => "nps",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ocs" | "ocspfcm" => Ok(Strategy::Ocs),
            "nps" | "npspfcm" => Ok(Strategy::Nps),
            other => Err(Error::config("strategy", format!("unknown strategy {other:?}"))),
        }
    }
}

/// Fills each missing cell with an observed value drawn uniformly from the
/// same column. The mask is kept.
pub fn init_missing(data: &DataSet, seed: u64) -> Result<DataSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(IMPUTE_STREAM);
    let pools: Vec<Vec<f64>> = data
        .values()
        .columns()
        .into_iter()
        .zip(data.mask().columns())
        .map(|(vals, mask)| {
            vals.iter()
                .zip(mask.iter())
                .filter(|(_, &o)| o)
                .map(|(&v, _)| v)
                .collect()
        })
        .collect();
    if let Some(j) = pools.iter().position(|p| p.is_empty()) {
        return Err(Error::InvalidData(format!("column {j} has no observed value")));
    }
    let mut out = data.clone();
    out.fill_missing(|_, j| *pools[j].choose(&mut rng).expect("non-empty pool"));
    Ok(out)
}

/// Optimal-completion update: each missing `y_kj` becomes the weighted mean
/// of the centroid coordinates `v_ij` over clusters `i`, weighted by the
/// point's centroid weights.
pub fn ocs_impute(
    data: &DataSet,
    u: &Array2<f64>,
    t: &Array2<f64>,
    centroids: &Centroids,
    p: &Parameters,
) -> Result<DataSet> {
    check_shapes(data, u, t, centroids)?;
    let w = centroid_weights(u, t, p);
    let v = centroids.as_array();
    let mut totals = Vec::with_capacity(data.n());
    for (k, col) in w.columns().into_iter().enumerate() {
        let total = col.sum();
        let needs = data.mask().row(k).iter().any(|&o| !o);
        if needs && !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegeneratePoint { point: k });
        }
        totals.push(total);
    }
    let mut out = data.clone();
    out.fill_missing(|k, j| {
        let num: f64 = (0..v.nrows()).map(|i| w[[i, k]] * v[[i, j]]).sum();
        num / totals[k]
    });
    Ok(out)
}

/// Nearest-prototype update: every missing cell of a point takes the
/// coordinate of the centroid closest to that point (full-dimensional
/// distance on current values, ties to the lowest index).
pub fn nps_impute(data: &DataSet, centroids: &Centroids) -> Result<DataSet> {
    let d2 = squared_distances(data, centroids)?;
    let nearest: Vec<usize> = d2
        .columns()
        .into_iter()
        .map(|col| {
            col.iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, &d)| if d < best.1 { (i, d) } else { best })
                .0
        })
        .collect();
    let v = centroids.as_array();
    let mut out = data.clone();
    out.fill_missing(|k, j| v[[nearest[k], j]]);
    Ok(out)
}

fn check_shapes(data: &DataSet, u: &Array2<f64>, t: &Array2<f64>, centroids: &Centroids) -> Result<()> {
    let expected = (centroids.c(), data.n());
    if u.dim() != expected || t.dim() != expected || centroids.s() != data.s() {
        return Err(Error::Dimension(format!(
            "memberships {:?}/{:?} and centroids {}x{} do not fit a {}x{} dataset",
            u.dim(),
            t.dim(),
            centroids.c(),
            centroids.s(),
            data.n(),
            data.s()
        )));
    }
    Ok(())
}

/// Clusters an incomplete dataset with the given strategy.
///
/// The centroid initialization uses the same RNG stream as
/// [`run_pfcm`](crate::engine::run_pfcm), so with no missing cells both give
/// identical results for the same seed.
pub fn run_incomplete(data: &DataSet, p: &Parameters, strategy: Strategy, seed: u64) -> Result<RunResult> {
    p.validate(data.n())?;
    let seeded = init_missing(data, seed)?;
    if data.is_complete() {
        return alternate(seeded, p, seed, |_, _| Ok(()));
    }
    alternate(seeded, p, seed, |current, step| {
        *current = match strategy {
            Strategy::Ocs => ocs_impute(current, &step.partition.u, &step.partition.t, &step.centroids, p)?,
            Strategy::Nps => nps_impute(current, &step.centroids)?,
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_pfcm;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn toy() -> DataSet {
        let values = array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]];
        let mask = array![[true, false], [false, true], [true, true], [true, false]];
        DataSet::new(values, mask).unwrap()
    }

    #[test]
    fn init_noop_without_missing() {
        let d = DataSet::complete(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(init_missing(&d, 7).unwrap(), d);
    }

    #[test]
    fn init_single_value_support() {
        let values = array![[5.0, 1.0], [0.0, 2.0], [5.0, 3.0], [0.0, 4.0]];
        let mask = array![[true, true], [false, true], [true, true], [false, true]];
        let d = DataSet::new(values, mask).unwrap();
        let filled = init_missing(&d, 3).unwrap();
        assert_eq!(filled.values()[[1, 0]], 5.0);
        assert_eq!(filled.values()[[3, 0]], 5.0);
        assert_eq!(filled.mask(), d.mask());
    }

    #[test]
    fn init_draws_from_column_multiset() {
        let d = toy();
        // observed: column 0 {1, 3, 4}, column 1 {20, 30}
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..200 {
            let f = init_missing(&d, seed).unwrap();
            assert!([1.0, 3.0, 4.0].contains(&f.values()[[1, 0]]));
            for k in [0, 3] {
                let v = f.values()[[k, 1]];
                assert!(v == 20.0 || v == 30.0);
                seen.insert(v as i64);
            }
            for (k, j) in [(0, 0), (2, 0), (2, 1), (3, 0), (1, 1)] {
                assert_eq!(f.values()[[k, j]], d.values()[[k, j]]);
            }
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn ocs_symmetric_weights_give_midpoint() {
        let d = toy();
        let v = Centroids::new(array![[0.0, 0.0], [10.0, 100.0]]).unwrap();
        let half = Array2::from_elem((2, 4), 0.5);
        let out = ocs_impute(&d, &half, &half, &v, &Parameters::new(2)).unwrap();
        assert_abs_diff_eq!(out.values()[[0, 1]], 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values()[[1, 0]], 5.0, epsilon = 1e-12);
        assert_eq!(out.values()[[0, 0]], 1.0);
    }

    #[test]
    fn ocs_single_cluster_copies_centroid() {
        let d = toy();
        let v = Centroids::new(array![[7.25, -3.5]]).unwrap();
        let ones = Array2::from_elem((1, 4), 1.0);
        let out = ocs_impute(&d, &ones, &ones, &v, &Parameters::new(1)).unwrap();
        assert_eq!(out.values()[[0, 1]], -3.5);
        assert_eq!(out.values()[[1, 0]], 7.25);
        let nps = nps_impute(&d, &v).unwrap();
        assert_eq!(out, nps);
    }

    #[test]
    fn ocs_hand_computed() {
        // weights (0.64 + 0.25, 0.04 + 0.25) on coordinates (0, 10)
        let values = array![[0.0, 1.0], [0.0, 2.0]];
        let mask = array![[false, true], [true, true]];
        let d = DataSet::new(values, mask).unwrap();
        let v = Centroids::new(array![[0.0, 0.0], [10.0, 0.0]]).unwrap();
        let u = array![[0.8, 0.5], [0.2, 0.5]];
        let t = array![[0.5, 0.5], [0.5, 0.5]];
        let out = ocs_impute(&d, &u, &t, &v, &Parameters::new(2)).unwrap();
        assert_abs_diff_eq!(out.values()[[0, 0]], 2.9 / 1.18, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values()[[0, 0]], 2.457627118644068, epsilon = 1e-12);
    }

    #[test]
    fn nps_nearest_and_ties() {
        let values = array![[1.0, 1.0], [5.0, 0.0], [9.0, 9.0]];
        let mask = array![[true, false], [true, false], [true, true]];
        let d = DataSet::new(values, mask).unwrap();
        let v = Centroids::new(array![[1.0, 1.0], [9.0, 9.0]]).unwrap();
        let filled = DataSet::new(array![[1.0, 1.0], [5.0, 5.0], [9.0, 9.0]], d.mask().clone()).unwrap();
        let out = nps_impute(&filled, &v).unwrap();
        assert_eq!(out.values()[[0, 1]], 1.0);
        // (5,5) is equidistant; lowest index wins
        assert_eq!(out.values()[[1, 1]], 1.0);
        assert_eq!(out.values()[[1, 0]], 5.0);
    }

    #[test]
    fn nps_values_are_centroid_coordinates() {
        let values = Array2::from_shape_fn((6, 3), |(k, j)| (k * 3 + j) as f64 * 0.7 - 4.0);
        let mask = array![
            [true, false, true],
            [false, true, true],
            [true, true, false],
            [true, false, false],
            [true, true, true],
            [false, true, true]
        ];
        let d = init_missing(&DataSet::new(values, mask).unwrap(), 4).unwrap();
        let v = Centroids::new(array![[0.0, 1.0, 2.0], [-3.0, 5.0, 8.5], [4.0, -2.0, 0.5]]).unwrap();
        let out = nps_impute(&d, &v).unwrap();
        for ((k, j), &observed) in d.mask().indexed_iter() {
            if !observed {
                let col = v.as_array().column(j);
                assert!(col.iter().any(|&c| c == out.values()[[k, j]]));
            }
        }
    }

    #[test]
    fn complete_data_matches_pfcm() {
        let x = Array2::from_shape_fn((30, 2), |(k, j)| ((k * 7 + j * 13) % 17) as f64 + if k < 15 { 0.0 } else { 40.0 });
        let d = DataSet::complete(x).unwrap();
        let p = Parameters::new(2);
        let base = run_pfcm(&d, &p, 99).unwrap();
        for s in Strategy::ALL {
            assert_eq!(run_incomplete(&d, &p, s, 99).unwrap(), base);
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("OCS".parse::<Strategy>().unwrap(), Strategy::Ocs);
        assert_eq!("nps".parse::<Strategy>().unwrap(), Strategy::Nps);
        assert!("wds".parse::<Strategy>().is_err());
    }
}
