//! Shared data types and the squared Euclidean distance kernel.

use ndarray::{Array1, Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Value stored in a missing cell when nothing better is known.
pub const PLACEHOLDER: f64 = 0.0;

/// An `n x s` feature matrix with an aligned observation mask.
///
/// `mask[[k, j]]` is `true` when cell `(k, j)` was observed. Cells with a
/// `false` mask hold [`PLACEHOLDER`] after loading (or the original value
/// after [`inject_missing`](crate::data::inject_missing)); the clustering
/// loops never read them before an imputation overwrites them.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    values: Array2<f64>,
    mask: Array2<bool>,
}

impl DataSet {
    /// Builds a dataset, checking shape and coverage invariants.
    pub fn new(values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::Dimension(format!(
                "values are {:?} but mask is {:?}",
                values.dim(),
                mask.dim()
            )));
        }
        let (n, s) = values.dim();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 points, got {n}")));
        }
        if s < 1 {
            return Err(Error::InvalidData("need at least 1 feature".into()));
        }
        if let Some(k) = mask.rows().into_iter().position(|r| !r.iter().any(|&b| b)) {
            return Err(Error::InvalidData(format!("row {k} has no observed cell")));
        }
        if let Some(j) = mask.columns().into_iter().position(|c| !c.iter().any(|&b| b)) {
            return Err(Error::InvalidData(format!("column {j} has no observed cell")));
        }
        if let Some(((k, j), _)) = values
            .indexed_iter()
            .zip(mask.iter())
            .find(|((_, v), &observed)| observed && !v.is_finite())
            .map(|(x, _)| x)
        {
            return Err(Error::InvalidData(format!("cell ({k}, {j}) is not finite")));
        }
        Ok(DataSet { values, mask })
    }

    /// A dataset with every cell observed.
    pub fn complete(values: Array2<f64>) -> Result<Self> {
        let mask = Array2::from_elem(values.dim(), true);
        Self::new(values, mask)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn s(&self) -> usize {
        self.values.ncols()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&b| !b).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    /// Indices of rows with every cell observed.
    pub fn complete_rows(&self) -> Vec<usize> {
        self.mask
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, r)| r.iter().all(|&b| b))
            .map(|(k, _)| k)
            .collect()
    }

    /// Same values, mask forced to all-observed.
    pub fn into_complete(self) -> DataSet {
        let mask = Array2::from_elem(self.values.dim(), true);
        DataSet {
            values: self.values,
            mask,
        }
    }

    /// Replaces the mask without touching the values. Coverage is re-checked.
    pub fn with_mask(&self, mask: Array2<bool>) -> Result<DataSet> {
        DataSet::new(self.values.clone(), mask)
    }

    /// Overwrites the unobserved cells with `fill(k, j)`; observed cells stay put.
    pub(crate) fn fill_missing(&mut self, mut fill: impl FnMut(usize, usize) -> f64) {
        Zip::indexed(&mut self.values)
            .and(&self.mask)
            .for_each(|(k, j), v, &observed| {
                if !observed {
                    *v = fill(k, j);
                }
            });
    }

    /// Column-wise z-score using observed cells only. Constant columns are
    /// only centred.
    pub fn zscore(&self) -> DataSet {
        let mut values = self.values.clone();
        for (j, mut col) in values.columns_mut().into_iter().enumerate() {
            let observed: Vec<f64> = col
                .iter()
                .zip(self.mask.column(j))
                .filter(|(_, &o)| o)
                .map(|(&v, _)| v)
                .collect();
            let count = observed.len() as f64;
            let mean = observed.iter().sum::<f64>() / count;
            let var = observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for (v, &o) in col.iter_mut().zip(self.mask.column(j)) {
                *v = if o { (*v - mean) / sd } else { PLACEHOLDER };
            }
        }
        DataSet {
            values,
            mask: self.mask.clone(),
        }
    }
}

/// Which weight expression drives the centroid and imputation updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightForm {
    /// `(alpha u)^m + (beta t)^tau`
    #[default]
    PaperLiteral,
    /// `alpha u^m + beta t^tau`
    ClassicPfcm,
}

impl WeightForm {
    pub(crate) fn weight(self, u: f64, t: f64, p: &Parameters) -> f64 {
        match self {
            WeightForm::PaperLiteral => (p.alpha * u).powf(p.m) + (p.beta * t).powf(p.tau),
            WeightForm::ClassicPfcm => p.alpha * u.powf(p.m) + p.beta * t.powf(p.tau),
        }
    }
}

/// Algorithm configuration. Build with [`Parameters::new`] and adjust with
/// the `with_*` setters, then call [`Parameters::validate`] (the run entry
/// points do this for you).
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub m: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub c: usize,
    pub max_iter: usize,
    pub weight_form: WeightForm,
}

impl Parameters {
    /// Default exponents and weights (m = tau = 2, alpha = beta = 1,
    /// epsilon = 1e-5, 1000 iterations) for `c` clusters.
    pub fn new(c: usize) -> Self {
        Parameters {
            m: 2.0,
            tau: 2.0,
            alpha: 1.0,
            beta: 1.0,
            epsilon: 1e-5,
            c,
            max_iter: 1000,
            weight_form: WeightForm::PaperLiteral,
        }
    }

    pub fn with_c(mut self, c: usize) -> Self {
        self.c = c;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_weight_form(mut self, weight_form: WeightForm) -> Self {
        self.weight_form = weight_form;
        self
    }

    /// Checks every bound; `n` is the point count of the data to be clustered.
    pub fn validate(&self, n: usize) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(self.m.is_finite() && self.m > 1.0) {
            return Err(Error::config("m", "m must exceed 1"));
        }
        if !(self.tau.is_finite() && self.tau > 1.0) {
            return Err(Error::config("tau", "tau must exceed 1"));
        }
        if !positive(self.alpha) {
            return Err(Error::config("alpha", "alpha must be positive"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::config("beta", "beta must be non-negative"));
        }
        if !positive(self.epsilon) {
            return Err(Error::config("epsilon", "epsilon must be positive"));
        }
        if self.c < 2 {
            return Err(Error::config("c", "c must exceed 1"));
        }
        if self.c >= n {
            return Err(Error::config("c", "c must be less than n"));
        }
        if self.max_iter < 1 {
            return Err(Error::config("max_iter", "max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Fuzzy memberships `u`, typicalities `t` (both `c x n`) and per-cluster
/// typicality scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub u: Array2<f64>,
    pub t: Array2<f64>,
    pub delta: Array1<f64>,
}

/// Cluster centres, one row per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    v: Array2<f64>,
}

impl Centroids {
    pub fn new(v: Array2<f64>) -> Result<Self> {
        if v.nrows() == 0 || v.ncols() == 0 {
            return Err(Error::Dimension("centroid matrix is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("centroid entries must be finite".into()));
        }
        Ok(Centroids { v })
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn c(&self) -> usize {
        self.v.nrows()
    }

    pub fn s(&self) -> usize {
        self.v.ncols()
    }

    /// Frobenius norm of the difference between two centroid sets.
    pub fn shift(&self, other: &Centroids) -> f64 {
        self.v
            .iter()
            .zip(other.v.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Final state of one clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub partition: Partition,
    pub centroids: Centroids,
    pub iterations: usize,
    /// Data with every missing cell filled by the run; mask is all-observed.
    pub imputed: DataSet,
    /// Objective value after each iteration.
    pub objective_trace: Vec<f64>,
    /// `false` iff the iteration cap was hit.
    pub converged: bool,
}

/// `c x n` matrix of squared Euclidean distances between every centroid and
/// every point, using the current cell values (observed or imputed).
pub fn squared_distances(data: &DataSet, centroids: &Centroids) -> Result<Array2<f64>> {
    if data.s() != centroids.s() {
        return Err(Error::Dimension(format!(
            "data has {} features but centroids have {}",
            data.s(),
            centroids.s()
        )));
    }
    Ok(squared_distances_raw(data.values().view(), centroids.as_array().view()))
}

pub(crate) fn squared_distances_raw(x: ArrayView2<f64>, v: ArrayView2<f64>) -> Array2<f64> {
    let mut d2 = Array2::zeros((v.nrows(), x.nrows()));
    for (i, vi) in v.rows().into_iter().enumerate() {
        for (k, xk) in x.rows().into_iter().enumerate() {
            d2[[i, k]] = xk
                .iter()
                .zip(vi.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
        }
    }
    d2
}
