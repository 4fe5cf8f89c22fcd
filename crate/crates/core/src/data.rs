//! Dataset loading and writing, Gaussian-mixture generation and missingness
//! injection.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, weighted::WeightedIndex};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{DataSet, PLACEHOLDER};

/// Token written for a missing cell.
pub const MISSING_OUT: &str = "?";

/// Which column (if any) holds class labels to be dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Last,
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(LabelColumn::Last),
            "first" => Ok(LabelColumn::Index(0)),
            other => other
                .parse()
                .map(LabelColumn::Index)
                .map_err(|_| Error::config("label_column", format!("expected an index, `first` or `last`, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub label_column: Option<LabelColumn>,
    pub missing_tokens: BTreeSet<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: false,
            label_column: None,
            missing_tokens: ["", "?", "NaN"].into_iter().map(String::from).collect(),
        }
    }
}

impl CsvOptions {
    pub fn with_label_column(mut self, label: LabelColumn) -> Self {
        self.label_column = Some(label);
        self
    }

    pub fn with_header(mut self, has_header: bool) -> Self {
        self.has_header = has_header;
        self
    }
}

/// Reads a delimiter-separated numeric table. Missing tokens become
/// unobserved cells holding [`PLACEHOLDER`].
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<DataSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, options)
}

/// Same as [`load_csv`] on in-memory text.
pub fn parse_csv(text: &str, options: &CsvOptions) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut width = None;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        // line numbers are 1-based and count the header
        let row = r + 1 + usize::from(options.has_header);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let skip = options.label_column.map(|l| match l {
            LabelColumn::Index(i) => i,
            LabelColumn::Last => record.len().saturating_sub(1),
        });
        let mut features = 0;
        for (col, cell) in record.iter().enumerate() {
            if Some(col) == skip {
                continue;
            }
            features += 1;
            if options.missing_tokens.contains(cell) {
                values.push(PLACEHOLDER);
                mask.push(false);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: col + 1,
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: col + 1,
                    message: format!("{cell:?} is not finite"),
                });
            }
            values.push(v);
            mask.push(true);
        }
        match width {
            None => width = Some(features),
            Some(w) if w != features => {
                return Err(Error::Parse {
                    row,
                    column: record.len(),
                    message: format!("expected {w} features, found {features}"),
                })
            }
            _ => {}
        }
    }
    let s = width.ok_or_else(|| Error::InvalidData("no data rows".into()))?;
    let n = values.len() / s.max(1);
    let values = Array2::from_shape_vec((n, s), values).map_err(|e| Error::InvalidData(e.to_string()))?;
    let mask = Array2::from_shape_vec((n, s), mask).map_err(|e| Error::InvalidData(e.to_string()))?;
    DataSet::new(values, mask)
}

/// Writes `data` as comma-separated text, `?` for missing cells. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_csv(data: &DataSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_csv(data)).map_err(|e| Error::io(path, e))
}

pub fn format_csv(data: &DataSet) -> String {
    let mut out = Vec::new();
    for (vals, mask) in data.values().rows().into_iter().zip(data.mask().rows()) {
        let cells: Vec<String> = vals
            .iter()
            .zip(mask.iter())
            .map(|(v, &o)| if o { v.to_string() } else { MISSING_OUT.to_string() })
            .collect();
        writeln!(out, "{}", cells.join(",")).expect("writing to a Vec cannot fail");
    }
    String::from_utf8(out).expect("ascii output")
}

/// One Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub components: Vec<Component>,
    pub n: usize,
    pub seed: u64,
}

impl MixtureSpec {
    /// Two equally weighted unit-covariance components in `s` dimensions,
    /// with means at the origin and at `6 * (1, ..., 1)`.
    pub fn two_blobs(n: usize, s: usize, seed: u64) -> Self {
        let identity: Vec<Vec<f64>> = (0..s)
            .map(|i| (0..s).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        MixtureSpec {
            components: vec![
                Component {
                    mean: vec![0.0; s],
                    covariance: identity.clone(),
                    weight: 0.5,
                },
                Component {
                    mean: vec![6.0; s],
                    covariance: identity,
                    weight: 0.5,
                },
            ],
            n,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Spec("at least one component is required".into()));
        }
        if self.n < 2 {
            return Err(Error::Spec(format!("n must be at least 2, got {}", self.n)));
        }
        let s = self.dim();
        if s == 0 {
            return Err(Error::Spec("component means must be non-empty".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Spec(format!("weights sum to {total}, not 1")));
        }
        for (idx, comp) in self.components.iter().enumerate() {
            if comp.weight < 0.0 || !comp.weight.is_finite() {
                return Err(Error::Spec(format!("component {idx} has weight {}", comp.weight)));
            }
            if comp.mean.len() != s || comp.covariance.len() != s || comp.covariance.iter().any(|r| r.len() != s) {
                return Err(Error::Spec(format!("component {idx} does not match dimension {s}")));
            }
            let cov = &comp.covariance;
            let asymmetric = (0..s)
                .flat_map(|i| (0..i).map(move |j| (i, j)))
                .any(|(i, j)| (cov[i][j] - cov[j][i]).abs() > 1e-12 * (1.0 + cov[i][j].abs()));
            if asymmetric {
                return Err(Error::Spec(format!("component {idx} covariance is not symmetric")));
            }
            cholesky(cov).ok_or_else(|| Error::Spec(format!("component {idx} covariance is not positive-definite")))?;
        }
        Ok(())
    }
}

fn cholesky(cov: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let s = cov.len();
    let m = DMatrix::from_fn(s, s, |i, j| cov[i][j]);
    m.cholesky().map(|c| c.l())
}

/// Samples `spec.n` points: a component by weight, then `mean + L z` with
/// `L` the Cholesky factor of its covariance. Returns the data and the
/// component index of every point.
pub fn generate_mixture(spec: &MixtureSpec) -> Result<(DataSet, Vec<usize>)> {
    spec.validate()?;
    let s = spec.dim();
    let factors: Vec<DMatrix<f64>> = spec
        .components
        .iter()
        .map(|c| cholesky(&c.covariance).expect("validated"))
        .collect();
    let chooser = WeightedIndex::new(spec.components.iter().map(|c| c.weight)).map_err(|e| Error::Spec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Array2::zeros((spec.n, s));
    let mut labels = Vec::with_capacity(spec.n);
    for k in 0..spec.n {
        let idx = chooser.sample(&mut rng);
        let z = DVector::from_fn(s, |_, _| StandardNormal.sample(&mut rng));
        let x = &factors[idx] * z;
        for j in 0..s {
            values[[k, j]] = spec.components[idx].mean[j] + x[j];
        }
        labels.push(idx);
    }
    Ok((DataSet::complete(values)?, labels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionSpec {
    pub fraction: f64,
    pub seed: u64,
}

/// Number of cells an injection at `fraction` removes from an `n x s` table.
pub fn missing_cell_count(fraction: f64, n: usize, s: usize) -> usize {
    (fraction * (n * s) as f64).round() as usize
}

/// Hides `round(fraction * n * s)` cells of a complete dataset. Cells are
/// drawn uniformly; a draw is rejected when it would leave its row or column
/// without an observed cell. Values are left untouched.
pub fn inject_missing(data: &DataSet, spec: &InjectionSpec) -> Result<DataSet> {
    if !data.is_complete() {
        return Err(Error::Injection("input must be complete".into()));
    }
    if !(0.0..1.0).contains(&spec.fraction) {
        return Err(Error::config("fraction", format!("{} is outside [0, 1)", spec.fraction)));
    }
    let (n, s) = (data.n(), data.s());
    let target = missing_cell_count(spec.fraction, n, s);
    if target == 0 {
        return Ok(data.clone());
    }
    // every row and column needs a cell, so at least max(n, s) stay observed
    let capacity = n * s - n.max(s);
    if target > capacity {
        return Err(Error::Injection(format!(
            "cannot hide {target} of {} cells and keep every row and column observed",
            n * s
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    const RESTARTS: usize = 100;
    for _ in 0..RESTARTS {
        if let Some(mask) = try_inject(n, s, target, &mut rng) {
            return data.with_mask(mask);
        }
    }
    Err(Error::Injection(format!(
        "no valid pattern with {target} missing cells after {RESTARTS} attempts"
    )))
}

fn try_inject(n: usize, s: usize, target: usize, rng: &mut impl Rng) -> Option<Array2<bool>> {
    let mut mask = Array2::from_elem((n, s), true);
    let mut row_left = vec![s; n];
    let mut col_left = vec![n; s];
    let mut removed = 0;
    let mut misses = 0;
    while removed < target {
        let (k, j) = (rng.random_range(0..n), rng.random_range(0..s));
        if mask[[k, j]] && row_left[k] > 1 && col_left[j] > 1 {
            mask[[k, j]] = false;
            row_left[k] -= 1;
            col_left[j] -= 1;
            removed += 1;
            misses = 0;
            continue;
        }
        misses += 1;
        if misses > 64 * n * s {
            let stuck = !mask
                .indexed_iter()
                .any(|((k, j), &o)| o && row_left[k] > 1 && col_left[j] > 1);
            if stuck {
                return None;
            }
            misses = 0;
        }
    }
    Some(mask)
}

/// Flat key-value description of a mixture, read from TOML.
///
/// ```toml
/// n = 1000
/// seed = 7
/// means = [[0.0, 0.0], [6.0, 6.0]]
/// weights = [0.5, 0.5]            # optional, default equal
/// spreads = [1.0, 1.0]            # optional, covariance = spread^2 * I
/// covariances = [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]]  # optional, overrides spreads
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub means: Vec<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub spreads: Option<Vec<f64>>,
    pub covariances: Option<Vec<Vec<Vec<f64>>>>,
}

impl MixtureConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn into_spec(self) -> Result<MixtureSpec> {
        let count = self.means.len();
        let check_len = |name: &str, len: usize| {
            if len == count {
                Ok(())
            } else {
                Err(Error::Spec(format!("{name} has {len} entries for {count} means")))
            }
        };
        let weights = match self.weights {
            Some(w) => {
                check_len("weights", w.len())?;
                w
            }
            None => vec![1.0 / count as f64; count],
        };
        let covariances = match (self.covariances, self.spreads) {
            (Some(c), _) => {
                check_len("covariances", c.len())?;
                c
            }
            (None, spreads) => {
                let spreads = spreads.unwrap_or_else(|| vec![1.0; count]);
                check_len("spreads", spreads.len())?;
                self.means
                    .iter()
                    .zip(&spreads)
                    .map(|(mean, sd)| {
                        let s = mean.len();
                        (0..s)
                            .map(|i| (0..s).map(|j| if i == j { sd * sd } else { 0.0 }).collect())
                            .collect()
                    })
                    .collect()
            }
        };
        let components = self
            .means
            .into_iter()
            .zip(covariances)
            .zip(weights)
            .map(|((mean, covariance), weight)| Component { mean, covariance, weight })
            .collect();
        let spec = MixtureSpec {
            components,
            n: self.n,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `fraction = 0.1` and `seed = 3` in a flat TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionConfig {
    pub fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl InjectionConfig {
    pub fn from_toml(text: &str) -> Result<InjectionSpec> {
        let cfg: InjectionConfig = toml::from_str(text).map_err(|e| Error::config("injection", e.to_string()))?;
        Ok(InjectionSpec {
            fraction: cfg.fraction,
            seed: cfg.seed,
        })
    }
}
