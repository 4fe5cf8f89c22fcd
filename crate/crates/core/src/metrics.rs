//! Xie-Beni validity, cluster-count selection, hardening, label alignment,
//! accuracy and centroid error.
//!
//! Labels are zero-based cluster indices throughout.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use itertools::Itertools;
use ndarray::Array2;

use crate::engine::run_pfcm;
use crate::error::{Error, Result};
use crate::model::{squared_distances, Centroids, DataSet, Parameters, Partition, RunResult};

/// Largest cluster count the exhaustive matchers accept.
pub const MAX_ALIGN_CLUSTERS: usize = 8;

/// Smallest centroid separation the Xie-Beni index accepts.
pub const MIN_SEPARATION: f64 = 1e-12;

/// Compactness over separation, with squared norms in both terms.
pub fn xie_beni(data: &DataSet, u: &Array2<f64>, centroids: &Centroids, m: f64) -> Result<f64> {
    let c = centroids.c();
    if c < 2 {
        return Err(Error::DegenerateIndex("Xie-Beni needs at least two clusters".into()));
    }
    let d2 = squared_distances(data, centroids)?;
    if u.dim() != d2.dim() {
        return Err(Error::Dimension(format!(
            "memberships {:?} do not match distances {:?}",
            u.dim(),
            d2.dim()
        )));
    }
    let compactness: f64 = u.iter().zip(d2.iter()).map(|(&u, &d)| u.powf(m) * d).sum();
    let v = centroids.as_array();
    let separation = (0..c)
        .tuple_combinations()
        .map(|(i, j)| {
            v.row(i)
                .iter()
                .zip(v.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    if separation < MIN_SEPARATION {
        return Err(Error::DegenerateIndex(format!(
            "centroids coincide (min squared separation {separation:e})"
        )));
    }
    Ok(compactness / (data.n() as f64 * separation))
}

/// One row of a cluster-count sweep.
#[derive(Debug)]
pub struct ValidityEntry {
    pub c: usize,
    /// The index value, or why this `c` was skipped.
    pub xie_beni: Result<f64>,
    pub run: Option<RunResult>,
}

#[derive(Debug)]
pub struct ClusterCountSelection {
    pub chosen: usize,
    pub table: Vec<ValidityEntry>,
}

impl ClusterCountSelection {
    pub fn chosen_run(&self) -> &RunResult {
        self.table
            .iter()
            .find(|e| e.c == self.chosen)
            .and_then(|e| e.run.as_ref())
            .expect("chosen entry carries its run")
    }
}

/// Runs PFCM for every `c` in the range and keeps the one with the smallest
/// Xie-Beni index (ties go to the smaller `c`). Failing counts are recorded
/// and skipped.
pub fn select_cluster_count(
    data: &DataSet,
    c_range: RangeInclusive<usize>,
    p: &Parameters,
    seed: u64,
) -> Result<ClusterCountSelection> {
    let (lo, hi) = (*c_range.start(), *c_range.end());
    if lo < 2 || lo > hi || hi >= data.n() {
        return Err(Error::config(
            "c_range",
            format!("need 2 <= c_min <= c_max < n, got {lo}..={hi} with n = {}", data.n()),
        ));
    }
    let mut table = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for c in c_range {
        let params = p.clone().with_c(c);
        let outcome = run_pfcm(data, &params, seed)
            .and_then(|run| xie_beni(data, &run.partition.u, &run.centroids, params.m).map(|xb| (run, xb)));
        match outcome {
            Ok((run, xb)) => {
                if best.is_none_or(|(_, b)| xb < b) {
                    best = Some((c, xb));
                }
                table.push(ValidityEntry {
                    c,
                    xie_beni: Ok(xb),
                    run: Some(run),
                });
            }
            Err(e) => table.push(ValidityEntry {
                c,
                xie_beni: Err(e),
                run: None,
            }),
        }
    }
    let (chosen, _) = best.ok_or_else(|| Error::DegenerateIndex("every cluster count failed".into()))?;
    Ok(ClusterCountSelection { chosen, table })
}

/// Per-column argmax; ties go to the lowest row index.
pub fn harden(memberships: &Array2<f64>) -> Vec<usize> {
    memberships
        .columns()
        .into_iter()
        .map(|col| {
            col.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
                .0
        })
        .collect()
}

/// Which membership matrix crisp labels are read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Hardening {
    /// Argmax of the fuzzy memberships `u`.
    Fuzzy,
    /// Argmax of the typicalities `t`.
    #[default]
    Typicality,
}

impl Hardening {
    pub fn labels(self, partition: &Partition) -> Vec<usize> {
        match self {
            Hardening::Fuzzy => harden(&partition.u),
            Hardening::Typicality => harden(&partition.t),
        }
    }
}

impl fmt::Display for Hardening {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hardening::Fuzzy => "fuzzy",
            Hardening::Typicality => "typicality",
        })
    }
}

impl FromStr for Hardening {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fuzzy" | "u" => Ok(Hardening::Fuzzy),
            "typicality" | "possibilistic" | "t" => Ok(Hardening::Typicality),
            other => Err(Error::config("harden", format!("unknown hardening {other:?}"))),
        }
    }
}

/// Cluster sizes of a label vector.
pub fn cluster_sizes(labels: &[usize], c: usize) -> Vec<usize> {
    let mut sizes = vec![0; c];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// Maps trial cluster `i` to base cluster `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    perm: Vec<usize>,
}

impl Alignment {
    pub fn identity(c: usize) -> Self {
        Alignment { perm: (0..c).collect() }
    }

    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::config("perm", format!("{perm:?} is not a permutation")));
            }
        }
        Ok(Alignment { perm })
    }

    pub fn map(&self, trial_label: usize) -> usize {
        self.perm[trial_label]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }
}

fn check_align_size(c: usize) -> Result<()> {
    if c > MAX_ALIGN_CLUSTERS {
        return Err(Error::UnsupportedSize(format!(
            "exhaustive alignment supports at most {MAX_ALIGN_CLUSTERS} clusters, got {c}"
        )));
    }
    Ok(())
}

fn check_labels(labels: &[usize], c: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= c) {
        Some(l) => Err(Error::config("labels", format!("label {l} out of range for c = {c}"))),
        None => Ok(()),
    }
}

/// Relabelling of the trial clusters that agrees with the base labels at the
/// most positions. Exhaustive over all `c!` permutations; the first maximum
/// in lexicographic order wins.
pub fn align_labels(trial: &[usize], base: &[usize], c: usize) -> Result<Alignment> {
    check_align_size(c)?;
    if trial.len() != base.len() {
        return Err(Error::Dimension(format!(
            "label vectors differ in length: {} vs {}",
            trial.len(),
            base.len()
        )));
    }
    check_labels(trial, c)?;
    check_labels(base, c)?;
    let mut agreement = vec![vec![0usize; c]; c];
    for (&t, &b) in trial.iter().zip(base) {
        agreement[t][b] += 1;
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for perm in (0..c).permutations(c) {
        let score: usize = perm.iter().enumerate().map(|(i, &p)| agreement[i][p]).sum();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, perm));
        }
    }
    Ok(Alignment {
        perm: best.map(|(_, p)| p).unwrap_or_default(),
    })
}

/// Percentage of points whose aligned trial label matches the base label.
pub fn accuracy(trial: &[usize], base: &[usize], c: usize) -> Result<f64> {
    let alignment = align_labels(trial, base, c)?;
    Ok(accuracy_under(trial, base, &alignment))
}

/// Percentage agreement under a given alignment.
pub fn accuracy_under(trial: &[usize], base: &[usize], alignment: &Alignment) -> f64 {
    if trial.is_empty() {
        return 100.0;
    }
    let hits = trial
        .iter()
        .zip(base)
        .filter(|(&t, &b)| alignment.map(t) == b)
        .count();
    percentage(hits, trial.len())
}

/// `a / n * 100`.
pub fn percentage(a: usize, n: usize) -> f64 {
    a as f64 / n as f64 * 100.0
}

fn euclidean(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean Euclidean distance between matched centroids, pairing the two sets
/// by the permutation with the smallest total distance.
pub fn centroid_error(trial: &Centroids, base: &Centroids) -> Result<f64> {
    if trial.c() != base.c() || trial.s() != base.s() {
        return Err(Error::Dimension(format!(
            "centroid sets are {}x{} and {}x{}",
            trial.c(),
            trial.s(),
            base.c(),
            base.s()
        )));
    }
    let c = trial.c();
    check_align_size(c)?;
    let (tv, bv) = (trial.as_array(), base.as_array());
    let dist: Vec<Vec<f64>> = (0..c)
        .map(|i| (0..c).map(|j| euclidean(tv.row(i), bv.row(j))).collect())
        .collect();
    let best = (0..c)
        .permutations(c)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| dist[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(best / c as f64)
}
