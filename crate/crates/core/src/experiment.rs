//! The evaluation pipeline: cluster the complete data once as a reference,
//! then for every strategy, missing fraction and trial inject missingness,
//! recluster, and score the result against the reference.

use std::fmt::Write as _;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_mixture, inject_missing, load_csv, CsvOptions, InjectionSpec, MixtureSpec};
use crate::engine::run_pfcm;
use crate::error::{Error, Result};
use crate::impute::{run_incomplete, Strategy};
use crate::metrics::{accuracy, centroid_error, select_cluster_count, Hardening};
use crate::model::{Centroids, DataSet, Parameters, RunResult};
use crate::plot;

/// Missing fractions used when none are given.
pub const DEFAULT_FRACTIONS: [f64; 6] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];
pub const DEFAULT_TRIALS: usize = 30;

#[derive(Debug, Clone)]
pub enum DatasetSource {
    File { path: PathBuf, options: CsvOptions },
    Mixture(MixtureSpec),
    /// Already in memory.
    Inline(DataSet),
}

impl DatasetSource {
    pub fn load(&self) -> Result<DataSet> {
        match self {
            DatasetSource::File { path, options } => load_csv(path, options),
            DatasetSource::Mixture(spec) => generate_mixture(spec).map(|(d, _)| d),
            DatasetSource::Inline(d) => Ok(d.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterChoice {
    Fixed(usize),
    /// Pick by smallest Xie-Beni index over the range.
    Sweep(RangeInclusive<usize>),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: DatasetSource,
    pub clusters: ClusterChoice,
    /// Algorithm settings; `c` is overwritten by the base run's choice.
    pub params: Parameters,
    pub fractions: Vec<f64>,
    pub trials: usize,
    pub strategies: Vec<Strategy>,
    pub base_seed: u64,
    pub zscore: bool,
    pub hardening: Hardening,
    /// Reuse trial 0's missingness pattern for every trial.
    pub pin_pattern: bool,
    /// Reuse trial 0's centroid initialization for every trial.
    pub pin_init: bool,
}

impl ExperimentSpec {
    pub fn new(source: DatasetSource, clusters: ClusterChoice) -> Self {
        ExperimentSpec {
            source,
            clusters,
            params: Parameters::new(2),
            fractions: DEFAULT_FRACTIONS.to_vec(),
            trials: DEFAULT_TRIALS,
            strategies: Strategy::ALL.to_vec(),
            base_seed: 0,
            zscore: false,
            hardening: Hardening::default(),
            pin_pattern: false,
            pin_init: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        if self.strategies.is_empty() {
            return Err(Error::config("strategies", "need at least one strategy"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return Err(Error::config("fractions", format!("{f} is outside [0, 1)")));
        }
        Ok(())
    }

    /// The data every run sees (after optional standardization).
    pub fn dataset(&self) -> Result<DataSet> {
        let data = self.source.load()?;
        if !data.is_complete() {
            return Err(Error::InvalidData(format!(
                "experiments start from complete data; found {} missing cells",
                data.missing_count()
            )));
        }
        Ok(if self.zscore { data.zscore() } else { data })
    }
}

/// The complete-data reference partition.
#[derive(Debug, Clone)]
pub struct Base {
    pub data: DataSet,
    pub params: Parameters,
    pub run: RunResult,
    pub labels: Vec<usize>,
    /// `(c, Xie-Beni)` for every count that produced a value, when swept.
    pub validity: Vec<(usize, f64)>,
}

impl Base {
    pub fn c(&self) -> usize {
        self.params.c
    }

    pub fn centroids(&self) -> &Centroids {
        &self.run.centroids
    }
}

/// Clusters the complete dataset, sweeping `c` by Xie-Beni when asked.
pub fn run_base(spec: &ExperimentSpec) -> Result<Base> {
    spec.validate()?;
    let data = spec.dataset()?;
    let (params, run, validity) = match &spec.clusters {
        ClusterChoice::Fixed(c) => {
            let params = spec.params.clone().with_c(*c);
            let run = run_pfcm(&data, &params, spec.base_seed)?;
            (params, run, Vec::new())
        }
        ClusterChoice::Sweep(range) => {
            let mut selection = select_cluster_count(&data, range.clone(), &spec.params, spec.base_seed)?;
            let validity = selection
                .table
                .iter()
                .filter_map(|e| e.xie_beni.as_ref().ok().map(|&xb| (e.c, xb)))
                .collect();
            let chosen = selection.chosen;
            let run = selection
                .table
                .iter_mut()
                .find(|e| e.c == chosen)
                .and_then(|e| e.run.take())
                .expect("chosen count has a run");
            (spec.params.clone().with_c(chosen), run, validity)
        }
    };
    let labels = spec.hardening.labels(&run.partition);
    Ok(Base {
        data,
        params,
        run,
        labels,
        validity,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fraction in basis points, the integer form fed to the seed mix.
pub fn fraction_key(fraction: f64) -> u64 {
    (fraction * 10_000.0).round() as u64
}

/// Per-trial seed: SplitMix64 folded over the base seed, strategy tag
/// (1 = ocs, 2 = nps), fraction in basis points and trial index.
pub fn trial_seed(base_seed: u64, strategy: Strategy, fraction: f64, trial: usize) -> u64 {
    let tag = match strategy {
        Strategy::Ocs => 1,
        Strategy::Nps => 2,
    };
    [tag, fraction_key(fraction), trial as u64]
        .into_iter()
        .fold(splitmix64(base_seed), |h, part| splitmix64(h ^ part))
}

/// Seeds for the missingness pattern and the centroid initialization.
fn seeds_for(spec: &ExperimentSpec, strategy: Strategy, fraction: f64, trial: usize) -> (u64, u64) {
    let pattern_trial = if spec.pin_pattern { 0 } else { trial };
    let init_trial = if spec.pin_init { 0 } else { trial };
    let pattern = splitmix64(trial_seed(spec.base_seed, strategy, fraction, pattern_trial) ^ 0x5851_f42d_4c95_7f2d);
    let init = trial_seed(spec.base_seed, strategy, fraction, init_trial);
    (pattern, init)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub strategy: String,
    pub fraction: f64,
    pub trial: usize,
    pub accuracy: f64,
    pub iterations: usize,
    pub centroid_error: f64,
    pub converged: bool,
    /// Why the trial produced no metrics, if it failed.
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time: Option<Duration>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

struct Reference<'a> {
    labels: &'a [usize],
    centroids: &'a Centroids,
}

fn evaluate(
    spec: &ExperimentSpec,
    base: &Base,
    strategy: Strategy,
    fraction: f64,
    trial: usize,
) -> TrialRecord {
    let started = Instant::now();
    let (pattern_seed, init_seed) = seeds_for(spec, strategy, fraction, trial);
    let outcome = (|| -> Result<(f64, f64, RunResult)> {
        // without missing cells, compare against a complete run from the same start
        let own;
        let reference = if fraction == 0.0 {
            own = run_pfcm(&base.data, &base.params, init_seed)?;
            let labels = spec.hardening.labels(&own.partition);
            (labels, &own.centroids)
        } else {
            (base.labels.clone(), &base.run.centroids)
        };
        let reference = Reference {
            labels: &reference.0,
            centroids: reference.1,
        };
        let incomplete = inject_missing(
            &base.data,
            &InjectionSpec {
                fraction,
                seed: pattern_seed,
            },
        )?;
        let run = run_incomplete(&incomplete, &base.params, strategy, init_seed)?;
        let labels = spec.hardening.labels(&run.partition);
        let acc = accuracy(&labels, reference.labels, base.c())?;
        let ce = centroid_error(&run.centroids, reference.centroids)?;
        Ok((acc, ce, run))
    })();
    let wall_time = Some(started.elapsed());
    match outcome {
        Ok((accuracy, centroid_error, run)) => TrialRecord {
            strategy: strategy.tag().to_string(),
            fraction,
            trial,
            accuracy,
            iterations: run.iterations,
            centroid_error,
            converged: run.converged,
            error: None,
            wall_time,
        },
        Err(e) => TrialRecord {
            strategy: strategy.tag().to_string(),
            fraction,
            trial,
            accuracy: f64::NAN,
            iterations: 0,
            centroid_error: f64::NAN,
            converged: false,
            error: Some(e.to_string()),
            wall_time,
        },
    }
}

/// Runs every strategy x fraction x trial cell. Output order is strategy,
/// then ascending fraction, then trial, whatever order the work ran in.
pub fn run_grid(spec: &ExperimentSpec, base: &Base) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let mut strategies = spec.strategies.clone();
    strategies.sort();
    strategies.dedup();
    let mut fractions = spec.fractions.clone();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let work: Vec<(Strategy, f64, usize)> = strategies
        .iter()
        .flat_map(|&s| fractions.iter().flat_map(move |&f| (0..spec.trials).map(move |t| (s, f, t))))
        .collect();
    Ok(work
        .into_par_iter()
        .map(|(s, f, t)| evaluate(spec, base, s, f, t))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats {
                mean: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Stats {
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub strategy: String,
    pub fraction: f64,
    pub trials: usize,
    pub converged: usize,
    pub failed: usize,
    pub accuracy: Stats,
    pub iterations: Stats,
    pub centroid_error: Stats,
}

fn strategy_rank(tag: &str) -> (usize, &str) {
    let rank = Strategy::ALL
        .iter()
        .position(|s| s.tag() == tag)
        .unwrap_or(Strategy::ALL.len());
    (rank, tag)
}

/// Groups records by strategy and fraction. Failed trials are counted but
/// excluded from the statistics.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRecord> {
    let mut keys: Vec<(&str, f64)> = records.iter().map(|r| (r.strategy.as_str(), r.fraction)).collect();
    keys.sort_by(|a, b| strategy_rank(a.0).cmp(&strategy_rank(b.0)).then(a.1.total_cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(strategy, fraction)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.strategy == strategy && r.fraction == fraction)
                .collect();
            let ok: Vec<&TrialRecord> = group.iter().copied().filter(|r| !r.failed()).collect();
            let column = |f: fn(&TrialRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
            AggregateRecord {
                strategy: strategy.to_string(),
                fraction,
                trials: group.len(),
                converged: ok.iter().filter(|r| r.converged).count(),
                failed: group.len() - ok.len(),
                accuracy: Stats::of(&column(|r| r.accuracy)),
                iterations: Stats::of(&column(|r| r.iterations as f64)),
                centroid_error: Stats::of(&column(|r| r.centroid_error)),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: &str = "strategy,fraction,trials,converged,failed,\
accuracy_mean,accuracy_min,accuracy_max,accuracy_std,\
iterations_mean,iterations_min,iterations_max,iterations_std,\
centroid_error_mean,centroid_error_min,centroid_error_max,centroid_error_std";

pub fn format_summary(aggregates: &[AggregateRecord]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for a in aggregates {
        write!(out, "{},{},{},{},{}", a.strategy, a.fraction, a.trials, a.converged, a.failed).unwrap();
        for s in [a.accuracy, a.iterations, a.centroid_error] {
            write!(out, ",{},{},{},{}", s.mean, s.min, s.max, s.std).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Which per-strategy mean a plot-data table carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Iterations,
    CentroidError,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Accuracy, Metric::Iterations, Metric::CentroidError];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Iterations => "iterations",
            Metric::CentroidError => "centroid_error",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "mean accuracy (%)",
            Metric::Iterations => "mean iterations",
            Metric::CentroidError => "mean centroid error",
        }
    }

    fn mean(self, a: &AggregateRecord) -> f64 {
        match self {
            Metric::Accuracy => a.accuracy.mean,
            Metric::Iterations => a.iterations.mean,
            Metric::CentroidError => a.centroid_error.mean,
        }
    }
}

/// Fractions (ascending) as rows, strategies as columns, metric means as cells.
pub struct MetricTable {
    pub strategies: Vec<String>,
    pub fractions: Vec<f64>,
    pub means: Vec<Vec<f64>>,
}

pub fn metric_table(aggregates: &[AggregateRecord], metric: Metric) -> MetricTable {
    let mut strategies: Vec<String> = Vec::new();
    let mut fractions: Vec<f64> = Vec::new();
    for a in aggregates {
        if !strategies.contains(&a.strategy) {
            strategies.push(a.strategy.clone());
        }
        if !fractions.contains(&a.fraction) {
            fractions.push(a.fraction);
        }
    }
    strategies.sort_by(|a, b| strategy_rank(a).cmp(&strategy_rank(b)));
    fractions.sort_by(f64::total_cmp);
    let means = fractions
        .iter()
        .map(|&f| {
            strategies
                .iter()
                .map(|s| {
                    aggregates
                        .iter()
                        .find(|a| &a.strategy == s && a.fraction == f)
                        .map_or(f64::NAN, |a| metric.mean(a))
                })
                .collect()
        })
        .collect();
    MetricTable {
        strategies,
        fractions,
        means,
    }
}

fn format_metric_table(table: &MetricTable) -> String {
    let mut out = String::from("fraction");
    for s in &table.strategies {
        write!(out, ",{s}").unwrap();
    }
    out.push('\n');
    for (f, row) in table.fractions.iter().zip(&table.means) {
        write!(out, "{f}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_trials(records: &[TrialRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        writer.serialize(r)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trials(&text)
}

pub fn parse_trials(text: &str) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut records = Vec::new();
    for r in reader.deserialize() {
        records.push(r?);
    }
    Ok(records)
}

/// Writes `trials.csv`, `summary.csv` and one plot-data table per metric
/// into `out_dir`; `timings.csv` when wall times are known; SVG line charts
/// when `plots` is set. Returns the written paths.
pub fn emit_report(
    aggregates: &[AggregateRecord],
    records: &[TrialRecord],
    out_dir: impl AsRef<Path>,
    plots: bool,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };

    put("trials.csv", format_trials(records)?)?;
    if records.iter().any(|r| r.wall_time.is_some()) {
        let mut timings = String::from("strategy,fraction,trial,wall_time_ms\n");
        for r in records {
            let ms = r.wall_time.map_or(f64::NAN, |d| d.as_secs_f64() * 1e3);
            writeln!(timings, "{},{},{},{ms:.3}", r.strategy, r.fraction, r.trial).unwrap();
        }
        put("timings.csv", timings)?;
    }
    put("summary.csv", format_summary(aggregates))?;
    for metric in Metric::ALL {
        let table = metric_table(aggregates, metric);
        put(&format!("{}.csv", metric.name()), format_metric_table(&table))?;
        if plots {
            put(&format!("{}.svg", metric.name()), plot::line_chart(&table, metric.label()))?;
        }
    }
    Ok(written)
}
