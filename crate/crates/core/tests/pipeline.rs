use std::path::PathBuf;

use pfcm::data::{inject_missing, load_csv, CsvOptions, InjectionSpec, LabelColumn};
use pfcm::experiment::{
    aggregate, emit_report, read_trials, run_base, run_grid, ClusterChoice, DatasetSource, ExperimentSpec, Stats,
    TrialRecord,
};
use pfcm::impute::run_incomplete;
use pfcm::{DataSet, Parameters, Strategy};

fn iris() -> DataSet {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.data");
    load_csv(path, &CsvOptions::default().with_label_column(LabelColumn::Last)).unwrap()
}

fn small_spec(fractions: Vec<f64>, trials: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(DatasetSource::Inline(iris()), ClusterChoice::Fixed(2));
    spec.fractions = fractions;
    spec.trials = trials;
    spec.base_seed = 11;
    spec
}

fn grid(spec: &ExperimentSpec) -> Vec<TrialRecord> {
    let base = run_base(spec).unwrap();
    run_grid(spec, &base).unwrap()
}

fn key(r: &TrialRecord) -> (String, u64, usize, u64, usize, u64) {
    (
        r.strategy.clone(),
        r.fraction.to_bits(),
        r.trial,
        r.accuracy.to_bits(),
        r.iterations,
        r.centroid_error.to_bits(),
    )
}

#[test]
fn observed_cells_survive_imputation() {
    let data = inject_missing(&iris(), &InjectionSpec { fraction: 0.2, seed: 4 }).unwrap();
    for strategy in Strategy::ALL {
        let run = run_incomplete(&data, &Parameters::new(2), strategy, 9).unwrap();
        for ((k, j), &observed) in data.mask().indexed_iter() {
            if observed {
                assert_eq!(run.imputed.values()[[k, j]], data.values()[[k, j]]);
            } else {
                assert!(run.imputed.values()[[k, j]].is_finite());
            }
        }
        assert!(run.imputed.is_complete());
    }
}

#[test]
fn runs_are_deterministic() {
    let data = inject_missing(&iris(), &InjectionSpec { fraction: 0.15, seed: 2 }).unwrap();
    for strategy in Strategy::ALL {
        let a = run_incomplete(&data, &Parameters::new(2), strategy, 5).unwrap();
        let b = run_incomplete(&data, &Parameters::new(2), strategy, 5).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.imputed.values(), b.imputed.values());
    }
}

#[test]
fn summary_matches_trials_file() {
    let spec = small_spec(vec![0.1, 0.2], 6);
    let records = grid(&spec);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&aggregate(&records), &records, dir.path(), false).unwrap();
    let reread = read_trials(dir.path().join("trials.csv")).unwrap();
    assert_eq!(reread.len(), records.len());
    for agg in aggregate(&records) {
        let cell: Vec<&TrialRecord> = reread
            .iter()
            .filter(|r| r.strategy == agg.strategy && r.fraction == agg.fraction)
            .collect();
        let acc: Vec<f64> = cell.iter().map(|r| r.accuracy).collect();
        let ce: Vec<f64> = cell.iter().map(|r| r.centroid_error).collect();
        let it: Vec<f64> = cell.iter().map(|r| r.iterations as f64).collect();
        assert!((Stats::of(&acc).mean - agg.accuracy.mean).abs() <= 1e-12);
        assert!((Stats::of(&ce).mean - agg.centroid_error.mean).abs() <= 1e-12);
        assert!((Stats::of(&it).mean - agg.iterations.mean).abs() <= 1e-12);
        let plain = acc.iter().sum::<f64>() / acc.len() as f64;
        assert!((plain - agg.accuracy.mean).abs() <= 1e-12);
    }
}

#[test]
fn trial_seeds_do_not_depend_on_grid_shape() {
    let small = grid(&small_spec(vec![0.1], 3));
    let mut wide_spec = small_spec(vec![0.1, 0.3], 6);
    wide_spec.strategies = vec![Strategy::Nps, Strategy::Ocs];
    let wide = grid(&wide_spec);
    for r in &small {
        assert!(wide.iter().any(|w| key(w) == key(r)), "{} {} {} changed", r.strategy, r.fraction, r.trial);
    }
}

#[test]
fn zero_fraction_reproduces_reference() {
    for r in grid(&small_spec(vec![0.0], 5)) {
        assert_eq!(r.accuracy, 100.0);
        assert_eq!(r.centroid_error, 0.0);
    }
}

#[test]
fn grid_order_is_canonical() {
    let mut spec = small_spec(vec![0.2, 0.05], 2);
    spec.strategies = vec![Strategy::Nps, Strategy::Ocs];
    let order: Vec<(String, f64, usize)> = grid(&spec).into_iter().map(|r| (r.strategy, r.fraction, r.trial)).collect();
    let expected: Vec<(String, f64, usize)> = ["ocs", "nps"]
        .iter()
        .flat_map(|s| [0.05, 0.2].into_iter().flat_map(move |f| (0..2).map(move |t| (s.to_string(), f, t))))
        .collect();
    assert_eq!(order, expected);
}
