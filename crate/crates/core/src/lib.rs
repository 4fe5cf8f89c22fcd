//! Possibilistic fuzzy c-means (PFCM) clustering for complete data, and two
//! variants for incomplete data: optimal completion (OCS) and nearest
//! prototype (NPS) imputation. Also ships the evaluation pipeline used to
//! compare them: Xie-Beni cluster-count selection, accuracy against a
//! reference partition, iteration counts and centroid errors.
//!
//! ```no_run
//! use pfcm::{data, engine, impute, model::Parameters};
//!
//! let opts = data::CsvOptions::default().with_label_column(data::LabelColumn::Last);
//! let iris = data::load_csv("data/iris.data", &opts)?;
//! let params = Parameters::new(2);
//! let base = engine::run_pfcm(&iris, &params, 7)?;
//!
//! let holes = data::inject_missing(&iris, &data::InjectionSpec { fraction: 0.1, seed: 1 })?;
//! let run = impute::run_incomplete(&holes, &params, impute::Strategy::Nps, 7)?;
//! println!("{} vs {} iterations", base.iterations, run.iterations);
//! # Ok::<(), pfcm::Error>(())
//! ```

pub mod data;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod impute;
pub mod metrics;
pub mod model;
pub mod plot;

pub use error::{Error, ErrorKind, Result};
pub use impute::Strategy;
pub use metrics::Hardening;
pub use model::{Centroids, DataSet, Parameters, Partition, RunResult, WeightForm};
