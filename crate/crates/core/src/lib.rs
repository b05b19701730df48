//! Band-selection search for hyperspectral imagery.
//!
//! The crate covers the whole pipeline from data to a chosen band
//! combination:
//!
//! * [`hsi`]: cubes, label maps, band combinations, file formats, synthetic
//!   scenes and evaluation metrics.
//! * [`stats`]: unsupervised band statistics (entropy, spectral angle).
//! * [`benchtable`]: evaluators and the benchmark table that maps band
//!   combinations to seed-averaged metrics, with oracle and regret queries.
//! * [`surrogate`]: performance predictors over band combinations.
//! * [`search`]: exhaustive, random, floating-forward, genetic,
//!   predictor-guided and statistics-ranked search.
//! * [`scos`]: a small one-shot supernet with spectral-spatial position
//!   embeddings that scores any combination by inference alone.

pub mod benchtable;
pub mod error;
pub mod hsi;
mod linalg;
pub mod parallel;
pub mod sampling;
pub mod scos;
pub mod search;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
pub use hsi::{BandCombination, Direction, HsiCube, LabelMap, MetricMap, TaskKind, TaskSpec};
