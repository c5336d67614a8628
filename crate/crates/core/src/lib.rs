//! General fuzzy min-max (GFMM) hyperbox classifiers.
//!
//! Three learners build the hyperbox layer: a single-pass online learner
//! (optionally with a shrinking maximum box size), and two agglomerative
//! learners that start from one box per sample and merge them. Trained
//! models can be pruned against a validation set. The [`selection`] and
//! [`stats`] modules provide the evaluation protocol used by the `gfmm`
//! command-line tool.

pub mod agglo;
pub mod dataset;
pub mod error;
pub mod hyperbox;
pub mod model_io;
pub mod online;
pub mod pruning;
pub mod selection;
pub mod stats;
pub mod synthetic;

pub use agglo::{AggloConfig, SimilarityMeasure};
pub use error::{GfmmError, Result};
pub use hyperbox::{ClassId, GfmmModel, Hyperbox, IntervalPattern, Prediction, UNLABELLED};
pub use online::OnlineConfig;
pub use selection::{Algorithm, TrainConfig};
