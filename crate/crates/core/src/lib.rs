//! Matrix-factorization recommenders with popularity-bias evaluation.
//!
//! Models: unnormalized MF, cosine-normalized MF, LinFac (cosine MF with
//! every factor row on one hyperplane through the origin), ParaMat (fits the
//! normalized rating as a distance on a cone lifted from two dot products),
//! and two non-learned placements. Evaluation reports MAE and a
//! log-log-slope Degree of Matthew Effect per epoch.

pub mod analysis;
pub mod data;
pub mod error;
pub mod experiment;
pub mod factorization;
pub mod ingest;
pub mod metrics;
pub mod rng;

pub use data::{normalize_rating, train_test_split, Dataset, Interaction, SplitSpec, TrainConfig};
pub use error::{Error, Result};
pub use factorization::{predict, ModelKind, Predictor, TrainedModel};
