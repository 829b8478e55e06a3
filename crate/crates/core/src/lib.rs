//! Sequential skip prediction for listening sessions.
//!
//! The pipeline turns session logs and track metadata into 63-dimensional
//! feature vectors ([`features`]), trains one boosted-tree classifier per
//! target position ([`gbdt`], [`modelbank`]), blends the per-position
//! predictions with the last known user action ([`ensemble`]) and scores
//! the resulting decisions by mean average accuracy ([`eval`]).

pub mod config;
pub mod datamodel;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod modelbank;

pub use config::KeyValues;
pub use datamodel::{Session, SessionRow, SessionSplit, TrackCatalog, TrackMetadata};
pub use ensemble::{EnsembleWeights, LastAction, SessionPrediction, SolutionId};
pub use error::{Error, Result};
pub use eval::{CorpusScore, SessionScore, SolutionsReport};
pub use features::{FeatureVector, TrainingExample, N_FEATURES};
pub use gbdt::{DenseMatrix, GbdtModel, TrainParams};
pub use modelbank::{ModelBank, PositionPredictor, N_POSITIONS};
