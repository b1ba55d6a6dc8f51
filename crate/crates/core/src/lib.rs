//! Streaming classification of descriptor bags with a bounded, adaptive
//! ball-cover model and budgeted active learning.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`types`] — feature vectors, bags, interned labels, the metric.
//! * [`index`] — exact dynamic nearest-neighbor search over ball centers.
//! * [`model`] — the incremental cover learner and bag predictor.
//! * [`active`] — the budgeted query strategy and prequential stepping.
//! * [`eval`] — streaming sweeps and batch protocols.
//! * [`segment`] — continuous recognition over frame streams.
//! * [`synth`] / [`dataset`] — data generation and file ingestion.

pub mod active;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod index;
pub mod model;
pub mod segment;
pub mod snapshot;
pub mod synth;
pub mod types;

pub use active::{
    online_accuracy_update, stream_step, var_un_decide, ActiveState, LabelOracle, MapOracle,
    StepRecord, StreamStats, Variant,
};
pub use error::{Error, Result};
pub use index::{BallId, KdIndex, LinearIndex, Neighbor, NnIndex};
pub use model::{BagPrediction, Ball, CoverModel, IndexBackend, ModelConfig, UpdateReport};
pub use snapshot::{BallSnapshot, ModelSnapshot};
pub use types::{distance, ClassId, FeatureVector, LabelTable, VideoBag};
