//! Asynchronous actor–learner machinery: trajectory segments, the staleness-
//! controlled segment buffer, the atomic parameter store, rollout collection,
//! and the training orchestrator.

pub mod buffer;
pub mod collector;
pub mod orchestrate;
pub mod segment;
pub mod store;

pub use buffer::{BufferConfig, BufferMode, BufferStats, SegmentBuffer};
pub use collector::{assemble_batch, replay_transitions, Collector};
pub use orchestrate::{run_training, AlgoKind, RunStats, RuntimeConfig, TrainReport, TrainSetup};
pub use segment::TrajectorySegment;
pub use store::ParamStore;
