//! Process execution simulation, XES-style event logging, and online
//! conformance checking for annotated process models.
//!
//! The crate is organized as a pipeline of decoupled, stream-connected
//! components:
//!
//! * [`model`] — the annotated process-model language: parsing, canonical
//!   serialization, validation, and control-flow queries (`allowed_next`).
//! * [`engine`] — a deterministic simulated execution engine that enacts a
//!   model's tasks, emits lifecycle notifications, and injects configurable
//!   faults.
//! * [`stream`] — the logger: converts notifications into an event stream,
//!   maintains per-case traces with subprocess-to-root correlation, persists
//!   logs, exports XES, and replays stored logs as streams.
//! * [`splitter`] — partitions a batch-oriented case into product-oriented
//!   part traces at signal events.
//! * [`conformance`] — the online checker: flags temporal, sensor-data,
//!   order, and model-evolution deviations and classifies them by root
//!   cause.
//! * [`pipeline`] — glue that wires logger, splitter, and checker together
//!   for live streams and log replays.

pub mod conformance;
pub mod engine;
pub mod model;
pub mod pipeline;
pub mod series;
pub mod splitter;
pub mod stream;

pub use conformance::{Checker, CheckerConfig, Deviation, DeviationKind, RootCause};
pub use engine::{EngineNotification, Fault, FaultPlan, NotificationKind, SimClock, Simulator};
pub use model::{ModelError, ModelSet, Node, ProcessModel, TaskNode};
pub use series::SensorSeries;
pub use splitter::{split, PartTrace, StreamSplitter};
pub use stream::{Event, Lifecycle, Log, Logger, StreamItem};
