//! Automatic view layout for multi-display environments.
//!
//! The crate is organised along the data flow of a live analysis session:
//!
//! - [`model`]: the session model (content pool, temporal layers, spatial and
//!   temporal constraints) and its edit vocabulary.
//! - [`environment`]: displays, user poses, display extent and visibility.
//! - [`quality`]: the layout quality function the optimizer maximizes.
//! - [`solver`]: a dense two-phase simplex and tangent cuts for the concave
//!   size term.
//! - [`layout`]: branch-and-bound over view-display assignments with exact
//!   per-display placement.
//! - [`oracle`]: an exhaustive grid search used to check the engine on
//!   small instances.
//! - [`interaction`]: mapping pointing rays and screen taps to views.
//! - [`log`]: the branching analysis log with undo, redo and selective undo.
//! - [`session`]: the serialized coordinator that ties everything together.

pub mod environment;
pub mod ids;
pub mod instances;
pub mod interaction;
pub mod layout;
pub mod log;
pub mod model;
pub mod oracle;
pub mod quality;
pub mod session;
pub mod solver;

pub use environment::{Display, DisplayEcology, UserPose, UserRole};
pub use ids::{DisplayId, UserId, ViewId};
pub use layout::{EngineParams, LayoutEngine, LayoutError, LayoutResult, StepInput};
pub use log::{AnalysisLog, EventDraft, EventId, EventKind, EventPayload, LogEvent, LogFilter, Materialized};
pub use model::{ContentRef, EditOp, ModelEdit, SessionModel, StepContext, View};
pub use quality::{Placement, QualityReport, QualityWeights};
pub use session::{SessionError, SessionService, SessionState};

/// Schema version written into every persisted document.
pub const SCHEMA_VERSION: u32 = 1;
