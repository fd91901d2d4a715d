//! Delay-aware placement of virtualized baseband functions over a set of
//! clouds: queueing delays, k-shortest paths, placement heuristics, an
//! exhaustive oracle for small instances, and the experiment drivers.

pub mod des;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod heuristics;
pub mod io;
pub mod migration;
pub mod model;
pub mod paths;
pub mod queueing;
pub mod state;
pub mod topology;

pub use error::{Error, Result};
pub use experiments::presets;
pub use heuristics::{place, HeuristicConfig, HeuristicKind, PlacementResult};
pub use model::{CapacityVector, Mode, Scenario, ScenarioParams, ServiceRequest};
