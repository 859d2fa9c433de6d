//! Energy-harvesting aware network scheduling and simulation.

pub mod duty;
pub mod engine;
pub mod manager;
pub mod network;
pub mod scenario;
pub mod sds;
pub mod seed;
pub mod sources;
pub mod trace;
pub mod window;

pub use duty::Duty;
pub use engine::{replicate, run, run_with_seed, MetricsSummary, RunOutput, SimError};
pub use manager::{EhManager, SwitchPolicy};
pub use scenario::{Mode, Scenario, ScenarioError};
pub use sources::{ResultantPeriodEstimate, SourceKind, SourceSpec};
pub use window::{AvailabilityWindow, Tick};
