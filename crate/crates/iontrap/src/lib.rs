//! Trapped-ion architecture models: layouts, primitive timings, a transpiler
//! from protocol trees to timed schedules, and lowering of schedules into
//! circuits with timing-aware noise.

pub mod arch;
pub mod lower;
pub mod schedule;
pub mod timing;
pub mod transpile;

pub use arch::{ArchError, ArchKind, Architecture, IonRole, Model, QubitRoles, ZoneRole};
pub use lower::{compile, lower_node, lower_tree, LowerError};
pub use schedule::{audit, AuditViolation, Breakdown, NodeSchedule, Placement, Schedule, TimedOp};
pub use timing::{accumulate_excitation, cooling_time, OpKind, OpTiming, Scenario, TimingError, TimingScenario};
pub use transpile::{initial_placement, transpile, TranspileError};
