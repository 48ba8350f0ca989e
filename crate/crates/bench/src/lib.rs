//! Sensitivity sweep over formulations, projections, basis methods, reduced
//! sizes and snapshot counts, with report files and qualitative checks.

pub mod config;
pub mod error;
pub mod findings;
pub mod fom;
pub mod metric;
pub mod report;
pub mod speedup;
pub mod sweep;

pub use config::{Frequencies, SweepConfig};
pub use error::{BenchError, Result};
pub use findings::Finding;
pub use fom::FomData;
pub use report::{emit_reports, Manifest};
pub use speedup::{time_speedup, SpeedupRow};
pub use sweep::{ComboKey, ErrorRecord, RunOptions, Status, Sweep, Unit};
