//! Experiment runner, exact small-instance oracles and resource
//! accounting.

pub mod accounting;
pub mod config;
pub mod exact;
pub mod mc;
pub mod report;
pub mod stats;
pub mod strategy;

pub use accounting::{accounting, Accounting};
pub use config::{CellParams, ExperimentConfig, Format, Protocol};
pub use exact::{exact_extraction_distance, ExactJob, EXACT_LIMIT};
pub use mc::{attack_transcripts, monte_carlo, Cell, TrialOutcome};
pub use report::{report_emit, report_parse, Report, ReportRow};
pub use stats::{wilson, Rate};
pub use strategy::{EveContext, StrategySpec};
