//! Observed data: unit records, coarsening maps, count tables and scenarios.
//!
//! Counts are kept as exact integers and probabilities are exposed as exact
//! rationals; floating point only enters at presentation time.

mod coarsen;
mod distribution;
mod document;
mod record;
mod scenario;

pub use coarsen::{coarsen, CoarseningMap, IntervalEntry, LabelEntry};
pub(crate) use distribution::cells as distribution_cells;
pub use distribution::hex_digest;
pub use distribution::{tabulate, Cell, ObservedDistribution};
pub use document::{
    load_coarsening, load_scenario, load_summary, parse_coarsening, parse_scenario, parse_summary, CountEntry,
    SummaryDocument, SCHEMA_VERSION,
};
pub use record::{load_records, CoarsenedRecord, ExposureValue, RawRecord};
pub use scenario::{validate, Estimand, ExposureLevel, Scenario, Validated};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("missing required column `{0}` in header")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: unknown instrument level `{label}`")]
    UnknownInstrument { line: u64, label: String },
    #[error("line {line}: outcome must be 0 or 1, got `{value}`")]
    BadOutcome { line: u64, value: String },
    #[error("exposure values not covered by the coarsening map: {}", .0.join(", "))]
    Uncovered(Vec<String>),
    #[error("invalid coarsening map: {0}")]
    InvalidMap(String),
    #[error("instrument level `{0}` has no observations")]
    EmptyStratum(String),
    #[error("no records to tabulate")]
    NoRecords,
    #[error("negative count {count} for cell (z={z}, x={x}, y={y})")]
    NegativeCount { z: String, x: String, y: u8, count: i64 },
    #[error("duplicate count entry for cell (z={z}, x={x}, y={y})")]
    DuplicateCell { z: String, x: String, y: u8 },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario does not match the data: {0}")]
    Mismatch(String),
    #[error("unsupported or missing schema version `{0}`")]
    Schema(String),
    #[error("could not parse document: {0}")]
    Parse(String),
}
