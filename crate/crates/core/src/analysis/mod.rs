//! Diagnostics, bound envelopes and trace verification.

pub mod bounds;
pub mod deltas;
pub mod diagnostics;
pub mod potential;
pub mod table;
pub mod verify;
pub mod weights;

pub use deltas::DeltaConstants;
pub use diagnostics::{analyze, DiagnosticsRow, RunAnalysis, Weighted};
pub use potential::{omega, psi};
pub use table::{RunMeta, TraceRow, TraceTable};
pub use verify::{
    verify_extended, verify_run, verify_table, BoundReport, CheckResult, CheckStatus,
};
pub use weights::{WeightKind, WeightScheme};
