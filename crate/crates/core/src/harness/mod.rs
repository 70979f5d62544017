//! Experiment orchestration: configuration, the round loop, metrics and
//! report files.

mod config;
mod metrics;
mod report;
mod run;

pub use config::{DatasetSpec, DefenseConfig, DefenseKind, ExperimentConfig};
pub use metrics::{compute_asr, compute_cad, compute_tpr_fpr, Confusion, Metrics};
pub use report::{
    emit_reports, read_report, run_sweep, ReportDocument, SweepPoint, REPORT_JSON, ROUNDS_CSV,
    SWEEP_CSV,
};
pub use run::{is_attacker, run_experiment, schedule, Digest, ExperimentResult, RoundReport};
