//! Candidate sets, retrieval and classification metrics, the ablation
//! grids and report files.

mod ablation;
mod candidates;
mod evaluate;
mod metrics;
mod report;

pub use ablation::{
    multitask_pivot, run_history_ablation, run_multitask_ablation, AblationGrid, AblationOutcome, AblationRun,
    Experiment, InputVariant, TrainingMode,
};
pub use candidates::{build_candidate_sets, CandidateSet, EvalConfig};
pub use evaluate::{evaluate_examples, EvalResult};
pub use metrics::{gold_rank, hits_at_n, hits_rate, weighted_f1};
pub use report::{emit_report, raw_path, ReportFormat, ResultRow, ResultTable};
