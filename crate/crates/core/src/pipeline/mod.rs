//! Experiment runner and report generation.
//!
//! The analytic tables (payload, latency, FLOPs) come straight from the
//! config. The end-to-end run trains one probe per condition (a
//! post-processing and a frame gap) and scores it on the held-out clips.
//! Clips are processed in parallel and always reduced in clip-id order, so a
//! given config and seed reproduce every report byte.

mod commands;
mod e2e;
mod metrics;
mod report;
mod tables;

pub use commands::{cmd_gen, cmd_train, TrainSummary};
pub use e2e::{
    link_payload, run_e2e, ClipPrediction, Condition, ConditionResult, E2eOptions, E2eRun,
    ExperimentReport, LinkPayload, SkippedClip, GAP_SWEEP,
};
pub use metrics::{compute_metrics, f1_score, ConfusionMatrix, Metrics};
pub use report::{
    metrics_rows, parse_metrics_csv, read_report, summary_toml, write_report, MetricsRow,
    METRICS_CSV, REPORT_JSON,
};
pub use tables::{
    flops_csv, flops_row, latency_csv, latency_notes, latency_table, load_sweep, parse_sweep,
    payload_csv, payload_table, sig6, FlopsRow, PayloadRow, PAYLOAD_CLIP_LENGTHS,
    PRINTED_LATENCY_MS,
};
