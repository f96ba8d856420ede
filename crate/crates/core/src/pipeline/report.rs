//! Report files: CSV tables, a TOML summary and the full report as JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::e2e::ExperimentReport;
use super::metrics::{ConfusionMatrix, Metrics};
use super::tables::{flops_csv, latency_csv, payload_csv};

pub const REPORT_JSON: &str = "report.json";
pub const METRICS_CSV: &str = "metrics.csv";

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// One line of `metrics.csv`. Floats are written in shortest round-trip
/// form so the file parses back to the exact in-memory values.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct MetricsRow {
    pub condition: String,
    pub post: String,
    pub gap: u32,
    pub quant: String,
    pub n_train: usize,
    pub n_test: usize,
    pub skipped: usize,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub agreement_fp32: f64,
}

impl MetricsRow {
    pub fn confusion(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp,
            fp: self.fp,
            tn: self.tn,
            fn_: self.fn_,
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            accuracy: self.accuracy,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

pub fn metrics_rows(report: &ExperimentReport) -> Vec<MetricsRow> {
    report
        .conditions
        .iter()
        .map(|c| MetricsRow {
            condition: c.condition.to_string(),
            post: c.condition.post.name().to_string(),
            gap: c.condition.gap,
            quant: report.link.format.name().to_string(),
            n_train: c.n_train,
            n_test: c.predictions.len(),
            skipped: c.skipped.len(),
            tp: c.confusion.tp,
            fp: c.confusion.fp,
            tn: c.confusion.tn,
            fn_: c.confusion.fn_,
            accuracy: c.metrics.accuracy,
            precision: c.metrics.precision,
            recall: c.metrics.recall,
            f1: c.metrics.f1,
            agreement_fp32: c.agreement_fp32,
        })
        .collect()
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(format!("metrics table: {e}")))
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    condition: String,
    id: usize,
    seed: u64,
    layout: &'a str,
    truth: &'a str,
    predicted: &'a str,
    predicted_fp32: &'a str,
    prob_collision: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: &'a str,
    seed: u64,
    quant: &'a str,
    probe_at_vehicle: bool,
    pooled_bytes: u64,
    token_bytes: u64,
    conditions: BTreeMap<String, SummaryCondition>,
}

#[derive(Serialize)]
struct SummaryCondition {
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    agreement_fp32: f64,
    n_test: usize,
    skipped: usize,
}

pub fn summary_toml(report: &ExperimentReport) -> String {
    let summary = Summary {
        config_hash: &report.config_hash,
        seed: report.config.seed,
        quant: report.link.format.name(),
        probe_at_vehicle: report.link.probe_at_vehicle,
        pooled_bytes: report.link.pooled_bytes,
        token_bytes: report.link.token_bytes,
        conditions: report
            .conditions
            .iter()
            .map(|c| {
                (
                    c.condition.to_string(),
                    SummaryCondition {
                        accuracy: c.metrics.accuracy,
                        precision: c.metrics.precision,
                        recall: c.metrics.recall,
                        f1: c.metrics.f1,
                        agreement_fp32: c.agreement_fp32,
                        n_test: c.predictions.len(),
                        skipped: c.skipped.len(),
                    },
                )
            })
            .collect(),
    };
    toml::to_string(&summary).expect("summary always serializes")
}

/// Writes all report files into `dir` (created if needed) and returns their
/// paths. `run_log` lines, if given, go to `run.log`.
pub fn write_report(
    report: &ExperimentReport,
    run_log: Option<&[String]>,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let predictions: Vec<PredictionRow> = report
        .conditions
        .iter()
        .flat_map(|c| {
            c.predictions.iter().map(move |p| PredictionRow {
                condition: c.condition.to_string(),
                id: p.id,
                seed: p.seed,
                layout: p.layout.name(),
                truth: p.truth.name(),
                predicted: p.predicted.name(),
                predicted_fp32: p.predicted_fp32.name(),
                prob_collision: p.prob_collision,
            })
        })
        .collect();
    let json =
        serde_json::to_string_pretty(report).map_err(|e| Error::format(format!("report: {e}")))?;

    let mut written = vec![
        write_file(dir, "payload.csv", payload_csv(&report.payload).as_bytes())?,
        write_file(dir, "latency.csv", latency_csv(&report.latency).as_bytes())?,
        write_file(dir, "flops.csv", flops_csv(&report.flops).as_bytes())?,
        write_file(dir, METRICS_CSV, &csv_bytes(&metrics_rows(report)))?,
        write_file(dir, "predictions.csv", &csv_bytes(&predictions))?,
        write_file(dir, "summary.toml", summary_toml(report).as_bytes())?,
        write_file(dir, REPORT_JSON, json.as_bytes())?,
    ];
    if let Some(lines) = run_log {
        let mut text = lines.join("\n");
        text.push('\n');
        written.push(write_file(dir, "run.log", text.as_bytes())?);
    }
    Ok(written)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}
