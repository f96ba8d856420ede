//! Analytic tables: payload and compression, link latency, FLOPs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ClipSpec, ExperimentConfig, LinkSpec, Modulation, QuantFormat};
use crate::costmodel::CostReport;
use crate::error::{Error, Result};
use crate::semlink::{raw_payload_bytes, semantic_payload_bytes, LatencyRow, PayloadReport};

/// Clip lengths of the payload table: a typical clip and a full 64-frame one.
pub const PAYLOAD_CLIP_LENGTHS: [u32; 2] = [33, 64];

/// Formats `x` with six significant digits, switching to exponent notation
/// outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        format!("{x:.5e}")
    } else {
        format!("{x:.*}", (5 - exp) as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadRow {
    pub n_frames: u32,
    pub format: QuantFormat,
    pub report: PayloadReport,
}

pub fn payload_table(cfg: &ExperimentConfig) -> Result<Vec<PayloadRow>> {
    let mut rows = Vec::new();
    for n_frames in PAYLOAD_CLIP_LENGTHS {
        let clip = ClipSpec {
            n_frames,
            ..cfg.clip.clone()
        };
        let raw = raw_payload_bytes(&clip);
        for format in QuantFormat::ALL {
            let sem = semantic_payload_bytes(u64::from(cfg.encoder.embed_dim), format);
            rows.push(PayloadRow {
                n_frames,
                format,
                report: PayloadReport::new(raw, sem)?,
            });
        }
    }
    Ok(rows)
}

/// The configured link plus the reference operating point of every other
/// modulation, each crossed with every format.
pub fn latency_table(cfg: &ExperimentConfig) -> Vec<LatencyRow> {
    let mut rows = Vec::new();
    for m in Modulation::ALL {
        let link = if m == cfg.link.modulation {
            cfg.link.clone()
        } else {
            LinkSpec::reference(cfg.link.bandwidth_hz, m)
        };
        for format in QuantFormat::ALL {
            let bytes = semantic_payload_bytes(u64::from(cfg.encoder.embed_dim), format);
            rows.push(LatencyRow::new(format, bytes, &link));
        }
    }
    rows
}

/// Latencies printed for the reference operating points, in ms with two
/// decimals: (BPSK at 12 dB, QAM16 at 22 dB) x (FP32, FP16, INT8).
pub const PRINTED_LATENCY_MS: [(Modulation, QuantFormat, f64); 6] = [
    (Modulation::Bpsk, QuantFormat::Fp32, 0.50),
    (Modulation::Bpsk, QuantFormat::Fp16, 0.25),
    (Modulation::Bpsk, QuantFormat::Int8, 0.12),
    (Modulation::Qam16, QuantFormat::Fp32, 0.27),
    (Modulation::Qam16, QuantFormat::Fp16, 0.13),
    (Modulation::Qam16, QuantFormat::Int8, 0.06),
];

/// One note per reference row (1280-dim embedding at a reference SNR) whose
/// latency rounded to two decimals differs from the printed figure, saying
/// whether truncation explains it. Other rows are not compared.
pub fn latency_notes(rows: &[LatencyRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| r.link.snr_db == r.link.modulation.reference_snr_db())
        .filter(|r| semantic_payload_bytes(1280, r.format) == r.payload_bytes)
        .filter_map(|r| {
            let (_, _, printed) = PRINTED_LATENCY_MS
                .iter()
                .find(|(m, f, _)| *m == r.link.modulation && *f == r.format)?;
            let ms = r.latency_s * 1e3;
            let rounded = (ms * 100.0).round() / 100.0;
            if (rounded - printed).abs() < 1e-9 {
                return None;
            }
            let truncated = (ms * 100.0).floor() / 100.0;
            let why = if (truncated - printed).abs() < 1e-9 {
                "matches when truncated"
            } else {
                "differs under rounding and truncation"
            };
            Some(format!(
                "{} {}: {ms:.4} ms, reference figure {printed:.2} ms ({why}, off by {:+.4} ms)",
                r.link.modulation.name(),
                r.format.name(),
                ms - printed
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsRow {
    pub name: String,
    pub cost: CostReport,
}

pub fn flops_row(name: &str, cfg: &ExperimentConfig) -> Result<FlopsRow> {
    Ok(FlopsRow {
        name: name.to_string(),
        cost: CostReport::from_config(cfg)?,
    })
}

/// Named configs from a sweep file.
///
/// The file is TOML with one `[[case]]` table per row. Each case has a
/// `name` and any config sections, which override `base` field by field.
pub fn load_sweep(base: &ExperimentConfig, path: &Path) -> Result<Vec<(String, ExperimentConfig)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep(base, &text)
}

pub fn parse_sweep(base: &ExperimentConfig, text: &str) -> Result<Vec<(String, ExperimentConfig)>> {
    let schema = |message: String| Error::Schema {
        line: 0,
        column: 0,
        message,
    };
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| schema(e.message().to_string()))?;
    let cases = match doc.get("case") {
        Some(toml::Value::Array(cases)) => cases,
        _ => return Err(schema("sweep file needs at least one [[case]]".into())),
    };
    let base_value = toml::Value::try_from(base).map_err(|e| schema(e.to_string()))?;
    let mut out = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let mut table = case
            .as_table()
            .cloned()
            .ok_or_else(|| schema(format!("case {i} is not a table")))?;
        let name = match table.remove("name") {
            Some(toml::Value::String(s)) => s,
            None => format!("case{i}"),
            Some(_) => return Err(schema(format!("case {i}: name must be a string"))),
        };
        let mut merged = base_value.clone();
        merge(&mut merged, toml::Value::Table(table));
        let text = toml::to_string(&merged).map_err(|e| schema(e.to_string()))?;
        out.push((name, ExperimentConfig::from_toml_str(&text)?));
    }
    Ok(out)
}

fn merge(into: &mut toml::Value, from: toml::Value) {
    match (into, from) {
        (toml::Value::Table(a), toml::Value::Table(b)) => {
            for (k, v) in b {
                match a.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        a.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn payload_csv(rows: &[PayloadRow]) -> String {
    csv_string(
        &["n_frames", "format", "raw_bytes", "sem_bytes", "ratio"],
        rows.iter()
            .map(|r| {
                vec![
                    r.n_frames.to_string(),
                    r.format.name().to_string(),
                    r.report.raw_bytes.to_string(),
                    r.report.sem_bytes.to_string(),
                    sig6(r.report.ratio),
                ]
            })
            .collect(),
    )
}

pub fn latency_csv(rows: &[LatencyRow]) -> String {
    csv_string(
        &[
            "modulation",
            "snr_db",
            "format",
            "payload_bytes",
            "rate_bps",
            "latency_ms",
            "meets_deadline",
        ],
        rows.iter()
            .map(|r| {
                vec![
                    r.link.modulation.name().to_string(),
                    sig6(r.link.snr_db),
                    r.format.name().to_string(),
                    r.payload_bytes.to_string(),
                    sig6(r.rate_bps),
                    sig6(r.latency_s * 1e3),
                    r.meets_deadline.to_string(),
                ]
            })
            .collect(),
    )
}

pub fn flops_csv(rows: &[FlopsRow]) -> String {
    csv_string(
        &[
            "name",
            "tokens",
            "dim",
            "depth",
            "mlp_ratio",
            "classes",
            "flops_block",
            "flops_encoder",
            "flops_probe",
            "flops_probe_effective",
            "flops_total",
            "encoder_share",
            "activation_elems",
            "infer_time_s",
        ],
        rows.iter()
            .map(|r| {
                let c = &r.cost;
                vec![
                    r.name.clone(),
                    c.tokens.to_string(),
                    c.dim.to_string(),
                    c.depth.to_string(),
                    c.mlp_ratio.to_string(),
                    c.classes.to_string(),
                    c.flops_block.to_string(),
                    c.flops_encoder.to_string(),
                    c.flops_probe.to_string(),
                    c.flops_probe_effective.to_string(),
                    c.flops_total.to_string(),
                    sig6(c.encoder_share()),
                    c.activation_elems.to_string(),
                    sig6(c.infer_time_s),
                ]
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.502645), "0.502645");
        assert_eq!(sig6(157286.4), "157286");
        assert_eq!(sig6(81100.8), "81100.8");
        assert_eq!(sig6(81_487_060.0), "8.14871e7");
        assert_eq!(sig6(0.00007), "7.00000e-5");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-2.5), "-2.50000");
    }

    #[test]
    fn payload_rows() {
        let rows = payload_table(&ExperimentConfig::default()).unwrap();
        assert_eq!(rows.len(), 6);
        let find = |n, f| {
            rows.iter()
                .find(|r| r.n_frames == n && r.format == f)
                .unwrap()
                .report
        };
        assert_eq!(find(64, QuantFormat::Fp32).ratio, 157_286.4);
        assert_eq!(find(64, QuantFormat::Int8).ratio, 629_145.6);
        // 33 * 2048 * 2048 * 3 / 5120
        assert!((find(33, QuantFormat::Fp32).ratio - 81_100.8).abs() < 1e-9);
    }

    #[test]
    fn latency_rows_pass_deadline() {
        let rows = latency_table(&ExperimentConfig::default());
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.meets_deadline));
        assert!((rows[0].latency_s * 1e3 - 0.5026).abs() < 1e-4);
    }

    #[test]
    fn notes_flag_only_the_rows_that_disagree() {
        let notes = latency_notes(&latency_table(&ExperimentConfig::default()));
        // 0.1257 / 0.2799 / 0.1399 / 0.06998 ms are printed as
        // 0.12 / 0.27 / 0.13 / 0.06
        assert_eq!(notes.len(), 4, "{notes:?}");
        assert!(notes[0].starts_with("BPSK INT8"));
        assert!(notes.iter().all(|n| n.contains("matches when truncated")));
        assert!(notes[3].contains("0.0700 ms"), "{}", notes[3]);
    }

    #[test]
    fn sweep_overrides() {
        let text = r#"
[[case]]
name = "toy"
clip = { n_frames = 1, height_px = 16, width_px = 32 }
tokenizer = { patch_px = 16, tubelet_frames = 1 }
encoder = { embed_dim = 4, depth = 3, mlp_ratio = 1 }
dataset = { gap = 0 }

[[case]]
name = "bad"
clip = { height_px = 100 }
"#;
        let base = ExperimentConfig::default();
        let err = parse_sweep(&base, text).unwrap_err();
        assert!(err.to_string().contains("height"), "{err}");
        let good = text.split("[[case]]\nname = \"bad\"").next().unwrap();
        let cases = parse_sweep(&base, good).unwrap();
        let row = flops_row(&cases[0].0, &cases[0].1).unwrap();
        assert_eq!(row.cost.flops_total, 840);
        assert!(flops_csv(&[row]).contains("toy,2,4,3,1,2,224,672,168"));
    }
}
