//! The end-to-end experiment: generate, post-process, encode, train the
//! probe at the roadside unit, send pooled embeddings over the link and
//! classify them at the vehicle.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{validate_config, ExperimentConfig, QuantFormat};
use crate::costmodel::token_count;
use crate::error::{Error, Result};
use crate::probe::{
    probe_forward, train_probe, EncoderStub, Matrix, ProbeParams, ProbeShape, TokenMatrix,
    TrainSpec,
};
use crate::scenario::{
    cap_length, derive_seed, generate_clips, prepare_clip, split_ids, Label, Layout, PostProcess,
    ScenarioClip,
};
use crate::semlink::{semantic_payload_bytes, transmit, LatencyRow};

use super::metrics::{compute_metrics, ConfusionMatrix, Metrics};
use super::tables::{flops_row, latency_table, payload_table, FlopsRow, PayloadRow};

pub(crate) const ENCODER_STREAM: u64 = 1 << 40;
pub(crate) const TRAIN_STREAM: u64 = 2 << 40;

/// Gaps of the frame-gap sweep, all with the binary road mask.
pub const GAP_SWEEP: [u32; 3] = [4, 8, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub post: PostProcess,
    pub gap: u32,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/gap{}", self.post, self.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct E2eOptions {
    pub conditions: Vec<Condition>,
    pub quant: QuantFormat,
    /// Send all `L x D` tokens and run the whole probe at the vehicle.
    pub probe_at_vehicle: bool,
}

impl E2eOptions {
    /// Every post-processing at the configured gap, then the gap sweep with
    /// the road mask, without repeats.
    pub fn standard(cfg: &ExperimentConfig) -> Self {
        let mut conditions: Vec<Condition> = PostProcess::ALL
            .into_iter()
            .map(|post| Condition {
                post,
                gap: cfg.dataset.gap,
            })
            .collect();
        for gap in GAP_SWEEP {
            let c = Condition {
                post: PostProcess::Mask,
                gap,
            };
            if !conditions.contains(&c) {
                conditions.push(c);
            }
        }
        Self {
            conditions,
            quant: cfg.quant,
            probe_at_vehicle: false,
        }
    }

    pub fn single(cfg: &ExperimentConfig, post: PostProcess, gap: u32) -> Self {
        Self {
            conditions: vec![Condition { post, gap }],
            quant: cfg.quant,
            probe_at_vehicle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipPrediction {
    pub id: usize,
    pub seed: u64,
    pub layout: Layout,
    pub truth: Label,
    pub predicted: Label,
    pub prob_collision: f64,
    /// Prediction from the same embedding sent as FP32.
    pub predicted_fp32: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedClip {
    pub id: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub n_train: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    /// Fraction of test clips whose prediction matches the FP32 link.
    pub agreement_fp32: f64,
    pub final_train_loss: f64,
    pub predictions: Vec<ClipPrediction>,
    pub skipped: Vec<SkippedClip>,
}

/// Bytes crossing the link per clip in each probe placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPayload {
    pub format: QuantFormat,
    /// Tokens of a full-length clip at the configured resolution.
    pub tokens: u64,
    pub pooled_bytes: u64,
    pub pooled_latency_s: f64,
    pub token_bytes: u64,
    pub token_latency_s: f64,
    pub probe_at_vehicle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub payload: Vec<PayloadRow>,
    pub latency: Vec<LatencyRow>,
    pub flops: Vec<FlopsRow>,
    pub link: LinkPayload,
    pub conditions: Vec<ConditionResult>,
}

/// Report plus timing lines for the run log; only the log varies between
/// identical runs.
#[derive(Debug, Clone)]
pub struct E2eRun {
    pub report: ExperimentReport,
    pub log: Vec<String>,
}

struct Stopwatch {
    start: Instant,
    lines: Vec<String>,
}

impl Stopwatch {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            lines: Vec::new(),
        }
    }

    fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::info!("{msg}");
        self.lines.push(format!(
            "[{:>9.3}s] {msg}",
            self.start.elapsed().as_secs_f64()
        ));
    }
}

/// Frames fed to the encoder: the last `n_frames - gap` frames, rounded down
/// to whole tubelets, for every clip.
///
/// Collision clips lose `gap` frames to the trim; capping safe clips to the
/// same window keeps the token count from revealing the label.
pub(crate) fn encoder_window(
    prepared: &ScenarioClip,
    cfg: &ExperimentConfig,
    gap: u32,
) -> Result<ScenarioClip> {
    let t_p = cfg.tokenizer.tubelet_frames as usize;
    let window = cfg.clip.n_frames.saturating_sub(gap) as usize;
    let keep = window.min(prepared.len()) / t_p * t_p;
    if keep == 0 {
        return Err(Error::domain(format!(
            "{}-frame clip is shorter than one tubelet",
            prepared.len()
        )));
    }
    cap_length(prepared, keep)
}

fn encode_clip(
    raw: &ScenarioClip,
    cfg: &ExperimentConfig,
    cond: Condition,
    stub: &EncoderStub,
) -> Result<TokenMatrix> {
    let prepared = prepare_clip(
        raw,
        cfg.clip.n_frames as usize,
        cond.gap as usize,
        cond.post,
        &cfg.dataset.gains,
    )?;
    stub.encode(&encoder_window(&prepared, cfg, cond.gap)?.frames)
}

fn transmit_tokens(tokens: &TokenMatrix, fmt: QuantFormat) -> Result<TokenMatrix> {
    let mut data = Vec::with_capacity(tokens.rows() * tokens.cols());
    for row in tokens.iter_rows() {
        data.extend(transmit(row, fmt)?);
    }
    Matrix::from_vec(tokens.rows(), tokens.cols(), data)
}

/// Vehicle-side prediction and the collision probability after sending
/// through `fmt`.
fn predict(
    params: &ProbeParams,
    tokens: &TokenMatrix,
    fmt: QuantFormat,
    probe_at_vehicle: bool,
) -> Result<(Label, f64)> {
    let probs = if probe_at_vehicle {
        probe_forward(params, &transmit_tokens(tokens, fmt)?)?.probs
    } else {
        let pooled = params.pool(tokens)?.pooled;
        params.decode(&transmit(&pooled, fmt)?)?.probs
    };
    let class = crate::probe::argmax(&probs);
    Ok((Label::from_index(class), probs[Label::Collision.index()]))
}

fn run_condition(
    cfg: &ExperimentConfig,
    opts: &E2eOptions,
    cond: Condition,
    raw: &[ScenarioClip],
    is_test: &[bool],
    stub: &EncoderStub,
    watch: &mut Stopwatch,
) -> Result<ConditionResult> {
    let encoded: Vec<Result<TokenMatrix>> = raw
        .par_iter()
        .map(|c| encode_clip(c, cfg, cond, stub))
        .collect();
    let mut skipped = Vec::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (id, result) in encoded.into_iter().enumerate() {
        match result {
            Ok(tokens) if is_test[id] => test.push((id, tokens)),
            Ok(tokens) => train.push((tokens, raw[id].label.index())),
            Err(e) => {
                log::warn!("{cond}: clip {id} skipped: {e}");
                skipped.push(SkippedClip {
                    id,
                    reason: e.to_string(),
                });
            }
        }
    }
    watch.note(format!(
        "{cond}: encoded {} train / {} test clips, {} skipped",
        train.len(),
        test.len(),
        skipped.len()
    ));

    let shape = ProbeShape {
        dim: cfg.encoder.embed_dim as usize,
        hidden: cfg.probe_hidden_dim(),
        classes: cfg.probe.n_classes as usize,
        activation: cfg.probe.activation,
    };
    let spec = TrainSpec {
        seed: derive_seed(cfg.seed, TRAIN_STREAM.wrapping_add(cfg.train.seed)),
        ..cfg.train.clone()
    };
    let trained = train_probe(&train, shape, &spec)?;
    let final_train_loss = trained.loss_history.last().copied().unwrap_or(f64::NAN);
    watch.note(format!(
        "{cond}: trained probe, final loss {final_train_loss:.6}"
    ));

    let params = &trained.params;
    let outcomes: Vec<Result<ClipPrediction>> = test
        .par_iter()
        .map(|(id, tokens)| {
            let (predicted, prob_collision) =
                predict(params, tokens, opts.quant, opts.probe_at_vehicle)?;
            let (predicted_fp32, _) =
                predict(params, tokens, QuantFormat::Fp32, opts.probe_at_vehicle)?;
            let clip = &raw[*id];
            Ok(ClipPrediction {
                id: *id,
                seed: clip.seed,
                layout: clip.layout,
                truth: clip.label,
                predicted,
                prob_collision,
                predicted_fp32,
            })
        })
        .collect();
    let mut predictions = Vec::new();
    for ((id, _), outcome) in test.iter().zip(outcomes) {
        match outcome {
            Ok(p) => predictions.push(p),
            Err(e) => {
                log::warn!("{cond}: clip {id} skipped: {e}");
                skipped.push(SkippedClip {
                    id: *id,
                    reason: e.to_string(),
                });
            }
        }
    }
    skipped.sort_by_key(|s| s.id);

    let confusion = ConfusionMatrix::from_pairs(predictions.iter().map(|p| (p.truth, p.predicted)));
    let agree = predictions
        .iter()
        .filter(|p| p.predicted == p.predicted_fp32)
        .count();
    let agreement_fp32 = if predictions.is_empty() {
        1.0
    } else {
        agree as f64 / predictions.len() as f64
    };
    let metrics = compute_metrics(&confusion);
    watch.note(format!(
        "{cond}: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4}",
        metrics.accuracy, metrics.precision, metrics.recall, metrics.f1
    ));
    Ok(ConditionResult {
        condition: cond,
        n_train: train.len(),
        confusion,
        metrics,
        agreement_fp32,
        final_train_loss,
        predictions,
        skipped,
    })
}

pub fn link_payload(cfg: &ExperimentConfig, opts: &E2eOptions) -> Result<LinkPayload> {
    let dim = u64::from(cfg.encoder.embed_dim);
    let tokens = token_count(&cfg.clip, &cfg.tokenizer)?;
    let pooled_bytes = semantic_payload_bytes(dim, opts.quant);
    let token_bytes = tokens * pooled_bytes;
    Ok(LinkPayload {
        format: opts.quant,
        tokens,
        pooled_bytes,
        pooled_latency_s: LatencyRow::new(opts.quant, pooled_bytes, &cfg.link).latency_s,
        token_bytes,
        token_latency_s: LatencyRow::new(opts.quant, token_bytes, &cfg.link).latency_s,
        probe_at_vehicle: opts.probe_at_vehicle,
    })
}

/// Runs every condition of `opts` on one generated dataset.
///
/// The dataset, the train/test split and the encoder are shared by all
/// conditions; each condition trains its own probe.
pub fn run_e2e(cfg: &ExperimentConfig, opts: &E2eOptions) -> Result<E2eRun> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let mut watch = Stopwatch::new();
    watch.note(format!("config {}", cfg.hash()));

    let raw = generate_clips(
        &cfg.world,
        &cfg.clip,
        cfg.dataset.n_safe as usize,
        cfg.dataset.n_collision as usize,
        cfg.seed,
    )?;
    let labels: Vec<Label> = raw.iter().map(|c| c.label).collect();
    let is_test = split_ids(&labels, cfg.dataset.test_fraction, cfg.seed);
    watch.note(format!(
        "generated {} clips, {} held out",
        raw.len(),
        is_test.iter().filter(|t| **t).count()
    ));

    let stub = EncoderStub::new(
        &cfg.tokenizer,
        cfg.clip.channels as usize,
        cfg.encoder.embed_dim as usize,
        derive_seed(cfg.seed, ENCODER_STREAM),
    )?;
    let mut conditions = Vec::with_capacity(opts.conditions.len());
    for &cond in &opts.conditions {
        conditions.push(run_condition(
            cfg, opts, cond, &raw, &is_test, &stub, &mut watch,
        )?);
    }

    let report = ExperimentReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        payload: payload_table(cfg)?,
        latency: latency_table(cfg),
        flops: vec![flops_row("config", cfg)?],
        link: link_payload(cfg, opts)?,
        conditions,
    };
    watch.note("done");
    Ok(E2eRun {
        report,
        log: watch.lines,
    })
}
