//! Analytic cost model for the frozen encoder plus attentive probe.
//!
//! FLOP counts are `u128` integers. With a fractional MLP ratio `r = a/b`
//! the `(4 + 2r) L D^2` term is exact whenever `b` divides `2 a L D^2`, and
//! is rounded to the nearest FLOP otherwise.

use serde::{Deserialize, Serialize};

use crate::config::{ClipSpec, DeviceSpec, EncoderSpec, MlpRatio, QuantFormat, TokenizerSpec};
use crate::error::{Error, Result};

pub type Flops = u128;

fn check_divisible(what: &str, value: u32, by: u32, field: &str) -> Result<u64> {
    if by == 0 || !value.is_multiple_of(by) {
        return Err(Error::domain(format!(
            "{field}: {by} does not divide {what} {value}"
        )));
    }
    Ok(u64::from(value / by))
}

/// Patches per frame, `(H/p) * (W/p)`.
pub fn patches_per_frame(clip: &ClipSpec, tok: &TokenizerSpec) -> Result<u64> {
    let rows = check_divisible("height", clip.height_px, tok.patch_px, "tokenizer.patch_px")?;
    let cols = check_divisible("width", clip.width_px, tok.patch_px, "tokenizer.patch_px")?;
    Ok(rows * cols)
}

/// Spatiotemporal token count, `(N/t_p) * (H/p) * (W/p)`.
pub fn token_count(clip: &ClipSpec, tok: &TokenizerSpec) -> Result<u64> {
    let tubelets = check_divisible(
        "n_frames",
        clip.n_frames,
        tok.tubelet_frames,
        "tokenizer.tubelet_frames",
    )?;
    Ok(tubelets * patches_per_frame(clip, tok)?)
}

/// One transformer block: `2 L^2 D + (4 + 2r) L D^2`.
pub fn block_flops(tokens: u64, dim: u64, r: MlpRatio) -> Flops {
    let l = u128::from(tokens);
    let d = u128::from(dim);
    let (num, den) = (u128::from(r.numer()), u128::from(r.denom()));
    let attention = 2 * l * l * d;
    let projected = (4 * den + 2 * num) * l * d * d;
    attention + (projected + den / 2) / den
}

/// Frozen encoder over all `L_e` blocks.
pub fn encoder_flops(tokens: u64, enc: &EncoderSpec) -> Flops {
    u128::from(enc.depth) * block_flops(tokens, u64::from(enc.embed_dim), enc.mlp_ratio)
}

/// Probe plus classifier: `3 L D^2 + 2 L D + 3 D^2 + D C`.
pub fn probe_flops(tokens: u64, dim: u64, classes: u64) -> Flops {
    let (l, d, c) = (u128::from(tokens), u128::from(dim), u128::from(classes));
    3 * l * d * d + 2 * l * d + 3 * d * d + d * c
}

/// Probe cost when key/value projections are amortized into encoding:
/// `2 L D + 3 D^2 + D C`.
pub fn probe_flops_effective(tokens: u64, dim: u64, classes: u64) -> Flops {
    let (l, d, c) = (u128::from(tokens), u128::from(dim), u128::from(classes));
    2 * l * d + 3 * d * d + d * c
}

pub fn total_flops(enc: Flops, probe: Flops) -> Flops {
    enc + probe
}

/// `V * F_total / phi + V * t_IO`. Cost scales linearly with the view count.
pub fn inference_time(total: Flops, dev: &DeviceSpec) -> f64 {
    let views = f64::from(dev.n_views);
    views * (total as f64) / dev.throughput_flops + views * dev.io_latency_s
}

/// Peak activation element count of the encoder, `L * D`.
pub fn activation_memory_elems(tokens: u64, dim: u64) -> u128 {
    u128::from(tokens) * u128::from(dim)
}

pub fn activation_memory_bytes(tokens: u64, dim: u64, fmt: QuantFormat) -> u128 {
    activation_memory_elems(tokens, dim) * u128::from(fmt.bytes_per_element())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub tokens: u64,
    pub dim: u64,
    pub depth: u32,
    pub mlp_ratio: MlpRatio,
    pub classes: u64,
    pub flops_block: Flops,
    pub flops_encoder: Flops,
    pub flops_probe: Flops,
    pub flops_probe_effective: Flops,
    pub flops_total: Flops,
    pub activation_elems: u128,
    pub infer_time_s: f64,
}

impl CostReport {
    pub fn from_parts(tokens: u64, enc: &EncoderSpec, classes: u64, dev: &DeviceSpec) -> Self {
        let dim = u64::from(enc.embed_dim);
        let flops_encoder = encoder_flops(tokens, enc);
        let flops_probe = probe_flops(tokens, dim, classes);
        let flops_total = total_flops(flops_encoder, flops_probe);
        Self {
            tokens,
            dim,
            depth: enc.depth,
            mlp_ratio: enc.mlp_ratio,
            classes,
            flops_block: block_flops(tokens, dim, enc.mlp_ratio),
            flops_encoder,
            flops_probe,
            flops_probe_effective: probe_flops_effective(tokens, dim, classes),
            flops_total,
            activation_elems: activation_memory_elems(tokens, dim),
            infer_time_s: inference_time(flops_total, dev),
        }
    }

    pub fn from_config(cfg: &crate::ExperimentConfig) -> Result<Self> {
        let tokens = token_count(&cfg.clip, &cfg.tokenizer)?;
        Ok(Self::from_parts(
            tokens,
            &cfg.encoder,
            u64::from(cfg.probe.n_classes),
            &cfg.device,
        ))
    }

    pub fn encoder_share(&self) -> f64 {
        self.flops_encoder as f64 / self.flops_total as f64
    }
}
