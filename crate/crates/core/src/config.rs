//! Experiment configuration.
//!
//! Every record has `Default` values matching the reference setup (64-frame
//! clips at 20 FPS, 2048x2048 originals resized to 384x384, 16x16 patches,
//! 1280-dim embeddings, two output classes, a 20 MHz link). A config file is
//! TOML; every section and field is optional and falls back to those defaults.
//! Records are plain data and immutable once loaded.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result, Violation};
use crate::probe::{Activation, TrainSpec};
use crate::scenario::{HeatmapGains, PostProcess, WorldSpec};

/// Upper bound on clip length after capping.
pub const MAX_CLIP_FRAMES: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipSpec {
    /// Frames per clip after capping (N).
    pub n_frames: u32,
    /// Encoder input height (H).
    pub height_px: u32,
    /// Encoder input width (W).
    pub width_px: u32,
    /// 3 for RGB, 1 for grayscale.
    pub channels: u32,
    /// Camera frame height before resizing (H_o).
    pub orig_height_px: u32,
    /// Camera frame width before resizing (W_o).
    pub orig_width_px: u32,
    pub fps: u32,
}

impl Default for ClipSpec {
    fn default() -> Self {
        Self {
            n_frames: 64,
            height_px: 384,
            width_px: 384,
            channels: 3,
            orig_height_px: 2048,
            orig_width_px: 2048,
            fps: 20,
        }
    }
}

/// Spatiotemporal tubelet size: `tubelet_frames x patch_px x patch_px`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSpec {
    pub patch_px: u32,
    pub tubelet_frames: u32,
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        Self {
            patch_px: 16,
            tubelet_frames: 2,
        }
    }
}

/// Feed-forward expansion ratio of a transformer block, kept as an exact
/// fraction so FLOP counts stay integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MlpRatio {
    num: u64,
    den: u64,
}

impl MlpRatio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::domain("mlp ratio denominator must be nonzero"));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(r: u64) -> Self {
        Self { num: r, den: 1 }
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for MlpRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for MlpRatio {
    type Err = Error;

    /// Accepts `"4"`, `"2.5"` (exact decimal) or `"8/3"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::domain(format!("cannot parse mlp ratio {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse::<u64>().map_err(|_| bad())?;
            let d = d.trim().parse::<u64>().map_err(|_| bad())?;
            return MlpRatio::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 9 {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        MlpRatio::new(num, den)
    }
}

impl Serialize for MlpRatio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.den == 1 {
            s.serialize_u64(self.num)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for MlpRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Int(v) => return Ok(MlpRatio::integer(v)),
            // Shortest round-trip formatting recovers the decimal the user wrote.
            Raw::Float(v) => format!("{v}"),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    /// Embedding dimension (D).
    pub embed_dim: u32,
    /// Number of transformer blocks (L_e).
    pub depth: u32,
    /// MLP expansion ratio (r).
    pub mlp_ratio: MlpRatio,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        // ViT-H/16 geometry.
        Self {
            embed_dim: 1280,
            depth: 32,
            mlp_ratio: MlpRatio::integer(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub n_queries: u32,
    pub n_classes: u32,
    /// Probe MLP hidden width; `None` means equal to the embedding dimension.
    pub hidden_dim: Option<u32>,
    pub activation: Activation,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            n_queries: 1,
            n_classes: 2,
            hidden_dim: None,
            activation: Activation::Relu,
        }
    }
}

/// Element encoding of a transmitted embedding.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum QuantFormat {
    #[default]
    #[serde(rename = "FP32", alias = "fp32")]
    Fp32,
    #[serde(rename = "FP16", alias = "fp16")]
    Fp16,
    #[serde(rename = "INT8", alias = "int8")]
    Int8,
}

impl QuantFormat {
    pub const ALL: [QuantFormat; 3] = [QuantFormat::Fp32, QuantFormat::Fp16, QuantFormat::Int8];

    pub fn bytes_per_element(self) -> u64 {
        match self {
            QuantFormat::Fp32 => 4,
            QuantFormat::Fp16 => 2,
            QuantFormat::Int8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuantFormat::Fp32 => "FP32",
            QuantFormat::Fp16 => "FP16",
            QuantFormat::Int8 => "INT8",
        }
    }
}

impl fmt::Display for QuantFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuantFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" => Ok(QuantFormat::Fp32),
            "fp16" => Ok(QuantFormat::Fp16),
            "int8" => Ok(QuantFormat::Int8),
            _ => Err(Error::domain(format!("unknown quantization format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "BPSK", alias = "bpsk")]
    Bpsk,
    #[serde(rename = "QAM16", alias = "qam16", alias = "QAM-16")]
    Qam16,
}

impl Modulation {
    pub const ALL: [Modulation; 2] = [Modulation::Bpsk, Modulation::Qam16];

    /// Operating SNR used for this modulation in the reference setup.
    pub fn reference_snr_db(self) -> f64 {
        match self {
            Modulation::Bpsk => 12.0,
            Modulation::Qam16 => 22.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "BPSK",
            Modulation::Qam16 => "QAM16",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSpec {
    pub bandwidth_hz: f64,
    pub snr_db: f64,
    pub modulation: Modulation,
}

impl LinkSpec {
    pub fn reference(bandwidth_hz: f64, modulation: Modulation) -> Self {
        Self {
            bandwidth_hz,
            snr_db: modulation.reference_snr_db(),
            modulation,
        }
    }
}

impl Default for LinkSpec {
    fn default() -> Self {
        LinkSpec::reference(20e6, Modulation::Bpsk)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSpec {
    /// Sustained compute throughput (phi), FLOPs per second.
    pub throughput_flops: f64,
    /// Per-view input/output latency (t_I/O), seconds.
    pub io_latency_s: f64,
    /// Spatiotemporal views per clip (V).
    pub n_views: u32,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        Self {
            throughput_flops: 1e14,
            io_latency_s: 1e-3,
            n_views: 1,
        }
    }
}

/// Dataset generation parameters for end-to-end runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_safe: u32,
    pub n_collision: u32,
    pub post: PostProcess,
    /// Frames removed before the collision in collision clips.
    pub gap: u32,
    /// Held-out fraction per class.
    pub test_fraction: f64,
    pub gains: HeatmapGains,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_safe: 385,
            n_collision: 115,
            post: PostProcess::Mask,
            gap: 8,
            test_fraction: 0.2,
            gains: HeatmapGains::default(),
        }
    }
}

/// Everything an experiment needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Format used on the link in end-to-end runs.
    pub quant: QuantFormat,
    pub clip: ClipSpec,
    pub tokenizer: TokenizerSpec,
    pub encoder: EncoderSpec,
    pub probe: ProbeSpec,
    pub link: LinkSpec,
    pub device: DeviceSpec,
    pub world: WorldSpec,
    pub dataset: DatasetSpec,
    pub train: TrainSpec,
}

impl ExperimentConfig {
    /// A configuration small enough to train and evaluate the whole pipeline
    /// on a desktop CPU in well under a minute per condition.
    ///
    /// Full-scale symbols used only by the analytic models (original frame
    /// size, link, device) keep their defaults.
    pub fn desk_scale() -> Self {
        Self {
            clip: ClipSpec {
                height_px: 48,
                width_px: 48,
                channels: 1,
                ..ClipSpec::default()
            },
            tokenizer: TokenizerSpec {
                patch_px: 16,
                tubelet_frames: 4,
            },
            encoder: EncoderSpec {
                embed_dim: 32,
                ..EncoderSpec::default()
            },
            train: TrainSpec {
                epochs: 150,
                lr: 0.005,
                ..TrainSpec::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_col(text, span.start))
                .unwrap_or((0, 0));
            Error::Schema {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        let violations = validate_config(&cfg);
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Validation(violations))
        }
    }

    /// Canonical TOML serialization; `from_toml_str` reads it back unchanged.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config records always serialize")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    /// MLP hidden width actually used by the probe.
    pub fn probe_hidden_dim(&self) -> usize {
        self.probe.hidden_dim.unwrap_or(self.encoder.embed_dim) as usize
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = offset - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Loads a config file. An empty file yields the defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml_str(&text)
}

/// Checks every record invariant. An empty list means the config is valid.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &str, msg: &str| {
        if !ok {
            out.push(Violation::new(field, msg));
        }
    };

    // TOML integers are signed 64-bit
    check(
        cfg.seed <= i64::MAX as u64,
        "seed",
        "must be at most 2^63 - 1",
    );
    check(
        cfg.train.seed <= i64::MAX as u64,
        "train.seed",
        "must be at most 2^63 - 1",
    );

    let c = &cfg.clip;
    check(c.n_frames >= 1, "clip.n_frames", "must be at least 1");
    check(
        c.n_frames <= MAX_CLIP_FRAMES,
        "clip.n_frames",
        "must not exceed 64 frames",
    );
    check(c.height_px >= 1, "clip.height_px", "must be at least 1");
    check(c.width_px >= 1, "clip.width_px", "must be at least 1");
    check(
        c.channels == 1 || c.channels == 3,
        "clip.channels",
        "must be 1 (grayscale) or 3 (RGB)",
    );
    check(
        c.orig_height_px >= 1,
        "clip.orig_height_px",
        "must be at least 1",
    );
    check(
        c.orig_width_px >= 1,
        "clip.orig_width_px",
        "must be at least 1",
    );
    check(c.fps >= 1, "clip.fps", "must be at least 1");

    let t = &cfg.tokenizer;
    check(t.patch_px >= 1, "tokenizer.patch_px", "must be at least 1");
    check(
        t.tubelet_frames >= 1,
        "tokenizer.tubelet_frames",
        "must be at least 1",
    );
    if t.patch_px >= 1 {
        check(
            c.height_px.is_multiple_of(t.patch_px),
            "tokenizer.patch_px",
            "patch must divide height",
        );
        check(
            c.width_px.is_multiple_of(t.patch_px),
            "tokenizer.patch_px",
            "patch must divide width",
        );
    }
    if t.tubelet_frames >= 1 {
        check(
            c.n_frames.is_multiple_of(t.tubelet_frames),
            "tokenizer.tubelet_frames",
            "tubelet must divide n_frames",
        );
    }

    let e = &cfg.encoder;
    check(e.embed_dim >= 1, "encoder.embed_dim", "must be at least 1");
    check(e.depth >= 1, "encoder.depth", "must be at least 1");
    check(
        e.mlp_ratio.numer() > 0,
        "encoder.mlp_ratio",
        "must be positive",
    );

    let p = &cfg.probe;
    check(p.n_queries == 1, "probe.n_queries", "Q must equal 1");
    check(p.n_classes >= 2, "probe.n_classes", "must be at least 2");
    check(
        p.hidden_dim.is_none_or(|h| h >= 1),
        "probe.hidden_dim",
        "must be at least 1",
    );

    let l = &cfg.link;
    check(
        l.bandwidth_hz.is_finite() && l.bandwidth_hz > 0.0,
        "link.bandwidth_hz",
        "must be positive",
    );
    check(l.snr_db.is_finite(), "link.snr_db", "must be finite");

    let d = &cfg.device;
    check(
        d.throughput_flops.is_finite() && d.throughput_flops > 0.0,
        "device.throughput_flops",
        "must be positive",
    );
    check(
        d.io_latency_s.is_finite() && d.io_latency_s >= 0.0,
        "device.io_latency_s",
        "must be nonnegative",
    );
    check(d.n_views >= 1, "device.n_views", "must be at least 1");

    for v in cfg.world.violations() {
        out.push(v);
    }

    let ds = &cfg.dataset;
    let mut check = |ok: bool, field: &str, msg: &str| {
        if !ok {
            out.push(Violation::new(field, msg));
        }
    };
    check(ds.n_safe >= 1, "dataset.n_safe", "must be at least 1");
    check(
        ds.n_collision >= 1,
        "dataset.n_collision",
        "must be at least 1",
    );
    check(
        ds.gap < cfg.clip.n_frames,
        "dataset.gap",
        "must be shorter than the clip",
    );
    check(
        (0.0..1.0).contains(&ds.test_fraction),
        "dataset.test_fraction",
        "must lie in [0, 1)",
    );
    let g = &ds.gains;
    check(
        [g.vehicle, g.road, g.background]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0),
        "dataset.gains",
        "gains must be nonnegative",
    );

    let tr = &cfg.train;
    check(tr.epochs >= 1, "train.epochs", "must be at least 1");
    check(
        tr.lr.is_finite() && tr.lr >= 0.0,
        "train.lr",
        "must be nonnegative",
    );
    check(tr.batch >= 1, "train.batch", "must be at least 1");

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.clip.n_frames, 64);
        assert_eq!((cfg.clip.height_px, cfg.clip.width_px), (384, 384));
        assert_eq!(cfg.tokenizer.patch_px, 16);
        assert_eq!(cfg.encoder.embed_dim, 1280);
        assert_eq!(cfg.probe.n_classes, 2);
        assert_eq!(cfg.clip.fps, 20);
        assert_eq!(
            (cfg.clip.orig_height_px, cfg.clip.orig_width_px),
            (2048, 2048)
        );
        assert_eq!(cfg.train.epochs, 40);
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.dataset.n_safe, 385);
        assert_eq!(cfg.dataset.n_collision, 115);
        assert_eq!(cfg.link.bandwidth_hz, 20e6);
    }

    #[test]
    fn defaults_are_valid() {
        assert!(validate_config(&ExperimentConfig::default()).is_empty());
        assert!(validate_config(&ExperimentConfig::desk_scale()).is_empty());
    }

    #[test]
    fn zero_frames_is_rejected() {
        let err = ExperimentConfig::from_toml_str("[clip]\nn_frames = 0\n").unwrap_err();
        match err {
            Error::Validation(v) => assert!(v.iter().any(|v| v.field == "clip.n_frames")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn link_section() {
        let cfg = ExperimentConfig::from_toml_str("[link]\nsnr_db = 12\nmodulation = \"BPSK\"\n")
            .unwrap();
        assert_eq!(
            cfg.link,
            LinkSpec {
                bandwidth_hz: 20e6,
                snr_db: 12.0,
                modulation: Modulation::Bpsk
            }
        );
    }

    #[test]
    fn patch_must_divide_height() {
        let mut cfg = ExperimentConfig::default();
        cfg.clip.height_px = 100;
        let v = validate_config(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "patch must divide height");
    }

    #[test]
    fn single_query_only() {
        let mut cfg = ExperimentConfig::default();
        cfg.probe.n_queries = 2;
        let v = validate_config(&cfg);
        assert_eq!(v, vec![Violation::new("probe.n_queries", "Q must equal 1")]);
    }

    #[test]
    fn schema_error_reports_line() {
        let err = ExperimentConfig::from_toml_str("[clip]\nn_frames = 8\nbogus = 1\n").unwrap_err();
        match err {
            Error::Schema { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = ExperimentConfig::from_toml_str("[clip\n").unwrap_err();
        assert!(matches!(err, Error::Schema { line: 1, .. }));
    }

    #[test]
    fn mlp_ratio_parsing() {
        assert_eq!("4".parse::<MlpRatio>().unwrap(), MlpRatio::integer(4));
        assert_eq!(
            "2.5".parse::<MlpRatio>().unwrap(),
            MlpRatio::new(5, 2).unwrap()
        );
        assert_eq!(
            "8/3".parse::<MlpRatio>().unwrap(),
            MlpRatio::new(8, 3).unwrap()
        );
        assert!("x".parse::<MlpRatio>().is_err());
        assert!("1/0".parse::<MlpRatio>().is_err());

        let cfg = ExperimentConfig::from_toml_str("[encoder]\nmlp_ratio = 2.5\n").unwrap();
        assert_eq!(cfg.encoder.mlp_ratio, MlpRatio::new(5, 2).unwrap());
        let cfg = ExperimentConfig::from_toml_str("[encoder]\nmlp_ratio = \"8/3\"\n").unwrap();
        assert_eq!(cfg.encoder.mlp_ratio.as_f64(), 8.0 / 3.0);
    }

    #[test]
    fn serialize_round_trip() {
        let mut cfg = ExperimentConfig::desk_scale();
        cfg.encoder.mlp_ratio = MlpRatio::new(8, 3).unwrap();
        cfg.probe.hidden_dim = Some(7);
        cfg.link.modulation = Modulation::Qam16;
        cfg.quant = QuantFormat::Int8;
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(
            cfg.hash(),
            ExperimentConfig::from_toml_str(&text).unwrap().hash()
        );
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn quant_format_bytes() {
        assert_eq!(QuantFormat::Fp32.bytes_per_element(), 4);
        assert_eq!(QuantFormat::Fp16.bytes_per_element(), 2);
        assert_eq!(QuantFormat::Int8.bytes_per_element(), 1);
        assert_eq!("int8".parse::<QuantFormat>().unwrap(), QuantFormat::Int8);
    }
}
