//! Payload, compression and link model for the semantic V2X channel.
//!
//! The link is modeled purely as a rate: `B * log2(1 + SNR)` at the
//! operating SNR of each modulation. No bit errors, fading or
//! retransmissions are simulated.
//!
//! Quantized payloads store elements little-endian. INT8 uses a symmetric
//! per-vector scale `max|x| / 127` that travels alongside the codes.

use half::f16;
use serde::{Deserialize, Serialize};

use crate::config::{ClipSpec, LinkSpec, QuantFormat};
use crate::error::{Error, Result};

/// Maximum tolerated one-way latency for V2X safety messages.
pub const V2X_DEADLINE_S: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadReport {
    pub raw_bytes: u64,
    pub sem_bytes: u64,
    pub ratio: f64,
}

impl PayloadReport {
    pub fn new(raw_bytes: u64, sem_bytes: u64) -> Result<Self> {
        Ok(Self {
            raw_bytes,
            sem_bytes,
            ratio: compression_ratio(raw_bytes, sem_bytes)?,
        })
    }
}

/// Uncompressed RGB video: `N * H_o * W_o * 3` bytes.
pub fn raw_payload_bytes(clip: &ClipSpec) -> u64 {
    u64::from(clip.n_frames) * u64::from(clip.orig_height_px) * u64::from(clip.orig_width_px) * 3
}

/// One pooled `1 x D` embedding: `D * b` bytes.
pub fn semantic_payload_bytes(dim: u64, fmt: QuantFormat) -> u64 {
    dim * fmt.bytes_per_element()
}

pub fn compression_ratio(raw: u64, sem: u64) -> Result<f64> {
    if sem == 0 {
        return Err(Error::domain(
            "compression ratio with a zero-byte semantic payload",
        ));
    }
    Ok(raw as f64 / sem as f64)
}

/// Shannon rate of the link in bits per second.
pub fn link_rate_bps(link: &LinkSpec) -> f64 {
    let snr = 10f64.powf(link.snr_db / 10.0);
    link.bandwidth_hz * (1.0 + snr).log2()
}

pub fn tx_latency_s(payload_bytes: u64, link: &LinkSpec) -> f64 {
    (8 * payload_bytes) as f64 / link_rate_bps(link)
}

/// Inclusive check against the 5 ms V2X budget.
pub fn meets_v2x_deadline(latency_s: f64) -> bool {
    latency_s <= V2X_DEADLINE_S
}

/// An embedding encoded for transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedEmbedding {
    pub format: QuantFormat,
    /// Per-vector scale for INT8; 1.0 for the float formats.
    pub scale: f32,
    /// `dim * bytes_per_element` bytes, little-endian elements.
    pub payload: Vec<u8>,
    pub dim: usize,
}

impl QuantizedEmbedding {
    pub fn payload_bytes(&self) -> u64 {
        self.payload.len() as u64
    }

    /// INT8 codes; empty for other formats.
    pub fn int8_codes(&self) -> Vec<i8> {
        match self.format {
            QuantFormat::Int8 => self.payload.iter().map(|&b| b as i8).collect(),
            _ => Vec::new(),
        }
    }
}

/// Encodes `values` in `fmt`.
///
/// FP32 stores the bits verbatim, FP16 rounds to nearest-even half precision
/// and INT8 rounds `x / scale` half away from zero, clamped to `[-127, 127]`.
/// An all-zero vector gets scale 1 so decoding stays defined.
pub fn quantize_embedding(values: &[f32], fmt: QuantFormat) -> Result<QuantizedEmbedding> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "cannot quantize non-finite element {} at index {i}",
            values[i]
        )));
    }
    let dim = values.len();
    let mut payload = Vec::with_capacity(dim * fmt.bytes_per_element() as usize);
    let mut scale = 1.0f32;
    match fmt {
        QuantFormat::Fp32 => {
            for v in values {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        QuantFormat::Fp16 => {
            for v in values {
                payload.extend_from_slice(&f16::from_f32(*v).to_le_bytes());
            }
        }
        QuantFormat::Int8 => {
            let max_abs = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
            if max_abs > 0.0 {
                scale = max_abs / 127.0;
            }
            // Scale division in f64 keeps the rounding decision exact for f32 inputs.
            let s = f64::from(scale);
            for v in values {
                let code = (f64::from(*v) / s).round().clamp(-127.0, 127.0) as i8;
                payload.push(code as u8);
            }
        }
    }
    Ok(QuantizedEmbedding {
        format: fmt,
        scale,
        payload,
        dim,
    })
}

/// Decodes a payload back to real values.
///
/// Output is `f64`: every decoded FP32/FP16 element and every INT8
/// `code * scale` product is exactly representable, so the only error is
/// the quantization error itself.
pub fn dequantize_embedding(q: &QuantizedEmbedding) -> Result<Vec<f64>> {
    let width = q.format.bytes_per_element() as usize;
    if q.payload.len() != q.dim * width {
        return Err(Error::format(format!(
            "{} payload of {} bytes does not hold {} elements",
            q.format,
            q.payload.len(),
            q.dim
        )));
    }
    let out = match q.format {
        QuantFormat::Fp32 => q
            .payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
        QuantFormat::Fp16 => q
            .payload
            .chunks_exact(2)
            .map(|c| f16::from_le_bytes([c[0], c[1]]).to_f64())
            .collect(),
        QuantFormat::Int8 => {
            if !(q.scale.is_finite() && q.scale >= 0.0) {
                return Err(Error::format(format!("invalid INT8 scale {}", q.scale)));
            }
            let s = f64::from(q.scale);
            q.payload.iter().map(|&b| f64::from(b as i8) * s).collect()
        }
    };
    Ok(out)
}

/// Quantize-then-dequantize, as seen by the receiver.
pub fn transmit(values: &[f64], fmt: QuantFormat) -> Result<Vec<f64>> {
    let narrowed: Vec<f32> = values.iter().map(|&v| v as f32).collect();
    dequantize_embedding(&quantize_embedding(&narrowed, fmt)?)
}

/// One row of the latency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub format: QuantFormat,
    pub payload_bytes: u64,
    pub link: LinkSpec,
    pub rate_bps: f64,
    pub latency_s: f64,
    pub meets_deadline: bool,
}

impl LatencyRow {
    pub fn new(format: QuantFormat, payload_bytes: u64, link: &LinkSpec) -> Self {
        let latency_s = tx_latency_s(payload_bytes, link);
        Self {
            format,
            payload_bytes,
            link: link.clone(),
            rate_bps: link_rate_bps(link),
            latency_s,
            meets_deadline: meets_v2x_deadline(latency_s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Modulation;

    fn clip(n: u32, side: u32) -> ClipSpec {
        ClipSpec {
            n_frames: n,
            orig_height_px: side,
            orig_width_px: side,
            ..ClipSpec::default()
        }
    }

    #[test]
    fn raw_payload() {
        assert_eq!(raw_payload_bytes(&clip(64, 2048)), 805_306_368);
        assert_eq!(raw_payload_bytes(&clip(1, 1)), 3);
        assert_eq!(raw_payload_bytes(&clip(33, 2048)), 415_236_096);
        // 8K frames, long clips
        let big = ClipSpec {
            n_frames: 10_000,
            orig_height_px: 4320,
            orig_width_px: 7680,
            ..ClipSpec::default()
        };
        assert_eq!(raw_payload_bytes(&big), 10_000 * 4320 * 7680 * 3);
    }

    #[test]
    fn semantic_payload() {
        assert_eq!(semantic_payload_bytes(1280, QuantFormat::Fp32), 5120);
        assert_eq!(semantic_payload_bytes(1280, QuantFormat::Int8), 1280);
        assert_eq!(semantic_payload_bytes(1, QuantFormat::Fp16), 2);
    }

    #[test]
    fn ratios() {
        assert_eq!(compression_ratio(805_306_368, 5120).unwrap(), 157_286.4);
        assert_eq!(compression_ratio(805_306_368, 1280).unwrap(), 629_145.6);
        assert_eq!(compression_ratio(77, 77).unwrap(), 1.0);
        assert!(matches!(compression_ratio(1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn int8_hand_example() {
        let q = quantize_embedding(&[-1.0, 0.5, 1.0], QuantFormat::Int8).unwrap();
        assert_eq!(q.scale, 1.0 / 127.0);
        assert_eq!(q.int8_codes(), vec![-127, 64, 127]);
        let back = dequantize_embedding(&q).unwrap();
        for (b, x) in back.iter().zip([-1.0, 0.5, 1.0]) {
            assert!((b - x).abs() <= f64::from(q.scale) / 2.0);
        }
    }

    #[test]
    fn int8_zero_vector() {
        let q = quantize_embedding(&[0.0; 5], QuantFormat::Int8).unwrap();
        assert_eq!(q.scale, 1.0);
        assert_eq!(q.int8_codes(), vec![0; 5]);
        assert_eq!(dequantize_embedding(&q).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn float_paths() {
        let v = [1.0f32, -3.25e-7, 6.5e4, f32::MIN_POSITIVE, 0.1];
        let q = quantize_embedding(&v, QuantFormat::Fp32).unwrap();
        assert_eq!(q.payload.len(), 20);
        let back = dequantize_embedding(&q).unwrap();
        for (b, x) in back.iter().zip(v) {
            assert_eq!((*b as f32).to_bits(), x.to_bits());
        }

        let q = quantize_embedding(&[1.0], QuantFormat::Fp16).unwrap();
        assert_eq!(q.payload, vec![0x00, 0x3c]);
        assert_eq!(dequantize_embedding(&q).unwrap(), vec![1.0]);

        // 1 + 2^-11 is halfway between 1 and the next half; ties go to even.
        let q = quantize_embedding(&[1.0 + 2f32.powi(-11)], QuantFormat::Fp16).unwrap();
        assert_eq!(dequantize_embedding(&q).unwrap(), vec![1.0]);
        let q = quantize_embedding(&[1.0 + 3.0 * 2f32.powi(-11)], QuantFormat::Fp16).unwrap();
        assert_eq!(dequantize_embedding(&q).unwrap(), vec![1.0 + 2f64.powi(-9)]);
    }

    #[test]
    fn non_finite_rejected() {
        for fmt in QuantFormat::ALL {
            assert!(quantize_embedding(&[1.0, f32::NAN], fmt).is_err());
            assert!(quantize_embedding(&[f32::INFINITY], fmt).is_err());
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut q = quantize_embedding(&[1.0, 2.0], QuantFormat::Fp16).unwrap();
        q.payload.pop();
        assert!(matches!(dequantize_embedding(&q), Err(Error::Format(_))));
    }

    #[test]
    fn shannon_rates() {
        let at = |snr_db| LinkSpec {
            bandwidth_hz: 20e6,
            snr_db,
            modulation: Modulation::Bpsk,
        };
        assert!((link_rate_bps(&at(12.0)) / 1e6 - 81.49).abs() < 0.005);
        assert!((link_rate_bps(&at(22.0)) / 1e6 - 146.35).abs() < 0.005);
        assert_eq!(link_rate_bps(&at(0.0)), 20e6);
    }

    #[test]
    fn latencies() {
        let bpsk = LinkSpec::reference(20e6, Modulation::Bpsk);
        let qam = LinkSpec::reference(20e6, Modulation::Qam16);
        assert!((tx_latency_s(5120, &bpsk) * 1e3 - 0.5026).abs() < 5e-5);
        assert!((tx_latency_s(1280, &bpsk) * 1e3 - 0.1257).abs() < 5e-5);
        assert!((tx_latency_s(5120, &qam) * 1e3 - 0.2799).abs() < 5e-5);
        assert_eq!(tx_latency_s(0, &qam), 0.0);
    }

    #[test]
    fn deadline_is_inclusive() {
        assert!(meets_v2x_deadline(0.50e-3));
        assert!(meets_v2x_deadline(5.0e-3));
        assert!(!meets_v2x_deadline(6.0e-3));
    }

    #[test]
    fn ratio_scales_with_bytes_per_element() {
        let raw = raw_payload_bytes(&clip(64, 2048));
        let r = |f| compression_ratio(raw, semantic_payload_bytes(1280, f)).unwrap();
        assert_eq!(r(QuantFormat::Int8), 2.0 * r(QuantFormat::Fp16));
        assert_eq!(r(QuantFormat::Int8), 4.0 * r(QuantFormat::Fp32));
    }
}
