//! Pixel re-weighting applied to rendered clips before encoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::raster::{BBox, Frame, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostProcess {
    None,
    Heatmap,
    #[default]
    Mask,
    Hybrid,
}

impl PostProcess {
    pub const ALL: [PostProcess; 4] = [
        PostProcess::None,
        PostProcess::Heatmap,
        PostProcess::Mask,
        PostProcess::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PostProcess::None => "NONE",
            PostProcess::Heatmap => "HEATMAP",
            PostProcess::Mask => "MASK",
            PostProcess::Hybrid => "HYBRID",
        }
    }

    /// Applies this transform to one frame.
    pub fn apply(
        self,
        frame: &Frame,
        mask: &Mask,
        boxes: &[BBox],
        gains: &HeatmapGains,
    ) -> Result<Frame> {
        match self {
            PostProcess::None => {
                check_shape(frame, mask)?;
                Ok(frame.clone())
            }
            PostProcess::Heatmap => apply_heatmap(frame, mask, boxes, gains),
            PostProcess::Mask => apply_binary_mask(frame, mask),
            PostProcess::Hybrid => apply_hybrid(frame, mask, boxes, gains.vehicle),
        }
    }
}

impl fmt::Display for PostProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PostProcess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PostProcess::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown post-processing '{s}'")))
    }
}

/// Per-region multiplicative gains for the heatmap transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapGains {
    pub vehicle: f64,
    pub road: f64,
    pub background: f64,
}

impl Default for HeatmapGains {
    fn default() -> Self {
        Self {
            vehicle: 1.5,
            road: 1.0,
            background: 0.3,
        }
    }
}

fn check_shape(frame: &Frame, mask: &Mask) -> Result<()> {
    if frame.width() != mask.width() || frame.height() != mask.height() {
        return Err(Error::domain(format!(
            "frame is {}x{} but mask is {}x{}",
            frame.width(),
            frame.height(),
            mask.width(),
            mask.height()
        )));
    }
    Ok(())
}

fn scale(value: u8, gain: f64) -> u8 {
    (f64::from(value) * gain).round().clamp(0.0, 255.0) as u8
}

/// Zeroes every pixel outside the road.
pub fn apply_binary_mask(frame: &Frame, mask: &Mask) -> Result<Frame> {
    check_shape(frame, mask)?;
    Ok(frame.map_pixels(|x, y, v| if mask.get(x, y) { v } else { 0 }))
}

/// Scales each pixel by the gain of its region (vehicle over road over
/// background), rounding and clamping to `0..=255`.
pub fn apply_heatmap(
    frame: &Frame,
    mask: &Mask,
    boxes: &[BBox],
    gains: &HeatmapGains,
) -> Result<Frame> {
    check_shape(frame, mask)?;
    if gains.vehicle < 0.0 || gains.road < 0.0 || gains.background < 0.0 {
        return Err(Error::domain("heatmap gains must be non-negative"));
    }
    Ok(frame.map_pixels(|x, y, v| {
        let gain = if boxes.iter().any(|b| b.contains(x, y)) {
            gains.vehicle
        } else if mask.get(x, y) {
            gains.road
        } else {
            gains.background
        };
        scale(v, gain)
    }))
}

/// Off-road pixels become 0, on-road vehicles are boosted by `g_vehicle`,
/// the rest of the road is unchanged.
pub fn apply_hybrid(frame: &Frame, mask: &Mask, boxes: &[BBox], g_vehicle: f64) -> Result<Frame> {
    check_shape(frame, mask)?;
    if g_vehicle < 0.0 {
        return Err(Error::domain("heatmap gains must be non-negative"));
    }
    Ok(frame.map_pixels(|x, y, v| {
        if !mask.get(x, y) {
            0
        } else if boxes.iter().any(|b| b.contains(x, y)) {
            scale(v, g_vehicle)
        } else {
            v
        }
    }))
}
