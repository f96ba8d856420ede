use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::geometry::Vec2;
use super::postprocess::PostProcess;
use super::raster::{BBox, Frame, Mask};
use super::world::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Safe,
    Collision,
}

impl Label {
    /// Class index used by the probe; collision is the positive class.
    pub fn index(self) -> usize {
        match self {
            Label::Safe => 0,
            Label::Collision => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 1 {
            Label::Collision
        } else {
            Label::Safe
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Safe => "SAFE",
            Label::Collision => "COLLISION",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SAFE" => Ok(Label::Safe),
            "COLLISION" => Ok(Label::Collision),
            _ => Err(Error::format(format!("unknown label '{s}'"))),
        }
    }
}

/// A labeled clip with its ground truth.
///
/// `trajectories[v][k]` is the center of vehicle `v` at frame `k`. When
/// frames are trimmed, `collision_frame` keeps pointing at the collision
/// relative to the new first frame, so after a gap trim it lies past the end.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioClip {
    pub frames: Vec<Frame>,
    pub label: Label,
    pub collision_frame: Option<usize>,
    pub road_mask: Mask,
    pub boxes_per_frame: Vec<Vec<BBox>>,
    pub trajectories: Vec<Vec<Vec2>>,
    pub fps: u32,
    pub seed: u64,
    pub layout: Layout,
    pub post: PostProcess,
    /// Frames removed before the collision.
    pub gap: usize,
}

impl ScenarioClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Keeps frames `start..end`, reindexing everything frame-indexed.
    fn slice(&self, start: usize, end: usize) -> ScenarioClip {
        ScenarioClip {
            frames: self.frames[start..end].to_vec(),
            boxes_per_frame: self.boxes_per_frame[start..end].to_vec(),
            trajectories: self
                .trajectories
                .iter()
                .map(|t| t[start..end].to_vec())
                .collect(),
            collision_frame: self.collision_frame.map(|c| c - start),
            ..self.clone()
        }
    }
}

/// Keeps the last `max_frames` frames.
pub fn cap_length(clip: &ScenarioClip, max_frames: usize) -> Result<ScenarioClip> {
    if max_frames == 0 {
        return Err(Error::domain("max_frames must be at least 1"));
    }
    let n = clip.len();
    Ok(clip.slice(n.saturating_sub(max_frames), n))
}

/// Removes the final `gap` frames of a collision clip.
pub fn frame_gap_trim(clip: &ScenarioClip, gap: usize) -> Result<ScenarioClip> {
    if clip.label != Label::Collision {
        return Err(Error::domain(
            "frame gap trimming applies to collision clips only",
        ));
    }
    if gap >= clip.len() {
        return Err(Error::domain(format!(
            "gap {gap} leaves nothing of a {}-frame clip",
            clip.len()
        )));
    }
    let mut out = clip.slice(0, clip.len() - gap);
    out.gap = clip.gap + gap;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn dummy_clip(n: usize, label: Label) -> ScenarioClip {
        let frames = (0..n)
            .map(|k| Frame::filled(2, 2, 1, (k % 256) as u8))
            .collect();
        ScenarioClip {
            frames,
            label,
            collision_frame: (label == Label::Collision).then(|| n - 1),
            road_mask: Mask::new(2, 2, vec![true; 4]).unwrap(),
            boxes_per_frame: vec![vec![]; n],
            trajectories: vec![
                (0..n).map(|k| Vec2::new(k as f64, 0.0)).collect(),
                (0..n).map(|k| Vec2::new(0.0, k as f64)).collect(),
            ],
            fps: 20,
            seed: 0,
            layout: Layout::FourWay,
            post: PostProcess::None,
            gap: 0,
        }
    }

    #[test]
    fn cap_keeps_tail() {
        let c = dummy_clip(80, Label::Collision);
        let capped = cap_length(&c, 64).unwrap();
        assert_eq!(capped.len(), 64);
        assert_eq!(capped.frames[0], c.frames[16]);
        assert_eq!(capped.collision_frame, Some(63));
        assert_eq!(capped.trajectories[0][0], c.trajectories[0][16]);
        let short = dummy_clip(30, Label::Safe);
        assert_eq!(cap_length(&short, 64).unwrap(), short);
        assert!(cap_length(&short, 0).is_err());
    }

    #[test]
    fn gap_trim() {
        let c = dummy_clip(64, Label::Collision);
        let t = frame_gap_trim(&c, 8).unwrap();
        assert_eq!(t.len(), 56);
        assert_eq!(t.label, Label::Collision);
        assert_eq!(t.gap, 8);
        assert_eq!(frame_gap_trim(&c, 0).unwrap(), c);
        assert!(frame_gap_trim(&c, 64).is_err());
        assert!(frame_gap_trim(&dummy_clip(64, Label::Safe), 4).is_err());
    }
}
