//! Labeled clip collections with a stratified train/test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ClipSpec, DatasetSpec};
use crate::error::{Error, Result};

use super::clip::{cap_length, frame_gap_trim, Label, ScenarioClip};
use super::postprocess::{HeatmapGains, PostProcess};
use super::sim::{derive_seed, generate_scenario};
use super::world::WorldSpec;

/// Stream reserved for the split shuffle; clip seeds use streams `0..n`.
const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    /// Position in generation order: safe clips first, then collisions.
    pub id: usize,
    pub clip: ScenarioClip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<DatasetEntry>,
    pub test: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, label: Label) -> usize {
        self.train
            .iter()
            .chain(&self.test)
            .filter(|e| e.clip.label == label)
            .count()
    }
}

/// Unprocessed clips in generation order, generated in parallel.
pub fn generate_clips(
    world: &WorldSpec,
    render: &ClipSpec,
    n_safe: usize,
    n_collision: usize,
    seed: u64,
) -> Result<Vec<ScenarioClip>> {
    (0..n_safe + n_collision)
        .into_par_iter()
        .map(|i| {
            let kind = if i < n_safe {
                Label::Safe
            } else {
                Label::Collision
            };
            generate_scenario(world, render, kind, derive_seed(seed, i as u64))
        })
        .collect()
}

/// Caps the clip to its last `max_frames`, trims `gap` frames off collision
/// clips and applies `post` to every frame.
pub fn prepare_clip(
    clip: &ScenarioClip,
    max_frames: usize,
    gap: usize,
    post: PostProcess,
    gains: &HeatmapGains,
) -> Result<ScenarioClip> {
    let mut out = cap_length(clip, max_frames)?;
    if out.label == Label::Collision && gap > 0 {
        out = frame_gap_trim(&out, gap)?;
    }
    out.frames = out
        .frames
        .iter()
        .zip(&out.boxes_per_frame)
        .map(|(f, boxes)| post.apply(f, &out.road_mask, boxes, gains))
        .collect::<Result<_>>()?;
    out.post = post;
    Ok(out)
}

/// Test-set membership per id, stratified by label.
///
/// Each class contributes `round(count * test_fraction)` clips, chosen by a
/// seeded shuffle.
pub fn split_ids(labels: &[Label], test_fraction: f64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM));
    let mut is_test = vec![false; labels.len()];
    for class in [Label::Safe, Label::Collision] {
        let mut ids: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        ids.shuffle(&mut rng);
        let n_test = (ids.len() as f64 * test_fraction).round() as usize;
        for &i in &ids[..n_test.min(ids.len())] {
            is_test[i] = true;
        }
    }
    is_test
}

/// Splits prepared clips (in generation order) into train and test sets.
pub fn split_clips(clips: Vec<ScenarioClip>, test_fraction: f64, seed: u64) -> Dataset {
    let labels: Vec<Label> = clips.iter().map(|c| c.label).collect();
    let is_test = split_ids(&labels, test_fraction, seed);
    let mut data = Dataset {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (id, clip) in clips.into_iter().enumerate() {
        let entry = DatasetEntry { id, clip };
        if is_test[id] {
            data.test.push(entry);
        } else {
            data.train.push(entry);
        }
    }
    data
}

/// Generates, prepares and splits a dataset; deterministic in `seed`.
pub fn build_dataset(
    world: &WorldSpec,
    render: &ClipSpec,
    spec: &DatasetSpec,
    seed: u64,
) -> Result<Dataset> {
    if spec.n_safe == 0 || spec.n_collision == 0 {
        return Err(Error::domain(
            "a dataset needs at least one clip of each class",
        ));
    }
    let raw = generate_clips(
        world,
        render,
        spec.n_safe as usize,
        spec.n_collision as usize,
        seed,
    )?;
    let prepared = raw
        .par_iter()
        .map(|c| {
            prepare_clip(
                c,
                render.n_frames as usize,
                spec.gap as usize,
                spec.post,
                &spec.gains,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(split_clips(prepared, spec.test_fraction, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render() -> ClipSpec {
        ClipSpec {
            height_px: 32,
            width_px: 32,
            channels: 1,
            ..ClipSpec::default()
        }
    }

    #[test]
    fn stratified_counts() {
        let mut labels = vec![Label::Safe; 385];
        labels.extend(vec![Label::Collision; 115]);
        let t = split_ids(&labels, 0.2, 1);
        let test_safe = (0..385).filter(|&i| t[i]).count();
        let test_coll = (385..500).filter(|&i| t[i]).count();
        assert_eq!((test_safe, test_coll), (77, 23));
        assert_eq!(t, split_ids(&labels, 0.2, 1));
        assert_ne!(t, split_ids(&labels, 0.2, 2));
    }

    #[test]
    fn small_dataset() {
        let spec = DatasetSpec {
            n_safe: 1,
            n_collision: 1,
            ..DatasetSpec::default()
        };
        let d = build_dataset(&WorldSpec::default(), &render(), &spec, 4).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.count(Label::Safe), 1);
        assert_eq!(d.count(Label::Collision), 1);
        let again = build_dataset(&WorldSpec::default(), &render(), &spec, 4).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn prepared_clips_are_capped_and_trimmed() {
        let spec = DatasetSpec {
            n_safe: 3,
            n_collision: 3,
            ..DatasetSpec::default()
        };
        let d = build_dataset(&WorldSpec::default(), &render(), &spec, 0).unwrap();
        for e in d.train.iter().chain(&d.test) {
            assert!(e.clip.len() <= 64);
            assert_eq!(e.clip.post, PostProcess::Mask);
            if e.clip.label == Label::Collision {
                assert_eq!(e.clip.gap, 8);
                assert!(e.clip.len() <= 56);
            }
        }
    }

    #[test]
    fn zero_counts_rejected() {
        let spec = DatasetSpec {
            n_safe: 0,
            ..DatasetSpec::default()
        };
        assert!(build_dataset(&WorldSpec::default(), &render(), &spec, 0).is_err());
    }
}
