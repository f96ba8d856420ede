//! Synthetic roadside-camera traffic clips.
//!
//! Two vehicles drive conflicting routes through a junction seen from
//! above. Clips are labeled by construction (collision or safe pass), come
//! with their ground-truth road mask and vehicle boxes, and can be
//! post-processed, capped and trimmed before encoding.

mod clip;
mod dataset;
mod geometry;
pub mod netpbm;
mod postprocess;
mod raster;
mod sim;
mod world;

pub use clip::{cap_length, frame_gap_trim, Label, ScenarioClip};
pub use dataset::{
    build_dataset, generate_clips, prepare_clip, split_clips, split_ids, Dataset, DatasetEntry,
};
pub use geometry::{Path, Segment, Vec2};
pub use postprocess::{apply_binary_mask, apply_heatmap, apply_hybrid, HeatmapGains, PostProcess};
pub use raster::{
    rasterize, road_mask, BBox, Frame, Mask, Rendering, VehicleState, Viewport, BACKGROUND_LEVEL,
    ROAD_LEVEL, VEHICLE_LEVEL,
};
pub use sim::{derive_seed, detect_collision, generate_scenario, min_distance, MAX_ATTEMPTS};
pub use world::{build_scene, conflict_point, Layout, RoadPiece, Scene, WorldSpec};
