//! Two-vehicle kinematic scenarios.
//!
//! Both vehicles drive their routes at constant speed. The arrival times at
//! the routes' conflict point decide the outcome: nearly equal times give a
//! collision, well separated times a safe pass. Collision clips stop at the
//! first frame where the centers are closer than the collision distance.
//! The camera view is centered on the conflict point.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ClipSpec;
use crate::error::{Error, Result};

use super::clip::{Label, ScenarioClip};
use super::geometry::Vec2;
use super::postprocess::PostProcess;
use super::raster::{rasterize, VehicleState, Viewport};
use super::world::{build_scene, conflict_point, Layout, Scene, WorldSpec};

pub const MAX_ATTEMPTS: u64 = 100;

/// Independent seed for stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Earliest frame at which any two vehicles are closer than `threshold`.
///
/// `trajectories[v][k]` is vehicle `v` at frame `k`; frames beyond the
/// shortest trajectory are ignored.
pub fn detect_collision(trajectories: &[Vec<Vec2>], threshold: f64) -> Option<usize> {
    let n = trajectories.iter().map(Vec::len).min().unwrap_or(0);
    (0..n).find(|&k| {
        trajectories.iter().enumerate().any(|(i, a)| {
            trajectories[i + 1..]
                .iter()
                .any(|b| a[k].dist(b[k]) < threshold)
        })
    })
}

/// Smallest pairwise center distance over all frames.
pub fn min_distance(trajectories: &[Vec<Vec2>]) -> f64 {
    let n = trajectories.iter().map(Vec::len).min().unwrap_or(0);
    let mut best = f64::INFINITY;
    for k in 0..n {
        for (i, a) in trajectories.iter().enumerate() {
            for b in &trajectories[i + 1..] {
                best = best.min(a[k].dist(b[k]));
            }
        }
    }
    best
}

struct Plan {
    layout: Layout,
    scene: Scene,
    speeds: [f64; 2],
    /// Arc length of each vehicle at frame 0.
    starts: [f64; 2],
    n_frames: usize,
}

impl Plan {
    fn states(&self, world: &WorldSpec, k: usize) -> Vec<VehicleState> {
        let t = k as f64 / f64::from(world.fps);
        (0..2)
            .map(|v| {
                let route = &self.scene.routes[v];
                let s = self.starts[v] + self.speeds[v] * t;
                VehicleState {
                    pos: route.position(s),
                    vel: route.heading(s) * self.speeds[v],
                    size: (world.vehicle_length_m, world.vehicle_width_m),
                    route: v,
                    s,
                }
            })
            .collect()
    }

    fn trajectories(&self, states: &[Vec<VehicleState>]) -> Vec<Vec<Vec2>> {
        (0..2)
            .map(|v| states.iter().map(|s| s[v].pos).collect())
            .collect()
    }
}

fn draw_plan(world: &WorldSpec, kind: Label, rng: &mut ChaCha8Rng) -> Plan {
    let layout = if world.mix_layouts {
        Layout::ALL[rng.gen_range(0..Layout::ALL.len())]
    } else {
        world.layout
    };
    let turns: u8 = rng.gen_range(0..4);
    let base = build_scene(world, layout);
    let conflict = conflict_point(&base.routes, 0.25 * world.collision_dist_m);
    // center the view on the conflict point
    let at = base.routes[1].position(conflict.1);
    let scene = base.translated(-at).rotated_quarter(turns);

    let mut speed = || {
        if world.max_speed_mps > world.min_speed_mps {
            rng.gen_range(world.min_speed_mps..=world.max_speed_mps)
        } else {
            world.min_speed_mps
        }
    };
    let speeds = [speed(), speed()];
    let n_frames = rng.gen_range(world.min_frames..=world.max_frames) as usize;
    let fps = f64::from(world.fps);
    let duration = (n_frames - 1) as f64 / fps;

    // times at which each vehicle reaches its conflict arc length
    let (t0, t1) = match kind {
        Label::Collision => {
            let spread = 0.5 * world.collision_dist_m / world.max_speed_mps;
            let t1 = duration;
            (t1 + rng.gen_range(-spread..=spread), t1)
        }
        Label::Safe => {
            let t1 = duration * rng.gen_range(0.3..0.9);
            let offset = rng.gen_range(1.5..4.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (t1 + sign * offset, t1)
        }
    };
    Plan {
        layout,
        scene,
        speeds,
        starts: [conflict.0 - speeds[0] * t0, conflict.1 - speeds[1] * t1],
        n_frames,
    }
}

/// Generates one labeled clip; a pure function of its arguments.
///
/// Frames are rendered at `render`'s resolution and channel count. A draw
/// that does not realize the requested outcome is redrawn from a derived
/// seed, up to [`MAX_ATTEMPTS`] times.
pub fn generate_scenario(
    world: &WorldSpec,
    render: &ClipSpec,
    kind: Label,
    seed: u64,
) -> Result<ScenarioClip> {
    let violations = world.violations();
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let view = Viewport {
        extent: world.extent_m,
        width: render.width_px as usize,
        height: render.height_px as usize,
    };
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        let plan = draw_plan(world, kind, &mut rng);
        let (states, collision_frame) = match kind {
            Label::Collision => {
                // run past the planned end so a late contact is still found
                let horizon = plan.n_frames + 2 * world.fps as usize;
                let states: Vec<_> = (0..horizon).map(|k| plan.states(world, k)).collect();
                match detect_collision(&plan.trajectories(&states), world.collision_dist_m) {
                    Some(k) if k >= 1 => (states[..=k].to_vec(), Some(k)),
                    _ => continue,
                }
            }
            Label::Safe => {
                let states: Vec<_> = (0..plan.n_frames).map(|k| plan.states(world, k)).collect();
                if min_distance(&plan.trajectories(&states)) < world.safe_clearance_m {
                    continue;
                }
                (states, None)
            }
        };
        let trajectories = plan.trajectories(&states);
        let rendering = rasterize(&plan.scene, &states, &view, render.channels as usize);
        return Ok(ScenarioClip {
            frames: rendering.frames,
            label: kind,
            collision_frame,
            road_mask: rendering.road_mask,
            boxes_per_frame: rendering.boxes,
            trajectories,
            fps: world.fps,
            seed,
            layout: plan.layout,
            post: PostProcess::None,
            gap: 0,
        });
    }
    Err(Error::domain(format!(
        "no {kind} scenario found for seed {seed} after {MAX_ATTEMPTS} attempts"
    )))
}
