use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Violation};

use super::geometry::{Path, Segment, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Layout {
    FourWay,
    ThreeWay,
    SideRoad,
    Roundabout,
}

impl Layout {
    pub const ALL: [Layout; 4] = [
        Layout::FourWay,
        Layout::ThreeWay,
        Layout::SideRoad,
        Layout::Roundabout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layout::FourWay => "FOUR_WAY",
            Layout::ThreeWay => "THREE_WAY",
            Layout::SideRoad => "SIDE_ROAD",
            Layout::Roundabout => "ROUNDABOUT",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Layout::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown layout {s:?}")))
    }
}

/// Square world seen by one roadside camera, centered on the junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    /// Side length of the square view, meters.
    pub extent_m: f64,
    pub layout: Layout,
    /// Draw every clip's layout from all four layouts instead of `layout`.
    pub mix_layouts: bool,
    pub lane_width_m: f64,
    /// Center distance below which two vehicles have collided.
    pub collision_dist_m: f64,
    /// Minimum center distance kept by both vehicles in safe clips.
    pub safe_clearance_m: f64,
    pub min_speed_mps: f64,
    pub max_speed_mps: f64,
    pub vehicle_length_m: f64,
    pub vehicle_width_m: f64,
    /// Frames simulated before a collision (or clip end), drawn uniformly.
    pub min_frames: u32,
    pub max_frames: u32,
    pub fps: u32,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            extent_m: 30.0,
            layout: Layout::FourWay,
            mix_layouts: true,
            lane_width_m: 3.5,
            collision_dist_m: 2.0,
            safe_clearance_m: 9.0,
            min_speed_mps: 5.0,
            max_speed_mps: 8.0,
            vehicle_length_m: 4.5,
            vehicle_width_m: 2.0,
            min_frames: 72,
            max_frames: 92,
            fps: 20,
        }
    }
}

impl WorldSpec {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, msg: &str| {
            if !ok {
                out.push(Violation::new(format!("world.{field}"), msg));
            }
        };
        let pos = |v: f64| v.is_finite() && v > 0.0;
        check(pos(self.extent_m), "extent_m", "must be positive");
        check(pos(self.lane_width_m), "lane_width_m", "must be positive");
        check(
            pos(self.collision_dist_m),
            "collision_dist_m",
            "must be positive",
        );
        check(
            self.safe_clearance_m >= 2.0 * self.collision_dist_m,
            "safe_clearance_m",
            "must be at least twice the collision distance",
        );
        check(pos(self.min_speed_mps), "min_speed_mps", "must be positive");
        check(
            self.max_speed_mps >= self.min_speed_mps,
            "max_speed_mps",
            "must not be below min_speed_mps",
        );
        check(
            pos(self.vehicle_length_m) && pos(self.vehicle_width_m),
            "vehicle_length_m",
            "vehicle size must be positive",
        );
        check(self.min_frames >= 2, "min_frames", "must be at least 2");
        check(
            self.max_frames >= self.min_frames,
            "max_frames",
            "must not be below min_frames",
        );
        check(self.fps >= 1, "fps", "must be at least 1");
        out
    }
}

/// Drivable area primitive, a centerline with a half width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RoadPiece {
    Strip {
        a: Vec2,
        b: Vec2,
        half_width: f64,
    },
    Ring {
        center: Vec2,
        radius: f64,
        half_width: f64,
    },
}

impl RoadPiece {
    pub fn contains(&self, p: Vec2) -> bool {
        match *self {
            RoadPiece::Strip { a, b, half_width } => {
                let ab = b - a;
                let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                p.dist(a + ab * t) <= half_width
            }
            RoadPiece::Ring {
                center,
                radius,
                half_width,
            } => (p.dist(center) - radius).abs() <= half_width,
        }
    }

    fn translated(&self, by: Vec2) -> RoadPiece {
        match *self {
            RoadPiece::Strip { a, b, half_width } => RoadPiece::Strip {
                a: a + by,
                b: b + by,
                half_width,
            },
            RoadPiece::Ring {
                center,
                radius,
                half_width,
            } => RoadPiece::Ring {
                center: center + by,
                radius,
                half_width,
            },
        }
    }

    fn rotated_quarter(&self, turns: u8) -> RoadPiece {
        match *self {
            RoadPiece::Strip { a, b, half_width } => RoadPiece::Strip {
                a: a.rotated_quarter(turns),
                b: b.rotated_quarter(turns),
                half_width,
            },
            RoadPiece::Ring {
                center,
                radius,
                half_width,
            } => RoadPiece::Ring {
                center: center.rotated_quarter(turns),
                radius,
                half_width,
            },
        }
    }
}

/// Road geometry plus the two conflicting routes driven in a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub roads: Vec<RoadPiece>,
    pub routes: [Path; 2],
}

impl Scene {
    pub fn on_road(&self, p: Vec2) -> bool {
        self.roads.iter().any(|r| r.contains(p))
    }

    pub fn translated(&self, by: Vec2) -> Scene {
        Scene {
            roads: self.roads.iter().map(|r| r.translated(by)).collect(),
            routes: [self.routes[0].translated(by), self.routes[1].translated(by)],
        }
    }

    pub fn rotated_quarter(&self, turns: u8) -> Scene {
        Scene {
            roads: self
                .roads
                .iter()
                .map(|r| r.rotated_quarter(turns))
                .collect(),
            routes: [
                self.routes[0].rotated_quarter(turns),
                self.routes[1].rotated_quarter(turns),
            ],
        }
    }
}

/// Roads and routes for `layout`, before any rotation.
///
/// Every layout puts the conflict point within a few meters of the origin.
/// Right-hand traffic; lanes sit half a lane width off the road centerline.
pub fn build_scene(world: &WorldSpec, layout: Layout) -> Scene {
    let lw = world.lane_width_m;
    let far = world.extent_m * 2.0;
    let strip = |a: Vec2, b: Vec2| RoadPiece::Strip {
        a,
        b,
        half_width: lw,
    };
    let v = Vec2::new;

    match layout {
        Layout::FourWay => Scene {
            roads: vec![
                strip(v(-far, 0.0), v(far, 0.0)),
                strip(v(0.0, -far), v(0.0, far)),
            ],
            routes: [
                // eastbound
                Path::line(v(-far, -lw / 2.0), v(far, -lw / 2.0)),
                // northbound
                Path::line(v(lw / 2.0, -far), v(lw / 2.0, far)),
            ],
        },
        Layout::ThreeWay => {
            // Stem points north; the second car comes down the stem and turns
            // left (east), crossing the westbound lane.
            let r = 1.5 * lw;
            let x0 = -lw / 2.0;
            let turn = Segment::Arc {
                center: v(x0 + r, lw),
                radius: r,
                start_angle: PI,
                sweep: FRAC_PI_2,
            };
            Scene {
                roads: vec![
                    strip(v(-far, 0.0), v(far, 0.0)),
                    strip(v(0.0, 0.0), v(0.0, far)),
                ],
                routes: [
                    // westbound
                    Path::line(v(far, lw / 2.0), v(-far, lw / 2.0)),
                    Path::new(vec![
                        Segment::Line {
                            start: v(x0, far),
                            end: v(x0, lw),
                        },
                        turn,
                        Segment::Line {
                            start: v(x0 + r, lw - r),
                            end: v(far, lw - r),
                        },
                    ]),
                ],
            }
        }
        Layout::SideRoad => {
            // A diagonal side road joins from the south-west; its car merges
            // into the eastbound lane.
            let r = 2.0 * lw;
            let y_lane = -lw / 2.0;
            // Right turn from heading 45 degrees to heading 0, ending tangent
            // to the eastbound lane at x = 0.
            let center = v(0.0, y_lane - r);
            let arc = Segment::Arc {
                center,
                radius: r,
                start_angle: 3.0 * FRAC_PI_4,
                sweep: -FRAC_PI_4,
            };
            let entry = arc.point_at(0.0);
            let dir = Vec2::from_angle(FRAC_PI_4);
            Scene {
                roads: vec![
                    strip(v(-far, 0.0), v(far, 0.0)),
                    strip(entry - dir * far, entry),
                    strip(entry, v(0.0, y_lane)),
                ],
                routes: [
                    Path::line(v(-far, y_lane), v(far, y_lane)),
                    Path::new(vec![
                        Segment::Line {
                            start: entry - dir * far,
                            end: entry,
                        },
                        arc,
                        Segment::Line {
                            start: v(0.0, y_lane),
                            end: v(far, y_lane),
                        },
                    ]),
                ],
            }
        }
        Layout::Roundabout => {
            // Small ring around the origin; the second car enters tangentially
            // at the south-east and merges with circulating traffic.
            let radius = 6.0;
            let merge_angle = -FRAC_PI_4;
            let merge = Vec2::from_angle(merge_angle) * radius;
            let tangent = Vec2::from_angle(merge_angle + FRAC_PI_2);
            let entry_start = merge - tangent * far;
            Scene {
                roads: vec![
                    RoadPiece::Ring {
                        center: v(0.0, 0.0),
                        radius,
                        half_width: lw / 2.0 + 0.5,
                    },
                    RoadPiece::Strip {
                        a: entry_start,
                        b: merge,
                        half_width: lw / 2.0 + 0.5,
                    },
                    strip(v(-far, 0.0), v(-radius, 0.0)),
                    strip(v(radius, 0.0), v(far, 0.0)),
                    strip(v(0.0, radius), v(0.0, far)),
                ],
                routes: [
                    Path::new(vec![Segment::Arc {
                        center: v(0.0, 0.0),
                        radius,
                        start_angle: merge_angle - 1.9 * PI,
                        sweep: 3.8 * PI,
                    }]),
                    Path::new(vec![
                        Segment::Line {
                            start: entry_start,
                            end: merge,
                        },
                        Segment::Arc {
                            center: v(0.0, 0.0),
                            radius,
                            start_angle: merge_angle,
                            sweep: 1.9 * PI,
                        },
                    ]),
                ],
            }
        }
    }
}

/// Arc lengths `(s0, s1)` at which the two routes first come together.
///
/// Scans route 1 for the earliest point within `tolerance` of route 0 (or
/// the closest approach if none is), refining on a 1 cm grid.
pub fn conflict_point(routes: &[Path; 2], tolerance: f64) -> (f64, f64) {
    let closest_on_0 = |p: Vec2| -> (f64, f64) {
        let len = routes[0].length();
        let mut best = (0.0, f64::INFINITY);
        let mut s = 0.0;
        while s <= len {
            let d = routes[0].position(s).dist(p);
            if d < best.1 {
                best = (s, d);
            }
            s += 0.25;
        }
        let (centre, _) = best;
        let mut s = (centre - 0.25).max(0.0);
        while s <= (centre + 0.25).min(len) {
            let d = routes[0].position(s).dist(p);
            if d < best.1 {
                best = (s, d);
            }
            s += 0.01;
        }
        best
    };

    let len1 = routes[1].length();
    let mut best = (0.0, 0.0, f64::INFINITY);
    let mut s1 = 0.0;
    while s1 <= len1 {
        let (s0, d) = closest_on_0(routes[1].position(s1));
        if d < best.2 {
            best = (s0, s1, d);
        }
        // a coarse step moves route 1 by 0.5 m, so look closer whenever
        // the tolerance could be met between grid points
        if d <= tolerance + 0.75 {
            let mut fine = (s1 - 0.5).max(0.0);
            while fine <= (s1 + 0.5).min(len1) {
                let (s0f, df) = closest_on_0(routes[1].position(fine));
                if df <= tolerance {
                    return (s0f, fine);
                }
                fine += 0.01;
            }
        }
        s1 += 0.5;
    }
    (best.0, best.1)
}
