use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Exact rotation by a multiple of 90 degrees.
    pub fn rotated_quarter(self, turns: u8) -> Vec2 {
        match turns % 4 {
            0 => self,
            1 => Vec2::new(-self.y, self.x),
            2 => Vec2::new(-self.x, -self.y),
            _ => Vec2::new(self.y, -self.x),
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Piece of a lane centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Line {
        start: Vec2,
        end: Vec2,
    },
    /// Circular arc; positive `sweep` is counter-clockwise.
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { start, end } => start.dist(end),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Point at arc length `s`, extrapolating along the tangent beyond either end.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let len = self.length();
        if s < 0.0 {
            return self.point_at(0.0) + self.heading_at(0.0) * s;
        }
        if s > len {
            return self.point_at(len) + self.heading_at(len) * (s - len);
        }
        match *self {
            Segment::Line { start, end } => start + (end - start) * (s / len),
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => center + Vec2::from_angle(start_angle + sweep.signum() * s / radius) * radius,
        }
    }

    /// Unit tangent at arc length `s` (clamped to the segment).
    pub fn heading_at(&self, s: f64) -> Vec2 {
        match *self {
            Segment::Line { start, end } => (end - start).normalized(),
            Segment::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let s = s.clamp(0.0, radius * sweep.abs());
                let angle = start_angle + sweep.signum() * s / radius;
                Vec2::from_angle(angle).rotated(sweep.signum() * std::f64::consts::FRAC_PI_2)
            }
        }
    }

    fn translated(&self, by: Vec2) -> Segment {
        match *self {
            Segment::Line { start, end } => Segment::Line {
                start: start + by,
                end: end + by,
            },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Segment::Arc {
                center: center + by,
                radius,
                start_angle,
                sweep,
            },
        }
    }

    fn rotated_quarter(&self, turns: u8) -> Segment {
        match *self {
            Segment::Line { start, end } => Segment::Line {
                start: start.rotated_quarter(turns),
                end: end.rotated_quarter(turns),
            },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Segment::Arc {
                center: center.rotated_quarter(turns),
                radius,
                start_angle: start_angle + f64::from(turns % 4) * std::f64::consts::FRAC_PI_2,
                sweep,
            },
        }
    }
}

/// A lane route: connected segments parametrized by arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    segments: Vec<Segment>,
}

impl Path {
    pub fn new(segments: Vec<Segment>) -> Self {
        assert!(!segments.is_empty(), "a path needs at least one segment");
        Self { segments }
    }

    pub fn line(start: Vec2, end: Vec2) -> Self {
        Self::new(vec![Segment::Line { start, end }])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    fn locate(&self, s: f64) -> (&Segment, f64) {
        if s <= 0.0 {
            return (&self.segments[0], s);
        }
        let mut rest = s;
        let last = self.segments.len() - 1;
        for (i, seg) in self.segments.iter().enumerate() {
            let len = seg.length();
            if rest <= len || i == last {
                return (seg, rest);
            }
            rest -= len;
        }
        unreachable!()
    }

    /// Position at arc length `s`; outside `[0, length]` the path continues
    /// straight along its end tangents.
    pub fn position(&self, s: f64) -> Vec2 {
        let (seg, local) = self.locate(s);
        seg.point_at(local)
    }

    pub fn heading(&self, s: f64) -> Vec2 {
        let (seg, local) = self.locate(s);
        seg.heading_at(local)
    }

    pub fn rotated_quarter(&self, turns: u8) -> Path {
        Path::new(
            self.segments
                .iter()
                .map(|s| s.rotated_quarter(turns))
                .collect(),
        )
    }

    pub fn translated(&self, by: Vec2) -> Path {
        Path::new(self.segments.iter().map(|s| s.translated(by)).collect())
    }
}
