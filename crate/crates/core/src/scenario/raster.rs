//! Flat-shaded rendering of the road layout and vehicles.
//!
//! Palette: background 40, road 110, vehicles 230. Vehicles are
//! axis-aligned rectangles oriented along their dominant heading axis. A
//! pixel belongs to a shape when its center does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::geometry::Vec2;
use super::world::Scene;

pub const BACKGROUND_LEVEL: u8 = 40;
pub const ROAD_LEVEL: u8 = 110;
pub const VEHICLE_LEVEL: u8 = 230;

/// 8-bit image, channels interleaved, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, channels: usize, level: u8) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![level; width * height * channels],
        }
    }

    pub fn from_raw(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::format(format!(
                "{width}x{height}x{channels} frame cannot hold {} bytes",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sets every channel of pixel `(x, y)`.
    pub fn set(&mut self, x: usize, y: usize, level: u8) {
        let i = (y * self.width + x) * self.channels;
        self.data[i..i + self.channels].fill(level);
    }

    /// Applies `f(x, y, value)` to every channel value.
    pub fn map_pixels(&self, mut f: impl FnMut(usize, usize, u8) -> u8) -> Frame {
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            let p = i / self.channels;
            *v = f(p % self.width, p / self.width, *v);
        }
        out
    }

    pub fn sum(&self) -> u64 {
        self.data.iter().map(|&v| u64::from(v)).sum()
    }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::format("mask size does not match its dimensions"));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Inclusive pixel bounds of a rendered vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }
}

/// Kinematic state of one vehicle at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pos: Vec2,
    pub vel: Vec2,
    /// (length, width) in meters.
    pub size: (f64, f64),
    /// Route index within the scene.
    pub route: usize,
    /// Arc length along the route.
    pub s: f64,
}

impl VehicleState {
    /// Axis-aligned half extents (x, y) of the drawn rectangle.
    fn half_extents(&self) -> (f64, f64) {
        let (len, wid) = self.size;
        if self.vel.x.abs() >= self.vel.y.abs() {
            (len / 2.0, wid / 2.0)
        } else {
            (wid / 2.0, len / 2.0)
        }
    }
}

/// Maps a square world of side `extent` (centered on the origin) to pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub extent: f64,
    pub width: usize,
    pub height: usize,
}

impl Viewport {
    pub fn pixel_center(&self, x: usize, y: usize) -> Vec2 {
        Vec2::new(
            -self.extent / 2.0 + (x as f64 + 0.5) * self.extent / self.width as f64,
            self.extent / 2.0 - (y as f64 + 0.5) * self.extent / self.height as f64,
        )
    }

    fn col_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        // pixel x covers centers at -E/2 + (x + 0.5) * E / W
        let scale = self.width as f64 / self.extent;
        let first = ((lo + self.extent / 2.0) * scale - 0.5).ceil().max(0.0);
        let last = ((hi + self.extent / 2.0) * scale - 0.5).floor();
        clamp_range(first, last, self.width)
    }

    fn row_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let scale = self.height as f64 / self.extent;
        let first = ((self.extent / 2.0 - hi) * scale - 0.5).ceil().max(0.0);
        let last = ((self.extent / 2.0 - lo) * scale - 0.5).floor();
        clamp_range(first, last, self.height)
    }

    /// Pixels whose centers fall in the vehicle rectangle, clipped to the frame.
    pub fn vehicle_box(&self, v: &VehicleState) -> Option<BBox> {
        let (hx, hy) = v.half_extents();
        let (x0, x1) = self.col_range(v.pos.x - hx, v.pos.x + hx)?;
        let (y0, y1) = self.row_range(v.pos.y - hy, v.pos.y + hy)?;
        Some(BBox { x0, y0, x1, y1 })
    }
}

fn clamp_range(first: f64, last: f64, n: usize) -> Option<(usize, usize)> {
    let last = last.min(n as f64 - 1.0);
    if last < first || last < 0.0 {
        None
    } else {
        Some((first as usize, last as usize))
    }
}

pub fn road_mask(scene: &Scene, view: &Viewport) -> Mask {
    let mut bits = Vec::with_capacity(view.width * view.height);
    for y in 0..view.height {
        for x in 0..view.width {
            bits.push(scene.on_road(view.pixel_center(x, y)));
        }
    }
    Mask {
        width: view.width,
        height: view.height,
        bits,
    }
}

/// Rendered clip: frames, the static road mask and per-frame vehicle boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub frames: Vec<Frame>,
    pub road_mask: Mask,
    pub boxes: Vec<Vec<BBox>>,
}

pub fn rasterize(
    scene: &Scene,
    states_per_frame: &[Vec<VehicleState>],
    view: &Viewport,
    channels: usize,
) -> Rendering {
    let mask = road_mask(scene, view);
    let mut base = Frame::filled(view.width, view.height, channels, BACKGROUND_LEVEL);
    for y in 0..view.height {
        for x in 0..view.width {
            if mask.get(x, y) {
                base.set(x, y, ROAD_LEVEL);
            }
        }
    }
    let mut frames = Vec::with_capacity(states_per_frame.len());
    let mut boxes = Vec::with_capacity(states_per_frame.len());
    for states in states_per_frame {
        let mut frame = base.clone();
        let mut frame_boxes = Vec::new();
        for v in states {
            if let Some(b) = view.vehicle_box(v) {
                for y in b.y0..=b.y1 {
                    for x in b.x0..=b.x1 {
                        frame.set(x, y, VEHICLE_LEVEL);
                    }
                }
                frame_boxes.push(b);
            }
        }
        frames.push(frame);
        boxes.push(frame_boxes);
    }
    Rendering {
        frames,
        road_mask: mask,
        boxes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::world::{build_scene, Layout, WorldSpec};

    fn view() -> Viewport {
        Viewport {
            extent: 30.0,
            width: 48,
            height: 48,
        }
    }

    fn car(x: f64, y: f64) -> VehicleState {
        VehicleState {
            pos: Vec2::new(x, y),
            vel: Vec2::new(5.0, 0.0),
            size: (4.5, 2.0),
            route: 0,
            s: 0.0,
        }
    }

    #[test]
    fn empty_world_has_two_levels() {
        let scene = build_scene(&WorldSpec::default(), Layout::Roundabout);
        let r = rasterize(&scene, &[vec![], vec![]], &view(), 1);
        for f in &r.frames {
            assert!(f
                .as_bytes()
                .iter()
                .all(|&v| v == BACKGROUND_LEVEL || v == ROAD_LEVEL));
        }
    }

    #[test]
    fn road_pixels_match_mask() {
        for layout in Layout::ALL {
            let scene = build_scene(&WorldSpec::default(), layout);
            let r = rasterize(&scene, &[vec![]], &view(), 3);
            let road = r.frames[0]
                .as_bytes()
                .chunks(3)
                .filter(|px| px[0] == ROAD_LEVEL)
                .count();
            assert_eq!(road, r.road_mask.count_ones());
            assert!(road > 0);
        }
    }

    #[test]
    fn box_is_tight() {
        let scene = build_scene(&WorldSpec::default(), Layout::FourWay);
        let v = view();
        let r = rasterize(&scene, &[vec![car(0.0, 0.0)]], &v, 1);
        let b = r.boxes[0][0];
        // 4.5 m x 2 m at 0.625 m/px, centered on a pixel corner
        assert_eq!((b.x1 - b.x0 + 1, b.y1 - b.y0 + 1), (8, 4));
        let f = &r.frames[0];
        for y in 0..48 {
            for x in 0..48 {
                assert_eq!(
                    f.get(x, y, 0) == VEHICLE_LEVEL,
                    b.contains(x, y),
                    "({x},{y})"
                );
                if b.contains(x, y) {
                    let c = v.pixel_center(x, y);
                    assert!(c.x.abs() <= 2.25 && c.y.abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn vehicles_are_clipped() {
        let scene = build_scene(&WorldSpec::default(), Layout::FourWay);
        let r = rasterize(&scene, &[vec![car(15.5, 0.0), car(40.0, 0.0)]], &view(), 1);
        assert_eq!(r.boxes[0].len(), 1);
        assert_eq!(r.boxes[0][0].x1, 47);
    }

    #[test]
    fn rendering_is_pure() {
        let scene = build_scene(&WorldSpec::default(), Layout::ThreeWay);
        let states = vec![vec![car(1.0, 2.0), car(-3.0, 0.5)]; 3];
        assert_eq!(
            rasterize(&scene, &states, &view(), 1),
            rasterize(&scene, &states, &view(), 1)
        );
    }
}
