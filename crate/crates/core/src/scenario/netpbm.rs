//! Binary Netpbm images (P4, P5, P6) and on-disk clip layout.
//!
//! A saved clip directory holds `frame_NNNN.pgm` (or `.ppm` for 3 channels),
//! `road_mask.pbm` with on-road pixels as set bits, and `manifest.toml`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::clip::{Label, ScenarioClip};
use super::postprocess::PostProcess;
use super::raster::{Frame, Mask};
use super::world::Layout;

pub fn encode_pnm(frame: &Frame) -> Result<Vec<u8>> {
    let magic = match frame.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::format(format!("no Netpbm format for {c} channels"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.as_bytes());
    Ok(out)
}

pub fn encode_pbm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width(), mask.height()).into_bytes();
    let row_bytes = mask.width().div_ceil(8);
    for y in 0..mask.height() {
        let mut row = vec![0u8; row_bytes];
        for x in 0..mask.width() {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

struct Header<'a> {
    magic: [u8; 2],
    fields: Vec<usize>,
    raster: &'a [u8],
}

/// Reads the magic number and `n_fields` header integers, skipping comments.
fn parse_header(bytes: &[u8], n_fields: usize) -> Result<Header<'_>> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format("missing Netpbm magic number"));
    }
    let mut pos = 2;
    let mut fields = Vec::with_capacity(n_fields);
    while fields.len() < n_fields {
        match bytes.get(pos) {
            None => return Err(Error::format("truncated Netpbm header")),
            Some(b'#') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(b) if b.is_ascii_digit() => {
                let start = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
                fields.push(
                    text.parse()
                        .map_err(|_| Error::format(format!("bad header value '{text}'")))?,
                );
            }
            Some(b) => {
                return Err(Error::format(format!(
                    "unexpected byte 0x{b:02x} in Netpbm header"
                )))
            }
        }
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format("truncated Netpbm header")),
    }
    Ok(Header {
        magic: [bytes[0], bytes[1]],
        fields,
        raster: &bytes[pos..],
    })
}

/// Decodes an 8-bit P5 or P6 image.
pub fn decode_pnm(bytes: &[u8]) -> Result<Frame> {
    let h = parse_header(bytes, 3)?;
    let channels = match &h.magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(Error::format("expected a P5 or P6 image")),
    };
    let (w, ht, maxval) = (h.fields[0], h.fields[1], h.fields[2]);
    if maxval != 255 {
        return Err(Error::format(format!("unsupported maxval {maxval}")));
    }
    let n = w * ht * channels;
    if h.raster.len() < n {
        return Err(Error::format("truncated Netpbm raster"));
    }
    Frame::from_raw(w, ht, channels, h.raster[..n].to_vec())
}

pub fn decode_pbm(bytes: &[u8]) -> Result<Mask> {
    let h = parse_header(bytes, 2)?;
    if &h.magic != b"P4" {
        return Err(Error::format("expected a P4 bitmap"));
    }
    let (w, ht) = (h.fields[0], h.fields[1]);
    let row_bytes = w.div_ceil(8);
    if h.raster.len() < row_bytes * ht {
        return Err(Error::format("truncated Netpbm raster"));
    }
    let mut bits = Vec::with_capacity(w * ht);
    for y in 0..ht {
        let row = &h.raster[y * row_bytes..(y + 1) * row_bytes];
        for x in 0..w {
            bits.push(row[x / 8] & (0x80 >> (x % 8)) != 0);
        }
    }
    Mask::new(w, ht, bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub label: Label,
    pub collision_frame: Option<usize>,
    pub fps: u32,
    pub post: PostProcess,
    pub gap: usize,
    /// Written as a string: derived seeds use all 64 bits, TOML integers
    /// only 63.
    #[serde(with = "u64_string")]
    pub seed: u64,
    pub layout: Layout,
    pub n_frames: usize,
}

mod u64_string {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

impl ClipManifest {
    pub fn of(clip: &ScenarioClip) -> Self {
        Self {
            label: clip.label,
            collision_frame: clip.collision_frame,
            fps: clip.fps,
            post: clip.post,
            gap: clip.gap,
            seed: clip.seed,
            layout: clip.layout,
            n_frames: clip.len(),
        }
    }
}

/// A clip as read back from disk: pixels, mask and manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredClip {
    pub manifest: ClipManifest,
    pub frames: Vec<Frame>,
    pub road_mask: Mask,
}

fn frame_name(i: usize, channels: usize) -> String {
    let ext = if channels == 3 { "ppm" } else { "pgm" };
    format!("frame_{i:04}.{ext}")
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn save_clip(dir: impl AsRef<Path>, clip: &ScenarioClip) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in clip.frames.iter().enumerate() {
        write(&dir.join(frame_name(i, f.channels())), &encode_pnm(f)?)?;
    }
    write(&dir.join("road_mask.pbm"), &encode_pbm(&clip.road_mask))?;
    let manifest = toml::to_string(&ClipManifest::of(clip))
        .map_err(|e| Error::format(format!("manifest: {e}")))?;
    write(&dir.join("manifest.toml"), manifest.as_bytes())
}

pub fn load_clip(dir: impl AsRef<Path>) -> Result<StoredClip> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.toml");
    let text = String::from_utf8(read(&path)?)
        .map_err(|_| Error::format(format!("{} is not UTF-8", path.display())))?;
    let manifest: ClipManifest =
        toml::from_str(&text).map_err(|e| Error::format(format!("manifest: {e}")))?;
    let road_mask = decode_pbm(&read(&dir.join("road_mask.pbm"))?)?;
    let mut frames = Vec::with_capacity(manifest.n_frames);
    for i in 0..manifest.n_frames {
        let gray = dir.join(frame_name(i, 1));
        let path = if gray.exists() {
            gray
        } else {
            dir.join(frame_name(i, 3))
        };
        frames.push(decode_pnm(&read(&path)?)?);
    }
    Ok(StoredClip {
        manifest,
        frames,
        road_mask,
    })
}
