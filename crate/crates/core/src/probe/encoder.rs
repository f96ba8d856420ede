//! Deterministic stand-in for a pretrained video encoder.
//!
//! Each `t_p x p x p` tubelet is average-pooled to an 8x8 grid of cells per
//! frame (pixels scaled to `[0, 1]`; no pooling when `p` is not a multiple
//! of 8). The token's input is that tubelet minus the patch's mean over the
//! whole clip, so static background cancels, concatenated with its
//! difference to the previous tubelet (zero for the first). A fixed random
//! matrix drawn from the seed projects it to `D` dims and a sin-cos code of
//! the token's (tubelet, row, column) position is added, as in ViT-style video
//! encoders. Tokens are ordered tubelet-major, then patch row, then patch
//! column.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::TokenizerSpec;
use crate::error::{Error, Result};
use crate::scenario::{Frame, ScenarioClip};

use super::matrix::{Matrix, TokenMatrix};

/// Cells per patch side after pooling.
pub const POOL_GRID: usize = 8;

#[derive(Debug, Clone)]
pub struct EncoderStub {
    patch: usize,
    tubelet: usize,
    channels: usize,
    /// Side of a pooling cell in pixels.
    cell: usize,
    /// `(2 * t_p * (p / cell)^2 * channels) x D`
    projection: Matrix,
}

impl EncoderStub {
    pub fn new(tok: &TokenizerSpec, channels: usize, dim: usize, seed: u64) -> Result<Self> {
        let patch = tok.patch_px as usize;
        let tubelet = tok.tubelet_frames as usize;
        if patch == 0 || tubelet == 0 || channels == 0 || dim == 0 {
            return Err(Error::domain("encoder stub dimensions must be positive"));
        }
        let cell = if patch.is_multiple_of(POOL_GRID) {
            patch / POOL_GRID
        } else {
            1
        };
        let side = patch / cell;
        let in_dim = 2 * tubelet * side * side * channels;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // unit-variance entries
        let a = (3.0 / in_dim as f64).sqrt();
        let data = (0..in_dim * dim).map(|_| rng.gen_range(-a..a)).collect();
        Ok(Self {
            patch,
            tubelet,
            channels,
            cell,
            projection: Matrix::from_vec(in_dim, dim, data)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.projection.cols()
    }

    /// Number of tokens produced for `n_frames` frames of `height x width`.
    pub fn token_count(&self, n_frames: usize, height: usize, width: usize) -> usize {
        (n_frames / self.tubelet) * (height / self.patch) * (width / self.patch)
    }

    pub fn encode(&self, frames: &[Frame]) -> Result<TokenMatrix> {
        let first = frames
            .first()
            .ok_or_else(|| Error::domain("cannot encode an empty clip"))?;
        let (h, w) = (first.height(), first.width());
        if frames
            .iter()
            .any(|f| f.height() != h || f.width() != w || f.channels() != self.channels)
        {
            return Err(Error::domain("frames differ in shape or channel count"));
        }
        if !frames.len().is_multiple_of(self.tubelet) {
            return Err(Error::domain(format!(
                "{} frames do not split into tubelets of {}",
                frames.len(),
                self.tubelet
            )));
        }
        if h % self.patch != 0 || w % self.patch != 0 {
            return Err(Error::domain(format!(
                "{h}x{w} frames do not split into {p}x{p} patches",
                p = self.patch
            )));
        }

        let (rows, cols) = (h / self.patch, w / self.patch);
        let half = self.projection.rows() / 2;
        let n_tubelets = frames.len() / self.tubelet;
        let mut tokens = Matrix::zeros(n_tubelets * rows * cols, self.dim());
        let mut cells = vec![vec![0.0; half]; n_tubelets];
        let mut mean = vec![0.0; half];
        let mut feature = vec![0.0; 2 * half];

        for pr in 0..rows {
            for pc in 0..cols {
                mean.iter_mut().for_each(|m| *m = 0.0);
                for (t, cur) in cells.iter_mut().enumerate() {
                    self.gather(
                        &frames[t * self.tubelet..(t + 1) * self.tubelet],
                        pr,
                        pc,
                        cur,
                    );
                    for (m, c) in mean.iter_mut().zip(cur.iter()) {
                        *m += c / n_tubelets as f64;
                    }
                }
                for t in 0..n_tubelets {
                    let cur = &cells[t];
                    let prev = &cells[t.saturating_sub(1)];
                    for ((f, c), m) in feature[..half].iter_mut().zip(cur).zip(&mean) {
                        *f = c - m;
                    }
                    for ((d, c), p) in feature[half..].iter_mut().zip(cur).zip(prev) {
                        *d = c - p;
                    }
                    let row = (t * rows + pr) * cols + pc;
                    let out = tokens.row_mut(row);
                    out.copy_from_slice(&self.projection.vec_mul(&feature));
                    add_position(out, [t, pr, pc]);
                }
            }
        }
        Ok(tokens)
    }

    fn gather(&self, tubelet: &[Frame], pr: usize, pc: usize, out: &mut [f64]) {
        let side = self.patch / self.cell;
        let norm = 255.0 * (self.cell * self.cell) as f64;
        let mut k = 0;
        for frame in tubelet {
            for cy in 0..side {
                for cx in 0..side {
                    let y0 = pr * self.patch + cy * self.cell;
                    let x0 = pc * self.patch + cx * self.cell;
                    for c in 0..self.channels {
                        let mut sum = 0u32;
                        for y in y0..y0 + self.cell {
                            for x in x0..x0 + self.cell {
                                sum += u32::from(frame.get(x, y, c));
                            }
                        }
                        out[k] = f64::from(sum) / norm;
                        k += 1;
                    }
                }
            }
        }
    }
}

/// Adds a sin-cos code of each coordinate. The dims are split into three
/// near-equal groups, one per coordinate; each group alternates sin and cos
/// over geometrically spaced frequencies.
pub fn add_position(token: &mut [f64], coords: [usize; 3]) {
    let d = token.len();
    let mut start = 0;
    for (axis, &pos) in coords.iter().enumerate() {
        let end = d * (axis + 1) / 3;
        let width = end - start;
        let pairs = width.div_ceil(2).max(1);
        for (j, v) in token[start..end].iter_mut().enumerate() {
            let freq = 1.0 / 100f64.powf((j / 2) as f64 / pairs as f64);
            let angle = pos as f64 * freq;
            *v += if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
        start = end;
    }
}

/// Encodes a clip with a freshly seeded stub.
pub fn encode_stub(
    clip: &ScenarioClip,
    tok: &TokenizerSpec,
    dim: usize,
    seed: u64,
) -> Result<TokenMatrix> {
    let channels = clip
        .frames
        .first()
        .map(Frame::channels)
        .ok_or_else(|| Error::domain("cannot encode an empty clip"))?;
    EncoderStub::new(tok, channels, dim, seed)?.encode(&clip.frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok() -> TokenizerSpec {
        TokenizerSpec {
            patch_px: 16,
            tubelet_frames: 2,
        }
    }

    fn position_only(dim: usize, coords: [usize; 3]) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        add_position(&mut v, coords);
        v
    }

    /// A 4x4 bright block whose left edge sits at `x`.
    fn block_frame(x: usize) -> Frame {
        let mut f = Frame::filled(32, 32, 1, 40);
        for y in 4..8 {
            for xx in x..x + 4 {
                f.set(xx, y, 230);
            }
        }
        f
    }

    #[test]
    fn same_seed_same_tokens() {
        let frames: Vec<Frame> = (0..4).map(|i| block_frame(2 + 3 * i)).collect();
        let a = EncoderStub::new(&tok(), 1, 8, 3)
            .unwrap()
            .encode(&frames)
            .unwrap();
        let b = EncoderStub::new(&tok(), 1, 8, 3)
            .unwrap()
            .encode(&frames)
            .unwrap();
        let c = EncoderStub::new(&tok(), 1, 8, 4)
            .unwrap()
            .encode(&frames)
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // 2 tubelets of 2x2 patches
        assert_eq!((a.rows(), a.cols()), (8, 8));
    }

    #[test]
    fn static_clip_leaves_only_the_position_code() {
        let stub = EncoderStub::new(&tok(), 1, 6, 9).unwrap();
        let frames = vec![block_frame(5); 6];
        let z = stub.encode(&frames).unwrap();
        for t in 0..3 {
            for pr in 0..2 {
                for pc in 0..2 {
                    let row = z.row((t * 2 + pr) * 2 + pc);
                    let want = position_only(6, [t, pr, pc]);
                    for (a, b) in row.iter().zip(&want) {
                        assert!((a - b).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn motion_shows_only_where_it_happens() {
        let stub = EncoderStub::new(&tok(), 1, 8, 1).unwrap();
        // the block moves inside the top-left patch only
        let frames: Vec<Frame> = (0..4).map(|i| block_frame(1 + 2 * i)).collect();
        let z = stub.encode(&frames).unwrap();
        let moved = |t: usize, pr: usize, pc: usize| {
            let row = z.row((t * 2 + pr) * 2 + pc);
            let want = position_only(8, [t, pr, pc]);
            row.iter().zip(&want).any(|(a, b)| (a - b).abs() > 1e-9)
        };
        assert!(moved(0, 0, 0) && moved(1, 0, 0));
        for t in 0..2 {
            assert!(!moved(t, 0, 1) && !moved(t, 1, 0) && !moved(t, 1, 1));
        }
    }

    #[test]
    fn position_code_at_origin() {
        let v = position_only(6, [0, 0, 0]);
        assert_eq!(v, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_ne!(position_only(6, [1, 0, 0]), position_only(6, [0, 1, 0]));
    }

    #[test]
    fn shape_errors() {
        let stub = EncoderStub::new(&tok(), 1, 4, 0).unwrap();
        assert!(stub.encode(&[]).is_err());
        assert!(stub.encode(&vec![block_frame(0); 3]).is_err());
        assert!(stub
            .encode(&[Frame::filled(24, 24, 1, 0), Frame::filled(24, 24, 1, 0)])
            .is_err());
        assert!(stub
            .encode(&[Frame::filled(32, 32, 3, 0), Frame::filled(32, 32, 3, 0)])
            .is_err());
        assert!(EncoderStub::new(&tok(), 1, 0, 0).is_err());
        assert_eq!(stub.token_count(6, 32, 48), 3 * 2 * 3);
    }
}
