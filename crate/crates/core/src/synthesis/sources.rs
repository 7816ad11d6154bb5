//! Seeded procedural source images, used when no photo corpus is supplied.
//!
//! Content is multi-octave value noise with roughly 1/f amplitude falloff
//! plus a handful of soft-edged shapes, which gives both smooth gradients
//! and sharp structure for the warps to degrade.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{quantize_level, Image, CHANNELS};

const OCTAVES: u32 = 5;
const BASE_CELLS: usize = 4;
const SHAPES: usize = 7;

struct Lattice {
    cells: usize,
    values: Vec<[f64; 3]>,
}

impl Lattice {
    fn new(rng: &mut ChaCha8Rng, cells: usize) -> Self {
        let n = (cells + 1) * (cells + 1);
        let values = (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        Self { cells, values }
    }

    /// Smoothstep-interpolated value at `(s, t)` in `[0, 1]^2`.
    fn at(&self, s: f64, t: f64) -> [f64; 3] {
        let fx = s * self.cells as f64;
        let fy = t * self.cells as f64;
        let (ix, iy) = ((fx.floor() as usize).min(self.cells - 1), (fy.floor() as usize).min(self.cells - 1));
        let smooth = |v: f64| v * v * (3.0 - 2.0 * v);
        let (ax, ay) = (smooth(fx - ix as f64), smooth(fy - iy as f64));
        let stride = self.cells + 1;
        let v = |x: usize, y: usize| self.values[y * stride + x];
        let (a, b, c, d) = (v(ix, iy), v(ix + 1, iy), v(ix, iy + 1), v(ix + 1, iy + 1));
        let mut out = [0.0; 3];
        for k in 0..3 {
            let top = a[k] + (b[k] - a[k]) * ax;
            let bottom = c[k] + (d[k] - c[k]) * ax;
            out[k] = top + (bottom - top) * ay;
        }
        out
    }
}

enum Shape {
    Disc { cx: f64, cy: f64, radius: f64 },
    Bar { cx: f64, cy: f64, half_len: f64, half_width: f64, cos: f64, sin: f64 },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, side: f64) -> Self {
        let cx = rng.random_range(0.0..side);
        let cy = rng.random_range(0.0..side);
        if rng.random_bool(0.5) {
            Shape::Disc {
                cx,
                cy,
                radius: rng.random_range(0.04..0.18) * side,
            }
        } else {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
            Shape::Bar {
                cx,
                cy,
                half_len: rng.random_range(0.1..0.4) * side,
                half_width: rng.random_range(0.01..0.06) * side,
                cos: angle.cos(),
                sin: angle.sin(),
            }
        }
    }

    /// Signed distance in pixels, negative inside.
    fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Disc { cx, cy, radius } => (x - cx).hypot(y - cy) - radius,
            Shape::Bar {
                cx,
                cy,
                half_len,
                half_width,
                cos,
                sin,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                let along = (dx * cos + dy * sin).abs() - half_len;
                let across = (-dx * sin + dy * cos).abs() - half_width;
                along.max(across)
            }
        }
    }
}

/// A deterministic `side` x `side` RGB test image.
pub fn procedural_source(seed: u64, side: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattices: Vec<(Lattice, f64)> = (0..OCTAVES)
        .map(|o| (Lattice::new(&mut rng, BASE_CELLS << o), 0.5f64.powi(o as i32)))
        .collect();
    let norm: f64 = lattices.iter().map(|(_, a)| a).sum();
    let shapes: Vec<(Shape, [f64; 3])> = (0..SHAPES)
        .map(|_| {
            let shape = Shape::random(&mut rng, side as f64);
            let color = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            (shape, color)
        })
        .collect();

    let denom = (side.max(2) - 1) as f64;
    let mut data = Vec::with_capacity(side * side * CHANNELS);
    for y in 0..side {
        for x in 0..side {
            let (s, t) = (x as f64 / denom, y as f64 / denom);
            let mut px = [0.0; 3];
            for (lattice, amp) in &lattices {
                let v = lattice.at(s, t);
                for k in 0..3 {
                    px[k] += amp * v[k] / norm;
                }
            }
            for (shape, color) in &shapes {
                let coverage = (0.5 - shape.distance(x as f64, y as f64)).clamp(0.0, 1.0);
                for k in 0..3 {
                    px[k] += (color[k] - px[k]) * coverage;
                }
            }
            data.extend(px.iter().map(|v| quantize_level(v * 255.0)));
        }
    }
    Image::new(side, side, data).expect("dimensions match")
}
