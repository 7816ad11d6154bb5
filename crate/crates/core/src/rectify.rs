//! Backward-flow rectification by bilinear sampling.
//!
//! Output pixel `(u, v)` takes the source value at `flow(u, v)` when that
//! point lies in the closed box `[0, W-1] x [0, H-1]`, and `(0, 0, 0)`
//! otherwise.

use crate::error::{Error, Result};
use crate::image::{quantize_level, FloatImage, Image, Mask, CHANNELS};
use crate::labels::FlowMap;
use crate::par;

/// The up-to-four source neighbors of a continuous sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Taps {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub fx: f64,
    pub fy: f64,
}

impl Taps {
    /// `None` when the point is outside the closed box or not finite.
    #[inline]
    pub fn at(x: f64, y: f64, width: usize, height: usize) -> Option<Taps> {
        let (x0, x1, fx) = axis(x, width)?;
        let (y0, y1, fy) = axis(y, height)?;
        Some(Taps {
            x0,
            y0,
            x1,
            y1,
            fx,
            fy,
        })
    }

    /// Weights of `(x0,y0)`, `(x1,y0)`, `(x0,y1)`, `(x1,y1)`.
    #[inline]
    pub fn weights(&self) -> [f64; 4] {
        let (gx, gy) = (1.0 - self.fx, 1.0 - self.fy);
        [gx * gy, self.fx * gy, gx * self.fy, self.fx * self.fy]
    }

    #[inline]
    pub fn lerp(&self, a: f64, b: f64, c: f64, d: f64) -> f64 {
        let top = (1.0 - self.fx) * a + self.fx * b;
        let bottom = (1.0 - self.fx) * c + self.fx * d;
        (1.0 - self.fy) * top + self.fy * bottom
    }
}

#[inline]
fn axis(t: f64, len: usize) -> Option<(usize, usize, f64)> {
    let last = len as f64 - 1.0;
    if !(t >= 0.0 && t <= last) {
        return None;
    }
    if len == 1 {
        return Some((0, 0, 0.0));
    }
    // At the far edge the lower neighbor is pulled in so the upper one carries all the weight.
    let i0 = (t.floor() as usize).min(len - 2);
    Some((i0, i0 + 1, t - i0 as f64))
}

fn check_source(src_dims: (usize, usize)) -> Result<()> {
    if src_dims.0 == 0 || src_dims.1 == 0 {
        return Err(Error::InvalidImage("empty source image".into()));
    }
    Ok(())
}

/// Sample an 8-bit image through a backward flow map. Interpolation runs on
/// scalar channel values and the result is rounded half away from zero.
pub fn bilinear_sample(src: &Image, flow: &FlowMap) -> Result<Image> {
    check_source(src.dims())?;
    let (h, w) = flow.dims();
    let (sh, sw) = src.dims();
    let mut out = Image::black(h, w);
    let data = src.data();
    par::fill_rows(out.data_mut(), w * CHANNELS, |v, row| {
        for u in 0..w {
            let [fx, fy] = flow.get(u, v);
            let Some(t) = Taps::at(fx, fy, sw, sh) else {
                continue;
            };
            let (i00, i10) = ((t.y0 * sw + t.x0) * CHANNELS, (t.y0 * sw + t.x1) * CHANNELS);
            let (i01, i11) = ((t.y1 * sw + t.x0) * CHANNELS, (t.y1 * sw + t.x1) * CHANNELS);
            for c in 0..CHANNELS {
                let value = t.lerp(
                    f64::from(data[i00 + c]),
                    f64::from(data[i10 + c]),
                    f64::from(data[i01 + c]),
                    f64::from(data[i11 + c]),
                );
                row[u * CHANNELS + c] = quantize_level(value);
            }
        }
    });
    Ok(out)
}

/// Scalar-precision counterpart of [`bilinear_sample`].
pub fn bilinear_sample_float(src: &FloatImage, flow: &FlowMap) -> Result<FloatImage> {
    check_source((src.height, src.width))?;
    let (h, w) = flow.dims();
    let (sh, sw) = (src.height, src.width);
    let mut out = FloatImage::zeros(h, w);
    par::fill_rows(&mut out.data, w * CHANNELS, |v, row| {
        for u in 0..w {
            let [fx, fy] = flow.get(u, v);
            let Some(t) = Taps::at(fx, fy, sw, sh) else {
                continue;
            };
            let (i00, i10) = ((t.y0 * sw + t.x0) * CHANNELS, (t.y0 * sw + t.x1) * CHANNELS);
            let (i01, i11) = ((t.y1 * sw + t.x0) * CHANNELS, (t.y1 * sw + t.x1) * CHANNELS);
            for c in 0..CHANNELS {
                row[u * CHANNELS + c] = t.lerp(
                    src.data[i00 + c],
                    src.data[i10 + c],
                    src.data[i01 + c],
                    src.data[i11 + c],
                );
            }
        }
    });
    Ok(out)
}

/// Pixels whose flow target lies inside a `src_dims = (height, width)` frame.
pub fn valid_mask(flow: &FlowMap, src_dims: (usize, usize)) -> Mask {
    let (h, w) = flow.dims();
    let (sh, sw) = src_dims;
    let mut data = vec![false; h * w];
    par::fill_rows(&mut data, w, |v, row| {
        for (u, slot) in row.iter_mut().enumerate() {
            let [fx, fy] = flow.get(u, v);
            *slot = Taps::at(fx, fy, sw, sh).is_some();
        }
    });
    Mask {
        height: h,
        width: w,
        data,
    }
}

/// Pixels whose flow target is in range and whose contributing neighbors
/// (nonzero bilinear weight) are all set in `src_mask`.
pub fn valid_mask_through(flow: &FlowMap, src_mask: &Mask) -> Mask {
    let (h, w) = flow.dims();
    let (sh, sw) = src_mask.dims();
    let mut data = vec![false; h * w];
    par::fill_rows(&mut data, w, |v, row| {
        for (u, slot) in row.iter_mut().enumerate() {
            let [fx, fy] = flow.get(u, v);
            let Some(t) = Taps::at(fx, fy, sw, sh) else {
                continue;
            };
            let corners = [(t.x0, t.y0), (t.x1, t.y0), (t.x0, t.y1), (t.x1, t.y1)];
            *slot = corners
                .iter()
                .zip(t.weights())
                .all(|(&(x, y), wgt)| wgt == 0.0 || src_mask.get(x, y));
        }
    });
    Mask {
        height: h,
        width: w,
        data,
    }
}
