//! PSNR and Gaussian-window SSIM, optionally restricted to a mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Mask, CHANNELS};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub data_range: f64,
    /// Side of the square SSIM window; odd.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            data_range: 255.0,
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.data_range > 0.0
            && self.window % 2 == 1
            && self.sigma > 0.0
            && self.k1 > 0.0
            && self.k2 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad metric configuration {self:?}")))
        }
    }

    fn c1(&self) -> f64 {
        (self.k1 * self.data_range).powi(2)
    }

    fn c2(&self) -> f64 {
        (self.k2 * self.data_range).powi(2)
    }
}

fn check_pair(a: &Image, b: &Image, mask: Option<&Mask>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            found: b.dims(),
        });
    }
    if let Some(m) = mask {
        if m.dims() != a.dims() {
            return Err(Error::DimensionMismatch {
                expected: a.dims(),
                found: m.dims(),
            });
        }
    }
    Ok(())
}

/// Peak signal-to-noise ratio in decibels over the (masked) pixels and all
/// channels. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, cfg: &MetricConfig, mask: Option<&Mask>) -> Result<f64> {
    cfg.validate()?;
    check_pair(a, b, mask)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (pa, pb)) in a
        .data()
        .chunks_exact(CHANNELS)
        .zip(b.data().chunks_exact(CHANNELS))
        .enumerate()
    {
        if mask.is_some_and(|m| !m.data[i]) {
            continue;
        }
        for c in 0..CHANNELS {
            let d = f64::from(pa[c]) - f64::from(pb[c]);
            sum += d * d;
        }
        n += CHANNELS;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (cfg.data_range * cfg.data_range / mse).log10())
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window / 2) as f64;
    let raw: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable "valid" Gaussian filter of one plane.
fn filter_valid(plane: &[f64], height: usize, width: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (oh, ow) = (height - k + 1, width - k + 1);
    let mut horizontal = vec![0.0; height * ow];
    par::fill_rows(&mut horizontal, ow, |y, row| {
        let src = &plane[y * width..(y + 1) * width];
        for (x, out) in row.iter_mut().enumerate() {
            *out = kernel.iter().zip(&src[x..x + k]).map(|(w, v)| w * v).sum();
        }
    });
    let mut out = vec![0.0; oh * ow];
    par::fill_rows(&mut out, ow, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * horizontal[(y + j) * ow + x])
                .sum();
        }
    });
    out
}

/// Mean SSIM over the (masked) window centers, computed per channel and
/// averaged across channels.
pub fn ssim(a: &Image, b: &Image, cfg: &MetricConfig, mask: Option<&Mask>) -> Result<f64> {
    cfg.validate()?;
    check_pair(a, b, mask)?;
    let (h, w) = a.dims();
    if h < cfg.window || w < cfg.window {
        return Err(Error::TooSmall {
            height: h,
            width: w,
            window: cfg.window,
        });
    }
    let kernel = gaussian_kernel(cfg.window, cfg.sigma);
    let half = cfg.window / 2;
    let (oh, ow) = (h - cfg.window + 1, w - cfg.window + 1);
    let centers: Vec<usize> = (0..oh * ow)
        .filter(|&i| mask.is_none_or(|m| m.get(i % ow + half, i / ow + half)))
        .collect();
    if centers.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (c1, c2) = (cfg.c1(), cfg.c2());

    let mut total = 0.0;
    for c in 0..CHANNELS {
        let pa: Vec<f64> = a.data().iter().skip(c).step_by(CHANNELS).map(|&v| f64::from(v)).collect();
        let pb: Vec<f64> = b.data().iter().skip(c).step_by(CHANNELS).map(|&v| f64::from(v)).collect();
        let square = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x * y).collect() };
        let mu_a = filter_valid(&pa, h, w, &kernel);
        let mu_b = filter_valid(&pb, h, w, &kernel);
        let e_aa = filter_valid(&square(&pa, &pa), h, w, &kernel);
        let e_bb = filter_valid(&square(&pb, &pb), h, w, &kernel);
        let e_ab = filter_valid(&square(&pa, &pb), h, w, &kernel);
        let mut sum = 0.0;
        for &i in &centers {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            sum += num / den;
        }
        total += sum / centers.len() as f64;
    }
    Ok(total / CHANNELS as f64)
}
