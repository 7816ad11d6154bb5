//! Odd radial polynomial fisheye model.
//!
//! A point at normalized distance `r_d` from the optical center of the
//! distorted image corresponds to a point at distance
//! `r_c = k1 r_d + k2 r_d^3 + k3 r_d^5 + k4 r_d^7` from the optical center of
//! the rectified image, on the same ray. Distances are divided by
//! [`CameraModel::r_norm`] before the polynomial is evaluated.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance on `r_c` for the inverse solve.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Iteration cap for the safeguarded Newton solve.
pub const MAX_ITERATIONS: usize = 64;
/// Probe density used when a bracket is validated automatically.
const PROBES_PER_UNIT: f64 = 1024.0;

/// Continuous pixel coordinates: `x` is the column, `y` the row, pixel
/// centers sit on integers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Position of an optical center in pixel units.
pub type OpticalCenter = Point2;

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Geometric center of a `height` x `width` frame.
    pub fn geometric_center(height: usize, width: usize) -> Self {
        Self::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// The four coefficients of the odd radial polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl RadialParams {
    pub const IDENTITY: RadialParams = RadialParams::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(k1: f64, k2: f64, k3: f64, k4: f64) -> Self {
        Self { k1, k2, k3, k4 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.k1, self.k2, self.k3, self.k4]
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// `r_c` for a normalized distorted radius `r_d`.
    #[inline]
    pub fn eval(&self, r_d: f64) -> f64 {
        let r2 = r_d * r_d;
        r_d * (self.k1 + r2 * (self.k2 + r2 * (self.k3 + r2 * self.k4)))
    }

    /// `d r_c / d r_d`.
    #[inline]
    pub fn derivative(&self, r_d: f64) -> f64 {
        let r2 = r_d * r_d;
        self.k1 + r2 * (3.0 * self.k2 + r2 * (5.0 * self.k3 + r2 * 7.0 * self.k4))
    }

    /// Probe the derivative on `n_probe` evenly spaced radii over `[0, r_max]`
    /// and report the first radius where it is not strictly positive.
    pub fn validate_monotone(&self, r_max: f64, n_probe: usize) -> Result<()> {
        if !(r_max > 0.0) || !r_max.is_finite() || n_probe < 2 {
            return Err(Error::InvalidConfig(format!(
                "monotonicity probe needs r_max > 0 and at least 2 probes (got {r_max}, {n_probe})"
            )));
        }
        let step = r_max / (n_probe - 1) as f64;
        for i in 0..n_probe {
            let r = if i + 1 == n_probe { r_max } else { i as f64 * step };
            let d = self.derivative(r);
            if !(d > 0.0) {
                return Err(Error::NotMonotone { radius: r });
            }
        }
        Ok(())
    }

    /// Smallest power-of-two radius whose image reaches `r_c`, validated as
    /// monotone over `[0, r_hi]`.
    pub fn bracket(&self, r_c: f64) -> Result<f64> {
        let mut r_hi = 1.0;
        while self.eval(r_hi) < r_c {
            if r_hi >= 1024.0 || !(self.derivative(r_hi) > 0.0) {
                return Err(Error::NoBracket {
                    r_c,
                    r_hi,
                    value: self.eval(r_hi),
                });
            }
            r_hi *= 2.0;
        }
        let probes = ((r_hi * PROBES_PER_UNIT).ceil() as usize).max(256);
        self.validate_monotone(r_hi, probes)?;
        Ok(r_hi)
    }

    /// Solve `eval(r_d) = r_c` for `r_d`, choosing and validating the bracket
    /// automatically.
    pub fn invert(&self, r_c: f64, tol: f64) -> Result<f64> {
        let r_hi = self.bracket(r_c)?;
        self.invert_within(r_c, r_hi, tol)
    }

    /// Solve `eval(r_d) = r_c` on `[0, r_hi]` with Newton steps that fall
    /// back to bisection whenever a step leaves the current bracket. The
    /// caller is responsible for monotonicity on the bracket.
    pub fn invert_within(&self, r_c: f64, r_hi: f64, tol: f64) -> Result<f64> {
        if !(tol > 0.0) || !(r_c >= 0.0) || !r_c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "inversion needs r_c >= 0 and tol > 0 (got {r_c}, {tol})"
            )));
        }
        if r_c == 0.0 {
            return Ok(0.0);
        }
        let top = self.eval(r_hi);
        if top < r_c {
            return Err(Error::NoBracket {
                r_c,
                r_hi,
                value: top,
            });
        }

        let (mut lo, mut hi) = (0.0, r_hi);
        let mut r = (r_c / self.k1).clamp(lo, hi);
        for _ in 0..MAX_ITERATIONS {
            let g = self.eval(r) - r_c;
            if g.abs() <= tol {
                return Ok(r);
            }
            if g < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            if hi - lo <= f64::EPSILON * hi {
                return Ok(r);
            }
            let d = self.derivative(r);
            let newton = r - g / d;
            r = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        let g = self.eval(r) - r_c;
        if g.abs() <= tol {
            Ok(r)
        } else {
            Err(Error::NoConvergence { r_c })
        }
    }
}

impl Default for RadialParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Radial inverse with a bracket that has already been validated, for bulk
/// per-pixel use.
#[derive(Debug, Clone, Copy)]
pub struct RadialInverse {
    params: RadialParams,
    r_hi: f64,
    tol: f64,
}

impl RadialInverse {
    /// Prepare an inverse valid for every `r_c` in `[0, r_c_max]`.
    pub fn covering(params: RadialParams, r_c_max: f64, tol: f64) -> Result<Self> {
        let r_hi = params.bracket(r_c_max)?;
        Ok(Self { params, r_hi, tol })
    }

    pub fn invert(&self, r_c: f64) -> Result<f64> {
        self.params.invert_within(r_c, self.r_hi, self.tol)
    }
}

/// Radial model placed in a pair of image frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub params: RadialParams,
    /// Optical center in the distorted frame.
    pub center_d: OpticalCenter,
    /// Image of `center_d` in the rectified frame.
    pub center_c: OpticalCenter,
    /// Pixel length that maps to a normalized radius of 1.
    pub r_norm: f64,
}

impl CameraModel {
    /// Camera whose optical center is the geometric center of both frames,
    /// normalized so the inscribed circle has radius 1.
    pub fn central(params: RadialParams, height: usize, width: usize) -> Self {
        let center = Point2::geometric_center(height, width);
        Self {
            params,
            center_d: center,
            center_c: center,
            r_norm: default_r_norm(height, width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_norm > 0.0) || !self.r_norm.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "r_norm must be positive, got {}",
                self.r_norm
            )));
        }
        if !self.center_d.is_finite() || !self.center_c.is_finite() {
            return Err(Error::InvalidConfig("optical center is not finite".into()));
        }
        if !(self.params.k1 > 0.0) {
            return Err(Error::NotMonotone { radius: 0.0 });
        }
        Ok(())
    }

    /// Largest normalized distance from `center` to a corner of the frame.
    pub fn corner_radius(center: Point2, r_norm: f64, height: usize, width: usize) -> f64 {
        let (w, h) = ((width as f64 - 1.0).max(0.0), (height as f64 - 1.0).max(0.0));
        [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
            .iter()
            .map(|&(x, y)| (Point2::new(x, y) - center).norm())
            .fold(0.0, f64::max)
            / r_norm
    }

    /// Check monotonicity up to the corner radius of a distorted frame.
    pub fn validate_distorted_frame(&self, height: usize, width: usize) -> Result<()> {
        self.validate()?;
        let r_max = Self::corner_radius(self.center_d, self.r_norm, height, width);
        if r_max > 0.0 {
            let probes = ((r_max * PROBES_PER_UNIT).ceil() as usize).max(256);
            self.params.validate_monotone(r_max, probes)?;
        }
        Ok(())
    }

    /// Inverse solver covering every pixel of a rectified frame.
    pub fn inverse_for_rectified_frame(&self, height: usize, width: usize) -> Result<RadialInverse> {
        self.validate()?;
        let r_c_max = Self::corner_radius(self.center_c, self.r_norm, height, width);
        RadialInverse::covering(self.params, r_c_max, DEFAULT_TOL)
    }

    /// Where a rectified point is found in the distorted image.
    pub fn rect_to_dist(&self, p_c: Point2) -> Result<Point2> {
        let r_c = (p_c - self.center_c).norm() / self.r_norm;
        let r_d = self.params.invert(r_c, DEFAULT_TOL)?;
        Ok(self.rect_to_dist_radial(p_c, r_c, r_d))
    }

    /// [`rect_to_dist`](Self::rect_to_dist) with a prepared inverse.
    #[inline]
    pub fn rect_to_dist_with(&self, inverse: &RadialInverse, p_c: Point2) -> Result<Point2> {
        let r_c = (p_c - self.center_c).norm() / self.r_norm;
        let r_d = inverse.invert(r_c)?;
        Ok(self.rect_to_dist_radial(p_c, r_c, r_d))
    }

    #[inline]
    fn rect_to_dist_radial(&self, p_c: Point2, r_c: f64, r_d: f64) -> Point2 {
        if r_c == 0.0 {
            return self.center_d;
        }
        if r_d == r_c && self.center_c == self.center_d {
            return p_c;
        }
        self.center_d + (p_c - self.center_c) * (r_d / r_c)
    }

    /// Where a distorted point lands in the rectified image.
    #[inline]
    pub fn dist_to_rect(&self, p_d: Point2) -> Point2 {
        let offset = p_d - self.center_d;
        let r_d = offset.norm() / self.r_norm;
        if r_d == 0.0 {
            return self.center_c;
        }
        let r_c = self.params.eval(r_d);
        if r_c == r_d && self.center_c == self.center_d {
            return p_d;
        }
        self.center_c + offset * (r_c / r_d)
    }
}

/// Half the shorter side: the inscribed circle has normalized radius 1.
pub fn default_r_norm(height: usize, width: usize) -> f64 {
    height.min(width) as f64 / 2.0
}
