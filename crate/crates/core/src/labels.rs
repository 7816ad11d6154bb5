//! Supervision maps: the distortion vector map (DVM) and the backward flow
//! map, plus the crop-and-resize transform that turns labels of a central
//! sample into labels of a deviated one.
//!
//! DVM entries point from the optical center toward the pixel and have
//! magnitude `r_d / r_c`. The same orientation is used for the unit-vector
//! label of distortion-free images; see [`UNIT_DVM_ORIENTATION`].

use std::fmt;
use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Point2};
use crate::par;
use crate::rectify::Taps;

/// Marker for what a [`VectorMap`] stores.
pub trait MapKind: Send + Sync + 'static {
    /// Code written in the map file header.
    const CODE: u8;
    const NAME: &'static str;
}

/// Absolute source coordinates in the distorted frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow;

/// Distortion vectors: magnitude `r_d / r_c`, radial direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dvm;

impl MapKind for Flow {
    const CODE: u8 = 0;
    const NAME: &'static str = "flow";
}

impl MapKind for Dvm {
    const CODE: u8 = 1;
    const NAME: &'static str = "dvm";
}

/// H x W grid of 2-vectors, row-major.
pub struct VectorMap<K> {
    height: usize,
    width: usize,
    data: Vec<[f64; 2]>,
    kind: PhantomData<fn() -> K>,
}

pub type FlowMap = VectorMap<Flow>;
pub type DistortionVectorMap = VectorMap<Dvm>;

impl<K> Clone for VectorMap<K> {
    fn clone(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.clone(),
            kind: PhantomData,
        }
    }
}

impl<K> PartialEq for VectorMap<K> {
    fn eq(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.data == other.data
    }
}

impl<K: MapKind> fmt::Debug for VectorMap<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorMap")
            .field("kind", &K::NAME)
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl<K> VectorMap<K> {
    pub fn new(height: usize, width: usize, data: Vec<[f64; 2]>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: (height, width),
                found: (data.len(), 1),
            });
        }
        Ok(Self {
            height,
            width,
            data,
            kind: PhantomData,
        })
    }

    pub fn filled(height: usize, width: usize, value: [f64; 2]) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
            kind: PhantomData,
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> [f64; 2]) -> Self {
        let data = (0..height)
            .flat_map(|v| (0..width).map(move |u| (u, v)))
            .map(|(u, v)| f(u, v))
            .collect();
        Self {
            height,
            width,
            data,
            kind: PhantomData,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[[f64; 2]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.data[y * self.width + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v[0].is_finite() && v[1].is_finite())
    }

    /// Componentwise bilinear sample; `None` outside the closed box.
    pub fn sample(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        let t = Taps::at(x, y, self.width, self.height)?;
        let (a, b) = (self.get(t.x0, t.y0), self.get(t.x1, t.y0));
        let (c, d) = (self.get(t.x0, t.y1), self.get(t.x1, t.y1));
        Some([
            t.lerp(a[0], b[0], c[0], d[0]),
            t.lerp(a[1], b[1], c[1], d[1]),
        ])
    }

    fn build(height: usize, width: usize, f: impl Fn(usize, usize) -> [f64; 2] + Send + Sync) -> Self {
        let mut data = vec![[0.0; 2]; height * width];
        par::fill_rows(&mut data, width, |v, row| {
            for (u, slot) in row.iter_mut().enumerate() {
                *slot = f(u, v);
            }
        });
        Self {
            height,
            width,
            data,
            kind: PhantomData,
        }
    }
}

/// Orientation of DVM vectors, shared by [`compute_dvm`] and [`unit_dvm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvmOrientation {
    /// From the optical center toward the pixel.
    Outward,
    /// From the pixel toward the optical center.
    Inward,
}

impl DvmOrientation {
    fn sign(self) -> f64 {
        match self {
            DvmOrientation::Outward => 1.0,
            DvmOrientation::Inward => -1.0,
        }
    }
}

/// The orientation every emitted DVM uses, including distortion-free labels.
pub const UNIT_DVM_ORIENTATION: DvmOrientation = DvmOrientation::Outward;

/// DVM of a distorted `height` x `width` image produced by `cam`.
///
/// Each pixel holds `(r_d / r_c)` times the unit vector from `center_d`
/// toward the pixel. A pixel that coincides with the optical center holds
/// the zero vector.
pub fn compute_dvm(cam: &CameraModel, height: usize, width: usize) -> Result<DistortionVectorMap> {
    cam.validate_distorted_frame(height, width)?;
    let sign = UNIT_DVM_ORIENTATION.sign();
    Ok(DistortionVectorMap::build(height, width, |u, v| {
        let offset = Point2::new(u as f64, v as f64) - cam.center_d;
        let dist = offset.norm();
        if dist == 0.0 {
            return [0.0, 0.0];
        }
        let r_d = dist / cam.r_norm;
        let ratio = r_d / cam.params.eval(r_d);
        let s = sign * ratio / dist;
        [offset.x * s, offset.y * s]
    }))
}

/// Label of a distortion-free image: unit vectors along the line through
/// the geometric center, zero at the center pixel.
pub fn unit_dvm(height: usize, width: usize) -> DistortionVectorMap {
    let center = Point2::geometric_center(height, width);
    let sign = UNIT_DVM_ORIENTATION.sign();
    DistortionVectorMap::build(height, width, |u, v| {
        let offset = Point2::new(u as f64, v as f64) - center;
        let dist = offset.norm();
        if dist == 0.0 {
            return [0.0, 0.0];
        }
        [sign * offset.x / dist, sign * offset.y / dist]
    })
}

/// Backward flow that rectifies an image distorted by `cam`: rectified
/// pixel `(u, v)` samples the distorted image at `rect_to_dist(u, v)`.
pub fn compute_backward_flow(cam: &CameraModel, height: usize, width: usize) -> Result<FlowMap> {
    if cam.params.is_identity() && cam.center_c == cam.center_d {
        cam.validate()?;
        return Ok(identity_flow(height, width));
    }
    let inverse = cam.inverse_for_rectified_frame(height, width)?;
    let mut data = vec![[0.0; 2]; height * width];
    par::try_fill_rows(&mut data, width, |v, row| {
        for (u, slot) in row.iter_mut().enumerate() {
            let p = cam.rect_to_dist_with(&inverse, Point2::new(u as f64, v as f64))?;
            *slot = [p.x, p.y];
        }
        Ok::<(), Error>(())
    })?;
    FlowMap::new(height, width, data)
}

/// Flow of a distortion-free image: every pixel maps to itself.
pub fn identity_flow(height: usize, width: usize) -> FlowMap {
    FlowMap::build(height, width, |u, v| [u as f64, v as f64])
}

/// Square crop at `(crop_x, crop_y)` of side `crop_side`, resized to
/// `out_side` with corner-aligned sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewTransform {
    pub crop_x: u32,
    pub crop_y: u32,
    pub crop_side: u32,
    pub out_side: u32,
}

impl ViewTransform {
    /// Full-frame transform of a square `side` x `side` image.
    pub fn identity(side: u32) -> Self {
        Self {
            crop_x: 0,
            crop_y: 0,
            crop_side: side,
            out_side: side,
        }
    }

    /// Output pixels per source pixel.
    pub fn scale(&self) -> f64 {
        f64::from(self.out_side - 1) / f64::from(self.crop_side - 1)
    }

    pub fn origin(&self) -> Point2 {
        Point2::new(f64::from(self.crop_x), f64::from(self.crop_y))
    }

    /// Check the crop against a `(height, width)` source frame.
    pub fn validate(&self, src_dims: (usize, usize)) -> Result<()> {
        let (h, w) = src_dims;
        if self.crop_side < 2 || self.out_side < 2 {
            return Err(Error::InvalidTransform(format!(
                "crop side {} and output side {} must both be at least 2",
                self.crop_side, self.out_side
            )));
        }
        let right = u64::from(self.crop_x) + u64::from(self.crop_side);
        let bottom = u64::from(self.crop_y) + u64::from(self.crop_side);
        if right > w as u64 || bottom > h as u64 {
            return Err(Error::InvalidTransform(format!(
                "crop {}+{} x {}+{} exceeds the {h}x{w} source",
                self.crop_x, self.crop_side, self.crop_y, self.crop_side
            )));
        }
        Ok(())
    }

    /// Source position of output pixel `q`.
    #[inline]
    pub fn preimage(&self, q: Point2) -> Point2 {
        let num = f64::from(self.crop_side - 1);
        let den = f64::from(self.out_side - 1);
        Point2::new(
            f64::from(self.crop_x) + q.x * num / den,
            f64::from(self.crop_y) + q.y * num / den,
        )
    }

    /// Output position of source point `p`.
    #[inline]
    pub fn forward(&self, p: Point2) -> Point2 {
        (p - self.origin()) * self.scale()
    }

    /// Camera describing the cropped and resized frames: both optical
    /// centers move with the crop and `r_norm` scales with the resize.
    pub fn apply_to_camera(&self, cam: &CameraModel) -> CameraModel {
        CameraModel {
            params: cam.params,
            center_d: self.forward(cam.center_d),
            center_c: self.forward(cam.center_c),
            r_norm: cam.r_norm * self.scale(),
        }
    }

    fn resample<K>(&self, src: &VectorMap<K>, remap: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync) -> Result<VectorMap<K>> {
        self.validate(src.dims())?;
        let side = self.out_side as usize;
        let mut data = vec![[0.0; 2]; side * side];
        par::try_fill_rows(&mut data, side, |v, row| {
            for (u, slot) in row.iter_mut().enumerate() {
                let p = self.preimage(Point2::new(u as f64, v as f64));
                let value = src.sample(p.x, p.y).ok_or_else(|| {
                    Error::InvalidTransform(format!("preimage ({}, {}) left the source", p.x, p.y))
                })?;
                *slot = remap(value);
            }
            Ok::<(), Error>(())
        })?;
        VectorMap::new(side, side, data)
    }
}

/// Crop and resize a DVM. Vector values are copied unchanged: magnitude
/// ratios and radial directions are invariant under scaling plus translation.
pub fn transform_dvm(src: &DistortionVectorMap, t: &ViewTransform) -> Result<DistortionVectorMap> {
    t.resample(src, |v| v)
}

/// Crop and resize a flow map. Values are absolute coordinates in the
/// distorted frame, so they move with the crop and scale with the resize.
pub fn transform_flow(src: &FlowMap, t: &ViewTransform) -> Result<FlowMap> {
    let origin = t.origin();
    let scale = t.scale();
    t.resample(src, |f| [(f[0] - origin.x) * scale, (f[1] - origin.y) * scale])
}
