//! Synthetic dataset construction.
//!
//! A central sample renders a distortion-free source through a radial
//! camera whose optical center is the geometric center. A deviated sample
//! is a random square crop of a central one, resized back to the output
//! resolution, with its labels cropped the same way. Distortion-free
//! samples pass the source through with unit-vector and identity labels.
//!
//! All randomness of sample `i` comes from a ChaCha stream seeded with
//! [`sample_seed`]`(master, i)`, so output does not depend on how samples
//! are scheduled across workers.

mod sources;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use sources::procedural_source;

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Point2, RadialParams};
use crate::image::{Image, Mask};
use crate::io::{self, DatasetManifest, SampleKind, SampleRecord};
use crate::labels::{
    compute_backward_flow, compute_dvm, identity_flow, transform_dvm, transform_flow, unit_dvm,
    DistortionVectorMap, FlowMap, ViewTransform,
};
use crate::par;
use crate::rectify::{bilinear_sample, valid_mask};

/// Normalized radius that accepted parameters must stay monotone over: the
/// corner of a square frame.
pub const MONOTONE_RADIUS: f64 = std::f64::consts::SQRT_2;
const MONOTONE_PROBES: usize = 2048;

/// Closed sampling interval per coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRanges {
    pub k1: [f64; 2],
    pub k2: [f64; 2],
    pub k3: [f64; 2],
    pub k4: [f64; 2],
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
}

fn default_attempts() -> u32 {
    1000
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            k1: [0.8, 1.2],
            k2: [0.0, 0.5],
            k3: [0.0, 0.3],
            k4: [0.0, 0.2],
            max_attempts: default_attempts(),
        }
    }
}

impl ParamRanges {
    /// Every draw yields exactly `p`.
    pub fn fixed(p: RadialParams) -> Self {
        Self {
            k1: [p.k1; 2],
            k2: [p.k2; 2],
            k3: [p.k3; 2],
            k4: [p.k4; 2],
            max_attempts: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3), ("k4", self.k4)] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} interval [{lo}, {hi}] is empty")));
            }
        }
        if !(self.k1[0] > 0.0) {
            return Err(Error::InvalidConfig("k1 interval must be strictly positive".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidConfig("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draw coefficients uniformly per interval, redrawing until the profile is
/// monotone on `[0, sqrt 2]`.
pub fn sample_params(rng: &mut impl Rng, ranges: &ParamRanges) -> Result<RadialParams> {
    ranges.validate()?;
    for _ in 0..ranges.max_attempts {
        let p = RadialParams::new(
            uniform(rng, ranges.k1),
            uniform(rng, ranges.k2),
            uniform(rng, ranges.k3),
            uniform(rng, ranges.k4),
        );
        if p.validate_monotone(MONOTONE_RADIUS, MONOTONE_PROBES).is_ok() {
            return Ok(p);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: ranges.max_attempts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Side of the square output images.
    pub resolution: u32,
    pub count: usize,
    pub deviation_probability: f64,
    pub free_fraction: f64,
    /// Crop side as a fraction of the resolution.
    pub crop_ratio: [f64; 2],
    pub ranges: ParamRanges,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            resolution: 256,
            count: 0,
            deviation_probability: 0.7,
            free_fraction: 0.2,
            crop_ratio: [0.4, 0.9],
            ranges: ParamRanges::default(),
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.deviation_probability) {
            return Err(Error::InvalidConfig(format!(
                "deviation probability {} is outside [0, 1]",
                self.deviation_probability
            )));
        }
        if !unit(self.free_fraction) {
            return Err(Error::InvalidConfig(format!(
                "distortion-free fraction {} is outside [0, 1]",
                self.free_fraction
            )));
        }
        if self.resolution < 32 {
            return Err(Error::InvalidConfig(format!("resolution {} is below 32", self.resolution)));
        }
        let [lo, hi] = self.crop_ratio;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidConfig(format!("crop ratio interval [{lo}, {hi}] is not inside (0, 1]")));
        }
        self.ranges.validate()
    }

    /// Number of distortion-free samples, exact by count.
    pub fn free_count(&self) -> usize {
        (self.count as f64 * self.free_fraction).round() as usize
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `index` under `master`.
pub fn sample_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub fn sample_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Backward map used to render a fisheye image: distorted pixel `p` reads
/// the source at `dist_to_rect(p)`.
pub fn distortion_flow(cam: &CameraModel, height: usize, width: usize) -> Result<FlowMap> {
    cam.validate_distorted_frame(height, width)?;
    let data = par::map_indices(height * width, |i| {
        let p = cam.dist_to_rect(Point2::new((i % width) as f64, (i / width) as f64));
        [p.x, p.y]
    });
    FlowMap::new(height, width, data)
}

/// Render `src` through `cam` into a frame of the same size. Pixels whose
/// source position falls outside `src` are black.
pub fn render_fisheye(src: &Image, cam: &CameraModel) -> Result<Image> {
    let (h, w) = src.dims();
    bilinear_sample(src, &distortion_flow(cam, h, w)?)
}

/// Pixels of a rendered image that received source content.
pub fn render_valid_mask(cam: &CameraModel, height: usize, width: usize) -> Result<Mask> {
    Ok(valid_mask(&distortion_flow(cam, height, width)?, (height, width)))
}

/// Corner-aligned bilinear resize to `side` x `side`.
pub fn resize_square(src: &Image, side: usize) -> Image {
    if src.dims() == (side, side) {
        return src.clone();
    }
    let (h, w) = src.dims();
    let sx = if side > 1 { (w as f64 - 1.0) / (side as f64 - 1.0) } else { 0.0 };
    let sy = if side > 1 { (h as f64 - 1.0) / (side as f64 - 1.0) } else { 0.0 };
    let flow = FlowMap::from_fn(side, side, |u, v| [u as f64 * sx, v as f64 * sy]);
    bilinear_sample(src, &flow).expect("resize flow stays in range")
}

/// Flow that crops and resizes an image according to `t`.
pub fn view_flow(t: &ViewTransform) -> FlowMap {
    let side = t.out_side as usize;
    FlowMap::from_fn(side, side, |u, v| {
        let p = t.preimage(Point2::new(u as f64, v as f64));
        [p.x, p.y]
    })
}

pub fn crop_resize(img: &Image, t: &ViewTransform) -> Result<Image> {
    t.validate(img.dims())?;
    bilinear_sample(img, &view_flow(t))
}

/// An image with its two labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: Image,
    pub dvm: DistortionVectorMap,
    pub flow: FlowMap,
}

/// Central sample of `src` under `params`.
pub fn make_central(src: &Image, params: RadialParams) -> Result<LabeledSample> {
    let (h, w) = src.dims();
    let cam = CameraModel::central(params, h, w);
    Ok(LabeledSample {
        image: render_fisheye(src, &cam)?,
        dvm: compute_dvm(&cam, h, w)?,
        flow: compute_backward_flow(&cam, h, w)?,
    })
}

/// Distortion-free sample: the source itself with unit-vector and identity
/// labels.
pub fn make_distortion_free(src: &Image) -> LabeledSample {
    let (h, w) = src.dims();
    LabeledSample {
        image: src.clone(),
        dvm: unit_dvm(h, w),
        flow: identity_flow(h, w),
    }
}

/// Draw a square crop whose side is `ratio * resolution` with `ratio`
/// uniform in `crop_ratio`, placed uniformly inside the frame.
pub fn sample_transform(rng: &mut impl Rng, resolution: u32, crop_ratio: [f64; 2]) -> ViewTransform {
    let ratio = uniform(rng, crop_ratio);
    let side = ((ratio * f64::from(resolution)).round() as u32).clamp(2, resolution);
    let slack = resolution - side;
    ViewTransform {
        crop_x: rng.random_range(0..=slack),
        crop_y: rng.random_range(0..=slack),
        crop_side: side,
        out_side: resolution,
    }
}

/// Apply a view transform to a central sample.
pub fn apply_view(central: &LabeledSample, t: &ViewTransform) -> Result<LabeledSample> {
    let dims = central.image.dims();
    if central.dvm.dims() != dims || central.flow.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            found: if central.dvm.dims() != dims { central.dvm.dims() } else { central.flow.dims() },
        });
    }
    Ok(LabeledSample {
        image: crop_resize(&central.image, t)?,
        dvm: transform_dvm(&central.dvm, t)?,
        flow: transform_flow(&central.flow, t)?,
    })
}

/// Turn a central sample into a deviated one with a freshly drawn crop.
pub fn make_deviated(
    central: &LabeledSample,
    rng: &mut impl Rng,
    cfg: &DatasetConfig,
) -> Result<(LabeledSample, ViewTransform)> {
    let t = sample_transform(rng, cfg.resolution, cfg.crop_ratio);
    debug_assert!(t.validate(central.image.dims()).is_ok());
    Ok((apply_view(central, &t)?, t))
}

/// Everything decided about a sample before any pixels are produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub id: u64,
    pub kind: SampleKind,
    pub seed: u64,
    pub source_index: usize,
    pub params: Option<RadialParams>,
    pub transform: Option<ViewTransform>,
}

/// Decide kind, parameters and crop of every sample. The distortion-free
/// subset is a seeded choice of exactly [`DatasetConfig::free_count`]
/// indices; the others are deviated independently with
/// `deviation_probability`.
pub fn plan_dataset(cfg: &DatasetConfig, n_sources: usize) -> Result<Vec<SamplePlan>> {
    cfg.validate()?;
    if n_sources == 0 {
        return Err(Error::InsufficientSources("no source images supplied".into()));
    }
    let mut free = vec![false; cfg.count];
    let mut picker = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in index::sample(&mut picker, cfg.count, cfg.free_count()) {
        free[i] = true;
    }
    let plans = par::map_indices(cfg.count, |i| -> Result<SamplePlan> {
        let seed = sample_seed(cfg.seed, i as u64);
        let mut plan = SamplePlan {
            id: i as u64,
            kind: SampleKind::DistortionFree,
            seed,
            source_index: i % n_sources,
            params: None,
            transform: None,
        };
        if free[i] {
            return Ok(plan);
        }
        let mut rng = sample_rng(seed);
        plan.params = Some(sample_params(&mut rng, &cfg.ranges).map_err(|e| e.in_sample(i as u64))?);
        plan.kind = SampleKind::Central;
        if rng.random_bool(cfg.deviation_probability) {
            plan.kind = SampleKind::Deviated;
            plan.transform = Some(sample_transform(&mut rng, cfg.resolution, cfg.crop_ratio));
        }
        Ok(plan)
    });
    plans.into_iter().collect()
}

/// Produce the image and labels of a planned sample from its source.
pub fn render_sample(plan: &SamplePlan, source: &Image, resolution: u32) -> Result<LabeledSample> {
    let src = resize_square(source, resolution as usize);
    match (plan.kind, plan.params, plan.transform) {
        (SampleKind::DistortionFree, _, _) => Ok(make_distortion_free(&src)),
        (SampleKind::Central, Some(p), _) => make_central(&src, p),
        (SampleKind::Deviated, Some(p), Some(t)) => apply_view(&make_central(&src, p)?, &t),
        _ => Err(Error::InvalidConfig(format!("sample {} plan is incomplete", plan.id))),
    }
}

fn relative_display(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

fn record_for(plan: &SamplePlan, source: &Path, root: &Path) -> SampleRecord {
    SampleRecord {
        id: plan.id,
        kind: plan.kind,
        source: relative_display(source, root),
        seed: plan.seed,
        params: plan.params,
        transform: plan.transform,
        image: format!("images/{:06}.png", plan.id),
        dvm: format!("dvm/{:06}.dvm", plan.id),
        flow: format!("flow/{:06}.flow", plan.id),
    }
}

/// Manifest the builder would emit, without rendering anything.
pub fn plan_manifest(cfg: &DatasetConfig, sources: &[PathBuf], out_dir: &Path) -> Result<DatasetManifest> {
    let plans = plan_dataset(cfg, sources.len())?;
    Ok(DatasetManifest {
        records: plans
            .iter()
            .map(|p| record_for(p, &sources[p.source_index], out_dir))
            .collect(),
    })
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Render and write every sample plus `manifest.jsonl` under `out_dir`.
pub fn build_dataset(cfg: &DatasetConfig, sources: &[PathBuf], out_dir: &Path) -> Result<DatasetManifest> {
    let plans = plan_dataset(cfg, sources.len())?;
    for sub in ["images", "dvm", "flow"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let results = par::map_indices(plans.len(), |i| -> Result<SampleRecord> {
        let plan = &plans[i];
        let source_path = &sources[plan.source_index];
        let record = record_for(plan, source_path, out_dir);
        let emit = || -> Result<()> {
            let source = io::read_image(source_path)?;
            let sample = render_sample(plan, &source, cfg.resolution)?;
            if !sample.dvm.is_finite() || !sample.flow.is_finite() {
                return Err(Error::InvalidConfig("non-finite label".into()));
            }
            io::write_image(out_dir.join(&record.image), &sample.image)?;
            io::write_map_file(out_dir.join(&record.dvm), &sample.dvm)?;
            io::write_map_file(out_dir.join(&record.flow), &sample.flow)
        };
        emit().map_err(|e| e.in_sample(plan.id))?;
        Ok(record)
    });
    let manifest = DatasetManifest {
        records: results.into_iter().collect::<Result<_>>()?,
    };
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(count: usize) -> DatasetConfig {
        DatasetConfig {
            resolution: 48,
            count,
            seed: 7,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn fixed_ranges_give_fixed_params() {
        let mut rng = sample_rng(1);
        let ranges = ParamRanges::fixed(RadialParams::IDENTITY);
        for _ in 0..5 {
            assert_eq!(sample_params(&mut rng, &ranges).unwrap(), RadialParams::IDENTITY);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let ranges = ParamRanges::default();
        let a = sample_params(&mut sample_rng(42), &ranges).unwrap();
        let b = sample_params(&mut sample_rng(42), &ranges).unwrap();
        assert_eq!(a, b);
        let ta = sample_transform(&mut sample_rng(9), 256, [0.4, 0.9]);
        let tb = sample_transform(&mut sample_rng(9), 256, [0.4, 0.9]);
        assert_eq!(ta, tb);
        ta.validate((256, 256)).unwrap();
    }

    #[test]
    fn rejection_budget_is_enforced() {
        let ranges = ParamRanges {
            k1: [1.0, 1.0],
            k2: [-2.0, -1.0],
            k3: [0.0, 0.0],
            k4: [0.0, 0.0],
            max_attempts: 20,
        };
        assert!(matches!(
            sample_params(&mut sample_rng(3), &ranges),
            Err(Error::RejectionExhausted { attempts: 20 })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg(4);
        cfg.validate().unwrap();
        cfg.deviation_probability = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(4);
        cfg.resolution = 16;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(4);
        cfg.ranges.k1 = [-0.1, 1.0];
        assert!(cfg.validate().is_err());
        assert!(matches!(plan_dataset(&small_cfg(4), 0), Err(Error::InsufficientSources(_))));
    }

    #[test]
    fn identity_camera_renders_source_exactly() {
        let src = procedural_source(3, 40);
        let cam = CameraModel::central(RadialParams::IDENTITY, 40, 40);
        assert_eq!(render_fisheye(&src, &cam).unwrap(), src);
    }

    #[test]
    fn optical_center_pixel_is_fixed() {
        let src = procedural_source(4, 41);
        let cam = CameraModel::central(RadialParams::new(0.9, 0.3, 0.1, 0.05), 41, 41);
        let out = render_fisheye(&src, &cam).unwrap();
        assert_eq!(out.pixel(20, 20), src.pixel(20, 20));
    }

    #[test]
    fn fisheye_has_dark_border() {
        let src = Image::from_fn(64, 64, |_, _| [200, 180, 160]);
        let cam = CameraModel::central(RadialParams::new(1.0, 0.4, 0.2, 0.1), 64, 64);
        let out = render_fisheye(&src, &cam).unwrap();
        assert_eq!(out.pixel(0, 0), [0, 0, 0]);
        let mask = render_valid_mask(&cam, 64, 64).unwrap();
        assert!(!mask.get(0, 0) && mask.get(32, 32));
    }

    #[test]
    fn full_frame_deviation_is_identity() {
        let src = procedural_source(8, 48);
        let central = make_central(&src, RadialParams::new(1.0, 0.2, 0.1, 0.0)).unwrap();
        let mut cfg = small_cfg(1);
        cfg.crop_ratio = [1.0, 1.0];
        let (dev, t) = make_deviated(&central, &mut sample_rng(5), &cfg).unwrap();
        assert_eq!(t, ViewTransform::identity(48));
        assert_eq!(dev, central);
    }

    #[test]
    fn deviated_transform_is_deterministic() {
        let src = procedural_source(8, 48);
        let central = make_central(&src, RadialParams::new(1.0, 0.2, 0.1, 0.0)).unwrap();
        let cfg = small_cfg(1);
        let (a, ta) = make_deviated(&central, &mut sample_rng(77), &cfg).unwrap();
        let (b, tb) = make_deviated(&central, &mut sample_rng(77), &cfg).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
    }

    #[test]
    fn plan_counts_without_deviation() {
        let mut cfg = small_cfg(10);
        cfg.deviation_probability = 0.0;
        let plans = plan_dataset(&cfg, 3).unwrap();
        let free = plans.iter().filter(|p| p.kind == SampleKind::DistortionFree).count();
        let central = plans.iter().filter(|p| p.kind == SampleKind::Central).count();
        assert_eq!((free, central), (2, 8));
        assert!(plans.iter().all(|p| p.transform.is_none()));
        assert_eq!(plans[4].source_index, 1);
    }

    #[test]
    fn plan_counts_with_certain_deviation() {
        let mut cfg = small_cfg(10);
        cfg.deviation_probability = 1.0;
        let plans = plan_dataset(&cfg, 1).unwrap();
        let deviated: Vec<_> = plans.iter().filter(|p| p.kind == SampleKind::Deviated).collect();
        assert_eq!(deviated.len(), 8);
        assert!(deviated.iter().all(|p| p.transform.is_some() && p.params.is_some()));
    }

    #[test]
    fn plans_are_reproducible() {
        let cfg = small_cfg(50);
        assert_eq!(plan_dataset(&cfg, 4).unwrap(), plan_dataset(&cfg, 4).unwrap());
        let other = DatasetConfig { seed: 8, ..cfg.clone() };
        assert_ne!(plan_dataset(&cfg, 4).unwrap(), plan_dataset(&other, 4).unwrap());
    }

    #[test]
    fn sample_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| sample_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(sample_seed(7, 0), sample_seed(8, 0));
    }
}
