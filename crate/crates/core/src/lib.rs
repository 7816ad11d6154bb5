//! Fisheye distortion toolkit.
//!
//! * [`geometry`]: the odd radial polynomial model and its inverse.
//! * [`labels`]: distortion vector maps, backward flow maps and the
//!   crop-and-resize transform of both.
//! * [`rectify`]: bilinear backward sampling.
//! * [`synthesis`]: central, deviated and distortion-free sample generation.
//! * [`metrics`]: PSNR and SSIM.
//! * [`io`]: map files, manifests and images.
//!
//! Bulk per-pixel kernels run on rayon when the `rayon` feature is enabled
//! (the default) and as plain loops otherwise.

pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod labels;
pub mod metrics;
mod par;
pub mod rectify;
pub mod synthesis;

pub use error::{Error, Result};
pub use geometry::{CameraModel, OpticalCenter, Point2, RadialParams};
pub use image::{FloatImage, Image, Mask};
pub use labels::{DistortionVectorMap, FlowMap, ViewTransform};
pub use metrics::MetricConfig;
