use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

/// Read any format the `image` crate decodes, converted to 8-bit RGB.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|source| Error::ImageCodec {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = decoded.into_rgb8();
    let (w, h) = rgb.dimensions();
    Image::new(h as usize, w as usize, rgb.into_raw())
}

/// Write a lossless PNG.
pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::ImageCodec {
        path: path.to_path_buf(),
        source,
    })
}
