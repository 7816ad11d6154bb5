//! File formats: binary vector maps, the JSON-lines dataset manifest and
//! PNG images.

mod images;
mod manifest;
mod maps;

pub use images::{read_image, write_image};
pub use manifest::{DatasetManifest, SampleKind, SampleRecord};
pub use maps::{peek_kind, read_map, read_map_file, write_map, write_map_file, MapHeader, HEADER_LEN, MAGIC, VERSION};
