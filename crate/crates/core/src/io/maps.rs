//! Binary vector-map files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RFIR"
//! 4       1     version (1)
//! 5       1     kind (0 = flow, 1 = dvm)
//! 6       2     reserved, zero
//! 8       4     height   (u32 LE)
//! 12      4     width    (u32 LE)
//! 16      4     channels (u32 LE, always 2)
//! 20      ...   height * width * 2 f32 LE, row-major, (x, y) interleaved
//! ```
//!
//! Values are stored as 32-bit floats, so a map survives a write/read
//! cycle bit-exactly only if its entries are representable in `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::labels::{MapKind, VectorMap};

pub const MAGIC: [u8; 4] = *b"RFIR";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
const CHANNELS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapHeader {
    pub kind: u8,
    pub height: u32,
    pub width: u32,
}

impl MapHeader {
    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4] = VERSION;
        out[5] = self.kind;
        out[8..12].copy_from_slice(&self.height.to_le_bytes());
        out[12..16].copy_from_slice(&self.width.to_le_bytes());
        out[16..20].copy_from_slice(&CHANNELS.to_le_bytes());
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(Error::BadVersion(bytes[4]));
        }
        if bytes[6..8] != [0, 0] {
            return Err(Error::BadHeader("reserved bytes are not zero".into()));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let channels = word(16);
        if channels != CHANNELS {
            return Err(Error::BadHeader(format!("expected 2 channels, found {channels}")));
        }
        Ok(Self {
            kind: bytes[5],
            height: word(8),
            width: word(12),
        })
    }

    fn payload_len(&self) -> usize {
        self.height as usize * self.width as usize * CHANNELS as usize * 4
    }
}

/// Serialize a map; fails on non-finite entries.
pub fn write_map<K: MapKind>(map: &VectorMap<K>, mut out: impl Write) -> Result<()> {
    if !map.is_finite() {
        return Err(Error::InvalidConfig(format!("{} map has non-finite entries", K::NAME)));
    }
    let header = MapHeader {
        kind: K::CODE,
        height: dim_u32(map.height())?,
        width: dim_u32(map.width())?,
    };
    let mut bytes = Vec::with_capacity(HEADER_LEN + header.payload_len());
    bytes.extend_from_slice(&header.encode());
    for v in map.data() {
        bytes.extend_from_slice(&(v[0] as f32).to_le_bytes());
        bytes.extend_from_slice(&(v[1] as f32).to_le_bytes());
    }
    out.write_all(&bytes).map_err(|e| Error::io("<map stream>", e))
}

fn dim_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::BadHeader(format!("dimension {n} does not fit in u32")))
}

/// Parse a map, checking magic, version, kind, channel count and length.
pub fn read_map<K: MapKind>(mut input: impl Read) -> Result<VectorMap<K>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<map stream>", e))?;
    decode_map(&bytes)
}

fn decode_map<K: MapKind>(bytes: &[u8]) -> Result<VectorMap<K>> {
    let header = MapHeader::decode(bytes)?;
    if header.kind != K::CODE {
        return Err(Error::KindMismatch {
            expected: K::CODE,
            found: header.kind,
        });
    }
    let expected = HEADER_LEN + header.payload_len();
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::BadHeader(format!(
            "{} trailing bytes after the payload",
            bytes.len() - expected
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            let x = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let y = f32::from_le_bytes(c[4..8].try_into().unwrap());
            [f64::from(x), f64::from(y)]
        })
        .collect();
    VectorMap::new(header.height as usize, header.width as usize, data)
}

pub fn write_map_file<K: MapKind>(path: impl AsRef<Path>, map: &VectorMap<K>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_map(map, &mut out).map_err(|e| relabel(e, path))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_map_file<K: MapKind>(path: impl AsRef<Path>) -> Result<VectorMap<K>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_map(BufReader::new(file)).map_err(|e| relabel(e, path))
}

/// Kind code stored in a map file header.
pub fn peek_kind(path: impl AsRef<Path>) -> Result<u8> {
    let path = path.as_ref();
    let mut bytes = [0u8; HEADER_LEN];
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut filled = 0;
    while filled < HEADER_LEN {
        let n = file.read(&mut bytes[filled..]).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    Ok(MapHeader::decode(&bytes[..filled])?.kind)
}

fn relabel(err: Error, path: &Path) -> Error {
    match err {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{DistortionVectorMap, FlowMap};
    use proptest::prelude::*;

    fn encode<K: MapKind>(map: &VectorMap<K>) -> Vec<u8> {
        let mut out = Vec::new();
        write_map(map, &mut out).unwrap();
        out
    }

    #[test]
    fn one_pixel_flow_bytes() {
        let bytes = encode(&FlowMap::filled(1, 1, [3.5, -2.0]));
        assert_eq!(bytes.len(), HEADER_LEN + 8);
        assert_eq!(&bytes[..8], b"RFIR\x01\x00\x00\x00");
        assert_eq!(&bytes[8..20], &[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[20..], &[0x00, 0x00, 0x60, 0x40, 0x00, 0x00, 0x00, 0xC0]);
    }

    #[test]
    fn kind_mismatch() {
        let bytes = encode(&FlowMap::filled(2, 3, [1.0, 2.0]));
        let err = read_map::<crate::labels::Dvm>(&bytes[..]).unwrap_err();
        assert!(matches!(err, Error::KindMismatch { expected: 1, found: 0 }));
    }

    #[test]
    fn header_validation() {
        let good = encode(&DistortionVectorMap::filled(2, 2, [0.5, 0.25]));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(read_map::<crate::labels::Dvm>(&bad[..]), Err(Error::BadMagic(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(read_map::<crate::labels::Dvm>(&bad[..]), Err(Error::BadVersion(2))));
        assert!(matches!(
            read_map::<crate::labels::Dvm>(&good[..good.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(read_map::<crate::labels::Dvm>(&good[..10]), Err(Error::Truncated { .. })));
        let mut bad = good.clone();
        bad[16] = 3;
        assert!(matches!(read_map::<crate::labels::Dvm>(&bad[..]), Err(Error::BadHeader(_))));
        let mut long = good;
        long.push(0);
        assert!(matches!(read_map::<crate::labels::Dvm>(&long[..]), Err(Error::BadHeader(_))));
    }

    #[test]
    fn non_finite_maps_are_rejected() {
        let map = FlowMap::filled(1, 1, [f64::NAN, 0.0]);
        assert!(write_map(&map, Vec::new()).is_err());
    }

    proptest! {
        #[test]
        fn f32_maps_round_trip_exactly(
            h in 1usize..6,
            w in 1usize..6,
            values in proptest::collection::vec(proptest::num::f32::NORMAL | proptest::num::f32::ZERO, 72),
        ) {
            let map = FlowMap::from_fn(h, w, |u, v| {
                let i = 2 * (v * w + u);
                [f64::from(values[i]), f64::from(values[i + 1])]
            });
            let bytes = encode(&map);
            let back: FlowMap = read_map(&bytes[..]).unwrap();
            prop_assert_eq!(&back, &map);
            prop_assert_eq!(encode(&back), bytes);
        }
    }
}
