//! Dataset manifest: one JSON object per line, fields in a fixed order.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RadialParams;
use crate::labels::ViewTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Central,
    Deviated,
    DistortionFree,
}

impl fmt::Display for SampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleKind::Central => "central",
            SampleKind::Deviated => "deviated",
            SampleKind::DistortionFree => "distortion_free",
        })
    }
}

/// One emitted sample. `params` is present unless the sample is
/// distortion-free; `transform` is present exactly when it is deviated.
/// Paths are relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: u64,
    pub kind: SampleKind,
    pub source: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<RadialParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<ViewTransform>,
    pub image: String,
    pub dvm: String,
    pub flow: String,
}

impl SampleRecord {
    /// Kind-conditional field presence.
    pub fn check_schema(&self) -> std::result::Result<(), String> {
        let (want_params, want_transform) = match self.kind {
            SampleKind::Central => (true, false),
            SampleKind::Deviated => (true, true),
            SampleKind::DistortionFree => (false, false),
        };
        if self.params.is_some() != want_params {
            return Err(format!(
                "{} record must {}carry params",
                self.kind,
                if want_params { "" } else { "not " }
            ));
        }
        if self.transform.is_some() != want_transform {
            return Err(format!(
                "{} record must {}carry a transform",
                self.kind,
                if want_transform { "" } else { "not " }
            ));
        }
        Ok(())
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("sample records always serialize")
    }

    /// Parse one manifest line; `line` is the 1-based number for errors.
    pub fn decode(text: &str, line: usize) -> Result<Self> {
        let record: SampleRecord = serde_json::from_str(text).map_err(|e| Error::Schema {
            line,
            message: e.to_string(),
        })?;
        record.check_schema().map_err(|message| Error::Schema { line, message })?;
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub records: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn encode(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.encode());
            out.push('\n');
        }
        out
    }

    pub fn decode(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| SampleRecord::decode(l, i + 1))
            .collect::<Result<_>>()?;
        Ok(Self { records })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&text)
    }

    pub fn count(&self, kind: SampleKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }
}
