//! On-disk formats: landmark tracks (JSONL, CSV), feature matrices (FTEV
//! binary, CSV), PNG frame directories, scheme and statistics documents.
//!
//! Every parse error carries the file path and a line number or byte offset.

mod features;
mod frames;
mod landmarks;

use std::fs;
use std::path::Path;

pub use features::{
    encode_ftev, parse_features_csv, parse_ftev, read_embeddings, read_features,
    write_features_csv, FeatureFileHeader, FeatureFormat, FTEV_HEADER_LEN, FTEV_MAGIC,
    FTEV_VERSION,
};
pub use frames::{read_frames, scan_frames, write_frames, FrameDirectory};
pub use landmarks::{
    parse_landmarks_csv, parse_landmarks_jsonl, read_landmarks, write_landmarks_csv,
    write_landmarks_jsonl, CsvGeometry, LandmarkFileHeader, LandmarkFormat,
};

use crate::dist::{GaussianStats, StatsDocument};
use crate::error::{Error, Location, ParseError, ParseErrorKind, Result};
use crate::model::LandmarkScheme;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        ParseError::new(
            path,
            Location::Line(e.line().max(1)),
            ParseErrorKind::Malformed(e.to_string()),
        )
        .into()
    })
}

/// Loads a scheme document: `{"name": ..., "total": ..., "mouth_indices": [...]}`.
pub fn read_scheme(path: &Path) -> Result<LandmarkScheme> {
    parse_json(path, &read_text(path)?)
}

/// Loads directly supplied Gaussian statistics: `{"mean": [...], "cov": [[...]]}`.
pub fn read_stats(path: &Path) -> Result<GaussianStats> {
    let doc: StatsDocument = parse_json(path, &read_text(path)?)?;
    GaussianStats::from_document(doc)
}
