//! Scoring toolkit for talking-face videos.
//!
//! Everything operates on precomputed inputs: landmark tracks, extracted PNG
//! frames, feature embeddings and audio/visual embedding streams. The metric
//! modules are pure functions over the types in [`model`]; [`ingest`] reads
//! and writes the on-disk formats and [`report`] runs batch evaluations.

pub mod adfd;
pub mod dist;
pub mod error;
pub mod image_metrics;
pub mod ingest;
pub mod linalg;
pub mod lmd;
pub mod model;
pub mod report;
pub mod sync;
pub mod synth;

pub use error::{Error, ErrorClass, Location, ParseError, ParseErrorKind, Result};
