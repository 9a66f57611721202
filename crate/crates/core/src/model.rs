//! Shared domain types: landmark sequences, motion fields, frame rasters,
//! feature matrices and the configuration types the metrics consume.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPS: f64 = 25.0;

/// A 2-D landmark position in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Per-landmark displacement between two consecutive frames, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
}

impl Displacement {
    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn is_zero(self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }
}

impl Sub for Point {
    type Output = Displacement;

    fn sub(self, rhs: Point) -> Displacement {
        Displacement::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Add<Displacement> for Point {
    type Output = Point;

    fn add(self, rhs: Displacement) -> Point {
        Point::new(self.x + rhs.dx, self.y + rhs.dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameLandmarks {
    pub index: usize,
    pub points: Vec<Point>,
}

impl FrameLandmarks {
    pub fn new(index: usize, points: Vec<Point>) -> Self {
        Self { index, points }
    }
}

/// Per-frame 2-D landmarks of one video, with the frame geometry they live in.
///
/// Coordinates are kept exactly as ingested (pixel units, no normalization).
/// Points outside `[0, width] x [0, height]` are accepted and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSequence {
    frames: Vec<FrameLandmarks>,
    width: u32,
    height: u32,
    fps: f64,
    out_of_frame: usize,
}

impl LandmarkSequence {
    /// Validates and builds a sequence. Frame `i` must carry index `i`.
    pub fn new(frames: Vec<FrameLandmarks>, width: u32, height: u32, fps: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        let Some(first) = frames.first() else {
            return Err(Error::invalid("landmark sequence has no frames"));
        };
        let n = first.points.len();
        if n == 0 {
            return Err(Error::invalid("frames must carry at least one landmark"));
        }
        let mut out_of_frame = 0;
        for (pos, frame) in frames.iter().enumerate() {
            if frame.index != pos {
                return Err(Error::invalid(format!(
                    "frame at position {pos} has index {}",
                    frame.index
                )));
            }
            if frame.points.len() != n {
                return Err(Error::invalid(format!(
                    "frame {pos} has {} landmarks, expected {n}",
                    frame.points.len()
                )));
            }
            for (i, p) in frame.points.iter().enumerate() {
                if !p.is_finite() {
                    return Err(Error::invalid(format!(
                        "frame {pos} landmark {i} has a non-finite coordinate"
                    )));
                }
                if p.x < 0.0 || p.y < 0.0 || p.x > f64::from(width) || p.y > f64::from(height) {
                    out_of_frame += 1;
                }
            }
        }
        Ok(Self {
            frames,
            width,
            height,
            fps,
            out_of_frame,
        })
    }

    /// Builds a sequence from bare per-frame point lists, indexing frames 0..T.
    pub fn from_points(points: Vec<Vec<Point>>, width: u32, height: u32) -> Result<Self> {
        let frames = points
            .into_iter()
            .enumerate()
            .map(|(i, p)| FrameLandmarks::new(i, p))
            .collect();
        Self::new(frames, width, height, DEFAULT_FPS)
    }

    pub fn frames(&self) -> &[FrameLandmarks] {
        &self.frames
    }

    /// Number of frames, T.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Landmarks per frame, n.
    pub fn landmark_count(&self) -> usize {
        self.frames[0].points.len()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// Count of landmark observations lying outside the frame rectangle.
    pub fn out_of_frame_points(&self) -> usize {
        self.out_of_frame
    }

    /// Frame diagonal, the normalizer `d` used by the facial dynamics score.
    pub fn diagonal(&self) -> f64 {
        diagonal_unchecked(self.width, self.height)
    }

    /// Keeps the first `len` frames. `len` must be in `1..=T`.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::invalid(format!(
                "cannot truncate a {}-frame sequence to {len} frames",
                self.len()
            )));
        }
        Self::new(self.frames[..len].to_vec(), self.width, self.height, self.fps)
    }

    /// Applies `f(frame_index, landmark_index, point)` to every landmark.
    pub fn map_points(&self, mut f: impl FnMut(usize, usize, Point) -> Point) -> Result<Self> {
        let frames = self
            .frames
            .iter()
            .map(|fr| {
                let points = fr
                    .points
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| f(fr.index, i, p))
                    .collect();
                FrameLandmarks::new(fr.index, points)
            })
            .collect();
        Self::new(frames, self.width, self.height, self.fps)
    }
}

/// Displacement fields between consecutive frames; `transitions[t][i]` is
/// landmark `i`'s move from frame `t` to frame `t + 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionField {
    pub transitions: Vec<Vec<Displacement>>,
}

impl MotionField {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Cumulative sum of the field starting from `start`; inverse of
    /// [`derive_motion_field`].
    pub fn integrate(&self, start: &[Point]) -> Vec<Vec<Point>> {
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(start.to_vec());
        for step in &self.transitions {
            let prev = out.last().expect("non-empty");
            let next = prev.iter().zip(step).map(|(&p, &d)| p + d).collect();
            out.push(next);
        }
        out
    }
}

pub fn derive_motion_field(seq: &LandmarkSequence) -> MotionField {
    let transitions = seq
        .frames()
        .windows(2)
        .map(|w| {
            w[1].points
                .iter()
                .zip(&w[0].points)
                .map(|(&next, &prev)| next - prev)
                .collect()
        })
        .collect();
    MotionField { transitions }
}

/// Length of the frame diagonal, `sqrt(width^2 + height^2)`.
pub fn frame_diagonal(width: u32, height: u32) -> Result<f64> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "frame dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(diagonal_unchecked(width, height))
}

fn diagonal_unchecked(width: u32, height: u32) -> f64 {
    f64::from(width).hypot(f64::from(height))
}

/// What to do when generated and ground-truth sequences differ in length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MismatchPolicy {
    #[default]
    Strict,
    Truncate,
}

impl fmt::Display for MismatchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MismatchPolicy::Strict => "strict",
            MismatchPolicy::Truncate => "truncate",
        })
    }
}

impl FromStr for MismatchPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(MismatchPolicy::Strict),
            "truncate" => Ok(MismatchPolicy::Truncate),
            other => Err(Error::Usage(format!(
                "unknown mismatch policy `{other}` (expected strict or truncate)"
            ))),
        }
    }
}

/// A generated/ground-truth pair with equal T, n and frame geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub gen: LandmarkSequence,
    pub gt: LandmarkSequence,
    pub warnings: Vec<String>,
}

pub fn validate_pair(
    gen: LandmarkSequence,
    gt: LandmarkSequence,
    policy: MismatchPolicy,
) -> Result<AlignedPair> {
    if gen.landmark_count() != gt.landmark_count() {
        return Err(Error::precondition(format!(
            "landmark count mismatch: generated has {}, ground truth has {}",
            gen.landmark_count(),
            gt.landmark_count()
        )));
    }
    if (gen.width(), gen.height()) != (gt.width(), gt.height()) {
        return Err(Error::precondition(format!(
            "frame size mismatch: generated is {}x{}, ground truth is {}x{}",
            gen.width(),
            gen.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut warnings = Vec::new();
    for (label, seq) in [("generated", &gen), ("ground truth", &gt)] {
        if seq.out_of_frame_points() > 0 {
            warnings.push(format!(
                "{label} sequence has {} out-of-frame landmark observations",
                seq.out_of_frame_points()
            ));
        }
    }
    if gen.len() == gt.len() {
        return Ok(AlignedPair { gen, gt, warnings });
    }
    match policy {
        MismatchPolicy::Strict => Err(Error::precondition(format!(
            "frame count mismatch: generated has {}, ground truth has {} (use the truncate policy to align)",
            gen.len(),
            gt.len()
        ))),
        MismatchPolicy::Truncate => {
            let len = gen.len().min(gt.len());
            warnings.push(format!(
                "truncated to {len} frames (generated had {}, ground truth had {})",
                gen.len(),
                gt.len()
            ));
            Ok(AlignedPair {
                gen: gen.truncated(len)?,
                gt: gt.truncated(len)?,
                warnings,
            })
        }
    }
}

/// Ordered 8-bit rasters of one video, interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSource {
    frames: Vec<Vec<u8>>,
    width: u32,
    height: u32,
    channels: u8,
}

impl FrameSource {
    pub fn new(frames: Vec<Vec<u8>>, width: u32, height: u32, channels: u8) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("channels must be 1 or 3, got {channels}")));
        }
        if frames.is_empty() {
            return Err(Error::invalid("frame source has no frames"));
        }
        let expected = width as usize * height as usize * channels as usize;
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.len() != expected) {
            return Err(Error::invalid(format!(
                "frame {i} has {} samples, expected {expected}",
                f.len()
            )));
        }
        Ok(Self {
            frames,
            width,
            height,
            channels,
        })
    }

    pub fn frames(&self) -> &[Vec<u8>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }
}

/// N x D real matrix of feature embeddings, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureSet {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if rows < 2 {
            return Err(Error::invalid(format!(
                "feature set needs at least 2 rows, got {rows}"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if values.len() != rows * dim {
            return Err(Error::invalid(format!(
                "feature set of {rows}x{dim} needs {} values, got {}",
                rows * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature value in row {}",
                pos / dim
            )));
        }
        Ok(Self { rows, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::invalid(format!(
                "row {i} has {} values, expected {dim}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }
}

/// Balancing weights of the spatial and motion factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfdWeights {
    pub w1: f64,
    pub w2: f64,
}

impl Default for AdfdWeights {
    fn default() -> Self {
        Self { w1: 1.0, w2: 1.0 }
    }
}

impl AdfdWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        for (name, w) in [("w1", w1), ("w2", w2)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be a non-negative finite number, got {w}"
                )));
            }
        }
        Ok(Self { w1, w2 })
    }
}

/// Landmark topology: how many points, and which of them form the mouth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme")]
pub struct LandmarkScheme {
    name: String,
    total: usize,
    mouth_indices: Vec<usize>,
}

#[derive(Deserialize)]
struct RawScheme {
    name: String,
    total: usize,
    mouth_indices: Vec<usize>,
}

impl TryFrom<RawScheme> for LandmarkScheme {
    type Error = Error;

    fn try_from(raw: RawScheme) -> Result<Self> {
        Self::new(raw.name, raw.total, raw.mouth_indices)
    }
}

impl LandmarkScheme {
    pub const IBUG68: &'static str = "ibug68";
    pub const GENERIC: &'static str = "generic";

    pub fn new(name: impl Into<String>, total: usize, mut mouth_indices: Vec<usize>) -> Result<Self> {
        let name = name.into();
        if total == 0 {
            return Err(Error::invalid(format!("scheme `{name}` has zero landmarks")));
        }
        mouth_indices.sort_unstable();
        mouth_indices.dedup();
        if mouth_indices.is_empty() {
            return Err(Error::invalid(format!("scheme `{name}` has no mouth indices")));
        }
        if let Some(&bad) = mouth_indices.iter().find(|&&i| i >= total) {
            return Err(Error::invalid(format!(
                "scheme `{name}` mouth index {bad} is out of range for {total} landmarks"
            )));
        }
        Ok(Self {
            name,
            total,
            mouth_indices,
        })
    }

    /// The 68-point iBUG / Multi-PIE layout; points 48..=67 are the lips.
    pub fn ibug68() -> Self {
        Self {
            name: Self::IBUG68.to_owned(),
            total: 68,
            mouth_indices: (48..68).collect(),
        }
    }

    /// A scheme of arbitrary size whose mouth indices are supplied by the user.
    pub fn generic(total: usize, mouth_indices: Vec<usize>) -> Result<Self> {
        Self::new(Self::GENERIC, total, mouth_indices)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn mouth_indices(&self) -> &[usize] {
        &self.mouth_indices
    }
}
