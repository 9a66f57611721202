//! Audio-visual synchronization from precomputed embedding streams.
//!
//! For each candidate offset `k`, audio vector `t` is paired with visual
//! vector `t + k` (a positive `k` means the picture lags the sound). The
//! distance at `k` is the mean Euclidean distance between L2-normalized
//! pairs over the overlap. The minimum distance is LSE-D, and the median
//! minus the minimum is the LSE-C confidence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FeatureSet;

pub const DEFAULT_MAX_OFFSET: usize = 15;
pub const MIN_OVERLAP: usize = 5;

/// T x D embedding vectors sampled every `hop` video frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStream {
    dim: usize,
    hop: usize,
    vectors: Vec<f64>,
}

impl EmbeddingStream {
    pub fn new(vectors: Vec<Vec<f64>>, hop: usize) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        if let Some(i) = vectors.iter().position(|v| v.len() != dim) {
            return Err(Error::invalid(format!(
                "embedding {i} has {} values, expected {dim}",
                vectors[i].len()
            )));
        }
        Self::from_flat(vectors.len(), dim, vectors.concat(), hop)
    }

    pub fn from_flat(rows: usize, dim: usize, values: Vec<f64>, hop: usize) -> Result<Self> {
        if rows == 0 {
            return Err(Error::invalid("embedding stream is empty"));
        }
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if hop == 0 {
            return Err(Error::invalid("hop must be at least 1 frame"));
        }
        if values.len() != rows * dim {
            return Err(Error::invalid(format!(
                "embedding stream of {rows}x{dim} needs {} values, got {}",
                rows * dim,
                values.len()
            )));
        }
        for (i, v) in values.chunks_exact(dim).enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("embedding {i} has a non-finite value")));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(Error::invalid(format!("embedding {i} is the zero vector")));
            }
        }
        Ok(Self {
            dim,
            hop,
            vectors: values,
        })
    }

    pub fn from_features(features: &FeatureSet, hop: usize) -> Result<Self> {
        Self::from_flat(features.rows(), features.dim(), features.values().to_vec(), hop)
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.dim)
    }

    /// Same stream with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let values = self.vectors.iter().map(|v| v * factor).collect();
        Self::from_flat(self.len(), self.dim, values, self.hop)
    }

    fn normalized(&self) -> Vec<Vec<f64>> {
        self.iter()
            .map(|v| {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / norm).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetDistance {
    /// Offset in video frames.
    pub offset: i64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    /// Offset in video frames minimizing the distance.
    pub best_offset: i64,
    pub lse_d: f64,
    pub lse_c: f64,
    pub distance_curve: Vec<OffsetDistance>,
}

/// `max_offset` is in video frames; offsets are tested in whole hops.
pub fn sync_score(
    audio: &EmbeddingStream,
    visual: &EmbeddingStream,
    max_offset: usize,
) -> Result<SyncResult> {
    if audio.dim() != visual.dim() {
        return Err(Error::precondition(format!(
            "embedding dimensions differ: audio {} vs visual {}",
            audio.dim(),
            visual.dim()
        )));
    }
    if audio.hop() != visual.hop() {
        return Err(Error::precondition(format!(
            "hop sizes differ: audio {} vs visual {}",
            audio.hop(),
            visual.hop()
        )));
    }
    let hop = audio.hop();
    let steps = (max_offset / hop) as i64;
    let (ta, tv) = (audio.len() as i64, visual.len() as i64);
    for k in [-steps, steps] {
        let overlap = overlap_range(ta, tv, k);
        let len = (overlap.end - overlap.start).max(0) as usize;
        if len < MIN_OVERLAP {
            return Err(Error::precondition(format!(
                "offset {} leaves {len} overlapping vectors, need at least {MIN_OVERLAP}",
                k * hop as i64
            )));
        }
    }

    let a = audio.normalized();
    let v = visual.normalized();
    let distance_curve: Vec<OffsetDistance> = (-steps..=steps)
        .into_par_iter()
        .map(|k| {
            let range = overlap_range(ta, tv, k);
            let count = (range.end - range.start) as f64;
            let total: f64 = range
                .map(|t| euclidean(&a[t as usize], &v[(t + k) as usize]))
                .sum();
            OffsetDistance {
                offset: k * hop as i64,
                distance: total / count,
            }
        })
        .collect();

    let best = distance_curve
        .iter()
        .min_by(|x, y| {
            x.distance
                .total_cmp(&y.distance)
                .then(x.offset.abs().cmp(&y.offset.abs()))
                .then(x.offset.cmp(&y.offset))
        })
        .copied()
        .expect("at least one offset");
    let lse_c = median(distance_curve.iter().map(|d| d.distance).collect()) - best.distance;
    Ok(SyncResult {
        best_offset: best.offset,
        lse_d: best.distance,
        lse_c: lse_c.max(0.0),
        distance_curve,
    })
}

/// Audio indices `t` for which `t + k` is a valid visual index.
fn overlap_range(ta: i64, tv: i64, k: i64) -> std::ops::Range<i64> {
    0.max(-k)..ta.min(tv - k)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}
