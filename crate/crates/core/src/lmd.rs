//! Landmark distance over the full face (F-LMD) and the mouth region (M-LMD).
//!
//! Both are raw pixel distances: per frame, the mean Euclidean distance
//! between corresponding landmarks, then averaged over frames.

use serde::{Deserialize, Serialize};

use crate::adfd::check_aligned;
use crate::error::{Error, Result};
use crate::model::{LandmarkScheme, LandmarkSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameLmd {
    pub f: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmdResult {
    pub f_lmd: f64,
    pub m_lmd: f64,
    pub per_frame: Vec<FrameLmd>,
}

pub fn lmd(
    gen: &LandmarkSequence,
    gt: &LandmarkSequence,
    scheme: &LandmarkScheme,
) -> Result<LmdResult> {
    check_aligned(gen, gt)?;
    if scheme.total() != gen.landmark_count() {
        return Err(Error::precondition(format!(
            "scheme `{}` describes {} landmarks but the sequences have {}",
            scheme.name(),
            scheme.total(),
            gen.landmark_count()
        )));
    }
    let mouth = scheme.mouth_indices();
    let per_frame: Vec<FrameLmd> = gen
        .frames()
        .iter()
        .zip(gt.frames())
        .map(|(a, b)| {
            let dist: Vec<f64> = a
                .points
                .iter()
                .zip(&b.points)
                .map(|(&p, &q)| p.distance(q))
                .collect();
            FrameLmd {
                f: dist.iter().sum::<f64>() / dist.len() as f64,
                m: mouth.iter().map(|&i| dist[i]).sum::<f64>() / mouth.len() as f64,
            }
        })
        .collect();
    let t = per_frame.len() as f64;
    Ok(LmdResult {
        f_lmd: per_frame.iter().map(|r| r.f).sum::<f64>() / t,
        m_lmd: per_frame.iter().map(|r| r.m).sum::<f64>() / t,
        per_frame,
    })
}
