//! Audio-driven facial dynamics score.
//!
//! The score multiplies a spatial-alignment factor by a motion-coherence
//! factor:
//!
//! ```text
//! spatial = mean_t clamp(1 - mean_i |gen_t,i - gt_t,i| / d, 0, 1)
//! motion  = mean_t (cos(M_t^gen, M_t^gt) + 1) / 2
//! score   = (w1 * spatial) * (w2 * motion)
//! ```
//!
//! `d` is the frame diagonal and `M_t` is the whole-frame displacement field
//! between frames `t` and `t + 1`, flattened to a `2n` vector. A pair of
//! zero motion vectors scores 1, a single zero vector scores 0.5, and a
//! one-frame sequence has a motion factor of 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    derive_motion_field, AdfdWeights, Displacement, FrameLandmarks, LandmarkSequence,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfdBreakdown {
    pub spatial: f64,
    pub motion: f64,
    pub score: f64,
    pub per_frame_spatial: Vec<f64>,
    pub per_transition_motion: Vec<f64>,
}

/// Normalized landmark alignment of one frame pair, in `[0, 1]`.
pub fn spatial_term(gen: &FrameLandmarks, gt: &FrameLandmarks, d: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::precondition(format!(
            "normalizing distance must be positive, got {d}"
        )));
    }
    if gen.points.len() != gt.points.len() || gen.points.is_empty() {
        return Err(Error::precondition(format!(
            "frame {} has {} generated and {} ground-truth landmarks",
            gen.index,
            gen.points.len(),
            gt.points.len()
        )));
    }
    let total: f64 = gen
        .points
        .iter()
        .zip(&gt.points)
        .map(|(&a, &b)| a.distance(b))
        .sum();
    let mean = total / gen.points.len() as f64;
    Ok((1.0 - mean / d).clamp(0.0, 1.0))
}

/// Cosine agreement of two displacement fields, shifted onto `[0, 1]`.
pub fn motion_term(gen: &[Displacement], gt: &[Displacement]) -> Result<f64> {
    if gen.len() != gt.len() {
        return Err(Error::precondition(format!(
            "motion vectors differ in length: {} vs {}",
            gen.len(),
            gt.len()
        )));
    }
    let mut dot = 0.0;
    let mut gen_sq = 0.0;
    let mut gt_sq = 0.0;
    for (a, b) in gen.iter().zip(gt) {
        if !(a.dx.is_finite() && a.dy.is_finite() && b.dx.is_finite() && b.dy.is_finite()) {
            return Err(Error::precondition("motion vectors must be finite"));
        }
        dot += a.dx * b.dx + a.dy * b.dy;
        gen_sq += a.dx * a.dx + a.dy * a.dy;
        gt_sq += b.dx * b.dx + b.dy * b.dy;
    }
    Ok(match (gen_sq == 0.0, gt_sq == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.5,
        // sqrt(s * s) == s exactly, so a vector compared with itself gives cos = 1.
        (false, false) => {
            let cos = (dot / (gen_sq * gt_sq).sqrt()).clamp(-1.0, 1.0);
            (cos + 1.0) / 2.0
        }
    })
}

/// Scores a generated sequence against its ground truth. The pair must
/// already be aligned (see [`crate::model::validate_pair`]).
pub fn adfd(
    gen: &LandmarkSequence,
    gt: &LandmarkSequence,
    weights: AdfdWeights,
) -> Result<AdfdBreakdown> {
    check_aligned(gen, gt)?;
    let d = gt.diagonal();

    let per_frame_spatial = gen
        .frames()
        .iter()
        .zip(gt.frames())
        .map(|(a, b)| spatial_term(a, b, d))
        .collect::<Result<Vec<_>>>()?;

    let gen_motion = derive_motion_field(gen);
    let gt_motion = derive_motion_field(gt);
    let per_transition_motion = gen_motion
        .transitions
        .iter()
        .zip(&gt_motion.transitions)
        .map(|(a, b)| motion_term(a, b))
        .collect::<Result<Vec<_>>>()?;

    let spatial = mean(&per_frame_spatial);
    let motion = if per_transition_motion.is_empty() {
        1.0
    } else {
        mean(&per_transition_motion)
    };
    Ok(AdfdBreakdown {
        spatial,
        motion,
        score: (weights.w1 * spatial) * (weights.w2 * motion),
        per_frame_spatial,
        per_transition_motion,
    })
}

pub(crate) fn check_aligned(gen: &LandmarkSequence, gt: &LandmarkSequence) -> Result<()> {
    if gen.len() != gt.len()
        || gen.landmark_count() != gt.landmark_count()
        || (gen.width(), gen.height()) != (gt.width(), gt.height())
    {
        return Err(Error::precondition(format!(
            "sequences are not aligned: {} frames x {} landmarks at {}x{} vs {} frames x {} landmarks at {}x{}",
            gen.len(),
            gen.landmark_count(),
            gen.width(),
            gen.height(),
            gt.len(),
            gt.landmark_count(),
            gt.width(),
            gt.height()
        )));
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Point;

    fn frame(points: &[(f64, f64)]) -> FrameLandmarks {
        FrameLandmarks::new(0, points.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    fn d(dx: f64, dy: f64) -> Displacement {
        Displacement::new(dx, dy)
    }

    #[test]
    fn spatial_identity_and_offset() {
        let a = frame(&[(10.0, 10.0), (20.0, 30.0)]);
        assert_eq!(spatial_term(&a, &a, 141.0).unwrap(), 1.0);
        let b = frame(&[(12.0, 10.0), (20.0, 32.0)]);
        let diag = 100f64.hypot(100.0);
        let s = spatial_term(&b, &a, diag).unwrap();
        assert!((s - 0.98586).abs() < 1e-5, "{s}");
        assert!((s - (1.0 - 2.0 / diag)).abs() < 1e-15);
    }

    #[test]
    fn spatial_clamps_at_zero() {
        let a = frame(&[(0.0, 0.0), (0.0, 0.0)]);
        let b = frame(&[(200.0, 0.0), (0.0, 300.0)]);
        assert_eq!(spatial_term(&a, &b, 141.42).unwrap(), 0.0);
    }

    #[test]
    fn spatial_rejects_bad_normalizer() {
        let a = frame(&[(0.0, 0.0)]);
        assert!(spatial_term(&a, &a, 0.0).is_err());
        assert!(spatial_term(&a, &a, -1.0).is_err());
        assert!(spatial_term(&a, &frame(&[(0.0, 0.0), (1.0, 1.0)]), 1.0).is_err());
    }

    #[test]
    fn motion_cases() {
        assert_eq!(motion_term(&[d(0.3, -1.7)], &[d(0.3, -1.7)]).unwrap(), 1.0);
        assert_eq!(motion_term(&[d(1.0, 0.0)], &[d(0.0, 1.0)]).unwrap(), 0.5);
        assert_eq!(motion_term(&[d(1.0, 0.0)], &[d(-1.0, 0.0)]).unwrap(), 0.0);
        assert_eq!(motion_term(&[d(0.0, 0.0)], &[d(0.0, 0.0)]).unwrap(), 1.0);
        assert_eq!(motion_term(&[d(0.0, 0.0)], &[d(2.0, 0.0)]).unwrap(), 0.5);
        assert_eq!(motion_term(&[d(2.0, 0.0)], &[d(0.0, 0.0)]).unwrap(), 0.5);
        assert!(motion_term(&[d(1.0, 0.0)], &[]).is_err());
        assert!(motion_term(&[d(f64::NAN, 0.0)], &[d(1.0, 0.0)]).is_err());
    }

    fn worked_example() -> (LandmarkSequence, LandmarkSequence) {
        // gt moves (2,0) per frame; gen is gt shifted by (0,2).
        let gt: Vec<Vec<Point>> = (0..3)
            .map(|t| {
                let x = 10.0 + 2.0 * t as f64;
                vec![Point::new(x, 40.0), Point::new(x + 20.0, 60.0)]
            })
            .collect();
        let gen = gt
            .iter()
            .map(|f| f.iter().map(|p| Point::new(p.x, p.y + 2.0)).collect())
            .collect();
        (
            LandmarkSequence::from_points(gen, 100, 100).unwrap(),
            LandmarkSequence::from_points(gt, 100, 100).unwrap(),
        )
    }

    #[test]
    fn worked_three_frame_example() {
        let (gen, gt) = worked_example();
        let b = adfd(&gen, &gt, AdfdWeights::default()).unwrap();
        assert!((b.spatial - 0.98586).abs() < 1e-5);
        assert_eq!(b.motion, 1.0);
        assert!((b.score - 0.98586).abs() < 1e-5);
        assert_eq!(b.per_frame_spatial.len(), 3);
        assert_eq!(b.per_transition_motion.len(), 2);
    }

    #[test]
    fn zero_weights_zero_score() {
        let (gen, gt) = worked_example();
        let b = adfd(&gen, &gt, AdfdWeights::new(0.0, 0.0).unwrap()).unwrap();
        assert_eq!(b.score, 0.0);
        assert!(b.spatial > 0.0);
    }

    #[test]
    fn unaligned_pair_rejected() {
        let (gen, gt) = worked_example();
        let short = gt.truncated(2).unwrap();
        assert!(adfd(&gen, &short, AdfdWeights::default()).is_err());
    }

    #[test]
    fn single_frame_motion_is_vacuous() {
        let s = LandmarkSequence::from_points(vec![vec![Point::new(1.0, 2.0)]], 8, 8).unwrap();
        let b = adfd(&s, &s, AdfdWeights::default()).unwrap();
        assert_eq!((b.motion, b.score), (1.0, 1.0));
        assert!(b.per_transition_motion.is_empty());
    }
}
