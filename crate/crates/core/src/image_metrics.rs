//! Pixel fidelity metrics over aligned 8-bit frame sequences.
//!
//! PSNR uses every channel at 8-bit scale. SSIM is the single-scale index on
//! the luma plane (Rec. 601 weights for RGB input) with an 11x11 Gaussian
//! window (sigma 1.5, normalized to sum 1) evaluated at valid positions only.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::FrameSource;

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// PSNR of one frame pair; identical frames have no finite PSNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FramePsnr {
    Db(f64),
    Identical,
}

impl FramePsnr {
    pub fn db(self) -> Option<f64> {
        match self {
            FramePsnr::Db(v) => Some(v),
            FramePsnr::Identical => None,
        }
    }
}

impl Serialize for FramePsnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FramePsnr::Db(v) => s.serialize_f64(*v),
            FramePsnr::Identical => s.serialize_str("identical"),
        }
    }
}

impl<'de> Deserialize<'de> for FramePsnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(FramePsnr::Db(v)),
            Raw::Tag(t) if t == "identical" => Ok(FramePsnr::Identical),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unexpected PSNR tag `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsnrResult {
    /// Mean over non-identical frames; `None` when every frame is identical.
    pub mean_db: Option<f64>,
    pub identical_frames: usize,
    pub per_frame: Vec<FramePsnr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsimResult {
    pub mean: f64,
    pub per_frame: Vec<f64>,
}

fn check_comparable(gen: &FrameSource, gt: &FrameSource) -> Result<()> {
    if (gen.width(), gen.height(), gen.channels()) != (gt.width(), gt.height(), gt.channels()) {
        return Err(Error::precondition(format!(
            "frame shapes differ: {}x{}x{} vs {}x{}x{}",
            gen.width(),
            gen.height(),
            gen.channels(),
            gt.width(),
            gt.height(),
            gt.channels()
        )));
    }
    if gen.len() != gt.len() {
        return Err(Error::precondition(format!(
            "frame counts differ: {} vs {}",
            gen.len(),
            gt.len()
        )));
    }
    Ok(())
}

pub fn frame_psnr(a: &[u8], b: &[u8]) -> FramePsnr {
    debug_assert_eq!(a.len(), b.len());
    let sq: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = u64::from(x.abs_diff(y));
            d * d
        })
        .sum();
    if sq == 0 {
        return FramePsnr::Identical;
    }
    let mse = sq as f64 / a.len() as f64;
    FramePsnr::Db(10.0 * (PEAK * PEAK / mse).log10())
}

pub fn psnr(gen: &FrameSource, gt: &FrameSource) -> Result<PsnrResult> {
    check_comparable(gen, gt)?;
    let per_frame: Vec<FramePsnr> = gen
        .frames()
        .par_iter()
        .zip(gt.frames().par_iter())
        .map(|(a, b)| frame_psnr(a, b))
        .collect();
    let finite: Vec<f64> = per_frame.iter().filter_map(|p| p.db()).collect();
    let mean_db = (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64);
    Ok(PsnrResult {
        mean_db,
        identical_frames: per_frame.len() - finite.len(),
        per_frame,
    })
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let center = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - center;
        *t = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Luma plane of an interleaved frame.
pub fn luma(frame: &[u8], channels: u8) -> Vec<f64> {
    match channels {
        1 => frame.iter().map(|&v| f64::from(v)).collect(),
        _ => frame
            .chunks_exact(3)
            .map(|px| {
                LUMA_WEIGHTS[0] * f64::from(px[0])
                    + LUMA_WEIGHTS[1] * f64::from(px[1])
                    + LUMA_WEIGHTS[2] * f64::from(px[2])
            })
            .collect(),
    }
}

/// Valid-region separable filtering of a `w x h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(j, t)| t * horiz[(y + j) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM between two single-channel planes of size `w x h`.
pub fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> Result<f64> {
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::precondition(format!(
            "frames of {w}x{h} are smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let taps = gaussian_taps();
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(a, w, h, &taps);
    let mu_b = filter_valid(b, w, h, &taps);
    let e_aa = filter_valid(&aa, w, h, &taps);
    let e_bb = filter_valid(&bb, w, h, &taps);
    let e_ab = filter_valid(&ab, w, h, &taps);

    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .sum();
    Ok((total / mu_a.len() as f64).clamp(-1.0, 1.0))
}

pub fn frame_ssim(a: &[u8], b: &[u8], width: u32, height: u32, channels: u8) -> Result<f64> {
    ssim_plane(
        &luma(a, channels),
        &luma(b, channels),
        width as usize,
        height as usize,
    )
}

pub fn ssim(gen: &FrameSource, gt: &FrameSource) -> Result<SsimResult> {
    check_comparable(gen, gt)?;
    let (w, h, c) = (gen.width(), gen.height(), gen.channels());
    let per_frame = gen
        .frames()
        .par_iter()
        .zip(gt.frames().par_iter())
        .map(|(a, b)| frame_ssim(a, b, w, h, c))
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    Ok(SsimResult { mean, per_frame })
}
