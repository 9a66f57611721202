//! Deterministic synthetic inputs with known structure.
//!
//! # Random source
//!
//! All randomness comes from [`SplitMix64`]: a 64-bit state advanced by the
//! constant `0x9E3779B97F4A7C15`, then mixed with
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! (wrapping arithmetic). The initial state is the seed. Uniform doubles
//! are `(next >> 11) * 2^-53` in `[0, 1)`. Normal samples use Box-Muller on
//! two uniforms `u1 = 1 - uniform()`, `u2 = uniform()`, producing
//! `r cos(2 pi u2)` first and caching `r sin(2 pi u2)` for the next call.
//!
//! # Face layout
//!
//! With 68 landmarks the base layout is [`FACE_TEMPLATE_68`] (iBUG ordering,
//! lips at 48..=67), in coordinates normalized to the frame. For any other
//! `n`, the last `max(2, n / 4)` points sit on a mouth ellipse centred at
//! `(0.5, 0.72)` with radii `(0.14, 0.05)` and the rest on a face ellipse
//! centred at `(0.5, 0.45)` with radii `(0.38, 0.45)`, both sampled at
//! equal angles starting from angle pi.
//!
//! Frame `t` of a sequence is produced from the layout by, in order:
//! opening the mouth (each mouth point's vertical offset from `y = 0.72` is
//! scaled by `1 + 2 * envelope[t mod len]`), scaling to pixels, adding head
//! drift `(A sin th, A/2 sin 2th)` with `th = 2 pi t / period`, and adding
//! `jitter_sigma * z` per coordinate, with normals drawn frame by frame,
//! landmark by landmark, x before y. The normals are drawn even when
//! `jitter_sigma` is zero, so sequences differing only in sigma share noise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureSet, FrameLandmarks, FrameSource, LandmarkSequence, Point};
use crate::sync::EmbeddingStream;

/// SplitMix64 generator; see the module docs for the exact definition.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal sample.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * PI * u2;
        self.spare = Some(r * th.sin());
        r * th.cos()
    }
}

/// Normalized (x, y) base layout for 68 landmarks, iBUG ordering.
#[rustfmt::skip]
pub const FACE_TEMPLATE_68: [(f64, f64); 68] = [
    // jaw 0..=16
    (0.1000, 0.4200), (0.1077, 0.5058), (0.1304, 0.5884), (0.1674, 0.6645),
    (0.2172, 0.7311), (0.2778, 0.7858), (0.3469, 0.8265), (0.4220, 0.8515),
    (0.5000, 0.8600), (0.5780, 0.8515), (0.6531, 0.8265), (0.7222, 0.7858),
    (0.7828, 0.7311), (0.8326, 0.6645), (0.8696, 0.5884), (0.8923, 0.5058),
    (0.9000, 0.4200),
    // brows 17..=26
    (0.2000, 0.3000), (0.2600, 0.2788), (0.3200, 0.2700), (0.3800, 0.2788),
    (0.4400, 0.3000), (0.5600, 0.3000), (0.6200, 0.2788), (0.6800, 0.2700),
    (0.7400, 0.2788), (0.8000, 0.3000),
    // nose 27..=35
    (0.5000, 0.3800), (0.5000, 0.4400), (0.5000, 0.5000), (0.5000, 0.5600),
    (0.4400, 0.5800), (0.4700, 0.5906), (0.5000, 0.5950), (0.5300, 0.5906),
    (0.5600, 0.5800),
    // eyes 36..=47
    (0.2700, 0.3900), (0.3000, 0.3683), (0.3600, 0.3683), (0.3900, 0.3900),
    (0.3600, 0.4117), (0.3000, 0.4117), (0.6100, 0.3900), (0.6400, 0.3683),
    (0.7000, 0.3683), (0.7300, 0.3900), (0.7000, 0.4117), (0.6400, 0.4117),
    // outer lips 48..=59
    (0.3600, 0.7200), (0.3788, 0.6900), (0.4300, 0.6680), (0.5000, 0.6600),
    (0.5700, 0.6680), (0.6212, 0.6900), (0.6400, 0.7200), (0.6212, 0.7500),
    (0.5700, 0.7720), (0.5000, 0.7800), (0.4300, 0.7720), (0.3788, 0.7500),
    // inner lips 60..=67
    (0.4100, 0.7200), (0.4364, 0.7023), (0.5000, 0.6950), (0.5636, 0.7023),
    (0.5900, 0.7200), (0.5636, 0.7377), (0.5000, 0.7450), (0.4364, 0.7377),
];

const MOUTH_CENTER_Y: f64 = 0.72;
const MOUTH_GAIN: f64 = 2.0;

/// Indices of the mouth landmarks in the synthetic layout of `n` points.
pub fn mouth_indices(n: usize) -> Vec<usize> {
    if n == 68 {
        (48..68).collect()
    } else {
        let m = (n / 4).max(2);
        (n - m..n).collect()
    }
}

/// Normalized base layout of `n >= 4` landmarks.
pub fn base_layout(n: usize) -> Vec<(f64, f64)> {
    if n == 68 {
        return FACE_TEMPLATE_68.to_vec();
    }
    let m = (n / 4).max(2);
    let ellipse = |count: usize, cx: f64, cy: f64, rx: f64, ry: f64| {
        (0..count).map(move |k| {
            let a = PI + 2.0 * PI * k as f64 / count as f64;
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
    };
    ellipse(n - m, 0.5, 0.45, 0.38, 0.45)
        .chain(ellipse(m, 0.5, MOUTH_CENTER_Y, 0.14, 0.05))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadDrift {
    /// Pixels.
    pub amplitude: f64,
    /// Frames per cycle.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub frames: usize,
    pub landmarks: usize,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub head_drift: HeadDrift,
    /// Mouth opening per frame in `[0, 1]`, cycled; empty means closed.
    #[serde(default)]
    pub mouth_open: Vec<f64>,
    #[serde(default)]
    pub jitter_sigma: f64,
}

impl SynthSpec {
    /// A still, closed-mouth, noise-free face.
    pub fn still(seed: u64, frames: usize, landmarks: usize, width: u32, height: u32) -> Self {
        Self {
            seed,
            frames,
            landmarks,
            width,
            height,
            head_drift: HeadDrift::default(),
            mouth_open: Vec::new(),
            jitter_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::invalid("synthetic spec needs at least one frame"));
        }
        if self.landmarks < 4 {
            return Err(Error::invalid(format!(
                "synthetic spec needs at least 4 landmarks, got {}",
                self.landmarks
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("synthetic frame size must be positive"));
        }
        let d = self.head_drift;
        if !(d.amplitude.is_finite() && d.amplitude >= 0.0) {
            return Err(Error::invalid("head drift amplitude must be non-negative"));
        }
        if d.amplitude > 0.0 && !(d.period.is_finite() && d.period > 0.0) {
            return Err(Error::invalid("head drift period must be positive"));
        }
        if !(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0) {
            return Err(Error::invalid("jitter sigma must be non-negative"));
        }
        if let Some(v) = self.mouth_open.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "mouth envelope values must lie in [0, 1], got {v}"
            )));
        }
        Ok(())
    }
}

pub fn synth_landmarks(spec: &SynthSpec) -> Result<LandmarkSequence> {
    spec.validate()?;
    let layout = base_layout(spec.landmarks);
    let mouth = mouth_indices(spec.landmarks);
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let mut rng = SplitMix64::new(spec.seed);
    let drift = spec.head_drift;

    let frames = (0..spec.frames)
        .map(|t| {
            let env = if spec.mouth_open.is_empty() {
                0.0
            } else {
                spec.mouth_open[t % spec.mouth_open.len()]
            };
            let (dx, dy) = if drift.amplitude > 0.0 {
                let th = 2.0 * PI * t as f64 / drift.period;
                (drift.amplitude * th.sin(), 0.5 * drift.amplitude * (2.0 * th).sin())
            } else {
                (0.0, 0.0)
            };
            layout
                .iter()
                .enumerate()
                .map(|(i, &(nx, ny))| {
                    let ny = if mouth.binary_search(&i).is_ok() {
                        MOUTH_CENTER_Y + (ny - MOUTH_CENTER_Y) * (1.0 + MOUTH_GAIN * env)
                    } else {
                        ny
                    };
                    let jx = rng.normal();
                    let jy = rng.normal();
                    Point::new(
                        nx * w + dx + spec.jitter_sigma * jx,
                        ny * h + dy + spec.jitter_sigma * jy,
                    )
                })
                .collect()
        })
        .collect();
    LandmarkSequence::from_points(frames, spec.width, spec.height)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Adds `(dx, dy)` to every landmark.
    Translate { dx: f64, dy: f64 },
    /// Adds independent `N(0, sigma^2)` noise to every coordinate.
    Jitter { sigma: f64, seed: u64 },
    /// Positive `frames` drops the head of the sequence, negative drops the tail.
    TimeShift { frames: i64 },
}

pub fn perturb(seq: &LandmarkSequence, kind: Perturbation) -> Result<LandmarkSequence> {
    match kind {
        Perturbation::Translate { dx, dy } => {
            if !(dx.is_finite() && dy.is_finite()) {
                return Err(Error::invalid("translation must be finite"));
            }
            seq.map_points(|_, _, p| Point::new(p.x + dx, p.y + dy))
        }
        Perturbation::Jitter { sigma, seed } => {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::invalid(format!(
                    "jitter sigma must be non-negative, got {sigma}"
                )));
            }
            let mut rng = SplitMix64::new(seed);
            seq.map_points(|_, _, p| {
                let jx = rng.normal();
                let jy = rng.normal();
                Point::new(p.x + sigma * jx, p.y + sigma * jy)
            })
        }
        Perturbation::TimeShift { frames } => {
            let k = frames.unsigned_abs() as usize;
            if k >= seq.len() {
                return Err(Error::invalid(format!(
                    "cannot shift a {}-frame sequence by {frames} frames",
                    seq.len()
                )));
            }
            let kept = if frames >= 0 {
                &seq.frames()[k..]
            } else {
                &seq.frames()[..seq.len() - k]
            };
            let frames = kept
                .iter()
                .enumerate()
                .map(|(i, f)| FrameLandmarks::new(i, f.points.clone()))
                .collect();
            LandmarkSequence::new(frames, seq.width(), seq.height(), seq.fps())
        }
    }
}

/// `rows` samples of `mean + scale * N(0, I)`.
pub fn synth_features(seed: u64, rows: usize, dim: usize, mean: &[f64], scale: f64) -> Result<FeatureSet> {
    if rows < 2 {
        return Err(Error::invalid(format!("need at least 2 rows, got {rows}")));
    }
    if dim == 0 || mean.len() != dim {
        return Err(Error::invalid(format!(
            "mean has {} entries for dimension {dim}",
            mean.len()
        )));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::invalid(format!("scale must be non-negative, got {scale}")));
    }
    let mut rng = SplitMix64::new(seed);
    let values = (0..rows)
        .flat_map(|_| mean.iter().map(|m| m + scale * rng.normal()).collect::<Vec<_>>())
        .collect();
    FeatureSet::new(rows, dim, values)
}

/// Stream of `len` independent standard-normal vectors.
pub fn synth_stream(seed: u64, len: usize, dim: usize) -> Result<EmbeddingStream> {
    let mut rng = SplitMix64::new(seed);
    let vectors = (0..len)
        .map(|_| (0..dim).map(|_| rng.normal()).collect())
        .collect();
    EmbeddingStream::new(vectors, 1)
}

/// Copy of `stream` delayed by `k` vectors: `out[t] = stream[t - k]`, with
/// fresh random vectors where `t - k` falls outside the stream.
pub fn shift_stream(stream: &EmbeddingStream, k: i64, seed: u64) -> Result<EmbeddingStream> {
    let mut rng = SplitMix64::new(seed);
    let len = stream.len() as i64;
    let vectors = (0..len)
        .map(|t| {
            let src = t - k;
            if (0..len).contains(&src) {
                stream.vector(src as usize).to_vec()
            } else {
                (0..stream.dim()).map(|_| rng.normal()).collect()
            }
        })
        .collect();
    EmbeddingStream::new(vectors, stream.hop())
}

/// Smooth textured frames with mild per-pixel noise.
pub fn synth_frames(seed: u64, frames: usize, width: u32, height: u32, channels: u8) -> Result<FrameSource> {
    let mut rng = SplitMix64::new(seed);
    let data = (0..frames)
        .map(|t| {
            let mut buf = Vec::with_capacity(width as usize * height as usize * channels as usize);
            for y in 0..height {
                for x in 0..width {
                    for c in 0..channels {
                        let base = 128.0
                            + 60.0 * (x as f64 / 5.0 + t as f64 * 0.3 + c as f64).sin()
                            + 40.0 * (y as f64 / 7.0).cos();
                        buf.push((base + 12.0 * rng.normal()).round().clamp(0.0, 255.0) as u8);
                    }
                }
            }
            buf
        })
        .collect();
    FrameSource::new(data, width, height, channels)
}

/// Adds uniform integer noise in `[-amplitude, amplitude]` to every sample.
pub fn noisy_frames(src: &FrameSource, amplitude: u8, seed: u64) -> Result<FrameSource> {
    let mut rng = SplitMix64::new(seed);
    let span = 2 * u64::from(amplitude) + 1;
    let frames = src
        .frames()
        .iter()
        .map(|f| {
            f.iter()
                .map(|&v| {
                    let delta = (rng.next_u64() % span) as i64 - i64::from(amplitude);
                    (i64::from(v) + delta).clamp(0, 255) as u8
                })
                .collect()
        })
        .collect();
    FrameSource::new(frames, src.width(), src.height(), src.channels())
}
