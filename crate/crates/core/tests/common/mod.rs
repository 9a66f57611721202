//! Independent reference implementations shared by the integration tests.
//! They work on plain arrays and deliberately avoid the library's helpers.

#![allow(dead_code)]

use fteval::model::{LandmarkSequence, Point};

pub type Track = Vec<Vec<(f64, f64)>>;

pub fn to_sequence(track: &Track, width: u32, height: u32) -> LandmarkSequence {
    let points = track
        .iter()
        .map(|f| f.iter().map(|&(x, y)| Point::new(x, y)).collect())
        .collect();
    LandmarkSequence::from_points(points, width, height).unwrap()
}

/// ADFD written out loop by loop.
pub fn adfd_reference(gen: &Track, gt: &Track, width: u32, height: u32, w1: f64, w2: f64) -> f64 {
    let t_len = gen.len();
    let n = gen[0].len();
    let d = ((width as f64).powi(2) + (height as f64).powi(2)).sqrt();

    let mut spatial_sum = 0.0;
    for t in 0..t_len {
        let mut dist = 0.0;
        for i in 0..n {
            let dx = gen[t][i].0 - gt[t][i].0;
            let dy = gen[t][i].1 - gt[t][i].1;
            dist += (dx * dx + dy * dy).sqrt();
        }
        let s = 1.0 - (dist / n as f64) / d;
        spatial_sum += s.clamp(0.0, 1.0);
    }
    let spatial = spatial_sum / t_len as f64;

    let motion = if t_len < 2 {
        1.0
    } else {
        let mut total = 0.0;
        for t in 1..t_len {
            let mut dot = 0.0;
            let mut ng = 0.0;
            let mut nt = 0.0;
            for i in 0..n {
                let g = (gen[t][i].0 - gen[t - 1][i].0, gen[t][i].1 - gen[t - 1][i].1);
                let r = (gt[t][i].0 - gt[t - 1][i].0, gt[t][i].1 - gt[t - 1][i].1);
                dot += g.0 * r.0 + g.1 * r.1;
                ng += g.0 * g.0 + g.1 * g.1;
                nt += r.0 * r.0 + r.1 * r.1;
            }
            total += if ng == 0.0 && nt == 0.0 {
                1.0
            } else if ng == 0.0 || nt == 0.0 {
                0.5
            } else {
                let c = (dot / (ng.sqrt() * nt.sqrt())).clamp(-1.0, 1.0);
                (c + 1.0) / 2.0
            };
        }
        total / (t_len - 1) as f64
    };
    (w1 * spatial) * (w2 * motion)
}

/// SSIM evaluated window by window with a full 2-D Gaussian kernel.
pub fn ssim_reference(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    const K: usize = 11;
    let sigma = 1.5f64;
    let mut kernel = [[0.0f64; K]; K];
    let mut total = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let di = i as f64 - 5.0;
            let dj = j as f64 - 5.0;
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut sum = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - K {
        for x0 in 0..=w - K {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, row) in kernel.iter().enumerate() {
                for (j, &kv) in row.iter().enumerate() {
                    let wgt = kv / total;
                    let pa = a[(y0 + i) * w + x0 + j];
                    let pb = b[(y0 + i) * w + x0 + j];
                    ma += wgt * pa;
                    mb += wgt * pb;
                    saa += wgt * pa * pa;
                    sbb += wgt * pb * pb;
                    sab += wgt * pa * pb;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

/// Fréchet distance for diagonal covariances, where every matrix commutes.
pub fn frechet_diagonal(mu_a: &[f64], var_a: &[f64], mu_b: &[f64], var_b: &[f64]) -> f64 {
    let mut d = 0.0;
    for k in 0..mu_a.len() {
        d += (mu_a[k] - mu_b[k]).powi(2);
        d += var_a[k] + var_b[k] - 2.0 * (var_a[k] * var_b[k]).sqrt();
    }
    d
}

pub fn relative_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub mod malformed {
    use std::path::Path;

    use fteval::ingest::{read_features, read_landmarks, CsvGeometry, FeatureFormat, LandmarkFormat};
    use fteval::{Error, Location, ParseErrorKind};

    pub struct Case {
        pub file: &'static str,
        pub contents: Vec<u8>,
        pub expect: fn(&ParseErrorKind) -> bool,
        pub location: Location,
    }

    const HEADER: &str = "{\"header\":{\"n\":2,\"width\":64,\"height\":64,\"fps\":25}}\n";
    const F0: &str = "{\"frame\":0,\"points\":[[1,2],[3,4]]}\n";

    fn ftev(rows: u32, dim: u32, values: &[f32]) -> Vec<u8> {
        let mut out = b"FTEV".to_vec();
        for word in [1, rows, dim] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn cases() -> Vec<Case> {
        let six = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0];
        vec![
            Case {
                file: "no_header.jsonl",
                contents: F0.into(),
                expect: |k| *k == ParseErrorKind::MissingHeader,
                location: Location::Line(1),
            },
            Case {
                file: "no_width.jsonl",
                contents: format!("{{\"header\":{{\"n\":2,\"height\":64}}}}\n{F0}").into(),
                expect: |k| *k == ParseErrorKind::MissingHeaderField("width"),
                location: Location::Line(1),
            },
            Case {
                file: "gap.jsonl",
                contents: format!("{HEADER}{F0}{{\"frame\":2,\"points\":[[1,2],[3,4]]}}\n").into(),
                expect: |k| *k == ParseErrorKind::FrameGap { missing: 1 },
                location: Location::Line(3),
            },
            Case {
                file: "short_frame.jsonl",
                contents: format!("{HEADER}{{\"frame\":0,\"points\":[[1,2]]}}\n").into(),
                expect: |k| *k == ParseErrorKind::PointCount { expected: 2, found: 1 },
                location: Location::Line(2),
            },
            Case {
                file: "broken.jsonl",
                contents: format!("{HEADER}{F0}{{\"frame\":1,\"points\":[[1,2],[3,\n").into(),
                expect: |k| matches!(k, ParseErrorKind::Malformed(_)),
                location: Location::Line(3),
            },
            Case {
                file: "duplicate.jsonl",
                contents: format!("{HEADER}{F0}{F0}").into(),
                expect: |k| *k == ParseErrorKind::DuplicateFrame(0),
                location: Location::Line(3),
            },
            Case {
                file: "arity.csv",
                contents: b"frame,x0,y0,x1,y1\n0,1,2,3,4\n1,1,2,3,4,5\n".to_vec(),
                expect: |k| *k == ParseErrorKind::Arity { expected: 5, found: 6 },
                location: Location::Line(3),
            },
            Case {
                file: "magic.ftev",
                contents: {
                    let mut b = ftev(3, 2, &six);
                    b[..4].copy_from_slice(b"NOPE");
                    b
                },
                expect: |k| *k == ParseErrorKind::BadMagic(*b"NOPE"),
                location: Location::Byte(0),
            },
            Case {
                file: "short.ftev",
                contents: ftev(3, 2, &six[..5]),
                expect: |k| *k == ParseErrorKind::Truncated { expected: 40, found: 36 },
                location: Location::Byte(36),
            },
            Case {
                file: "nan.ftev",
                contents: ftev(3, 2, &[1.0, 2.0, 3.0, f32::NAN, 5.0, 6.0]),
                expect: |k| *k == ParseErrorKind::NonFinite { row: 1 },
                location: Location::Byte(28),
            },
            Case {
                file: "nan_features.csv.feat",
                contents: b"1,2\nnan,3\n4,5\n".to_vec(),
                expect: |k| *k == ParseErrorKind::NonFinite { row: 1 },
                location: Location::Line(2),
            },
            Case {
                file: "trailing.ftev",
                contents: {
                    let mut b = ftev(3, 2, &six);
                    b.extend_from_slice(&[0, 0]);
                    b
                },
                expect: |k| *k == ParseErrorKind::TrailingBytes { extra: 2 },
                location: Location::Byte(40),
            },
        ]
    }

    /// Reads `path` with the reader its name implies.
    pub fn load(path: &Path) -> Result<(), Error> {
        let name = path.file_name().unwrap().to_str().unwrap();
        let geometry = CsvGeometry { width: 64, height: 64, fps: 25.0 };
        if name.ends_with(".jsonl") {
            read_landmarks(path, LandmarkFormat::Jsonl, None).map(drop)
        } else if name.ends_with(".csv") {
            read_landmarks(path, LandmarkFormat::Csv, Some(geometry)).map(drop)
        } else if name.ends_with(".csv.feat") {
            read_features(path, FeatureFormat::Csv).map(drop)
        } else {
            read_features(path, FeatureFormat::Ftev).map(drop)
        }
    }
}
