use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use serde_json::Value;

use super::read_text;
use crate::error::{Error, Location, ParseError, ParseErrorKind, Result};
use crate::model::{FrameLandmarks, LandmarkScheme, LandmarkSequence, Point, DEFAULT_FPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandmarkFormat {
    Jsonl,
    Csv,
}

impl LandmarkFormat {
    /// `.csv` is CSV; anything else is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => LandmarkFormat::Csv,
            _ => LandmarkFormat::Jsonl,
        }
    }
}

impl FromStr for LandmarkFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(LandmarkFormat::Jsonl),
            "csv" => Ok(LandmarkFormat::Csv),
            other => Err(Error::Usage(format!("unknown landmark format `{other}`"))),
        }
    }
}

/// Frame geometry for CSV landmark files, which carry none themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvGeometry {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFileHeader {
    pub schema: Option<String>,
    pub n: usize,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

impl LandmarkFileHeader {
    pub fn check_scheme(&self, scheme: &LandmarkScheme) -> Result<()> {
        if self.n != scheme.total() {
            return Err(Error::precondition(format!(
                "file has {} landmarks but scheme `{}` expects {}",
                self.n,
                scheme.name(),
                scheme.total()
            )));
        }
        if let Some(name) = &self.schema {
            if name != scheme.name() {
                return Err(Error::precondition(format!(
                    "file declares scheme `{name}` but `{}` was requested",
                    scheme.name()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct FrameLine {
    frame: usize,
    points: Vec<[f64; 2]>,
}

pub fn read_landmarks(
    path: &Path,
    format: LandmarkFormat,
    geometry: Option<CsvGeometry>,
) -> Result<LandmarkSequence> {
    let text = read_text(path)?;
    match format {
        LandmarkFormat::Jsonl => parse_landmarks_jsonl(&text, path).map(|(_, seq)| seq),
        LandmarkFormat::Csv => {
            let geometry = geometry.ok_or_else(|| {
                Error::Usage(format!(
                    "{}: CSV landmarks need frame width and height",
                    path.display()
                ))
            })?;
            parse_landmarks_csv(&text, path, geometry)
        }
    }
}

fn header_u64(
    path: &Path,
    fields: &serde_json::Map<String, Value>,
    name: &'static str,
) -> Result<u64> {
    let err = |kind| Error::from(ParseError::new(path, Location::Line(1), kind));
    let v = fields
        .get(name)
        .ok_or_else(|| err(ParseErrorKind::MissingHeaderField(name)))?;
    match v.as_u64() {
        Some(n) if n > 0 => Ok(n),
        _ => Err(err(ParseErrorKind::InvalidHeader(format!(
            "`{name}` must be a positive integer, got {v}"
        )))),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<LandmarkFileHeader> {
    let err = |kind| Error::from(ParseError::new(path, Location::Line(1), kind));
    let value: Value = serde_json::from_str(line)
        .map_err(|e| err(ParseErrorKind::Malformed(e.to_string())))?;
    let Some(fields) = value.get("header").and_then(Value::as_object) else {
        return Err(err(ParseErrorKind::MissingHeader));
    };
    let n = header_u64(path, fields, "n")?;
    let width = header_u64(path, fields, "width")?;
    let height = header_u64(path, fields, "height")?;
    let to_u32 = |name: &str, v: u64| {
        u32::try_from(v)
            .map_err(|_| err(ParseErrorKind::InvalidHeader(format!("`{name}` is too large"))))
    };
    let fps = match fields.get("fps") {
        None => DEFAULT_FPS,
        Some(v) => match v.as_f64() {
            Some(f) if f.is_finite() && f > 0.0 => f,
            _ => {
                return Err(err(ParseErrorKind::InvalidHeader(format!(
                    "`fps` must be a positive number, got {v}"
                ))))
            }
        },
    };
    let schema = match fields.get("schema") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(v) => {
            return Err(err(ParseErrorKind::InvalidHeader(format!(
                "`schema` must be a string, got {v}"
            ))))
        }
    };
    Ok(LandmarkFileHeader {
        schema,
        n: n as usize,
        width: to_u32("width", width)?,
        height: to_u32("height", height)?,
        fps,
    })
}

/// Orders frames by index and rejects duplicates and gaps. `records` holds
/// `(line, index, points)`.
fn assemble(
    path: &Path,
    records: Vec<(usize, usize, Vec<Point>)>,
    width: u32,
    height: u32,
    fps: f64,
) -> Result<LandmarkSequence> {
    if records.is_empty() {
        return Err(ParseError::new(path, Location::File, ParseErrorKind::Empty).into());
    }
    let mut by_index: BTreeMap<usize, (usize, Vec<Point>)> = BTreeMap::new();
    for (line, index, points) in records {
        if by_index.insert(index, (line, points)).is_some() {
            return Err(ParseError::new(
                path,
                Location::Line(line),
                ParseErrorKind::DuplicateFrame(index),
            )
            .into());
        }
    }
    let mut frames = Vec::with_capacity(by_index.len());
    for (expected, (index, (line, points))) in by_index.into_iter().enumerate() {
        if index != expected {
            return Err(ParseError::new(
                path,
                Location::Line(line),
                ParseErrorKind::FrameGap { missing: expected },
            )
            .into());
        }
        frames.push(FrameLandmarks::new(index, points));
    }
    LandmarkSequence::new(frames, width, height, fps)
}

/// Parses the JSONL landmark format: a header line
/// `{"header": {"n", "width", "height", "fps"?, "schema"?}}` followed by one
/// `{"frame": i, "points": [[x, y], ...]}` object per line.
pub fn parse_landmarks_jsonl(
    text: &str,
    path: &Path,
) -> Result<(LandmarkFileHeader, LandmarkSequence)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((first_no, first)) = lines.next() else {
        return Err(ParseError::new(path, Location::Line(1), ParseErrorKind::MissingHeader).into());
    };
    let header = parse_header(path, first).map_err(|e| match e {
        Error::Parse(mut p) => {
            p.location = Location::Line(first_no);
            Error::Parse(p)
        }
        other => other,
    })?;

    let mut records = Vec::new();
    for (no, line) in lines {
        let at = |kind| Error::from(ParseError::new(path, Location::Line(no), kind));
        let rec: FrameLine =
            serde_json::from_str(line).map_err(|e| at(ParseErrorKind::Malformed(e.to_string())))?;
        if rec.points.len() != header.n {
            return Err(at(ParseErrorKind::PointCount {
                expected: header.n,
                found: rec.points.len(),
            }));
        }
        if rec.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(at(ParseErrorKind::NonFinite { row: rec.frame }));
        }
        let points = rec.points.iter().map(|&[x, y]| Point::new(x, y)).collect();
        records.push((no, rec.frame, points));
    }
    let seq = assemble(path, records, header.width, header.height, header.fps)?;
    Ok((header, seq))
}

/// Parses CSV landmarks: header `frame,x0,y0,...,x{n-1},y{n-1}`, then one
/// row per frame.
pub fn parse_landmarks_csv(
    text: &str,
    path: &Path,
    geometry: CsvGeometry,
) -> Result<LandmarkSequence> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let parse_err = |line: usize, kind| Error::from(ParseError::new(path, Location::Line(line), kind));
    let line_of = |e: &csv::Error| e.position().map_or(1, |p| p.line() as usize);

    let header = match rows.next() {
        None => return Err(parse_err(1, ParseErrorKind::MissingHeader)),
        Some(Err(e)) => return Err(parse_err(line_of(&e), ParseErrorKind::Malformed(e.to_string()))),
        Some(Ok(h)) => h,
    };
    let header_line = header.position().map_or(1, |p| p.line() as usize);
    if header.len() < 3 || header.len() % 2 == 0 {
        return Err(parse_err(
            header_line,
            ParseErrorKind::InvalidHeader(format!(
                "expected `frame` followed by x/y column pairs, found {} columns",
                header.len()
            )),
        ));
    }
    let n = (header.len() - 1) / 2;
    let expected_name = |col: usize| match col {
        0 => "frame".to_owned(),
        c => format!("{}{}", if c % 2 == 1 { 'x' } else { 'y' }, (c - 1) / 2),
    };
    if let Some((col, name)) = header
        .iter()
        .enumerate()
        .find(|(c, name)| *name != expected_name(*c))
    {
        return Err(parse_err(
            header_line,
            ParseErrorKind::InvalidHeader(format!(
                "column {col} is `{name}`, expected `{}`",
                expected_name(col)
            )),
        ));
    }

    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| parse_err(line_of(&e), ParseErrorKind::Malformed(e.to_string())))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 2 * n + 1 {
            return Err(parse_err(
                line,
                ParseErrorKind::Arity {
                    expected: 2 * n + 1,
                    found: row.len(),
                },
            ));
        }
        let index: usize = row[0].parse().map_err(|_| {
            parse_err(
                line,
                ParseErrorKind::Malformed(format!("frame index `{}` is not an integer", &row[0])),
            )
        })?;
        let mut coords = Vec::with_capacity(2 * n);
        for field in row.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(line, ParseErrorKind::Malformed(format!("`{field}` is not a number")))
            })?;
            if !v.is_finite() {
                return Err(parse_err(line, ParseErrorKind::NonFinite { row: index }));
            }
            coords.push(v);
        }
        let points = coords.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
        records.push((line, index, points));
    }
    assemble(path, records, geometry.width, geometry.height, geometry.fps)
}

/// Canonical JSONL encoding: fixed key order, six decimal places, sorted frames.
pub fn write_landmarks_jsonl(seq: &LandmarkSequence, schema: Option<&str>) -> String {
    let mut out = String::from("{\"header\":{");
    if let Some(name) = schema {
        let quoted = serde_json::to_string(name).expect("string serializes");
        write!(out, "\"schema\":{quoted},").unwrap();
    }
    writeln!(
        out,
        "\"n\":{},\"width\":{},\"height\":{},\"fps\":{:.6}}}}}",
        seq.landmark_count(),
        seq.width(),
        seq.height(),
        seq.fps()
    )
    .unwrap();
    for frame in seq.frames() {
        write!(out, "{{\"frame\":{},\"points\":[", frame.index).unwrap();
        for (i, p) in frame.points.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "[{:.6},{:.6}]", p.x, p.y).unwrap();
        }
        out.push_str("]}\n");
    }
    out
}

pub fn write_landmarks_csv(seq: &LandmarkSequence) -> String {
    let mut out = String::from("frame");
    for i in 0..seq.landmark_count() {
        write!(out, ",x{i},y{i}").unwrap();
    }
    out.push('\n');
    for frame in seq.frames() {
        write!(out, "{}", frame.index).unwrap();
        for p in &frame.points {
            write!(out, ",{:.6},{:.6}", p.x, p.y).unwrap();
        }
        out.push('\n');
    }
    out
}
