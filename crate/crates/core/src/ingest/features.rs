use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{read_bytes, read_text};
use crate::error::{Error, Location, ParseError, ParseErrorKind, Result};
use crate::model::FeatureSet;
use crate::sync::EmbeddingStream;

pub const FTEV_MAGIC: [u8; 4] = *b"FTEV";
pub const FTEV_VERSION: u32 = 1;
pub const FTEV_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Ftev,
    Csv,
}

impl FeatureFormat {
    /// `.csv` is CSV; anything else is FTEV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Ftev,
        }
    }
}

impl FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ftev" => Ok(FeatureFormat::Ftev),
            "csv" => Ok(FeatureFormat::Csv),
            other => Err(Error::Usage(format!("unknown feature format `{other}`"))),
        }
    }
}

/// Fixed 16-byte little-endian header: magic, version, rows, dim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureFileHeader {
    pub version: u32,
    pub rows: u32,
    pub dim: u32,
}

impl FeatureFileHeader {
    pub fn payload_len(&self) -> u64 {
        self.rows as u64 * self.dim as u64 * 4
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |at: u64, kind| Error::from(ParseError::new(path, Location::Byte(at), kind));
        if bytes.len() < FTEV_HEADER_LEN {
            return Err(err(
                bytes.len() as u64,
                ParseErrorKind::Truncated {
                    expected: FTEV_HEADER_LEN as u64,
                    found: bytes.len() as u64,
                },
            ));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != FTEV_MAGIC {
            return Err(err(0, ParseErrorKind::BadMagic(magic)));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(4);
        if version != FTEV_VERSION {
            return Err(err(4, ParseErrorKind::UnsupportedVersion(version)));
        }
        let rows = word(8);
        if rows < 2 {
            return Err(err(
                8,
                ParseErrorKind::InvalidHeader(format!("rows must be at least 2, got {rows}")),
            ));
        }
        let dim = word(12);
        if dim < 1 {
            return Err(err(12, ParseErrorKind::InvalidHeader("dim must be at least 1".into())));
        }
        Ok(Self { version, rows, dim })
    }

    pub fn encode(&self) -> [u8; FTEV_HEADER_LEN] {
        let mut out = [0u8; FTEV_HEADER_LEN];
        out[0..4].copy_from_slice(&FTEV_MAGIC);
        out[4..8].copy_from_slice(&self.version.to_le_bytes());
        out[8..12].copy_from_slice(&self.rows.to_le_bytes());
        out[12..16].copy_from_slice(&self.dim.to_le_bytes());
        out
    }
}

pub fn parse_ftev(bytes: &[u8], path: &Path) -> Result<FeatureSet> {
    let header = FeatureFileHeader::decode(bytes, path)?;
    let expected = FTEV_HEADER_LEN as u64 + header.payload_len();
    let found = bytes.len() as u64;
    if found < expected {
        return Err(ParseError::new(
            path,
            Location::Byte(found),
            ParseErrorKind::Truncated { expected, found },
        )
        .into());
    }
    if found > expected {
        return Err(ParseError::new(
            path,
            Location::Byte(expected),
            ParseErrorKind::TrailingBytes {
                extra: found - expected,
            },
        )
        .into());
    }
    let dim = header.dim as usize;
    let payload = &bytes[FTEV_HEADER_LEN..];
    let mut values = Vec::with_capacity(payload.len() / 4);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            let at = (FTEV_HEADER_LEN + 4 * i) as u64;
            return Err(ParseError::new(
                path,
                Location::Byte(at),
                ParseErrorKind::NonFinite { row: i / dim },
            )
            .into());
        }
        values.push(v as f64);
    }
    FeatureSet::new(header.rows as usize, dim, values)
}

/// FTEV encoding; values are narrowed to `f32`.
pub fn encode_ftev(features: &FeatureSet) -> Result<Vec<u8>> {
    let narrow = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} does not fit in 32 bits")))
    };
    let header = FeatureFileHeader {
        version: FTEV_VERSION,
        rows: narrow(features.rows(), "row count")?,
        dim: narrow(features.dim(), "dimension")?,
    };
    let mut out = Vec::with_capacity(FTEV_HEADER_LEN + features.values().len() * 4);
    out.extend_from_slice(&header.encode());
    for &v in features.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Headerless CSV, one feature vector per row.
pub fn parse_features_csv(text: &str, path: &Path) -> Result<FeatureSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let err = |line: usize, kind| Error::from(ParseError::new(path, Location::Line(line), kind));
    let mut dim = None;
    let mut rows = 0;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(1, |p| p.line() as usize);
            err(line, ParseErrorKind::Malformed(e.to_string()))
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *dim.get_or_insert(record.len());
        if record.len() != expected {
            return Err(err(
                line,
                ParseErrorKind::Arity {
                    expected,
                    found: record.len(),
                },
            ));
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                err(line, ParseErrorKind::Malformed(format!("`{field}` is not a number")))
            })?;
            if !v.is_finite() {
                return Err(err(line, ParseErrorKind::NonFinite { row: rows }));
            }
            values.push(v);
        }
        rows += 1;
    }
    let Some(dim) = dim else {
        return Err(ParseError::new(path, Location::File, ParseErrorKind::Empty).into());
    };
    FeatureSet::new(rows, dim, values)
}

/// Shortest round-tripping decimal for every value.
pub fn write_features_csv(features: &FeatureSet) -> String {
    let mut out = String::new();
    for row in features.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_features(path: &Path, format: FeatureFormat) -> Result<FeatureSet> {
    match format {
        FeatureFormat::Ftev => parse_ftev(&read_bytes(path)?, path),
        FeatureFormat::Csv => parse_features_csv(&read_text(path)?, path),
    }
}

/// Embedding streams share the feature file formats, one vector per row.
pub fn read_embeddings(path: &Path, format: FeatureFormat, hop: usize) -> Result<EmbeddingStream> {
    let features = read_features(path, format)?;
    EmbeddingStream::from_features(&features, hop).map_err(|e| match e {
        Error::Invalid(msg) => Error::Invalid(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("f.ftev")
    }

    fn kind_at(e: Error) -> (ParseErrorKind, Location) {
        match e {
            Error::Parse(p) => (p.kind, p.location),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    fn sample() -> Vec<u8> {
        let f = FeatureSet::from_rows(&[vec![1.0, 2.0], vec![0.5, -3.0], vec![1e-3, 7.25]]).unwrap();
        encode_ftev(&f).unwrap()
    }

    #[test]
    fn three_by_two() {
        let bytes = sample();
        assert_eq!(bytes.len(), 16 + 24);
        let f = parse_ftev(&bytes, p()).unwrap();
        assert_eq!((f.rows(), f.dim()), (3, 2));
        assert_eq!(f.row(1), &[0.5, -3.0]);
        assert_eq!(f.row(2)[0], 1e-3f32 as f64);
        assert_eq!(encode_ftev(&f).unwrap(), bytes);
    }

    #[test]
    fn truncated_payload() {
        let bytes = sample();
        let (k, l) = kind_at(parse_ftev(&bytes[..bytes.len() - 4], p()).unwrap_err());
        assert_eq!(k, ParseErrorKind::Truncated { expected: 40, found: 36 });
        assert_eq!(l, Location::Byte(36));
    }

    #[test]
    fn header_errors() {
        let mut bytes = sample();
        bytes[0] = b'X';
        assert_eq!(
            kind_at(parse_ftev(&bytes, p()).unwrap_err()),
            (ParseErrorKind::BadMagic(*b"XTEV"), Location::Byte(0))
        );
        let mut bytes = sample();
        bytes[4] = 2;
        assert_eq!(
            kind_at(parse_ftev(&bytes, p()).unwrap_err()),
            (ParseErrorKind::UnsupportedVersion(2), Location::Byte(4))
        );
        let mut bytes = sample();
        bytes[8] = 1;
        assert!(matches!(
            kind_at(parse_ftev(&bytes, p()).unwrap_err()),
            (ParseErrorKind::InvalidHeader(_), Location::Byte(8))
        ));
        let mut bytes = sample();
        bytes.push(0);
        assert_eq!(
            kind_at(parse_ftev(&bytes, p()).unwrap_err()),
            (ParseErrorKind::TrailingBytes { extra: 1 }, Location::Byte(40))
        );
        assert!(matches!(
            kind_at(parse_ftev(b"FTEV", p()).unwrap_err()).0,
            ParseErrorKind::Truncated { .. }
        ));
    }

    #[test]
    fn non_finite_payload() {
        let mut bytes = sample();
        bytes[16 + 12..16 + 16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(
            kind_at(parse_ftev(&bytes, p()).unwrap_err()),
            (ParseErrorKind::NonFinite { row: 1 }, Location::Byte(28))
        );
    }

    #[test]
    fn csv_features() {
        let f = parse_features_csv("1,2\n0.5,-3\n\n1e-3,7.25\n", p()).unwrap();
        assert_eq!((f.rows(), f.dim()), (3, 2));
        let (k, l) = kind_at(parse_features_csv("1,2\nnan,3\n", p()).unwrap_err());
        assert_eq!((k, l), (ParseErrorKind::NonFinite { row: 1 }, Location::Line(2)));
        let (k, _) = kind_at(parse_features_csv("1,2\n3\n", p()).unwrap_err());
        assert_eq!(k, ParseErrorKind::Arity { expected: 2, found: 1 });
        let (k, _) = kind_at(parse_features_csv("", p()).unwrap_err());
        assert_eq!(k, ParseErrorKind::Empty);
        let back = parse_features_csv(&write_features_csv(&f), p()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn format_detection() {
        assert_eq!(FeatureFormat::from_path(Path::new("a.CSV")), FeatureFormat::Csv);
        assert_eq!(FeatureFormat::from_path(Path::new("a.ftev")), FeatureFormat::Ftev);
        assert!("npy".parse::<FeatureFormat>().is_err());
    }
}
