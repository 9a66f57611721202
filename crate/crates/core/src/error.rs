use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, mapped one-to-one onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Input,
    Precondition,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Input => 2,
            ErrorClass::Precondition => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Data that parsed fine but violates a domain invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A metric's precondition does not hold for the supplied operands.
    #[error("{0}")]
    Precondition(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse(_) | Error::Io { .. } | Error::Invalid(_) => ErrorClass::Input,
            Error::Precondition(_) => ErrorClass::Precondition,
            Error::Usage(_) => ErrorClass::Usage,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

/// Where in a file a parse error was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// 1-based text line.
    Line(usize),
    /// 0-based byte offset into a binary file.
    Byte(u64),
    /// The error concerns the file (or directory) as a whole.
    File,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Byte(n) => write!(f, "byte {n}"),
            Location::File => f.write_str("file"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("missing header line")]
    MissingHeader,
    #[error("missing header field `{0}`")]
    MissingHeaderField(&'static str),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("frame {missing} is missing (frame indices must be contiguous from 0)")]
    FrameGap { missing: usize },
    #[error("frame {0} appears more than once")]
    DuplicateFrame(usize),
    #[error("expected {expected} points, found {found}")]
    PointCount { expected: usize, found: usize },
    #[error("expected {expected} fields, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("bad magic {0:?}, expected \"FTEV\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: u64 },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("unreadable image: {0}")]
    Image(String),
    #[error("frame is {found_w}x{found_h}x{found_c}, expected {expected_w}x{expected_h}x{expected_c}")]
    FrameShape {
        expected_w: u32,
        expected_h: u32,
        expected_c: u8,
        found_w: u32,
        found_h: u32,
        found_c: u8,
    },
    #[error("no input records")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}: {location}: {kind}", path.display())]
pub struct ParseError {
    pub path: PathBuf,
    pub location: Location,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(path: impl Into<PathBuf>, location: Location, kind: ParseErrorKind) -> Self {
        Self {
            path: path.into(),
            location,
            kind,
        }
    }
}
