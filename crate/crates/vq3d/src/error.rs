use std::fmt;
use std::path::{Path, PathBuf};

use vq3d_core::colmap::ModelError;

/// Where in a file a parse failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(u64),
    None,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Byte(n) => write!(f, "byte {n}"),
            Location::None => f.write_str("-"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error in {file} at {location}: {reason}")]
    Parse { file: String, location: Location, reason: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Well-formed input that does not fit the expected schema.
    #[error("{0}")]
    Data(String),
    /// Bad configuration or usage.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn parse(file: &str, location: Location, reason: impl Into<String>) -> Self {
        Error::Parse { file: file.to_string(), location, reason: reason.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    /// 1 for usage/config problems, 2 for everything about the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}

impl From<ModelError> for Error {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Integrity(m) => Error::Integrity(m),
            other => Error::Data(other.to_string()),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_string(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|e| Error::parse(&path.display().to_string(), Location::Byte(e.utf8_error().valid_up_to() as u64), "invalid UTF-8"))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn json_error(file: &str, e: serde_json::Error) -> Error {
    match e.classify() {
        serde_json::error::Category::Data => Error::Data(format!("{file}: {e}")),
        _ => Error::parse(file, Location::Line(e.line()), e.to_string()),
    }
}
