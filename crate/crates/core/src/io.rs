//! Binary field snapshots and CSV time series.
//!
//! Snapshot layout (little endian): `b"ANTF"`, `u32` version, `u32 nx`,
//! `u32 ny`, `f64 t`, then `nx * ny` `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{Field, Grid, GridError};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"ANTF";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("time series row {row} has {actual} values, expected {expected}")]
    RowLength { row: usize, expected: usize, actual: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn encode_snapshot(f: &Field, t: f64) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(&SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_snapshot(f: &Field, t: f64, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    w.write_all(&encode_snapshot(f, t)).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Raw snapshot contents; the physical extent is not stored in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn into_field(self, grid: Grid) -> Result<Field, GridError> {
        if grid.nx() != self.nx || grid.ny() != self.ny {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                actual: self.nx * self.ny,
            });
        }
        Field::new(grid, self.values)
    }
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<Snapshot, IoError> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(path, format!("truncated header ({} bytes)", bytes.len())));
    }
    if bytes[..4] != SNAPSHOT_MAGIC {
        return Err(format_err(path, "bad magic, expected ANTF"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != SNAPSHOT_VERSION {
        return Err(format_err(
            path,
            format!("unsupported snapshot version {version}, expected {SNAPSHOT_VERSION}"),
        ));
    }
    let (nx, ny) = (u32_at(8) as usize, u32_at(12) as usize);
    let t = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = HEADER_LEN + 8 * nx * ny;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("{nx}x{ny} snapshot needs {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Snapshot { nx, ny, t, values })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, IoError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io_err(path))?)
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    decode_snapshot(&bytes, path)
}

/// Named columns of scalar samples; the first column is conventionally `t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<(), IoError> {
        if row.len() != self.columns.len() {
            return Err(IoError::RowLength {
                row: self.rows.len(),
                expected: self.columns.len(),
                actual: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn write_timeseries(series: &TimeSeries, path: &Path) -> Result<(), IoError> {
    let csv_err = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    for (row, r) in series.rows.iter().enumerate() {
        if r.len() != series.columns.len() {
            return Err(IoError::RowLength {
                row,
                expected: series.columns.len(),
                actual: r.len(),
            });
        }
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(&series.columns).map_err(csv_err)?;
    for r in &series.rows {
        w.write_record(r.iter().map(|v| format!("{v:.16e}"))).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_timeseries(path: &Path) -> Result<TimeSeries, IoError> {
    let csv_err = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err)?;
    let columns: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut series = TimeSeries::new(columns);
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let row = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| format_err(path, format!("bad number {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        series.push(row)?;
    }
    Ok(series)
}
