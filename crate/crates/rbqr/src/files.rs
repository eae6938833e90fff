//! Snapshot, parameter and result files.
//!
//! On disk a snapshot matrix is stored with one snapshot per row: an npy
//! array of shape `(M, N)`, or a text file with `M` lines of `2N` numbers
//! (real and imaginary parts alternating). Loading turns row `i` into
//! column `i`. Real npy payloads are promoted to complex.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rbqr_core::matrix::{Matrix, SnapshotMatrix};
use rbqr_core::scalar::{c64, C64};

use crate::npy::{self, NpyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Npy,
    Text,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Npy => "npy",
            Format::Text => "text",
        }
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "npy" => Ok(Format::Npy),
            "text" | "txt" => Ok(Format::Text),
            _ => Err(format!("unknown format '{s}' (expected npy or text)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where in a file a problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Byte(u64),
    Line(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Byte(b) => write!(f, "byte {b}"),
            Location::Line(l) => write!(f, "line {l}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {location}: {msg}", path.display())]
    Format { path: PathBuf, location: Location, msg: String },
}

impl FileError {
    fn io(path: &Path, source: io::Error) -> Self {
        FileError::Io { path: path.to_path_buf(), source }
    }

    fn format(path: &Path, location: Location, msg: impl Into<String>) -> Self {
        FileError::Format { path: path.to_path_buf(), location, msg: msg.into() }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, FileError> {
    File::open(path).map(BufReader::new).map_err(|e| FileError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, FileError> {
    File::create(path).map(BufWriter::new).map_err(|e| FileError::io(path, e))
}

pub fn load_snapshots(path: &Path, format: Format) -> Result<SnapshotMatrix, FileError> {
    let (rows, data) = match format {
        Format::Npy => read_npy_rows(path)?,
        Format::Text => read_text_rows(path)?,
    };
    let m = rows.len();
    let n = rows.first().copied().unwrap_or(0);
    if m == 0 || n == 0 {
        let at = match format {
            Format::Npy => Location::Byte(0),
            Format::Text => Location::Line(1),
        };
        return Err(FileError::format(path, at, format!("empty matrix: {m} snapshots of length {n}")));
    }
    let matrix = Matrix::from_col_major(n, m, data)
        .map_err(|e| FileError::format(path, Location::Byte(0), e.to_string()))?;
    SnapshotMatrix::new(matrix).map_err(|e| FileError::format(path, Location::Byte(0), e.to_string()))
}

/// Returns the length of every on-disk row and the entries, row after row.
fn read_npy_rows(path: &Path) -> Result<(Vec<usize>, Vec<C64>), FileError> {
    let array = npy::read(&mut open(path)?).map_err(|e| match e {
        NpyError::Format { offset, msg } => FileError::format(path, Location::Byte(offset), msg),
        NpyError::Io(e) => FileError::io(path, e),
    })?;
    let (m, n) = match array.shape[..] {
        [n] => (1, n),
        [m, n] => (m, n),
        _ => {
            return Err(FileError::format(
                path,
                Location::Byte(0),
                format!("expected a 1- or 2-dimensional array, found shape {:?}", array.shape),
            ))
        }
    };
    let (start, size) = (array.payload_offset, array.item_size());
    let data = array.data.into_complex();
    if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        let (row, col) = (pos / n, pos % n);
        return Err(FileError::format(
            path,
            Location::Byte(start + pos as u64 * size),
            format!("non-finite entry at ({row}, {col})"),
        ));
    }
    Ok((vec![n; m], data))
}

fn read_text_rows(path: &Path) -> Result<(Vec<usize>, Vec<C64>), FileError> {
    let mut lens = Vec::new();
    let mut data = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| FileError::io(path, e))?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let values = parse_floats(t).map_err(|msg| FileError::format(path, Location::Line(lineno), msg))?;
        if values.len() % 2 != 0 {
            return Err(FileError::format(
                path,
                Location::Line(lineno),
                format!("{} numbers, expected re/im pairs", values.len()),
            ));
        }
        let row = lens.len();
        if let Some(&n) = lens.first() {
            if values.len() / 2 != n {
                return Err(FileError::format(
                    path,
                    Location::Line(lineno),
                    format!("{} entries, previous snapshots have {n}", values.len() / 2),
                ));
            }
        }
        for (col, p) in values.chunks(2).enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(FileError::format(
                    path,
                    Location::Line(lineno),
                    format!("non-finite entry at ({row}, {col})"),
                ));
            }
            data.push(c64(p[0], p[1]));
        }
        lens.push(values.len() / 2);
    }
    Ok((lens, data))
}

fn parse_floats(line: &str) -> Result<Vec<f64>, String> {
    line.split_whitespace()
        .map(|w| w.parse::<f64>().map_err(|_| format!("'{w}' is not a number")))
        .collect()
}

/// Stores the columns of `m` as rows, the layout `load_snapshots` reads.
pub fn save_columns(path: &Path, m: &Matrix, format: Format) -> Result<(), FileError> {
    let mut w = create(path)?;
    let result = match format {
        Format::Npy => npy::write(&mut w, &[m.cols(), m.rows()], m.as_slice()),
        Format::Text => write_text_rows(&mut w, m.columns()),
    };
    result.and_then(|()| w.flush()).map_err(|e| FileError::io(path, e))
}

/// Stores row vectors (such as the rows of `R`) one per row.
pub fn save_rows(path: &Path, rows: &[Vec<C64>], format: Format) -> Result<(), FileError> {
    let mut w = create(path)?;
    let width = rows.first().map_or(0, Vec::len);
    let result = match format {
        Format::Npy => {
            let flat: Vec<C64> = rows.iter().flatten().copied().collect();
            npy::write(&mut w, &[rows.len(), width], &flat)
        }
        Format::Text => write_text_rows(&mut w, rows.iter().map(Vec::as_slice)),
    };
    result.and_then(|()| w.flush()).map_err(|e| FileError::io(path, e))
}

/// `{:e}` prints the shortest digits that parse back to the same value.
fn write_text_rows<'a>(w: &mut impl Write, rows: impl Iterator<Item = &'a [C64]>) -> io::Result<()> {
    for row in rows {
        let mut first = true;
        for z in row {
            if !first {
                w.write_all(b" ")?;
            }
            first = false;
            write!(w, "{:e} {:e}", z.re, z.im)?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_indices(path: &Path, indices: &[usize], format: Format) -> Result<(), FileError> {
    let mut w = create(path)?;
    let result = match format {
        Format::Npy => {
            let v: Vec<i64> = indices.iter().map(|&i| i as i64).collect();
            npy::write(&mut w, &[v.len()], &v)
        }
        Format::Text => indices.iter().try_for_each(|i| writeln!(w, "{i}")),
    };
    result.and_then(|()| w.flush()).map_err(|e| FileError::io(path, e))
}

pub fn load_indices(path: &Path) -> Result<Vec<usize>, FileError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| FileError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(t.parse().map_err(|_| FileError::format(path, Location::Line(i + 1), format!("'{t}' is not an index")))?);
    }
    Ok(out)
}

pub fn save_reals(path: &Path, values: &[f64], header: &str) -> Result<(), FileError> {
    let mut w = create(path)?;
    let result = writeln!(w, "# {header}")
        .and_then(|()| values.iter().try_for_each(|v| writeln!(w, "{v:e}")))
        .and_then(|()| w.flush());
    result.map_err(|e| FileError::io(path, e))
}

pub fn load_reals(path: &Path) -> Result<Vec<f64>, FileError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| FileError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.extend(parse_floats(t).map_err(|msg| FileError::format(path, Location::Line(i + 1), msg))?);
    }
    Ok(out)
}

/// Reads a parameter grid: one `(a, b)` tuple per line.
pub fn load_params(path: &Path) -> Result<Vec<[f64; 2]>, FileError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| FileError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let at = Location::Line(i + 1);
        let v = parse_floats(t).map_err(|msg| FileError::format(path, at, msg))?;
        match v[..] {
            [a, b] if a.is_finite() && b.is_finite() => out.push([a, b]),
            [_, _] => return Err(FileError::format(path, at, "non-finite parameter")),
            _ => return Err(FileError::format(path, at, format!("expected 2 parameters, found {}", v.len()))),
        }
    }
    Ok(out)
}

pub fn save_params(path: &Path, params: &[[f64; 2]]) -> Result<(), FileError> {
    let mut w = create(path)?;
    let result = params.iter().try_for_each(|p| writeln!(w, "{:e} {:e}", p[0], p[1])).and_then(|()| w.flush());
    result.map_err(|e| FileError::io(path, e))
}
