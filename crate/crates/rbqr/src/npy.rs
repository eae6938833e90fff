//! NumPy `.npy` files.
//!
//! The reader accepts format versions 1.0, 2.0 and 3.0 with little-endian
//! `c16`, `f8` or `i8` payloads in either memory order. The writer always
//! emits version 1.0, C order, with the header padded so the payload starts
//! on a 64-byte boundary.

use std::io::{self, BufRead, Read, Write};

use num_complex::Complex64;

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

const ALIGN: usize = 64;

// Entries reserved up front; a corrupt shape must not allocate before the
// payload turns out short.
const PREALLOC: usize = 1 << 22;

#[derive(Debug, thiserror::Error)]
pub enum NpyError {
    #[error("byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn malformed<T>(offset: u64, msg: impl Into<String>) -> Result<T, NpyError> {
    Err(NpyError::Format { offset, msg: msg.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    Complex(Vec<Complex64>),
    Real(Vec<f64>),
    Int(Vec<i64>),
}

impl Data {
    pub fn len(&self) -> usize {
        match self {
            Data::Complex(v) => v.len(),
            Data::Real(v) => v.len(),
            Data::Int(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every entry as a complex number.
    pub fn into_complex(self) -> Vec<Complex64> {
        match self {
            Data::Complex(v) => v,
            Data::Real(v) => v.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
            Data::Int(v) => v.into_iter().map(|x| Complex64::new(x as f64, 0.0)).collect(),
        }
    }
}

/// A C-order array as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub data: Data,
    /// File offset of the first payload byte.
    pub payload_offset: u64,
}

impl Array {
    pub fn item_size(&self) -> u64 {
        match self.data {
            Data::Complex(_) => 16,
            Data::Real(_) | Data::Int(_) => 8,
        }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Complex,
    Real,
    Int,
}

struct Header {
    kind: Kind,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Element types the writer can emit.
pub trait Element: Copy {
    const DESCR: &'static str;
    fn write_le(&self, w: &mut impl Write) -> io::Result<()>;
}

impl Element for Complex64 {
    const DESCR: &'static str = "<c16";
    fn write_le(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.re.to_le_bytes())?;
        w.write_all(&self.im.to_le_bytes())
    }
}

impl Element for f64 {
    const DESCR: &'static str = "<f8";
    fn write_le(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.to_le_bytes())
    }
}

impl Element for i64 {
    const DESCR: &'static str = "<i8";
    fn write_le(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.to_le_bytes())
    }
}

pub fn read<R: BufRead>(r: &mut R) -> Result<Array, NpyError> {
    let mut prefix = [0u8; 8];
    read_exact_at(r, &mut prefix, 0)?;
    if &prefix[..6] != MAGIC {
        return malformed(0, "not an npy file (bad magic)");
    }
    let (major, minor) = (prefix[6], prefix[7]);
    let (len, start) = match major {
        1 => {
            let mut b = [0u8; 2];
            read_exact_at(r, &mut b, 8)?;
            (u16::from_le_bytes(b) as usize, 10u64)
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            read_exact_at(r, &mut b, 8)?;
            (u32::from_le_bytes(b) as usize, 12u64)
        }
        _ => return malformed(6, format!("unsupported format version {major}.{minor}")),
    };
    let mut raw = vec![0u8; len];
    read_exact_at(r, &mut raw, start)?;
    let text = match std::str::from_utf8(&raw) {
        Ok(t) => t,
        Err(e) => return malformed(start + e.valid_up_to() as u64, "header is not valid text"),
    };
    let header = parse_header(text).or_else(|msg| malformed(start, msg))?;
    let payload_offset = start + len as u64;

    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(NpyError::Format { offset: start, msg: "shape overflows".into() })?;
    let mut reader = Payload { inner: r, offset: payload_offset };
    let mut data = match header.kind {
        Kind::Complex => {
            let mut v = Vec::with_capacity(count.min(PREALLOC));
            for _ in 0..count {
                let mut b = [0u8; 16];
                reader.fill(&mut b, count, 16)?;
                let re = f64::from_le_bytes(b[..8].try_into().unwrap());
                let im = f64::from_le_bytes(b[8..].try_into().unwrap());
                v.push(Complex64::new(re, im));
            }
            Data::Complex(v)
        }
        Kind::Real => {
            let mut v = Vec::with_capacity(count.min(PREALLOC));
            for _ in 0..count {
                let mut b = [0u8; 8];
                reader.fill(&mut b, count, 8)?;
                v.push(f64::from_le_bytes(b));
            }
            Data::Real(v)
        }
        Kind::Int => {
            let mut v = Vec::with_capacity(count.min(PREALLOC));
            for _ in 0..count {
                let mut b = [0u8; 8];
                reader.fill(&mut b, count, 8)?;
                v.push(i64::from_le_bytes(b));
            }
            Data::Int(v)
        }
    };
    if header.fortran_order && header.shape.len() > 1 {
        data = match data {
            Data::Complex(v) => Data::Complex(to_c_order(&v, &header.shape)),
            Data::Real(v) => Data::Real(to_c_order(&v, &header.shape)),
            Data::Int(v) => Data::Int(to_c_order(&v, &header.shape)),
        };
    }
    Ok(Array { shape: header.shape, data, payload_offset })
}

struct Payload<'a, R> {
    inner: &'a mut R,
    offset: u64,
}

impl<R: Read> Payload<'_, R> {
    fn fill(&mut self, buf: &mut [u8], count: usize, size: u64) -> Result<(), NpyError> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => malformed(
                self.offset,
                format!("payload ends early, expected {} entries of {size} bytes", count),
            ),
            Err(e) => Err(e.into()),
        }
    }
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<(), NpyError> {
    match r.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => malformed(offset, "file ends inside the header"),
        Err(e) => Err(e.into()),
    }
}

fn to_c_order<T: Copy>(v: &[T], shape: &[usize]) -> Vec<T> {
    // Fortran order is the C order of the reversed shape; transpose it back.
    let nd = shape.len();
    let mut f_strides = vec![1usize; nd];
    for d in 1..nd {
        f_strides[d] = f_strides[d - 1] * shape[d - 1];
    }
    let mut out = Vec::with_capacity(v.len());
    let mut idx = vec![0usize; nd];
    for _ in 0..v.len() {
        let pos: usize = idx.iter().zip(&f_strides).map(|(i, s)| i * s).sum();
        out.push(v[pos]);
        for d in (0..nd).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

fn parse_header(text: &str) -> Result<Header, String> {
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|b| b.strip_suffix('}'))
        .ok_or("header is not a dict literal")?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after) = quoted(rest)?;
        let after = after.trim_start().strip_prefix(':').ok_or("expected ':' after key")?.trim_start();
        rest = match key {
            "descr" => {
                let (v, a) = quoted(after)?;
                descr = Some(v);
                a
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    a
                } else if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    a
                } else {
                    return Err("fortran_order must be True or False".into());
                }
            }
            "shape" => {
                let a = after.strip_prefix('(').ok_or("shape must be a tuple")?;
                let end = a.find(')').ok_or("unterminated shape tuple")?;
                let dims = a[..end]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map_err(|_| format!("bad dimension '{s}'")))
                    .collect::<Result<Vec<_>, _>>()?;
                shape = Some(dims);
                &a[end + 1..]
            }
            other => return Err(format!("unexpected header key '{other}'")),
        };
        rest = rest.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    let descr = descr.ok_or("header has no 'descr'")?;
    let kind = match descr {
        "<c16" => Kind::Complex,
        "<f8" => Kind::Real,
        "<i8" => Kind::Int,
        other => return Err(format!("unsupported dtype '{other}' (expected <c16, <f8 or <i8)")),
    };
    Ok(Header {
        kind,
        fortran_order: fortran.ok_or("header has no 'fortran_order'")?,
        shape: shape.ok_or("header has no 'shape'")?,
    })
}

fn quoted(s: &str) -> Result<(&str, &str), String> {
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"').ok_or("expected a quoted string")?;
    let inner = &s[1..];
    let end = inner.find(q).ok_or("unterminated string")?;
    Ok((&inner[..end], &inner[end + 1..]))
}

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [d] => format!("({d},)"),
        _ => format!("({})", shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    }
}

/// Writes `data` (C order) with the given shape.
pub fn write<T: Element, W: Write>(w: &mut W, shape: &[usize], data: &[T]) -> io::Result<()> {
    let count: usize = shape.iter().product();
    if count != data.len() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("shape {shape:?} holds {count} entries, got {}", data.len()),
        ));
    }
    let mut dict = format!("{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}", T::DESCR, shape_literal(shape));
    let unpadded = MAGIC.len() + 4 + dict.len() + 1;
    dict.extend(std::iter::repeat(' ').take((ALIGN - unpadded % ALIGN) % ALIGN));
    dict.push('\n');
    let len = u16::try_from(dict.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "npy header too long for format 1.0"))?;
    w.write_all(MAGIC)?;
    w.write_all(&[1, 0])?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(dict.as_bytes())?;
    for x in data {
        x.write_le(w)?;
    }
    Ok(())
}
