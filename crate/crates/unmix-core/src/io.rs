//! Little-endian binary array format ("UMXA") for field, measurement, and
//! Jacobian dumps, plus grayscale PGM heatmap export.
//!
//! UMXA layout: 4-byte magic "UMXA", 1-byte dtype code (1 = f64,
//! 2 = complex64, 3 = u8), 1-byte rank, then rank u64 dims, then the
//! row-major little-endian payload.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::{Result, UnmixError};

const MAGIC: &[u8; 4] = b"UMXA";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F64 = 1,
    Complex64 = 2,
    U8 = 3,
}

impl Dtype {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Dtype::F64),
            2 => Ok(Dtype::Complex64),
            3 => Ok(Dtype::U8),
            _ => Err(format_err(format!("unknown dtype code {code}"))),
        }
    }

    fn item_bytes(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::Complex64 => 16,
            Dtype::U8 => 1,
        }
    }
}

/// An n-dimensional array as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Array {
    F64 { dims: Vec<u64>, data: Vec<f64> },
    Complex64 { dims: Vec<u64>, data: Vec<Complex64> },
    U8 { dims: Vec<u64>, data: Vec<u8> },
}

impl Array {
    pub fn dims(&self) -> &[u64] {
        match self {
            Array::F64 { dims, .. } | Array::Complex64 { dims, .. } | Array::U8 { dims, .. } => {
                dims
            }
        }
    }

    fn dtype(&self) -> Dtype {
        match self {
            Array::F64 { .. } => Dtype::F64,
            Array::Complex64 { .. } => Dtype::Complex64,
            Array::U8 { .. } => Dtype::U8,
        }
    }

    fn item_count(&self) -> usize {
        match self {
            Array::F64 { data, .. } => data.len(),
            Array::Complex64 { data, .. } => data.len(),
            Array::U8 { data, .. } => data.len(),
        }
    }

    fn check_dims(&self) -> Result<()> {
        let want: u64 = self.dims().iter().product();
        if want != self.item_count() as u64 {
            return Err(UnmixError::InvalidArgument(format!(
                "dims {:?} describe {want} items, payload has {}",
                self.dims(),
                self.item_count()
            )));
        }
        Ok(())
    }

    pub fn as_f64(&self) -> Result<&[f64]> {
        match self {
            Array::F64 { data, .. } => Ok(data),
            _ => Err(format_err("expected an f64 array".into())),
        }
    }

    pub fn as_complex(&self) -> Result<&[Complex64]> {
        match self {
            Array::Complex64 { data, .. } => Ok(data),
            _ => Err(format_err("expected a complex array".into())),
        }
    }

    pub fn as_u8(&self) -> Result<&[u8]> {
        match self {
            Array::U8 { data, .. } => Ok(data),
            _ => Err(format_err("expected a u8 array".into())),
        }
    }
}

fn io_err(e: std::io::Error) -> UnmixError {
    UnmixError::Io(e)
}

fn format_err(msg: String) -> UnmixError {
    UnmixError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}

pub fn write_array<W: Write>(mut w: W, array: &Array) -> Result<()> {
    array.check_dims()?;
    let dims = array.dims();
    if dims.len() > u8::MAX as usize {
        return Err(UnmixError::InvalidArgument("rank exceeds 255".into()));
    }
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&[array.dtype() as u8, dims.len() as u8]).map_err(io_err)?;
    for &d in dims {
        w.write_all(&d.to_le_bytes()).map_err(io_err)?;
    }
    match array {
        Array::F64 { data, .. } => {
            for v in data {
                w.write_all(&v.to_le_bytes()).map_err(io_err)?;
            }
        }
        Array::Complex64 { data, .. } => {
            for v in data {
                w.write_all(&v.re.to_le_bytes()).map_err(io_err)?;
                w.write_all(&v.im.to_le_bytes()).map_err(io_err)?;
            }
        }
        Array::U8 { data, .. } => w.write_all(data).map_err(io_err)?,
    }
    Ok(())
}

pub fn read_array<R: Read>(mut r: R) -> Result<Array> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:?}")));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head).map_err(io_err)?;
    let dtype = Dtype::from_code(head[0])?;
    let rank = head[1] as usize;
    let mut dims = Vec::with_capacity(rank);
    let mut buf8 = [0u8; 8];
    for _ in 0..rank {
        r.read_exact(&mut buf8).map_err(io_err)?;
        dims.push(u64::from_le_bytes(buf8));
    }
    let count = dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d)).ok_or_else(|| {
        UnmixError::TooLarge("dims overflow".into())
    })?;
    let bytes = (count as usize)
        .checked_mul(dtype.item_bytes())
        .filter(|&b| b <= 1 << 33)
        .ok_or_else(|| UnmixError::TooLarge(format!("payload of {count} items refused")))?;
    let mut payload = vec![0u8; bytes];
    r.read_exact(&mut payload).map_err(io_err)?;
    let array = match dtype {
        Dtype::F64 => Array::F64 {
            dims,
            data: payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        },
        Dtype::Complex64 => Array::Complex64 {
            dims,
            data: payload
                .chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect(),
        },
        Dtype::U8 => Array::U8 { dims, data: payload },
    };
    Ok(array)
}

pub fn save_array(path: &std::path::Path, array: &Array) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_array(std::io::BufWriter::new(file), array)
}

pub fn load_array(path: &std::path::Path) -> Result<Array> {
    let file = std::fs::File::open(path).map_err(io_err)?;
    read_array(std::io::BufReader::new(file))
}

/// Binary PGM (P5) grayscale image from row-major values on a fixed [0, 1]
/// scale; values are clamped, then mapped to 0..=255.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height || width == 0 || height == 0 {
        return Err(UnmixError::InvalidArgument(format!(
            "PGM needs {width}x{height} values, got {}",
            values.len()
        )));
    }
    write!(w, "P5\n{width} {height}\n255\n").map_err(io_err)?;
    let bytes: Vec<u8> =
        values.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    w.write_all(&bytes).map_err(io_err)
}

pub fn save_pgm(path: &std::path::Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_pgm(std::io::BufWriter::new(file), width, height, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip() {
        let a = Array::F64 { dims: vec![2, 3], data: vec![1.0, -2.5, 0.0, 1e-300, f64::MAX, 3.25] };
        let mut buf = Vec::new();
        write_array(&mut buf, &a).unwrap();
        assert_eq!(&buf[..4], b"UMXA");
        assert_eq!(buf[4], 1); // dtype
        assert_eq!(buf[5], 2); // rank
        assert_eq!(buf.len(), 4 + 2 + 16 + 48);
        assert_eq!(read_array(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn complex_and_u8_round_trip() {
        let c = Array::Complex64 {
            dims: vec![3],
            data: vec![
                Complex64::new(1.0, -1.0),
                Complex64::new(0.0, 2.5),
                Complex64::new(-7.0, 0.0),
            ],
        };
        let mut buf = Vec::new();
        write_array(&mut buf, &c).unwrap();
        assert_eq!(read_array(buf.as_slice()).unwrap(), c);

        let u = Array::U8 { dims: vec![2, 2], data: vec![0, 255, 17, 3] };
        let mut buf = Vec::new();
        write_array(&mut buf, &u).unwrap();
        assert_eq!(read_array(buf.as_slice()).unwrap(), u);
    }

    #[test]
    fn rejects_corrupt_headers_and_bad_dims() {
        assert!(read_array(&b"XMUA\x01\x00"[..]).is_err());
        let a = Array::F64 { dims: vec![4], data: vec![1.0] };
        let mut buf = Vec::new();
        assert!(write_array(&mut buf, &a).is_err());
        // Truncated payload.
        let good = Array::F64 { dims: vec![2], data: vec![1.0, 2.0] };
        let mut buf = Vec::new();
        write_array(&mut buf, &good).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_array(buf.as_slice()).is_err());
    }

    #[test]
    fn refuses_absurd_payloads() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"UMXA");
        buf.push(1);
        buf.push(2);
        buf.extend_from_slice(&u64::MAX.to_le_bytes());
        buf.extend_from_slice(&2u64.to_le_bytes());
        assert!(matches!(read_array(buf.as_slice()), Err(UnmixError::TooLarge(_))));
    }

    #[test]
    fn pgm_header_and_scaling() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 2, &[0.0, 1.0, 0.5, 2.0]).unwrap();
        assert!(buf.starts_with(b"P5\n2 2\n255\n"));
        let pixels = &buf[buf.len() - 4..];
        assert_eq!(pixels, &[0, 255, 128, 255]);
        assert!(write_pgm(&mut Vec::new(), 2, 2, &[0.0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dump.umxa");
        let a = Array::Complex64 { dims: vec![2], data: vec![Complex64::new(1.0, 2.0); 2] };
        save_array(&path, &a).unwrap();
        assert_eq!(load_array(&path).unwrap(), a);
    }
}
