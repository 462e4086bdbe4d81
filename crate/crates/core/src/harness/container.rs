//! Binary complex-tensor container shared with the denoiser.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field                                       |
//! |-------|---------------------------------------------|
//! | 8     | magic `IRSCTNSR`                            |
//! | 2     | version (`1`)                               |
//! | 1     | endianness (`1` = little)                   |
//! | 1     | complex interleaving (`1` = re, im pairs)   |
//! | 1     | dtype width in bytes (`4` or `8`)           |
//! | 3     | reserved, zero                              |
//! | 4     | ndim                                        |
//! | 8·nd  | shape, row-major                            |
//! | 8     | payload length in bytes                     |
//! | ...   | payload                                     |
//!
//! Each tensor file may carry a JSON metadata sidecar at `<file>.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"IRSCTNSR";
pub const VERSION: u16 = 1;
const LITTLE_ENDIAN: u8 = 1;
const INTERLEAVED: u8 = 1;

/// Row-major complex tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<Complex64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }
}

/// Parsed header of a tensor file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub version: u16,
    pub dtype_width: u8,
    pub shape: Vec<usize>,
    pub payload_len: u64,
}

/// Path of the JSON metadata sidecar for `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn encode(tensor: &Tensor, dtype_width: u8) -> Result<Vec<u8>> {
    let payload_len = tensor.data.len() * 2 * dtype_width as usize;
    let mut out = Vec::with_capacity(32 + 8 * tensor.shape.len() + payload_len);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&[LITTLE_ENDIAN, INTERLEAVED, dtype_width, 0, 0, 0]);
    out.extend_from_slice(&(tensor.shape.len() as u32).to_le_bytes());
    for &d in &tensor.shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&(payload_len as u64).to_le_bytes());
    match dtype_width {
        8 => {
            for z in &tensor.data {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        4 => {
            for z in &tensor.data {
                out.extend_from_slice(&(z.re as f32).to_le_bytes());
                out.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
        w => {
            return Err(Error::format(
                "dtype_width",
                format!("unsupported width {w}"),
            ))
        }
    }
    Ok(out)
}

/// Writes `tensor` as float64 pairs.
pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    write_tensor_with_width(path, tensor, 8)
}

/// Writes `tensor` with the given float width (4 or 8 bytes).
pub fn write_tensor_with_width(path: &Path, tensor: &Tensor, dtype_width: u8) -> Result<()> {
    let bytes = encode(tensor, dtype_width)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `meta` as the JSON sidecar of `path`.
pub fn write_sidecar<T: serde::Serialize>(path: &Path, meta: &T) -> Result<()> {
    let side = sidecar_path(path);
    let text =
        serde_json::to_string_pretty(meta).map_err(|e| Error::format("metadata", e.to_string()))?;
    std::fs::write(&side, text).map_err(|e| Error::io(side, e))
}

fn take<'a>(buf: &mut &'a [u8], n: usize, field: &'static str) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::format(field, "file truncated"));
    }
    let (head, rest) = buf.split_at(n);
    *buf = rest;
    Ok(head)
}

fn parse_header(buf: &mut &[u8]) -> Result<Header> {
    if take(buf, 8, "magic")? != MAGIC {
        return Err(Error::format("magic", "not a complex tensor file"));
    }
    let version = u16::from_le_bytes(take(buf, 2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let flags = take(buf, 6, "flags")?;
    if flags[0] != LITTLE_ENDIAN {
        return Err(Error::format(
            "endianness",
            format!("unsupported marker {}", flags[0]),
        ));
    }
    if flags[1] != INTERLEAVED {
        return Err(Error::format(
            "interleaving",
            format!("unsupported marker {}", flags[1]),
        ));
    }
    let dtype_width = flags[2];
    if dtype_width != 4 && dtype_width != 8 {
        return Err(Error::format(
            "dtype_width",
            format!("unsupported width {dtype_width}"),
        ));
    }
    let ndim = u32::from_le_bytes(take(buf, 4, "ndim")?.try_into().unwrap()) as usize;
    if ndim > 16 {
        return Err(Error::format("ndim", format!("{ndim} dimensions")));
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = u64::from_le_bytes(take(buf, 8, "shape")?.try_into().unwrap());
        shape.push(usize::try_from(d).map_err(|_| Error::format("shape", "dimension overflow"))?);
    }
    let payload_len = u64::from_le_bytes(take(buf, 8, "payload_len")?.try_into().unwrap());
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format("shape", "element count overflow"))?;
    if count as u64 * 2 * dtype_width as u64 != payload_len {
        return Err(Error::format(
            "shape",
            format!("shape {shape:?} does not match payload of {payload_len} bytes"),
        ));
    }
    Ok(Header {
        version,
        dtype_width,
        shape,
        payload_len,
    })
}

/// Decodes a tensor from bytes.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let mut buf = bytes;
    let header = parse_header(&mut buf)?;
    if buf.len() as u64 != header.payload_len {
        return Err(Error::format(
            "payload_len",
            format!(
                "header declares {} bytes, found {}",
                header.payload_len,
                buf.len()
            ),
        ));
    }
    let data = match header.dtype_width {
        8 => buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect(),
        _ => buf
            .chunks_exact(8)
            .map(|c| {
                Complex64::new(
                    f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
                )
            })
            .collect(),
    };
    Ok(Tensor {
        shape: header.shape,
        data,
    })
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Reads only the header, validating it.
pub fn read_header(path: &Path) -> Result<Header> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut fixed = [0u8; 20];
    r.read_exact(&mut fixed).map_err(|e| Error::io(path, e))?;
    let ndim = u32::from_le_bytes(fixed[16..20].try_into().unwrap()) as usize;
    let mut rest = vec![0u8; 8 * ndim.min(16) + 8];
    r.read_exact(&mut rest).map_err(|e| Error::io(path, e))?;
    let mut all = fixed.to_vec();
    all.extend_from_slice(&rest);
    let mut buf = all.as_slice();
    parse_header(&mut buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bitwise(
            dims in prop::collection::vec(1usize..5, 1..4),
            seed in any::<u64>(),
        ) {
            let n: usize = dims.iter().product();
            let mut state = seed;
            let data: Vec<Complex64> = (0..n)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    Complex64::new(f64::from_bits(state >> 2), -(state as f64))
                })
                .collect();
            let t = Tensor::new(dims, data).unwrap();
            let back = decode(&encode(&t, 8).unwrap()).unwrap();
            prop_assert_eq!(back.shape, t.shape.clone());
            for (a, b) in back.data.iter().zip(&t.data) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    fn sample() -> Vec<u8> {
        let t = Tensor::new(
            vec![2, 3],
            (0..6).map(|i| Complex64::new(i as f64, -1.0)).collect(),
        )
        .unwrap();
        encode(&t, 8).unwrap()
    }

    fn field_of(bytes: &[u8]) -> &'static str {
        match decode(bytes) {
            Err(Error::Format { field, .. }) => field,
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn header_errors_name_the_field() {
        let mut b = sample();
        b[0] = b'X';
        assert_eq!(field_of(&b), "magic");

        let mut b = sample();
        b[8] = 9;
        assert_eq!(field_of(&b), "version");

        let mut b = sample();
        b[10] = 2;
        assert_eq!(field_of(&b), "endianness");

        let mut b = sample();
        b[12] = 2;
        assert_eq!(field_of(&b), "dtype_width");

        let mut b = sample();
        b[20] = 5; // first dimension
        assert_eq!(field_of(&b), "shape");

        let mut b = sample();
        b.pop();
        assert_eq!(field_of(&b), "payload_len");
    }

    #[test]
    fn float32_payloads_are_readable() {
        let t = Tensor::new(vec![3], vec![Complex64::new(0.5, -2.0); 3]).unwrap();
        let back = decode(&encode(&t, 4).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn header_only_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ctns");
        std::fs::write(&p, sample()).unwrap();
        let h = read_header(&p).unwrap();
        assert_eq!(h.shape, vec![2, 3]);
        assert_eq!(h.payload_len, 96);
        assert_eq!(sidecar_path(&p), dir.path().join("x.ctns.json"));
    }
}
