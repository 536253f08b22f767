//! Binary model files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   [u8; 8]      "NADECF01" or "IMFCF001"
//! payload              model-specific, see below
//! check   u64          FNV-1a 64 of the payload bytes
//! ```
//!
//! Neural payload: `u32 M, u32 H, u32 activation`, then `W`, `A`, `V`, `b`,
//! `d` as `f64` in row-major order.
//!
//! Factorization payload: `u32 U, u32 M, u32 F`, then `X` (`U x F`), `Y`
//! (`M x F`), `f64 lambda`, `f64 alpha`.

use std::hash::Hasher;
use std::io::{Read, Write};

use fnv::FnvHasher;
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::imf::ImfModel;
use crate::model::{Activation, NadeModel};

pub const NADE_MAGIC: &[u8; 8] = b"NADECF01";
pub const IMF_MAGIC: &[u8; 8] = b"IMFCF001";

/// Either kind of saved model.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Nade(NadeModel),
    Imf(ImfModel),
}

fn checksum(payload: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(payload);
    h.finish()
}

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("dimension exceeds u32");
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s<'a>(buf: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn frame(magic: &[u8; 8], payload: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 16);
    out.extend_from_slice(magic);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&checksum(&payload).to_le_bytes());
    out
}

pub fn nade_to_bytes(model: &NadeModel) -> Vec<u8> {
    let mut p = Vec::new();
    put_u32(&mut p, model.n_items());
    put_u32(&mut p, model.n_hidden());
    p.extend_from_slice(&model.activation.code().to_le_bytes());
    // iter() on a standard-layout array is row-major
    put_f64s(&mut p, model.w.iter());
    put_f64s(&mut p, model.a.iter());
    put_f64s(&mut p, model.v.iter());
    put_f64s(&mut p, model.b.iter());
    put_f64s(&mut p, model.d.iter());
    frame(NADE_MAGIC, p)
}

pub fn imf_to_bytes(model: &ImfModel) -> Vec<u8> {
    let mut p = Vec::new();
    put_u32(&mut p, model.n_users());
    put_u32(&mut p, model.n_items());
    put_u32(&mut p, model.factors());
    put_f64s(&mut p, model.x.iter());
    put_f64s(&mut p, model.y.iter());
    put_f64s(&mut p, [model.lambda, model.alpha].iter());
    frame(IMF_MAGIC, p)
}

pub fn save_nade<W: Write>(model: &NadeModel, mut out: W) -> Result<()> {
    out.write_all(&nade_to_bytes(model))?;
    out.flush()?;
    Ok(())
}

pub fn save_imf<W: Write>(model: &ImfModel, mut out: W) -> Result<()> {
    out.write_all(&imf_to_bytes(model))?;
    out.flush()?;
    Ok(())
}

/// Sequential reader over a payload slice.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat("truncated payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::ModelFormat("dimension overflow".into()))?;
        let b = self.take(bytes)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::ModelFormat("dimension overflow".into()))?;
        let data = self.f64s(n)?;
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::ModelFormat(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Splits a file into magic and verified payload.
fn unframe(bytes: &[u8]) -> Result<(&[u8; 8], &[u8])> {
    if bytes.len() < 16 {
        return Err(Error::ModelFormat(format!("file too short ({} bytes)", bytes.len())));
    }
    let magic: &[u8; 8] = bytes[..8].try_into().unwrap();
    if magic != NADE_MAGIC && magic != IMF_MAGIC {
        return Err(Error::ModelFormat("unrecognised magic or version".into()));
    }
    let (payload, check) = bytes[8..].split_at(bytes.len() - 16);
    let stored = u64::from_le_bytes(check.try_into().unwrap());
    if stored != checksum(payload) {
        return Err(Error::ModelFormat(
            "checksum mismatch (corrupt or truncated file)".into(),
        ));
    }
    Ok((magic, payload))
}

fn nade_from_payload(payload: &[u8]) -> Result<NadeModel> {
    let mut c = Cursor { buf: payload, pos: 0 };
    let m = c.u32()?;
    let h = c.u32()?;
    let code = c.u32()? as u32;
    if m == 0 || h == 0 {
        return Err(Error::ModelFormat(format!("invalid dimensions M = {m}, H = {h}")));
    }
    let activation =
        Activation::from_code(code).ok_or_else(|| Error::ModelFormat(format!("unknown activation code {code}")))?;
    let model = NadeModel {
        w: c.matrix(h, m)?,
        a: c.matrix(h, m)?,
        v: c.matrix(m, h)?,
        b: Array1::from(c.f64s(h)?),
        d: Array1::from(c.f64s(m)?),
        activation,
    };
    c.finish()?;
    model.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(model)
}

fn imf_from_payload(payload: &[u8]) -> Result<ImfModel> {
    let mut c = Cursor { buf: payload, pos: 0 };
    let u = c.u32()?;
    let m = c.u32()?;
    let f = c.u32()?;
    if m == 0 || f == 0 {
        return Err(Error::ModelFormat(format!("invalid dimensions M = {m}, F = {f}")));
    }
    let x = c.matrix(u, f)?;
    let y = c.matrix(m, f)?;
    let tail = c.f64s(2)?;
    c.finish()?;
    let model = ImfModel {
        x,
        y,
        lambda: tail[0],
        alpha: tail[1],
    };
    model.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(model)
}

pub fn load_any_bytes(bytes: &[u8]) -> Result<SavedModel> {
    let (magic, payload) = unframe(bytes)?;
    if magic == NADE_MAGIC {
        nade_from_payload(payload).map(SavedModel::Nade)
    } else {
        imf_from_payload(payload).map(SavedModel::Imf)
    }
}

pub fn load_any<R: Read>(mut source: R) -> Result<SavedModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    load_any_bytes(&bytes)
}

pub fn load_nade<R: Read>(source: R) -> Result<NadeModel> {
    match load_any(source)? {
        SavedModel::Nade(m) => Ok(m),
        SavedModel::Imf(_) => Err(Error::ModelFormat("expected a NADECF01 file, found IMFCF001".into())),
    }
}

pub fn load_imf<R: Read>(source: R) -> Result<ImfModel> {
    match load_any(source)? {
        SavedModel::Imf(m) => Ok(m),
        SavedModel::Nade(_) => Err(Error::ModelFormat("expected an IMFCF001 file, found NADECF01".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> NadeModel {
        let mut m = NadeModel::init(4, 3, Activation::Tanh, 11, 0.5);
        m.b[1] = -0.25;
        m.d[3] = 1.5;
        m
    }

    #[test]
    fn header_layout() {
        let bytes = nade_to_bytes(&model());
        assert_eq!(&bytes[..8], b"NADECF01");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 0);
        assert_eq!(bytes.len(), 8 + 12 + 8 * (12 + 12 + 12 + 3 + 4) + 8);
        let w00 = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        assert_eq!(w00, model().w[[0, 0]]);
    }

    #[test]
    fn nade_round_trip_is_bit_exact() {
        let m = model();
        let back = load_nade(&nade_to_bytes(&m)[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn imf_round_trip_is_bit_exact() {
        let cfg = crate::imf::ImfConfig {
            factors: 3,
            seed: 4,
            ..Default::default()
        };
        let mut m = ImfModel::init(2, 5, &cfg);
        m.x[[1, 2]] = 0.125;
        let back = load_imf(&imf_to_bytes(&m)[..]).unwrap();
        assert_eq!(back, m);
        assert!(load_nade(&imf_to_bytes(&m)[..]).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = nade_to_bytes(&model());
        for cut in [0, 7, 8, 20, bytes.len() - 1] {
            assert!(load_any_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn flipped_byte_is_rejected() {
        let mut bytes = nade_to_bytes(&model());
        bytes[40] ^= 0x01;
        assert!(matches!(load_any_bytes(&bytes), Err(Error::ModelFormat(_))));
        let mut bytes = nade_to_bytes(&model());
        bytes[3] = b'X';
        assert!(load_any_bytes(&bytes).is_err());
    }

    #[test]
    fn zero_items_header_is_rejected() {
        let mut p = Vec::new();
        p.extend_from_slice(&0u32.to_le_bytes());
        p.extend_from_slice(&2u32.to_le_bytes());
        p.extend_from_slice(&0u32.to_le_bytes());
        p.extend_from_slice(&[0u8; 16]);
        let bytes = frame(NADE_MAGIC, p);
        assert!(load_any_bytes(&bytes).is_err());
    }

    #[test]
    fn consistent_checksum_with_short_payload_is_rejected() {
        let full = nade_to_bytes(&model());
        let payload = full[8..full.len() - 16].to_vec();
        let bytes = frame(NADE_MAGIC, payload);
        assert!(matches!(load_any_bytes(&bytes), Err(Error::ModelFormat(_))));
    }
}
