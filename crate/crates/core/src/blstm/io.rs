//! Binary model files, little-endian:
//!
//! ```text
//! "VCML" | version u32 = 1 | n u32 | arch[0..n] u32
//! input mean, input std, output mean, output std      (f64 each)
//! per layer, forward then backward direction:
//!     W_xi W_hi b_i  W_xf W_hf b_f  W_xc W_hc b_c  W_xo W_ho b_o  w_ci w_cf w_co
//! W_fy W_by b_y                                       (f64, matrices row-major)
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array1;

use super::model::{BlstmModel, BlstmParams};
use crate::error::{Error, Result};
use crate::features::NormStats;

pub const MODEL_MAGIC: &[u8; 4] = b"VCML";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &BlstmModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.arch().len() as u32).to_le_bytes());
    for &a in model.arch() {
        buf.extend_from_slice(&(a as u32).to_le_bytes());
    }
    let norms = [
        model.input_norm().mean(),
        model.input_norm().std(),
        model.output_norm().mean(),
        model.output_norm().std(),
    ];
    for v in norms.iter().flat_map(|a| a.iter()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in model.params().to_flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Corrupt("model file truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Corrupt("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<BlstmModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MODEL_MAGIC {
        return Err(Error::Format("bad model magic".into()));
    }
    let version = cur.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {version}"
        )));
    }
    let n = cur.u32()? as usize;
    if n > 1024 {
        return Err(Error::Corrupt(format!(
            "implausible architecture length {n}"
        )));
    }
    let arch = (0..n)
        .map(|_| cur.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut params = BlstmParams::zeros(&arch).map_err(|e| Error::Corrupt(e.to_string()))?;
    let (i, o) = (arch[0], arch[n - 1]);
    let in_mean = Array1::from(cur.f64s(i)?);
    let in_std = Array1::from(cur.f64s(i)?);
    let out_mean = Array1::from(cur.f64s(o)?);
    let out_std = Array1::from(cur.f64s(o)?);
    let flat = cur.f64s(params.len())?;
    if cur.pos != bytes.len() {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes after model payload",
            bytes.len() - cur.pos
        )));
    }
    params.set_flat(&flat)?;
    BlstmModel::from_parts(
        arch,
        params,
        NormStats::new(in_mean, in_std)?,
        NormStats::new(out_mean, out_std)?,
    )
}

pub fn save_model(model: &BlstmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BlstmModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blstm::init_params;

    #[test]
    fn header_layout() {
        let m = init_params(&[2, 3, 1], 5).unwrap();
        let bytes = encode_model(&m);
        assert_eq!(&bytes[..4], b"VCML");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        let norms = 2 * 2 + 2;
        assert_eq!(bytes.len(), 12 + 3 * 4 + 8 * (norms + m.param_count()));
        // first parameter is W_xi of the first forward direction
        let first = f64::from_le_bytes(bytes[24 + 8 * norms..32 + 8 * norms].try_into().unwrap());
        assert_eq!(first, m.params().layers[0].forward.w_x[[0, 0]]);
    }

    #[test]
    fn rejects_bad_input() {
        let m = init_params(&[2, 3, 1], 5).unwrap();
        let mut bytes = encode_model(&m);
        assert_eq!(decode_model(&bytes).unwrap(), m);
        bytes.push(0);
        assert!(matches!(decode_model(&bytes), Err(Error::Corrupt(_))));
        bytes.truncate(bytes.len() - 9);
        assert!(matches!(decode_model(&bytes), Err(Error::Corrupt(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::Format(_))));
    }
}
