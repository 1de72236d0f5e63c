//! `BRG1` checkpoints: magic, three little-endian `u32` dims (d, D_text,
//! D_mol), `W_T` then `W_M` as row-major little-endian `f32`, then the
//! training config as JSON running to end of file.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::{BridgeParams, TrainConfig};

pub const BRG1_MAGIC: &[u8; 4] = b"BRG1";

pub fn encode_checkpoint(params: &BridgeParams<f32>, cfg: &TrainConfig) -> Result<Vec<u8>> {
    let (d, dt, dm) = (
        params.dim(),
        params.text_input_dim(),
        params.mol_input_dim(),
    );
    if params.mol.rows() != d {
        return Err(Error::Shape(format!(
            "heads disagree on output dimension: {d} vs {}",
            params.mol.rows()
        )));
    }
    let mut out = Vec::with_capacity(16 + 4 * d * (dt + dm));
    out.extend_from_slice(BRG1_MAGIC);
    for v in [d, dt, dm] {
        let v = u32::try_from(v).map_err(|_| Error::Shape(format!("dimension {v} exceeds u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for w in params.text.as_slice().iter().chain(params.mol.as_slice()) {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend(serde_json::to_vec(cfg).map_err(|e| Error::Format(e.to_string()))?);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(BridgeParams<f32>, TrainConfig)> {
    let bad = |msg: &str| Error::Format(format!("checkpoint: {msg}"));
    if bytes.len() < 16 || &bytes[..4] != BRG1_MAGIC {
        return Err(bad("missing BRG1 header"));
    }
    let dim =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (d, dt, dm) = (dim(0), dim(1), dim(2));
    let floats = d
        .checked_mul(
            dt.checked_add(dm)
                .ok_or_else(|| bad("dimension overflow"))?,
        )
        .ok_or_else(|| bad("dimension overflow"))?;
    let end = floats
        .checked_mul(4)
        .and_then(|b| b.checked_add(16))
        .ok_or_else(|| bad("dimension overflow"))?;
    if bytes.len() < end {
        return Err(bad(&format!(
            "truncated: {} bytes, weights need {end}",
            bytes.len()
        )));
    }
    let values: Vec<f32> = bytes[16..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (text, mol) = values.split_at(d * dt);
    let params = BridgeParams {
        text: Matrix::from_vec(d, dt, text.to_vec())?,
        mol: Matrix::from_vec(d, dm, mol.to_vec())?,
    };
    let cfg: TrainConfig =
        serde_json::from_slice(&bytes[end..]).map_err(|e| bad(&format!("config trailer: {e}")))?;
    Ok((params, cfg))
}

pub fn save_checkpoint(path: &Path, params: &BridgeParams<f32>, cfg: &TrainConfig) -> Result<()> {
    let bytes = encode_checkpoint(params, cfg)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(BridgeParams<f32>, TrainConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::init_params;

    #[test]
    fn round_trip_is_exact() {
        let p = init_params::<f32>(8, 5, 12, 4);
        let cfg = TrainConfig {
            dim: 8,
            seed: 77,
            temperature: 0.05,
            ..Default::default()
        };
        let bytes = encode_checkpoint(&p, &cfg).unwrap();
        assert_eq!(&bytes[..4], b"BRG1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 5);
        let (q, c) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(cfg, c);
        assert_eq!(encode_checkpoint(&q, &c).unwrap(), bytes);
    }

    #[test]
    fn rejects_damage() {
        let p = init_params::<f32>(2, 2, 2, 1);
        let bytes = encode_checkpoint(&p, &TrainConfig::default()).unwrap();
        assert!(decode_checkpoint(&bytes[..20]).is_err());
        assert!(decode_checkpoint(b"BRG2............").is_err());
        let mut broken = bytes.clone();
        broken.truncate(bytes.len() - 1);
        assert!(decode_checkpoint(&broken).is_err());
    }
}
