//! Embedding matrices on disk (EMB1 / TSV) and a feature-hashing text
//! embedder for runs without an external encoder.
//!
//! EMB1 layout, little-endian: `"EMB1"`, `u32 N`, `u32 D`, then `N` ids as
//! `u16 length + UTF-8 bytes`, then `N·D` `f32` values row-major.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::data_ingest::Dataset;
use crate::error::{Error, Result};
use crate::hash::fnv1a32;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub ids: Vec<String>,
    pub values: Matrix<f32>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, values: Matrix<f32>) -> Result<Self> {
        if ids.len() != values.rows() {
            return Err(Error::Shape(format!(
                "{} ids for {} embedding rows",
                ids.len(),
                values.rows()
            )));
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate embedding id `{id}`")));
            }
        }
        for (i, row) in values.row_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "embedding row {i} (`{}`) has a non-finite value at column {j}",
                    ids[i]
                )));
            }
        }
        Ok(Self { ids, values })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// Reorder rows to follow `ids` exactly. Every requested id must be
    /// present and every stored id must be requested.
    pub fn aligned_to(&self, ids: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        if let Some(extra) = self.ids.iter().find(|id| !wanted.contains(id.as_str())) {
            return Err(Error::Data(format!(
                "embedding id `{extra}` does not match any dataset record"
            )));
        }
        let mut order = Vec::with_capacity(ids.len());
        for id in ids {
            match index.get(id.as_str()) {
                Some(&i) => order.push(i),
                None => {
                    return Err(Error::Data(format!(
                        "dataset record `{id}` has no embedding row"
                    )))
                }
            }
        }
        Ok(Self {
            ids: ids.to_vec(),
            values: self.values.select_rows(&order),
        })
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated file while reading {what} at byte {}",
                self.pos
            )));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_emb1(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let mut c = Cursor {
        data: bytes,
        pos: 0,
    };
    if c.take(4, "magic")? != EMB1_MAGIC {
        return Err(Error::Format("missing EMB1 magic".into()));
    }
    let n = c.u32("row count")? as usize;
    let d = c.u32("dimension")? as usize;
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        let len = c.u16("id length")? as usize;
        let raw = c.take(len, "id")?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| Error::Format(format!("id of row {i} is not UTF-8")))?;
        ids.push(id.to_string());
    }
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format("N·D overflows".into()))?;
    let raw = c.take(count * 4, "values")?;
    if c.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after EMB1 payload",
            bytes.len() - c.pos
        )));
    }
    let values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(ids, Matrix::from_vec(n, d, values)?)
}

pub fn encode_emb1(m: &EmbeddingMatrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + m.rows() * (m.dim() * 4 + 16));
    out.extend_from_slice(EMB1_MAGIC);
    let n = u32::try_from(m.rows()).map_err(|_| Error::Format("too many rows".into()))?;
    let d = u32::try_from(m.dim()).map_err(|_| Error::Format("dimension too large".into()))?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for id in &m.ids {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::Format(format!("id `{id}` longer than 65535 bytes")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for v in m.values.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// TSV with header `id<TAB>v0…v{D-1}`.
pub fn decode_tsv(text: &str) -> Result<EmbeddingMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty embedding TSV".into()))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.first().map(|c| c.trim()) != Some("id") {
        return Err(Error::Schema(
            "embedding TSV header must start with `id`".into(),
        ));
    }
    let d = cols.len() - 1;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let id = fields[0].to_string();
        if fields.len() - 1 != d {
            return Err(Error::Data(format!(
                "embedding row {row} (`{id}`) has {} values, header declares {d}",
                fields.len() - 1
            )));
        }
        for f in &fields[1..] {
            let v: f32 = f.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "embedding row {row} (`{id}`): `{f}` is not a number"
                ))
            })?;
            values.push(v);
        }
        ids.push(id);
    }
    let n = ids.len();
    EmbeddingMatrix::new(ids, Matrix::from_vec(n, d, values)?)
}

/// Read an EMB1 or TSV file, chosen by the leading magic bytes.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(EMB1_MAGIC) {
        decode_emb1(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| {
            Error::Format(format!("{} is neither EMB1 nor UTF-8 TSV", path.display()))
        })?;
        decode_tsv(text)
    }
}

pub fn write_emb1(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_emb1(m)?).map_err(|e| Error::io(path, e))
}

/// Load a matrix and join it to the dataset by [`row_id`](crate::DrugRecord::row_id).
pub fn load_embeddings(path: impl AsRef<Path>, dataset: &Dataset) -> Result<EmbeddingMatrix> {
    read_embeddings(path)?.aligned_to(&dataset.row_ids())
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Signed feature hashing: token `t` adds ±1 at `fnv1a32(t) mod dim`, sign
/// from bit 0 of the hash (set bit is negative). The result is L2-normalized.
pub fn hash_embed<S: Scalar>(text: &str, dim: usize) -> Result<Vec<S>> {
    if dim < 64 || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension must be a power of two >= 64, got {dim}"
        )));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::Data(format!("no tokens in text `{text}`")));
    }
    let mut acc = vec![0.0f64; dim];
    for t in &tokens {
        let h = fnv1a32(t.as_bytes());
        let sign = if h & 1 == 1 { -1.0 } else { 1.0 };
        acc[h as usize % dim] += sign;
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Numeric(format!(
            "hashed tokens of `{text}` cancel to the zero vector"
        )));
    }
    Ok(acc.into_iter().map(|v| S::of(v / norm)).collect())
}
