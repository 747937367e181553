//! Precomputed document field vectors in a flat binary file.
//!
//! Layout, little-endian: `VSEB`, version `u32`, vector dim `u32`, field
//! count `u32`, record count `u64`, hash length `u32` and the model
//! checkpoint hash bytes; then fixed-size records of doc id `u64` followed
//! by `fields * dim` `f32` values.

use std::collections::HashMap;
use std::path::Path;

use crate::data::DocumentRecord;
use crate::error::{Error, Result};
use crate::ranker::model::{RankerModel, TextRepr};

pub const MAGIC: &[u8; 4] = b"VSEB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    checkpoint_hash: String,
    dim: usize,
    fields: usize,
    ids: Vec<u64>,
    data: Vec<f32>,
    index: HashMap<u64, usize>,
}

impl EmbeddingStore {
    pub fn build<'a>(model: &RankerModel, docs: impl IntoIterator<Item = &'a DocumentRecord>) -> Result<Self> {
        let mut docs: Vec<&DocumentRecord> = docs.into_iter().collect();
        docs.sort_by_key(|d| d.id);
        docs.dedup_by_key(|d| d.id);
        let (dim, fields) = (model.vector_dim(), model.field_count());
        let mut data = Vec::with_capacity(docs.len() * dim * fields);
        for d in &docs {
            for v in model.encode_doc(d)?.vectors() {
                data.extend(v.iter().map(|&x| x as f32));
            }
        }
        let ids: Vec<u64> = docs.iter().map(|d| d.id).collect();
        Ok(Self::assemble(model.checkpoint_hash(), dim, fields, ids, data))
    }

    fn assemble(checkpoint_hash: String, dim: usize, fields: usize, ids: Vec<u64>, data: Vec<f32>) -> Self {
        let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        EmbeddingStore {
            checkpoint_hash,
            dim,
            fields,
            ids,
            data,
            index,
        }
    }

    pub fn checkpoint_hash(&self) -> &str {
        &self.checkpoint_hash
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn record_bytes(&self) -> usize {
        8 + 4 * self.dim * self.fields
    }

    /// All field vectors of one document, concatenated.
    pub fn get(&self, id: u64) -> Result<&[f32]> {
        let i = *self.index.get(&id).ok_or(Error::MissingDocument(id))?;
        let n = self.dim * self.fields;
        Ok(&self.data[i * n..(i + 1) * n])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.checkpoint_hash.len() + self.len() * self.record_bytes());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.fields as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.checkpoint_hash.len() as u32).to_le_bytes());
        out.extend_from_slice(self.checkpoint_hash.as_bytes());
        let n = self.dim * self.fields;
        for (i, id) in self.ids.iter().enumerate() {
            out.extend_from_slice(&id.to_le_bytes());
            for x in &self.data[i * n..(i + 1) * n] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |d: &str| Error::format("embedding store", d.to_string());
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
        let version = u32_at(take(4)?);
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let dim = u32_at(take(4)?) as usize;
        let fields = u32_at(take(4)?) as usize;
        let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        let hash_len = u32_at(take(4)?) as usize;
        let hash = String::from_utf8(take(hash_len)?.to_vec()).map_err(|_| bad("hash is not utf-8"))?;
        let n = dim * fields;
        let expected = count.checked_mul(8 + 4 * n).ok_or_else(|| bad("record count overflow"))?;
        let body = take(expected)?;
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let mut ids = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * n);
        for rec in body.chunks_exact(8 + 4 * n) {
            ids.push(u64::from_le_bytes(rec[..8].try_into().expect("8 bytes")));
            data.extend(rec[8..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))));
        }
        let store = Self::assemble(hash, dim, fields, ids, data);
        if store.index.len() != store.ids.len() {
            return Err(bad("duplicate document id"));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Scores documents against stored vectors. Only constructible when the
/// store was built from this exact model checkpoint.
#[derive(Debug, Clone, Copy)]
pub struct PrecomputedScorer<'a> {
    model: &'a RankerModel,
    store: &'a EmbeddingStore,
}

impl<'a> PrecomputedScorer<'a> {
    pub fn new(model: &'a RankerModel, store: &'a EmbeddingStore) -> Result<Self> {
        let model_hash = model.checkpoint_hash();
        if model_hash != store.checkpoint_hash {
            return Err(Error::StaleStore {
                store: store.checkpoint_hash.clone(),
                model: model_hash,
            });
        }
        if store.dim != model.vector_dim() || store.fields != model.field_count() {
            return Err(Error::format("embedding store", "vector shape differs from model"));
        }
        Ok(PrecomputedScorer { model, store })
    }

    pub fn model(&self) -> &RankerModel {
        self.model
    }

    pub fn score(&self, query: &str, encoded: &TextRepr, doc: &DocumentRecord) -> Result<f64> {
        let raw = self.store.get(doc.id)?;
        let vecs: Vec<Vec<f64>> = raw.chunks_exact(self.store.dim).map(|c| c.iter().map(|&x| f64::from(x)).collect()).collect();
        let refs: Vec<&[f64]> = vecs.iter().map(Vec::as_slice).collect();
        let feats = self.model.features().features(query, doc);
        Ok(self.model.score_encoded(encoded, &refs, &feats))
    }
}
