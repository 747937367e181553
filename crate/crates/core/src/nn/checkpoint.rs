//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "VSNN"
//! version      u32      = 1
//! kind         u16 length + UTF-8 bytes      (model kind tag, e.g. "intent")
//! meta         u32 length + UTF-8 bytes      (sorted "key=value" lines)
//! tensor count u32
//! tensors      repeated:
//!     name     u16 length + UTF-8 bytes
//!     rows     u64
//!     cols     u64
//!     data     rows*cols f64
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{ParamSet, Tensor};

pub const MAGIC: &[u8; 4] = b"VSNN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, params: ParamSet) -> Self {
        Checkpoint {
            kind: kind.into(),
            meta: BTreeMap::new(),
            params,
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::format("checkpoint", format!("missing meta key {key}")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta_str(key)?;
        raw.parse()
            .map_err(|_| Error::format("checkpoint", format!("bad value for {key}: {raw}")))
    }

    /// Stores a list as one tab-joined meta value; items must not contain
    /// tabs or newlines.
    pub fn with_list<S: AsRef<str>>(self, key: &str, items: &[S]) -> Self {
        let joined: Vec<&str> = items.iter().map(AsRef::as_ref).collect();
        self.with_meta(key, joined.join("\t"))
    }

    pub fn meta_list(&self, key: &str) -> Result<Vec<String>> {
        let raw = self.meta_str(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        Ok(raw.split('\t').map(str::to_string).collect())
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::format(
                "checkpoint",
                format!("expected kind {kind}, found {}", self.kind),
            ));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind.len() as u16).to_le_bytes());
        out.extend_from_slice(self.kind.as_bytes());
        let meta: String = self
            .meta
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in self.params.iter() {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("checkpoint", "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(
                "checkpoint",
                format!("unsupported version {version}"),
            ));
        }
        let kind_len = r.u16()? as usize;
        let kind = r.string(kind_len)?;
        let meta_len = r.u32()? as usize;
        let meta_text = r.string(meta_len)?;
        let mut meta = BTreeMap::new();
        for line in meta_text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("checkpoint", format!("bad meta line {line}")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let count = r.u32()?;
        let mut params = ParamSet::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = r.string(name_len)?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::format("checkpoint", "tensor size overflow"))?;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| {
                Error::format("checkpoint", "tensor size overflow")
            })?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            params.add(name, Tensor::from_vec(rows, cols, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::format("checkpoint", "trailing bytes"));
        }
        Ok(Checkpoint { kind, meta, params })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        fs::write(path, &bytes)?;
        Ok(content_hash(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// SHA-256 of the serialized bytes, hex encoded.
    pub fn hash(&self) -> String {
        content_hash(&self.to_bytes())
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("checkpoint", "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::format("checkpoint", "invalid UTF-8"))
    }
}
