//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "QCKP" | version u32 | seed u64 | config hash [u8; 32]
//! meta count u32 | (key len u32, key, value len u32, value)*
//! tensor count u32 | (name len u32, name, rank u32, dims u64*, f64 values row-major)*
//! ```
//!
//! Metadata is written in key order, so equal contents give equal bytes.

use std::collections::BTreeMap;
use std::path::Path;

use super::params::{Matrix, ParamSet, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(seed: u64, config_hash: [u8; 32]) -> Self {
        Self { seed, config_hash, ..Default::default() }
    }

    /// Appends every tensor of `params`, prefixing names with `group/`.
    pub fn add_params(&mut self, group: &str, params: &ParamSet) {
        for t in params.tensors() {
            self.tensors.push(Tensor { name: format!("{group}/{}", t.name), value: t.value.clone() });
        }
    }

    /// Rebuilds the [`ParamSet`] stored under `group`, in insertion order.
    pub fn params(&self, group: &str) -> Result<ParamSet> {
        let prefix = format!("{group}/");
        let mut p = ParamSet::new();
        for t in &self.tensors {
            if let Some(name) = t.name.strip_prefix(&prefix) {
                p.push(name, t.value.clone());
            }
        }
        if p.is_empty() {
            return Err(Error::Checkpoint(format!("no tensors in group '{group}'")));
        }
        Ok(p)
    }

    pub fn has_group(&self, group: &str) -> bool {
        let prefix = format!("{group}/");
        self.tensors.iter().any(|t| t.name.starts_with(&prefix))
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("missing metadata key '{key}'")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_str(&mut out, &t.name);
            out.extend_from_slice(&2u32.to_le_bytes());
            for d in t.value.shape() {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for x in t.value.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let seed = r.u64()?;
        let config_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let mut meta = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            meta.insert(k, v);
        }
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()?;
            if rank != 2 {
                return Err(Error::Checkpoint(format!("tensor '{name}' has rank {rank}, expected 2")));
            }
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let len = rows
                .checked_mul(cols)
                .filter(|&n| n.saturating_mul(8) <= r.remaining())
                .ok_or_else(|| Error::Checkpoint(format!("tensor '{name}' truncated")))?;
            let values: Vec<f64> = (0..len).map(|_| r.f64()).collect::<Result<_>>()?;
            let value = Matrix::from_shape_vec((rows, cols), values).expect("length checked");
            tensors.push(Tensor { name, value });
        }
        if r.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { seed, config_hash, meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Checkpoint("unexpected end of checkpoint".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("non-UTF-8 name".into()))
    }
}
