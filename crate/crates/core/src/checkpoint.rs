//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "NHGC" | u32 version | 32-byte config hash | u32 group count
//! per group:  u32 name length | name | u32 tensor count
//! per tensor: u32 name length | name | u8 element type | u32 ndim
//!             | u64 extent * ndim | f64 value * product(extents)
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::store::{split_name, ParamStore};

pub const MAGIC: &[u8; 4] = b"NHGC";
pub const VERSION: u32 = 1;
const F64_TAG: u8 = 1;

pub type ConfigHash = [u8; 32];

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_hash: ConfigHash,
    pub store: ParamStore,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn to_bytes(store: &ParamStore, config_hash: &ConfigHash) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + store.num_values() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(config_hash);
    let groups = store.groups();
    put_u32(&mut out, groups.len());
    for g in &groups {
        put_str(&mut out, g);
        let ids = store.group_ids(g);
        put_u32(&mut out, ids.len());
        for id in ids {
            let t = store.get(id);
            put_str(&mut out, split_name(store.name(id)).1);
            out.push(F64_TAG);
            put_u32(&mut out, t.shape().len());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Checkpoint {
            path: self.path.to_path_buf(),
            message: format!("{} (at byte {})", message.into(), self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail("truncated file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.fail("name is not UTF-8"))
    }
}

/// Parses a checkpoint, keeping only groups accepted by `keep`.
pub fn from_bytes_filtered(
    bytes: &[u8],
    path: &Path,
    keep: impl Fn(&str) -> bool,
) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4)? != MAGIC {
        return Err(r.fail("bad magic bytes"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(r.fail(format!("unsupported format version {version}")));
    }
    let config_hash: ConfigHash = r.take(32)?.try_into().expect("32 bytes");
    let mut store = ParamStore::new();
    let groups = r.u32()?;
    for _ in 0..groups {
        let group = r.string()?;
        let wanted = keep(&group);
        let tensors = r.u32()?;
        if tensors == 0 {
            return Err(r.fail(format!("group `{group}` has no tensors")));
        }
        for _ in 0..tensors {
            let name = r.string()?;
            let tag = r.take(1)?[0];
            if tag != F64_TAG {
                return Err(r.fail(format!("unknown element type {tag} for `{group}/{name}`")));
            }
            let ndim = r.u32()?;
            let mut shape = Vec::with_capacity(ndim);
            let mut count: u64 = 1;
            for _ in 0..ndim {
                let d = r.u64()?;
                count = count
                    .checked_mul(d)
                    .filter(|&c| c <= (bytes.len() / 8) as u64)
                    .ok_or_else(|| r.fail(format!("implausible shape for `{group}/{name}`")))?;
                shape.push(d as usize);
            }
            let raw = r.take(count as usize * 8)?;
            if wanted {
                let data = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                let t = Tensor::new(shape, data).map_err(|e| r.fail(e.to_string()))?;
                if store.contains(&format!("{group}/{name}")) {
                    return Err(r.fail(format!("duplicate tensor `{group}/{name}`")));
                }
                store
                    .insert(format!("{group}/{name}"), t)
                    .map_err(|e| r.fail(e.to_string()))?;
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes"));
    }
    Ok(Checkpoint { config_hash, store })
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    from_bytes_filtered(bytes, path, |_| true)
}

pub fn save(path: &Path, store: &ParamStore, config_hash: &ConfigHash) -> Result<()> {
    std::fs::write(path, to_bytes(store, config_hash)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}

/// Loads only the named groups; each must be present in the file.
pub fn load_groups(path: &Path, groups: &[&str]) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ck = from_bytes_filtered(&bytes, path, |g| groups.contains(&g))?;
    for g in groups {
        if !ck.store.has_group(g) {
            return Err(Error::MissingGroup(format!("{g} (absent from {})", path.display())));
        }
    }
    Ok(ck)
}
