//! Named parameter storage.
//!
//! Every parameter tensor is addressed as `group/tensor`, for example
//! `enc.fwd/U_z`. Groups are the unit of checkpoint composition: regimes load
//! and freeze whole groups.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

/// Splits `group/tensor` into its two parts.
pub fn split_name(name: &str) -> (&str, &str) {
    name.split_once('/').unwrap_or((name, ""))
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter. Re-inserting an existing name replaces its value,
    /// which must keep the same shape.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if !name.contains('/') {
            return Err(Error::invalid(format!(
                "parameter name `{name}` must have the form group/tensor"
            )));
        }
        if let Some(&i) = self.index.get(&name) {
            if self.tensors[i].shape() != tensor.shape() {
                return Err(Error::invalid(format!(
                    "shape change for `{name}`: {:?} -> {:?}",
                    self.tensors[i].shape(),
                    tensor.shape()
                )));
            }
            self.tensors[i] = tensor;
            return Ok(ParamId(i));
        }
        let id = self.tensors.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::MissingGroup(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Result<&Tensor> {
        Ok(self.get(self.id(name)?))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn group_of(&self, id: ParamId) -> &str {
        split_name(&self.names[id.0]).0
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Group names in first-insertion order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for name in &self.names {
            let g = split_name(name).0;
            if !out.iter().any(|o| o == g) {
                out.push(g.to_string());
            }
        }
        out
    }

    pub fn has_group(&self, group: &str) -> bool {
        self.names.iter().any(|n| split_name(n).0 == group)
    }

    pub fn group_ids(&self, group: &str) -> Vec<ParamId> {
        self.ids().filter(|&id| self.group_of(id) == group).collect()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// A new store holding only the named groups, in this store's order.
    pub fn subset(&self, groups: &[&str]) -> Result<ParamStore> {
        for g in groups {
            if !self.has_group(g) {
                return Err(Error::MissingGroup((*g).to_string()));
            }
        }
        let mut out = ParamStore::new();
        for (name, t) in self.iter() {
            if groups.contains(&split_name(name).0) {
                out.insert(name, t.clone())?;
            }
        }
        Ok(out)
    }

    /// A new store without the named groups.
    pub fn without(&self, groups: &[&str]) -> ParamStore {
        let mut out = ParamStore::new();
        for (name, t) in self.iter() {
            if !groups.contains(&split_name(name).0) {
                out.insert(name, t.clone()).expect("names already validated");
            }
        }
        out
    }

    /// Overwrites every tensor of `group` with the same-named tensor from
    /// `source`. Tensors must exist on both sides with identical shapes.
    pub fn copy_group_from(&mut self, source: &ParamStore, group: &str) -> Result<()> {
        let ids = self.group_ids(group);
        let src_ids = source.group_ids(group);
        if src_ids.is_empty() {
            return Err(Error::MissingGroup(group.to_string()));
        }
        if ids.len() != src_ids.len() {
            return Err(Error::invalid(format!(
                "group `{group}` has {} tensors here but {} in the source",
                ids.len(),
                src_ids.len()
            )));
        }
        for id in ids {
            let name = self.names[id.0].clone();
            let src = source.by_name(&name)?;
            if src.shape() != self.tensors[id.0].shape() {
                return Err(Error::invalid(format!(
                    "shape mismatch for `{name}`: {:?} vs {:?}",
                    self.tensors[id.0].shape(),
                    src.shape()
                )));
            }
            self.tensors[id.0] = src.clone();
        }
        Ok(())
    }

    /// Appends every tensor of `group` from `source`; the group must be absent here.
    pub fn add_group_from(&mut self, source: &ParamStore, group: &str) -> Result<()> {
        if self.has_group(group) {
            return Err(Error::invalid(format!("group `{group}` already present")));
        }
        let src_ids = source.group_ids(group);
        if src_ids.is_empty() {
            return Err(Error::MissingGroup(group.to_string()));
        }
        for id in src_ids {
            self.insert(source.name(id), source.get(id).clone())?;
        }
        Ok(())
    }

    /// True when `group` exists in both stores and every tensor is bitwise equal.
    pub fn group_bit_eq(&self, other: &ParamStore, group: &str) -> bool {
        let ids = self.group_ids(group);
        if ids.is_empty() || ids.len() != other.group_ids(group).len() {
            return false;
        }
        ids.into_iter().all(|id| {
            other
                .by_name(self.name(id))
                .map(|t| t.bit_eq(self.get(id)))
                .unwrap_or(false)
        })
    }

    pub fn bit_eq(&self, other: &ParamStore) -> bool {
        self.names == other.names
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.bit_eq(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("a/x", Tensor::vector(vec![1.0, 2.0])).unwrap();
        s.insert("b/y", Tensor::vector(vec![3.0])).unwrap();
        s.insert("a/z", Tensor::vector(vec![4.0])).unwrap();
        s
    }

    #[test]
    fn groups_in_order() {
        assert_eq!(store().groups(), vec!["a".to_string(), "b".to_string()]);
        assert_eq!(store().group_ids("a").len(), 2);
    }

    #[test]
    fn names_need_a_group() {
        assert!(ParamStore::new().insert("flat", Tensor::vector(vec![1.0])).is_err());
    }

    #[test]
    fn copy_group_is_exact_and_local() {
        let mut dst = store();
        let mut src = store();
        src.get_mut(src.id("a/x").unwrap()).data_mut()[0] = -7.5;
        src.get_mut(src.id("b/y").unwrap()).data_mut()[0] = 99.0;
        dst.copy_group_from(&src, "a").unwrap();
        assert!(dst.group_bit_eq(&src, "a"));
        assert!(!dst.group_bit_eq(&src, "b"));
        assert!(dst.copy_group_from(&src, "missing").is_err());
    }

    #[test]
    fn subset_and_without() {
        let s = store();
        assert_eq!(s.subset(&["b"]).unwrap().len(), 1);
        assert_eq!(s.without(&["b"]).len(), 2);
        assert!(s.subset(&["c"]).is_err());
    }
}
