use crate::store::{ParamId, ParamStore};

/// Dense gradient buffers aligned with a [`ParamStore`]. Parameters that no
/// loss reached have no buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    slots: Vec<Option<Vec<f64>>>,
    sizes: Vec<usize>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients {
            slots: vec![None; store.len()],
            sizes: store.ids().map(|id| store.get(id).len()).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots[id.0].as_deref()
    }

    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut [f64]> {
        self.slots[id.0].as_deref_mut()
    }

    /// Adds `values` into the buffer for `id`, creating it if needed.
    pub fn accumulate(&mut self, id: ParamId, values: &[f64]) {
        let size = self.sizes[id.0];
        let slot = self.slots[id.0].get_or_insert_with(|| vec![0.0; size]);
        for (s, v) in slot.iter_mut().zip(values) {
            *s += v;
        }
    }

    /// Elementwise `self += other`, in parameter order.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (i, g) in other.slots.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for slot in self.slots.iter_mut().flatten() {
            slot.iter_mut().for_each(|g| *g *= factor);
        }
    }

    /// Drops every buffer for which `keep` is false.
    pub fn retain(&mut self, keep: impl Fn(ParamId) -> bool) {
        for (i, slot) in self.slots.iter_mut().enumerate() {
            if !keep(ParamId(i)) {
                *slot = None;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.slots
            .iter()
            .flatten()
            .flat_map(|s| s.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_deref().map(|s| (ParamId(i), s)))
    }
}

/// Rescales all gradients together so their joint L2 norm is at most
/// `threshold`. Returns the norm measured before clipping.
pub fn clip_global_norm(grads: &mut Gradients, threshold: f64) -> f64 {
    debug_assert!(threshold > 0.0);
    let norm = grads.global_norm();
    if norm > threshold {
        grads.scale(threshold / norm);
    }
    norm
}
