use super::grad::Gradients;
use crate::error::{Error, Result};
use crate::store::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Per-step decay applied to `beta1`: `beta1_t = beta1 * lambda^(t-1)`.
    pub lambda: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lambda: 1.0 - 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.lambda > 0.0
            && self.lambda <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Moment accumulators for every parameter of a store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.ids().map(|id| vec![0.0; store.get(id).len()]).collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update of every parameter that has a gradient buffer.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    if state.first.len() != store.len() {
        return Err(Error::Dimension {
            context: "adam state parameter count",
            expected: store.len(),
            actual: state.first.len(),
        });
    }
    for (id, g) in grads.iter() {
        let n = store.get(id).len();
        if g.len() != n || state.first[id.0].len() != n {
            return Err(Error::Dimension {
                context: "adam gradient shape",
                expected: n,
                actual: g.len(),
            });
        }
    }

    state.step += 1;
    let t = state.step as f64;
    let beta1_t = hyper.beta1 * hyper.lambda.powf(t - 1.0);
    let correction1 = 1.0 - hyper.beta1.powf(t);
    let correction2 = 1.0 - hyper.beta2.powf(t);

    for (id, g) in grads.iter() {
        let m = &mut state.first[id.0];
        let v = &mut state.second[id.0];
        let p = store.get_mut(id).data_mut();
        for i in 0..g.len() {
            m[i] = beta1_t * m[i] + (1.0 - beta1_t) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            p[i] -= hyper.alpha * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn scalar_store(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("p/x", Tensor::vector(vec![x])).unwrap();
        s
    }

    fn grad_of(store: &ParamStore, g: f64) -> Gradients {
        let mut out = Gradients::zeros_like(store);
        out.accumulate(store.id("p/x").unwrap(), &[g]);
        out
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = scalar_store(1.25);
        let mut st = AdamState::new(&s);
        let g = grad_of(&s, 0.0);
        adam_step(&mut s, &g, &mut st, &AdamHyper::default()).unwrap();
        assert_eq!(s.by_name("p/x").unwrap().data(), &[1.25]);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn first_step_moves_by_alpha() {
        let hyper = AdamHyper::default();
        for g in [0.3, -4.0, 1e-3] {
            let mut s = scalar_store(0.0);
            let mut st = AdamState::new(&s);
            let gr = grad_of(&s, g);
            adam_step(&mut s, &gr, &mut st, &hyper).unwrap();
            let moved = s.by_name("p/x").unwrap().data()[0];
            // m_hat = g, v_hat = g^2, so the step is alpha*|g|/(|g|+eps).
            let expected = -hyper.alpha * g / (g.abs() + hyper.epsilon);
            assert!((moved - expected).abs() < 1e-15, "{moved} vs {expected}");
        }
    }

    #[test]
    fn three_steps_on_quadratic_match_reference_recurrence() {
        // Independent transcription of the update with beta1 decayed per step;
        // loss = 0.5 * (x - 3)^2.
        let hyper = AdamHyper {
            alpha: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lambda: 0.99,
        };
        let mut x_ref = 0.5f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut reference = Vec::new();
        for t in 1..=3 {
            let g = x_ref - 3.0;
            let b1 = 0.9 * 0.99f64.powi(t - 1);
            m = b1 * m + (1.0 - b1) * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x_ref -= 0.1 * mh / (vh.sqrt() + 1e-8);
            reference.push(x_ref);
        }

        let mut s = scalar_store(0.5);
        let mut st = AdamState::new(&s);
        for expected in reference {
            let x = s.by_name("p/x").unwrap().data()[0];
            let gr = grad_of(&s, x - 3.0);
            adam_step(&mut s, &gr, &mut st, &hyper).unwrap();
            let got = s.by_name("p/x").unwrap().data()[0];
            assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        }
        assert_eq!(st.step(), 3);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut s = scalar_store(0.0);
        let mut st = AdamState::new(&ParamStore::new());
        let g = grad_of(&s, 1.0);
        assert!(adam_step(&mut s, &g, &mut st, &AdamHyper::default()).is_err());
    }

    #[test]
    fn hyper_validation() {
        assert!(AdamHyper::default().validate().is_ok());
        let bad = AdamHyper {
            beta1: 1.0,
            ..AdamHyper::default()
        };
        assert!(bad.validate().is_err());
    }
}
