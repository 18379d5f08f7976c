//! Gated recurrent unit with the update convention
//! `h_t = (1 - z_t) * h_{t-1} + z_t * h~_t`.

use super::tape::{Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};
use crate::store::ParamStore;

pub const GATES: [&str; 3] = ["z", "r", "h"];

/// Weights of one GRU layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    /// Input weights `W_z, W_r, W_h`, each `hidden x input`.
    pub w: [Tensor; 3],
    /// Recurrent weights `U_z, U_r, U_h`, each `hidden x hidden`.
    pub u: [Tensor; 3],
    /// Biases `b_z, b_r, b_h`.
    pub b: [Tensor; 3],
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let m = |r, c| Tensor::zeros(vec![r, c]);
        GruParams {
            w: [m(hidden, input), m(hidden, input), m(hidden, input)],
            u: [m(hidden, hidden), m(hidden, hidden), m(hidden, hidden)],
            b: [
                Tensor::zeros(vec![hidden]),
                Tensor::zeros(vec![hidden]),
                Tensor::zeros(vec![hidden]),
            ],
        }
    }

    pub fn hidden(&self) -> usize {
        self.u[0].dims2().0
    }

    pub fn input(&self) -> usize {
        self.w[0].dims2().1
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = self.w[0].dims2();
        for k in 0..3 {
            if self.w[k].dims2() != (h, i) {
                return Err(Error::invalid("GRU input matrices differ in shape"));
            }
            if self.u[k].dims2() != (h, h) {
                return Err(Error::invalid("GRU recurrent matrices must be hidden x hidden"));
            }
            if self.b[k].len() != h {
                return Err(Error::Dimension {
                    context: "GRU bias",
                    expected: h,
                    actual: self.b[k].len(),
                });
            }
        }
        Ok(())
    }

    /// Writes the weights into `store` as `{input_group}/W_*` and
    /// `{recurrent_group}/U_*`, `{recurrent_group}/b_*`.
    pub fn store_into(
        &self,
        store: &mut ParamStore,
        input_group: &str,
        recurrent_group: &str,
    ) -> Result<()> {
        for (k, gate) in GATES.iter().enumerate() {
            store.insert(format!("{input_group}/W_{gate}"), self.w[k].clone())?;
        }
        for (k, gate) in GATES.iter().enumerate() {
            store.insert(format!("{recurrent_group}/U_{gate}"), self.u[k].clone())?;
        }
        for (k, gate) in GATES.iter().enumerate() {
            store.insert(format!("{recurrent_group}/b_{gate}"), self.b[k].clone())?;
        }
        Ok(())
    }
}

/// Tape handles for a GRU layer, optionally with an extra input block
/// (`C_*`) fed by a second vector such as an attention context.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w: [Var; 3],
    pub c: Option<[Var; 3]>,
    pub u: [Var; 3],
    pub b: [Var; 3],
}

impl GruVars {
    pub fn load(
        tape: &mut Tape<'_>,
        input_group: &str,
        recurrent_group: &str,
        extra_group: Option<&str>,
    ) -> Result<Self> {
        let mut get = |group: &str, prefix: &str| -> Result<[Var; 3]> {
            Ok([
                tape.param_named(&format!("{group}/{prefix}_z"))?,
                tape.param_named(&format!("{group}/{prefix}_r"))?,
                tape.param_named(&format!("{group}/{prefix}_h"))?,
            ])
        };
        let w = get(input_group, "W")?;
        let c = extra_group.map(|g| get(g, "C")).transpose()?;
        let u = get(recurrent_group, "U")?;
        let b = get(recurrent_group, "b")?;
        Ok(GruVars { w, c, u, b })
    }
}

/// One GRU step on the tape. `extra` must be given exactly when the layer
/// has a `C_*` block; its contribution is summed right after `W x`.
pub fn gru_step(
    tape: &mut Tape<'_>,
    p: &GruVars,
    x: Var,
    extra: Option<Var>,
    h_prev: Var,
) -> Result<Var> {
    let pre = |tape: &mut Tape<'_>, k: usize, h: Var| -> Result<Var> {
        let mut terms = vec![(p.w[k], x)];
        match (p.c, extra) {
            (Some(c), Some(e)) => terms.push((c[k], e)),
            (None, None) => {}
            _ => return Err(Error::invalid("GRU extra input does not match its C block")),
        }
        terms.push((p.u[k], h));
        tape.affine(&terms, Some(p.b[k]))
    };
    let z_pre = pre(tape, 0, h_prev)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = pre(tape, 1, h_prev)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h_prev)?;
    let cand_pre = pre(tape, 2, rh)?;
    let cand = tape.tanh(cand_pre);
    tape.blend(z, h_prev, cand)
}

/// Standalone forward pass of a single GRU cell.
pub fn gru_cell_forward(p: &GruParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    p.validate()?;
    if x.len() != p.input() {
        return Err(Error::Dimension {
            context: "GRU input",
            expected: p.input(),
            actual: x.len(),
        });
    }
    if h_prev.len() != p.hidden() {
        return Err(Error::Dimension {
            context: "GRU hidden state",
            expected: p.hidden(),
            actual: h_prev.len(),
        });
    }
    let mut store = ParamStore::new();
    p.store_into(&mut store, "gru", "gru")?;
    let mut tape = Tape::new(&store);
    let vars = GruVars::load(&mut tape, "gru", "gru", None)?;
    let xv = tape.input(x.to_vec());
    let hv = tape.input(h_prev.to_vec());
    let out = gru_step(&mut tape, &vars, xv, None, hv)?;
    Ok(tape.value(out).to_vec())
}
