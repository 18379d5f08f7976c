//! A small reverse-mode tape over the handful of primitives the models use.
//!
//! Nodes are appended in evaluation order; `backward` walks them in reverse
//! and each op applies its own hand-written adjoint. Parameter nodes borrow
//! their values from a [`ParamStore`] and collect gradients per [`ParamId`].

use super::grad::Gradients;
use super::ops::{log_sum_exp, sigmoid, softmax};
use crate::error::{Error, Result};
use crate::store::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Data {
    Owned(Vec<f64>),
    Param(ParamId),
}

enum Op {
    Leaf,
    /// `Σ W_k x_k (+ b)`, terms summed left to right.
    Affine {
        terms: Vec<(Var, Var)>,
        bias: Option<Var>,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    /// `(1 - gate) * prev + gate * cand`
    Blend {
        gate: Var,
        prev: Var,
        cand: Var,
    },
    Concat(Var, Var),
    Row {
        table: Var,
        index: usize,
    },
    Stack(Vec<Var>),
    /// Applies `w` to every row of matrix `x`.
    RowAffine {
        w: Var,
        x: Var,
    },
    Attention {
        query: Var,
        keys: Var,
        v: Var,
        values: Var,
        act: Vec<f64>,
        alpha: Vec<f64>,
    },
    Nll {
        logits: Var,
        target: usize,
        probs: Vec<f64>,
    },
    Sum(Var),
    SumScalars(Vec<Var>),
    Scale(Var, f64),
}

struct Node {
    rows: usize,
    cols: usize,
    data: Data,
    op: Op,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn check(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, data.len());
        self.nodes.push(Node {
            rows,
            cols,
            data: Data::Owned(data),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].data {
            Data::Owned(d) => d,
            Data::Param(id) => self.store.get(*id).data(),
        }
    }

    /// `(rows, cols)`; vectors have one column.
    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    fn size(&self, v: Var) -> usize {
        let n = &self.nodes[v.0];
        n.rows * n.cols
    }

    /// Node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let (rows, cols) = self.store.get(id).dims2();
        self.nodes.push(Node {
            rows,
            cols,
            data: Data::Param(id),
            op: Op::Leaf,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn param_named(&mut self, name: &str) -> Result<Var> {
        let id = self.store.id(name)?;
        Ok(self.param(id))
    }

    /// Constant column vector.
    pub fn input(&mut self, values: Vec<f64>) -> Var {
        let n = values.len();
        self.push(n, 1, values, Op::Leaf)
    }

    pub fn affine(&mut self, terms: &[(Var, Var)], bias: Option<Var>) -> Result<Var> {
        let Some(&(w0, _)) = terms.first() else {
            return Err(Error::Empty("affine terms"));
        };
        let rows = self.shape(w0).0;
        let mut out = vec![0.0; rows];
        for (k, &(w, x)) in terms.iter().enumerate() {
            let (wr, wc) = self.shape(w);
            check("affine weight rows", rows, wr)?;
            check("affine input length", wc, self.size(x))?;
            let wv = self.value(w);
            let xv = self.value(x);
            for (i, o) in out.iter_mut().enumerate() {
                let row = &wv[i * wc..(i + 1) * wc];
                let dot: f64 = row.iter().zip(xv).map(|(a, b)| a * b).sum();
                if k == 0 {
                    *o = dot;
                } else {
                    *o += dot;
                }
            }
        }
        if let Some(b) = bias {
            check("affine bias", rows, self.size(b))?;
            for (o, bv) in out.iter_mut().zip(self.value(b)) {
                *o += bv;
            }
        }
        Ok(self.push(
            rows,
            1,
            out,
            Op::Affine {
                terms: terms.to_vec(),
                bias,
            },
        ))
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        check("elementwise operands", self.size(a), self.size(b))?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let (r, c) = self.shape(a);
        Ok(self.push(r, c, out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        let (r, c) = self.shape(a);
        self.push(r, c, out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.tanh()).collect();
        let (r, c) = self.shape(a);
        self.push(r, c, out, Op::Tanh(a))
    }

    pub fn blend(&mut self, gate: Var, prev: Var, cand: Var) -> Result<Var> {
        let n = self.size(gate);
        check("blend previous state", n, self.size(prev))?;
        check("blend candidate", n, self.size(cand))?;
        let (z, h, c) = (self.value(gate), self.value(prev), self.value(cand));
        let out = (0..n).map(|i| (1.0 - z[i]) * h[i] + z[i] * c[i]).collect();
        Ok(self.push(n, 1, out, Op::Blend { gate, prev, cand }))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).to_vec();
        out.extend_from_slice(self.value(b));
        let n = out.len();
        self.push(n, 1, out, Op::Concat(a, b))
    }

    /// Row `index` of a matrix, as a vector (embedding lookup).
    pub fn row(&mut self, table: Var, index: usize) -> Result<Var> {
        let (rows, cols) = self.shape(table);
        if index >= rows {
            return Err(Error::IdOutOfRange {
                id: index,
                size: rows,
            });
        }
        let out = self.value(table)[index * cols..(index + 1) * cols].to_vec();
        Ok(self.push(cols, 1, out, Op::Row { table, index }))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, vars: &[Var]) -> Result<Var> {
        let Some(&first) = vars.first() else {
            return Err(Error::Empty("stack"));
        };
        let cols = self.size(first);
        let mut out = Vec::with_capacity(cols * vars.len());
        for &v in vars {
            check("stack row length", cols, self.size(v))?;
            out.extend_from_slice(self.value(v));
        }
        Ok(self.push(vars.len(), cols, out, Op::Stack(vars.to_vec())))
    }

    pub fn row_affine(&mut self, w: Var, x: Var) -> Result<Var> {
        let (a, d) = self.shape(w);
        let (n, xd) = self.shape(x);
        check("row_affine input width", d, xd)?;
        let (wv, xv) = (self.value(w), self.value(x));
        let mut out = vec![0.0; n * a];
        for j in 0..n {
            let xr = &xv[j * d..(j + 1) * d];
            for i in 0..a {
                out[j * a + i] = wv[i * d..(i + 1) * d]
                    .iter()
                    .zip(xr)
                    .map(|(p, q)| p * q)
                    .sum();
            }
        }
        Ok(self.push(n, a, out, Op::RowAffine { w, x }))
    }

    /// Additive attention. `query` is the already-projected decoder state,
    /// `keys` the projected annotations (one row each) and `values` the raw
    /// annotations. Returns the context vector; the weights are available via
    /// [`Tape::attention_weights`].
    pub fn attention(&mut self, query: Var, keys: Var, v: Var, values: Var) -> Result<Var> {
        let (n, a) = self.shape(keys);
        let (vn, d) = self.shape(values);
        check("attention query", a, self.size(query))?;
        check("attention vector", a, self.size(v))?;
        check("attention rows", n, vn)?;
        let (qv, kv, vv, hv) = (
            self.value(query),
            self.value(keys),
            self.value(v),
            self.value(values),
        );
        let mut act = vec![0.0; n * a];
        let mut scores = vec![0.0; n];
        for j in 0..n {
            let mut e = 0.0;
            for i in 0..a {
                let t = (qv[i] + kv[j * a + i]).tanh();
                act[j * a + i] = t;
                e += vv[i] * t;
            }
            scores[j] = e;
        }
        let alpha = softmax(&scores)?;
        let mut ctx = vec![0.0; d];
        for j in 0..n {
            for (c, h) in ctx.iter_mut().zip(&hv[j * d..(j + 1) * d]) {
                *c += alpha[j] * h;
            }
        }
        Ok(self.push(
            d,
            1,
            ctx,
            Op::Attention {
                query,
                keys,
                v,
                values,
                act,
                alpha,
            },
        ))
    }

    pub fn attention_weights(&self, context: Var) -> Option<&[f64]> {
        match &self.nodes[context.0].op {
            Op::Attention { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// `-log softmax(logits)[target]` as a scalar node.
    pub fn nll(&mut self, logits: Var, target: usize) -> Result<Var> {
        let lv = self.value(logits);
        if target >= lv.len() {
            return Err(Error::IdOutOfRange {
                id: target,
                size: lv.len(),
            });
        }
        let loss = log_sum_exp(lv) - lv[target];
        let probs = softmax(lv)?;
        Ok(self.push(
            1,
            1,
            vec![loss],
            Op::Nll {
                logits,
                target,
                probs,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    pub fn sum_scalars(&mut self, vars: &[Var]) -> Result<Var> {
        let mut s = 0.0;
        for &v in vars {
            check("sum_scalars operand", 1, self.size(v))?;
            s += self.value(v)[0];
        }
        Ok(self.push(1, 1, vec![s], Op::SumScalars(vars.to_vec())))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * factor).collect();
        let (r, c) = self.shape(a);
        self.push(r, c, out, Op::Scale(a, factor))
    }

    /// Reverse-mode gradients of a scalar node with respect to every
    /// parameter reached from it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let mut out = Gradients::zeros_like(self.store);
        self.backward_into(loss, &mut out)?;
        Ok(out)
    }

    /// Like [`Tape::backward`] but adds into existing buffers.
    pub fn backward_into(&self, loss: Var, out: &mut Gradients) -> Result<()> {
        let (rows, cols) = self.shape(loss);
        if rows * cols != 1 {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    if let Data::Param(id) = node.data {
                        out.accumulate(id, &g);
                    }
                }
                Op::Affine { terms, bias } => {
                    for &(w, x) in terms {
                        let (wr, wc) = self.shape(w);
                        let wv = self.value(w);
                        let xv = self.value(x);
                        let gx = self.slot(&mut grads, x);
                        for i in 0..wr {
                            let gi = g[i];
                            if gi == 0.0 {
                                continue;
                            }
                            for (gxj, wij) in gx.iter_mut().zip(&wv[i * wc..(i + 1) * wc]) {
                                *gxj += wij * gi;
                            }
                        }
                        let gw = self.slot(&mut grads, w);
                        for i in 0..wr {
                            let gi = g[i];
                            for (gwij, xj) in gw[i * wc..(i + 1) * wc].iter_mut().zip(xv) {
                                *gwij += gi * xj;
                            }
                        }
                    }
                    if let Some(b) = *bias {
                        add_into(self.slot(&mut grads, b), &g);
                    }
                }
                Op::Add(a, b) => {
                    add_into(self.slot(&mut grads, *a), &g);
                    add_into(self.slot(&mut grads, *b), &g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = self.slot(&mut grads, *a);
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                    let gb = self.slot(&mut grads, *b);
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
                Op::Sigmoid(a) => {
                    let y = self.own(idx);
                    let ga = self.slot(&mut grads, *a);
                    for i in 0..g.len() {
                        ga[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Tanh(a) => {
                    let y = self.own(idx);
                    let ga = self.slot(&mut grads, *a);
                    for i in 0..g.len() {
                        ga[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Blend { gate, prev, cand } => {
                    let (z, h, c) = (self.value(*gate), self.value(*prev), self.value(*cand));
                    let gz = self.slot(&mut grads, *gate);
                    for i in 0..g.len() {
                        gz[i] += g[i] * (c[i] - h[i]);
                    }
                    let gh = self.slot(&mut grads, *prev);
                    for i in 0..g.len() {
                        gh[i] += g[i] * (1.0 - z[i]);
                    }
                    let gc = self.slot(&mut grads, *cand);
                    for i in 0..g.len() {
                        gc[i] += g[i] * z[i];
                    }
                }
                Op::Concat(a, b) => {
                    let n = self.size(*a);
                    add_into(self.slot(&mut grads, *a), &g[..n]);
                    add_into(self.slot(&mut grads, *b), &g[n..]);
                }
                Op::Row { table, index } => {
                    let cols = self.shape(*table).1;
                    let gt = self.slot(&mut grads, *table);
                    add_into(&mut gt[index * cols..(index + 1) * cols], &g);
                }
                Op::Stack(vars) => {
                    let cols = node.cols;
                    for (j, &v) in vars.iter().enumerate() {
                        add_into(self.slot(&mut grads, v), &g[j * cols..(j + 1) * cols]);
                    }
                }
                Op::RowAffine { w, x } => {
                    let (a, d) = self.shape(*w);
                    let n = self.shape(*x).0;
                    let (wv, xv) = (self.value(*w), self.value(*x));
                    let gx = self.slot(&mut grads, *x);
                    for j in 0..n {
                        for i in 0..a {
                            let gji = g[j * a + i];
                            for k in 0..d {
                                gx[j * d + k] += wv[i * d + k] * gji;
                            }
                        }
                    }
                    let gw = self.slot(&mut grads, *w);
                    for j in 0..n {
                        for i in 0..a {
                            let gji = g[j * a + i];
                            for k in 0..d {
                                gw[i * d + k] += gji * xv[j * d + k];
                            }
                        }
                    }
                }
                Op::Attention {
                    query,
                    keys,
                    v,
                    values,
                    act,
                    alpha,
                } => {
                    let (n, a) = self.shape(*keys);
                    let d = self.shape(*values).1;
                    let hv = self.value(*values);
                    let vv = self.value(*v);
                    // d loss / d alpha_j, then through the softmax.
                    let galpha: Vec<f64> = (0..n)
                        .map(|j| {
                            hv[j * d..(j + 1) * d]
                                .iter()
                                .zip(&g)
                                .map(|(h, gi)| h * gi)
                                .sum()
                        })
                        .collect();
                    let dot: f64 = alpha.iter().zip(&galpha).map(|(p, q)| p * q).sum();
                    let gscore: Vec<f64> =
                        (0..n).map(|j| alpha[j] * (galpha[j] - dot)).collect();

                    let gh = self.slot(&mut grads, *values);
                    for j in 0..n {
                        for k in 0..d {
                            gh[j * d + k] += alpha[j] * g[k];
                        }
                    }
                    let gvv = self.slot(&mut grads, *v);
                    for j in 0..n {
                        for i in 0..a {
                            gvv[i] += gscore[j] * act[j * a + i];
                        }
                    }
                    let mut gpre = vec![0.0; n * a];
                    for j in 0..n {
                        for i in 0..a {
                            let t = act[j * a + i];
                            gpre[j * a + i] = gscore[j] * vv[i] * (1.0 - t * t);
                        }
                    }
                    add_into(self.slot(&mut grads, *keys), &gpre);
                    let gq = self.slot(&mut grads, *query);
                    for j in 0..n {
                        for i in 0..a {
                            gq[i] += gpre[j * a + i];
                        }
                    }
                }
                Op::Nll {
                    logits,
                    target,
                    probs,
                } => {
                    let gl = self.slot(&mut grads, *logits);
                    for (i, p) in probs.iter().enumerate() {
                        gl[i] += g[0] * p;
                    }
                    gl[*target] -= g[0];
                }
                Op::Sum(a) => {
                    let ga = self.slot(&mut grads, *a);
                    ga.iter_mut().for_each(|x| *x += g[0]);
                }
                Op::SumScalars(vars) => {
                    for &v in vars {
                        self.slot(&mut grads, v)[0] += g[0];
                    }
                }
                Op::Scale(a, factor) => {
                    let ga = self.slot(&mut grads, *a);
                    for i in 0..g.len() {
                        ga[i] += g[i] * factor;
                    }
                }
            }
        }
        Ok(())
    }

    fn own(&self, idx: usize) -> &[f64] {
        match &self.nodes[idx].data {
            Data::Owned(d) => d,
            Data::Param(id) => self.store.get(*id).data(),
        }
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> &'g mut Vec<f64> {
        let n = self.size(v);
        grads[v.0].get_or_insert_with(|| vec![0.0; n])
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("g/w", Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap())
            .unwrap();
        s.insert("g/b", Tensor::vector(vec![0.05, -0.05])).unwrap();
        s.insert("h/unused", Tensor::vector(vec![1.0])).unwrap();
        s
    }

    #[test]
    fn sum_of_parameters_has_unit_gradient() {
        let s = store();
        let mut t = Tape::new(&s);
        let w = t.param_named("g/w").unwrap();
        let loss = t.sum(w);
        let g = t.backward(loss).unwrap();
        let gw = g.get(s.id("g/w").unwrap()).unwrap();
        assert!(gw.iter().all(|&x| x == 1.0));
        assert!(g.get(s.id("h/unused").unwrap()).is_none());
    }

    #[test]
    fn constant_parameter_gets_zero_gradient() {
        let s = store();
        let mut t = Tape::new(&s);
        let w = t.param_named("g/w").unwrap();
        let b = t.param_named("g/b").unwrap();
        let x = t.input(vec![1.0, 2.0, 3.0]);
        let y = t.affine(&[(w, x)], None).unwrap();
        let zero = t.scale(b, 0.0);
        let both = t.add(y, zero).unwrap();
        let loss = t.sum(both);
        let g = t.backward(loss).unwrap();
        assert!(g.get(s.id("g/b").unwrap()).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let s = store();
        let mut t = Tape::new(&s);
        let w = t.param_named("g/w").unwrap();
        assert!(matches!(
            t.backward(w),
            Err(Error::NonScalarLoss { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn param_nodes_are_shared() {
        let s = store();
        let mut t = Tape::new(&s);
        let a = t.param_named("g/b").unwrap();
        let b = t.param_named("g/b").unwrap();
        assert_eq!(a, b);
        let loss = {
            let m = t.mul(a, b).unwrap();
            t.sum(m)
        };
        // d/db Σ b² = 2b
        let g = t.backward(loss).unwrap();
        let gb = g.get(s.id("g/b").unwrap()).unwrap();
        assert!((gb[0] - 0.1).abs() < 1e-15 && (gb[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_annotation_attention() {
        let s = store();
        let mut t = Tape::new(&s);
        let q = t.input(vec![0.3, -0.1]);
        let h = t.input(vec![1.5, -2.0, 0.25]);
        let keys = t.input(vec![0.2, 0.9]);
        let keys = t.stack(&[keys]).unwrap();
        let vals = t.stack(&[h]).unwrap();
        let v = t.input(vec![1.0, 1.0]);
        let ctx = t.attention(q, keys, v, vals).unwrap();
        assert_eq!(t.attention_weights(ctx).unwrap(), &[1.0]);
        assert_eq!(t.value(ctx), &[1.5, -2.0, 0.25]);
    }

    #[test]
    fn dimension_errors() {
        let s = store();
        let mut t = Tape::new(&s);
        let w = t.param_named("g/w").unwrap();
        let x = t.input(vec![1.0, 2.0]);
        assert!(t.affine(&[(w, x)], None).is_err());
        let y = t.input(vec![1.0]);
        assert!(t.add(x, y).is_err());
        assert!(t.row(w, 2).is_err());
    }
}
