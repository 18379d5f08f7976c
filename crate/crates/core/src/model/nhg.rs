//! Forward computation of the attentive encoder-decoder on a [`Tape`].

use super::layout::*;
use crate::corpus::{BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::numerics::{gru_step, GruVars, Tape, Var};
use crate::store::ParamStore;

/// Per-token encoder states. Annotation `t` is `forward[t] ++ backward[t]`.
#[derive(Debug, Clone)]
pub struct Annotations {
    pub forward: Vec<Var>,
    pub backward: Vec<Var>,
    /// `N x 2H` matrix of annotations, one per row.
    pub matrix: Var,
}

impl Annotations {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }
}

/// Embedding lookup, GRU and softmax layer of one recurrent predictor. The
/// decoder of the full model and every language model share this shape.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub embed: Var,
    pub gru: GruVars,
    pub out_w: Var,
    pub out_b: Var,
}

impl StepVars {
    pub fn load(
        tape: &mut Tape<'_>,
        embed_group: &str,
        input_group: &str,
        recurrent_group: &str,
        context_group: Option<&str>,
        output_group: &str,
    ) -> Result<Self> {
        let embed = tape.param_named(&format!("{embed_group}/E"))?;
        let gru = GruVars::load(tape, input_group, recurrent_group, context_group)?;
        let out_w = tape.param_named(&format!("{output_group}/W"))?;
        let out_b = tape.param_named(&format!("{output_group}/b"))?;
        Ok(StepVars {
            embed,
            gru,
            out_w,
            out_b,
        })
    }

    /// The decoder of the full model, with its context block.
    pub fn decoder(tape: &mut Tape<'_>) -> Result<Self> {
        Self::load(
            tape,
            DEC_EMBED,
            DEC_EMBED_BLOCK,
            DEC_RECURRENT,
            Some(DEC_CONTEXT_BLOCK),
            DEC_OUTPUT,
        )
    }

    /// Feeds `y_prev` (and the context, when the layer has a context block)
    /// and returns the new state and the output logits.
    pub fn step(
        &self,
        tape: &mut Tape<'_>,
        y_prev: usize,
        s_prev: Var,
        context: Option<Var>,
    ) -> Result<(Var, Var)> {
        let x = tape.row(self.embed, y_prev)?;
        let s = gru_step(tape, &self.gru, x, context, s_prev)?;
        let logits = tape.affine(&[(self.out_w, s)], Some(self.out_b))?;
        Ok((s, logits))
    }

    pub fn hidden(&self, tape: &Tape<'_>) -> usize {
        tape.shape(self.gru.u[0]).0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub w_a: Var,
    pub u_a: Var,
    pub v_a: Var,
}

impl AttentionVars {
    pub fn load(tape: &mut Tape<'_>) -> Result<Self> {
        Ok(AttentionVars {
            w_a: tape.param_named(&format!("{CONNECT_ATTENTION}/W_a"))?,
            u_a: tape.param_named(&format!("{CONNECT_ATTENTION}/U_a"))?,
            v_a: tape.param_named(&format!("{CONNECT_ATTENTION}/v_a"))?,
        })
    }

    /// `U_a h_j` for every annotation; independent of the decoder state.
    pub fn keys(&self, tape: &mut Tape<'_>, ann: &Annotations) -> Result<Var> {
        tape.row_affine(self.u_a, ann.matrix)
    }

    /// Context vector for decoder state `s_prev`.
    pub fn attend(
        &self,
        tape: &mut Tape<'_>,
        s_prev: Var,
        keys: Var,
        ann: &Annotations,
    ) -> Result<Var> {
        let query = tape.affine(&[(self.w_a, s_prev)], None)?;
        tape.attention(query, keys, self.v_a, ann.matrix)
    }
}

fn check_ids(ids: &[usize], size: usize) -> Result<()> {
    match ids.iter().find(|&&id| id >= size) {
        Some(&id) => Err(Error::IdOutOfRange { id, size }),
        None => Ok(()),
    }
}

/// Runs both encoder GRUs over `document` from zero initial states.
pub fn encode(tape: &mut Tape<'_>, document: &[usize]) -> Result<Annotations> {
    if document.is_empty() {
        return Err(Error::Empty("document"));
    }
    let embed = tape.param_named(&format!("{ENC_EMBED}/E"))?;
    check_ids(document, tape.shape(embed).0)?;
    let fwd = GruVars::load(tape, ENC_FWD, ENC_FWD, None)?;
    let bwd = GruVars::load(tape, ENC_BWD, ENC_BWD, None)?;
    let hidden = tape.shape(fwd.u[0]).0;
    let xs: Vec<Var> = document
        .iter()
        .map(|&id| tape.row(embed, id))
        .collect::<Result<_>>()?;

    let mut h = tape.input(vec![0.0; hidden]);
    let mut forward = Vec::with_capacity(xs.len());
    for &x in &xs {
        h = gru_step(tape, &fwd, x, None, h)?;
        forward.push(h);
    }
    let mut h = tape.input(vec![0.0; hidden]);
    let mut backward = vec![h; xs.len()];
    for t in (0..xs.len()).rev() {
        h = gru_step(tape, &bwd, xs[t], None, h)?;
        backward[t] = h;
    }
    let rows: Vec<Var> = forward
        .iter()
        .zip(&backward)
        .map(|(&f, &b)| tape.concat(f, b))
        .collect();
    let matrix = tape.stack(&rows)?;
    Ok(Annotations {
        forward,
        backward,
        matrix,
    })
}

/// `s_0 = tanh(W_s b_1 + b_s)` with `b_1` the backward state at the first token.
pub fn init_decoder_state(tape: &mut Tape<'_>, ann: &Annotations) -> Result<Var> {
    let first = *ann.backward.first().ok_or(Error::Empty("annotations"))?;
    let w = tape.param_named(&format!("{CONNECT_INIT}/W_s"))?;
    let b = tape.param_named(&format!("{CONNECT_INIT}/b_s"))?;
    let pre = tape.affine(&[(w, first)], Some(b))?;
    Ok(tape.tanh(pre))
}

/// Headline tokens up to the first padding symbol.
pub fn unpadded(headline: &[usize]) -> &[usize] {
    let end = headline.iter().position(|&t| t == PAD).unwrap_or(headline.len());
    &headline[..end]
}

/// Teacher-forced per-position NLL nodes for `headline` followed by EOS.
pub fn headline_nll_terms(
    tape: &mut Tape<'_>,
    document: &[usize],
    headline: &[usize],
) -> Result<Vec<Var>> {
    let headline = unpadded(headline);
    let ann = encode(tape, document)?;
    let att = AttentionVars::load(tape)?;
    let keys = att.keys(tape, &ann)?;
    let dec = StepVars::decoder(tape)?;
    check_ids(headline, tape.shape(dec.embed).0)?;
    let mut s = init_decoder_state(tape, &ann)?;
    let mut prev = BOS;
    let mut terms = Vec::with_capacity(headline.len() + 1);
    for &target in headline.iter().chain(std::iter::once(&EOS)) {
        let ctx = att.attend(tape, s, keys, &ann)?;
        let (next, logits) = dec.step(tape, prev, s, Some(ctx))?;
        terms.push(tape.nll(logits, target)?);
        s = next;
        prev = target;
    }
    Ok(terms)
}

/// Summed NLL node and token count, the training loss of one pair.
pub fn nhg_sum_loss(tape: &mut Tape<'_>, document: &[usize], headline: &[usize]) -> Result<(Var, usize)> {
    let terms = headline_nll_terms(tape, document, headline)?;
    Ok((tape.sum_scalars(&terms)?, terms.len()))
}

/// Per-token NLL values of one pair.
pub fn nhg_token_nlls(store: &ParamStore, document: &[usize], headline: &[usize]) -> Result<Vec<f64>> {
    let mut tape = Tape::new(store);
    let terms = headline_nll_terms(&mut tape, document, headline)?;
    Ok(terms.iter().map(|&v| tape.value(v)[0]).collect())
}

/// Mean per-token NLL of the headline (and its EOS) given the document.
pub fn nhg_loss(store: &ParamStore, document: &[usize], headline: &[usize]) -> Result<f64> {
    let nlls = nhg_token_nlls(store, document, headline)?;
    Ok(nlls.iter().sum::<f64>() / nlls.len() as f64)
}

/// Mean NLL and its gradients for one pair.
pub fn nhg_loss_and_grads(
    store: &ParamStore,
    document: &[usize],
    headline: &[usize],
) -> Result<(f64, crate::numerics::Gradients)> {
    let mut tape = Tape::new(store);
    let (sum, n) = nhg_sum_loss(&mut tape, document, headline)?;
    let mean = tape.scale(sum, 1.0 / n as f64);
    Ok((tape.value(mean)[0], tape.backward(mean)?))
}

/// Annotation vectors (width `2H`) for a document.
pub fn encode_values(store: &ParamStore, document: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::new(store);
    let ann = encode(&mut tape, document)?;
    let (n, w) = tape.shape(ann.matrix);
    let m = tape.value(ann.matrix);
    Ok((0..n).map(|i| m[i * w..(i + 1) * w].to_vec()).collect())
}

fn annotation_input(tape: &mut Tape<'_>, annotations: &[Vec<f64>]) -> Result<Annotations> {
    let first = annotations.first().ok_or(Error::Empty("annotations"))?;
    let width = first.len();
    if width % 2 != 0 {
        return Err(Error::invalid(format!("annotation width {width} is odd")));
    }
    let mut rows = Vec::with_capacity(annotations.len());
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for a in annotations {
        if a.len() != width {
            return Err(Error::Dimension {
                context: "annotation width",
                expected: width,
                actual: a.len(),
            });
        }
        forward.push(tape.input(a[..width / 2].to_vec()));
        backward.push(tape.input(a[width / 2..].to_vec()));
        rows.push(tape.input(a.clone()));
    }
    let matrix = tape.stack(&rows)?;
    Ok(Annotations {
        forward,
        backward,
        matrix,
    })
}

pub fn init_decoder_state_values(store: &ParamStore, annotations: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut tape = Tape::new(store);
    let ann = annotation_input(&mut tape, annotations)?;
    let s = init_decoder_state(&mut tape, &ann)?;
    Ok(tape.value(s).to_vec())
}

/// `(context, weights)` for decoder state `s_prev`.
pub fn attend_values(
    store: &ParamStore,
    s_prev: &[f64],
    annotations: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut tape = Tape::new(store);
    let ann = annotation_input(&mut tape, annotations)?;
    let att = AttentionVars::load(&mut tape)?;
    let keys = att.keys(&mut tape, &ann)?;
    let s = tape.input(s_prev.to_vec());
    let ctx = att.attend(&mut tape, s, keys, &ann)?;
    let alpha = tape
        .attention_weights(ctx)
        .expect("attention node carries weights")
        .to_vec();
    Ok((tape.value(ctx).to_vec(), alpha))
}

/// `(s_next, logits)` of one decoder step of the full model.
pub fn decode_step_values(
    store: &ParamStore,
    y_prev: usize,
    s_prev: &[f64],
    context: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut tape = Tape::new(store);
    let dec = StepVars::decoder(&mut tape)?;
    let s = tape.input(s_prev.to_vec());
    let c = tape.input(context.to_vec());
    let (next, logits) = dec.step(&mut tape, y_prev, s, Some(c))?;
    Ok((tape.value(next).to_vec(), tape.value(logits).to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gru_cell_forward, softmax, GruParams, Tensor};

    fn dims() -> Dims {
        Dims {
            enc_vocab: 12,
            dec_vocab: 10,
            embed: 4,
            hidden: 3,
        }
    }

    fn random(seed: u64) -> ParamStore {
        random_store(&NHG_GROUPS, &dims(), seed, "test").unwrap()
    }

    fn zeroed(mut s: ParamStore, groups: &[&str]) -> ParamStore {
        for g in groups {
            for id in s.group_ids(g) {
                s.get_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        s
    }

    fn gru_params(store: &ParamStore, input: &str, recurrent: &str) -> GruParams {
        let t = |g: &str, n: &str| store.by_name(&format!("{g}/{n}")).unwrap().clone();
        GruParams {
            w: [t(input, "W_z"), t(input, "W_r"), t(input, "W_h")],
            u: [t(recurrent, "U_z"), t(recurrent, "U_r"), t(recurrent, "U_h")],
            b: [t(recurrent, "b_z"), t(recurrent, "b_r"), t(recurrent, "b_h")],
        }
    }

    fn matvec(m: &Tensor, x: &[f64]) -> Vec<f64> {
        let (r, c) = m.dims2();
        (0..r).map(|i| (0..c).map(|j| m.data()[i * c + j] * x[j]).sum()).collect()
    }

    #[test]
    fn annotation_shape_and_zero_params() {
        let s = random(1);
        let ann = encode_values(&s, &[4, 5, 6, 7, 8]).unwrap();
        assert_eq!(ann.len(), 5);
        assert!(ann.iter().all(|a| a.len() == 6));
        let z = zeroed(s, &NHG_GROUPS);
        assert!(encode_values(&z, &[4, 5, 6]).unwrap().iter().flatten().all(|&v| v == 0.0));
        assert!(encode_values(&z, &[]).is_err());
        assert!(encode_values(&z, &[12]).is_err());
    }

    #[test]
    fn encoder_matches_scalar_chain() {
        let s = random(2);
        let doc = [4, 9, 5, 11];
        let ann = encode_values(&s, &doc).unwrap();
        let e = s.by_name("enc.embed/E").unwrap();
        let fwd = gru_params(&s, ENC_FWD, ENC_FWD);
        let bwd = gru_params(&s, ENC_BWD, ENC_BWD);
        let mut h = vec![0.0; 3];
        for (t, &id) in doc.iter().enumerate() {
            h = gru_cell_forward(&fwd, e.row(id), &h).unwrap();
            assert_eq!(&ann[t][..3], h.as_slice());
        }
        let mut h = vec![0.0; 3];
        for (t, &id) in doc.iter().enumerate().rev() {
            h = gru_cell_forward(&bwd, e.row(id), &h).unwrap();
            assert_eq!(&ann[t][3..], h.as_slice());
        }
    }

    #[test]
    fn prefix_property() {
        let s = random(3);
        let a = encode_values(&s, &[4, 5, 6, 7]).unwrap();
        let b = encode_values(&s, &[4, 5, 6, 9]).unwrap();
        for t in 0..3 {
            assert_eq!(a[t][..3], b[t][..3]);
        }
        assert_ne!(a[3][..3], b[3][..3]);
        let c = encode_values(&s, &[9, 5, 6, 7]).unwrap();
        for t in 1..4 {
            assert_eq!(a[t][3..], c[t][3..]);
        }
        assert_ne!(a[0][3..], c[0][3..]);
    }

    #[test]
    fn decoder_init_state() {
        let s = random(4);
        let ann = encode_values(&s, &[4, 5, 6]).unwrap();
        let z = zeroed(s.clone(), &[CONNECT_INIT]);
        assert_eq!(init_decoder_state_values(&z, &ann).unwrap(), vec![0.0; 3]);
        let s0 = init_decoder_state_values(&s, &ann).unwrap();
        let ws = s.by_name("connect.init/W_s").unwrap();
        let bs = s.by_name("connect.init/b_s").unwrap();
        let oracle: Vec<f64> = matvec(ws, &ann[0][3..])
            .iter()
            .zip(bs.data())
            .map(|(a, b)| (a + b).tanh())
            .collect();
        assert_eq!(s0, oracle);
        assert!(s0.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn attention_oracle() {
        let s = random(5);
        let ann = vec![
            vec![0.1, -0.2, 0.3, 0.4, 0.0, -0.5],
            vec![0.7, 0.1, -0.3, 0.2, 0.6, 0.1],
            vec![-0.4, 0.5, 0.2, -0.1, 0.3, 0.9],
        ];
        let sp = [0.2, -0.6, 0.4];
        let (ctx, alpha) = attend_values(&s, &sp, &ann).unwrap();
        let wa = s.by_name("connect.attention/W_a").unwrap();
        let ua = s.by_name("connect.attention/U_a").unwrap();
        let va = s.by_name("connect.attention/v_a").unwrap();
        let q = matvec(wa, &sp);
        let scores: Vec<f64> = ann
            .iter()
            .map(|h| {
                let k = matvec(ua, h);
                (0..3).map(|i| va.data()[i] * (q[i] + k[i]).tanh()).sum()
            })
            .collect();
        let expect = softmax(&scores).unwrap();
        for (a, e) in alpha.iter().zip(&expect) {
            assert!((a - e).abs() < 1e-14);
        }
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..6 {
            let c: f64 = (0..3).map(|j| expect[j] * ann[j][i]).sum();
            assert!((ctx[i] - c).abs() < 1e-14);
        }
    }

    #[test]
    fn attention_degenerate_cases() {
        let s = random(6);
        let h = vec![0.3, -0.1, 0.2, 0.5, -0.7, 0.4];
        let (ctx, alpha) = attend_values(&s, &[0.1, 0.2, 0.3], &[h.clone()]).unwrap();
        assert_eq!(alpha, vec![1.0]);
        assert_eq!(ctx, h);
        let (ctx, _) = attend_values(&s, &[0.1, 0.2, 0.3], &vec![h.clone(); 4]).unwrap();
        for (c, e) in ctx.iter().zip(&h) {
            assert!((c - e).abs() < 1e-15);
        }
    }

    #[test]
    fn decode_step_oracle_and_zero() {
        let s = random(7);
        let sp = [0.1, -0.3, 0.2];
        let ctx = [0.5, -0.1, 0.0, 0.3, 0.2, -0.4];
        let (next, logits) = decode_step_values(&s, 6, &sp, &ctx).unwrap();
        // Oracle: one GRU cell over the concatenated input [embed ; context].
        let t = |n: &str| s.by_name(n).unwrap();
        let cat = |w: &Tensor, c: &Tensor| {
            let (r, cw) = (w.dims2().0, w.dims2().1 + c.dims2().1);
            let mut d = Vec::new();
            for i in 0..r {
                d.extend_from_slice(w.row(i));
                d.extend_from_slice(c.row(i));
            }
            Tensor::matrix(r, cw, d).unwrap()
        };
        let mut p = gru_params(&s, DEC_EMBED_BLOCK, DEC_RECURRENT);
        for (k, g) in ["z", "r", "h"].iter().enumerate() {
            p.w[k] = cat(t(&format!("dec.gru.embed_block/W_{g}")), t(&format!("dec.gru.context_block/C_{g}")));
        }
        let mut x = t("dec.embed/E").row(6).to_vec();
        x.extend_from_slice(&ctx);
        let oracle = gru_cell_forward(&p, &x, &sp).unwrap();
        for (a, b) in next.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-14);
        }
        let ol: Vec<f64> = matvec(t("dec.output/W"), &next)
            .iter()
            .zip(t("dec.output/b").data())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(logits, ol);

        let z = zeroed(s, &NHG_GROUPS);
        let (_, logits) = decode_step_values(&z, 6, &sp, &ctx).unwrap();
        assert!(logits.iter().all(|&l| l == 0.0));
        assert!(decode_step_values(&z, 10, &sp, &ctx).is_err());
    }

    #[test]
    fn uniform_model_loss_and_padding() {
        let z = zeroed(random(8), &NHG_GROUPS);
        let l = nhg_loss(&z, &[4, 5, 6], &[7, 8]).unwrap();
        assert!((l - (10f64).ln()).abs() < 1e-12);
        let s = random(9);
        let a = nhg_loss(&s, &[4, 5, 6], &[7, 8]).unwrap();
        let b = nhg_loss(&s, &[4, 5, 6], &[7, 8, PAD, PAD]).unwrap();
        assert_eq!(a, b);
        assert!(nhg_loss(&s, &[4, 5], &[10]).is_err());
    }

    #[test]
    fn loss_matches_manual_unroll() {
        let s = random(10);
        let doc = [4, 5, 6, 7];
        let head = [8, 9];
        let ann = encode_values(&s, &doc).unwrap();
        let mut st = init_decoder_state_values(&s, &ann).unwrap();
        let mut prev = BOS;
        let mut total = 0.0;
        for &y in head.iter().chain([EOS].iter()) {
            let (ctx, _) = attend_values(&s, &st, &ann).unwrap();
            let (next, logits) = decode_step_values(&s, prev, &st, &ctx).unwrap();
            total -= softmax(&logits).unwrap()[y].ln();
            st = next;
            prev = y;
        }
        let l = nhg_loss(&s, &doc, &head).unwrap();
        assert!((l - total / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        use crate::numerics::gradcheck::check_gradients;
        let s = random(11);
        let (doc, head) = ([4, 5, 6, 11, 7], [8, 9, 5]);
        let (_, g) = nhg_loss_and_grads(&s, &doc, &head).unwrap();
        let r = check_gradients(&s, &g, 1e-5, |_| true, |p| nhg_loss(p, &doc, &head)).unwrap();
        for gc in &r.groups {
            assert!(gc.max_rel_err < 1e-5, "{gc:?} worst {:?}", r.worst);
        }
        assert_eq!(r.groups.len(), NHG_GROUPS.len());
    }
}
