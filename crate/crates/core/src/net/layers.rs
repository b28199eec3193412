//! Building blocks expressed as tape operations.

use ndarray::Array2;

use super::tape::{NodeId, Tape};

/// Sinusoidal position encoding: `p[t, 2i] = sin(t / 10000^(2i/d))` and
/// `p[t, 2i+1] = cos(·)` of the same angle.
pub fn position_encoding(t_len: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((t_len, d), |(t, j)| {
        let i = (j / 2) as f64;
        let angle = t as f64 / 10000f64.powf(2.0 * i / d as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub w: usize,
    pub b: usize,
}

impl Affine {
    pub fn apply(&self, tape: &mut Tape, x: NodeId) -> NodeId {
        let (w, b) = (tape.param(self.w), tape.param(self.b));
        tape.affine(x, w, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Norm {
    pub gain: usize,
    pub bias: usize,
}

impl Norm {
    pub fn apply(&self, tape: &mut Tape, x: NodeId) -> NodeId {
        let (g, b) = (tape.param(self.gain), tape.param(self.bias));
        tape.layer_norm(x, g, b)
    }
}

/// `h = x W + b + p`, with `p` already on the tape.
pub fn embed(tape: &mut Tape, x: NodeId, map: Affine, pe: NodeId) -> NodeId {
    let h = map.apply(tape, x);
    tape.add(h, pe)
}

/// Causal 1-D convolution with kernel `k`: im2col then one affine map
/// whose weight is `(k·d) × d_out`.
pub fn causal_conv(tape: &mut Tape, x: NodeId, k: usize, map: Affine) -> NodeId {
    let cols = tape.im2col(x, k);
    map.apply(tape, cols)
}

/// Scaled dot-product attention, unmasked.
pub fn self_attention(tape: &mut Tape, q: NodeId, k: NodeId, v: NodeId) -> NodeId {
    let d = tape.value(q).ncols() as f64;
    let scores = tape.matmul_t(q, k);
    let scaled = tape.scale(scores, 1.0 / d.sqrt());
    let attn = tape.row_softmax(scaled);
    tape.matmul(attn, v)
}

#[derive(Debug, Clone, Copy)]
pub struct Grn {
    pub w1: usize,
    pub w3: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub gate: Affine,
    pub value: Affine,
    pub norm: Norm,
}

impl Grn {
    /// `LayerNorm(a + GLU(W2·ELU(W1 a + W3 c + b1) + b2))`
    pub fn apply(&self, tape: &mut Tape, a: NodeId, c: NodeId) -> NodeId {
        let (w1, w3, b1) = (tape.param(self.w1), tape.param(self.w3), tape.param(self.b1));
        let wa = tape.matmul(a, w1);
        let wc = tape.matmul(c, w3);
        let s = tape.add(wa, wc);
        let s = tape.add_row(s, b1);
        let eta = tape.elu(s);
        let (w2, b2) = (tape.param(self.w2), tape.param(self.b2));
        let eta = tape.affine(eta, w2, b2);
        let g = self.gate.apply(tape, eta);
        let g = tape.sigmoid(g);
        let v = self.value.apply(tape, eta);
        let glu = tape.mul(g, v);
        let r = tape.add(a, glu);
        self.norm.apply(tape, r)
    }
}

/// One DCSA block. Both streams go through the same convolution and
/// attention weights; each stream has its own residual norm.
#[derive(Debug, Clone)]
pub struct Dcsa {
    pub kernel: usize,
    pub conv: Affine,
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub norms: [Norm; 2],
    pub grn: Grn,
}

impl Dcsa {
    fn stream(&self, tape: &mut Tape, x: NodeId, norm: Norm) -> NodeId {
        let phi = causal_conv(tape, x, self.kernel, self.conv);
        let (wq, wk, wv) = (tape.param(self.wq), tape.param(self.wk), tape.param(self.wv));
        let q = tape.matmul(phi, wq);
        let k = tape.matmul(phi, wk);
        let v = tape.matmul(x, wv);
        let sa = self_attention(tape, q, k, v);
        let r = tape.add(sa, x);
        norm.apply(tape, r)
    }

    pub fn apply(&self, tape: &mut Tape, x1: NodeId, x2: NodeId) -> NodeId {
        let a = self.stream(tape, x1, self.norms[0]);
        let c = self.stream(tape, x2, self.norms[1]);
        self.grn.apply(tape, a, c)
    }
}

/// Interleaves blocks row-wise, attends over the `n·T` rows, then maps each
/// group of `n` consecutive rows back to one step with a stride-`n` conv.
#[derive(Debug, Clone)]
pub struct Multihead {
    pub blocks: Vec<Dcsa>,
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub aggregate: Affine,
    pub norm: Norm,
}

impl Multihead {
    /// Output before dropout.
    pub fn apply(&self, tape: &mut Tape, x1: NodeId, x2: NodeId) -> NodeId {
        let (t_len, d) = tape.value(x1).dim();
        let outs: Vec<NodeId> = self.blocks.iter().map(|b| b.apply(tape, x1, x2)).collect();
        let xi = tape.interleave(&outs);
        let (wq, wk, wv) = (tape.param(self.wq), tape.param(self.wk), tape.param(self.wv));
        let q = tape.matmul(xi, wq);
        let k = tape.matmul(xi, wk);
        let v = tape.matmul(xi, wv);
        let sa = self_attention(tape, q, k, v);
        let grouped = tape.reshape(sa, t_len, self.blocks.len() * d);
        let h = self.aggregate.apply(tape, grouped);
        self.norm.apply(tape, h)
    }
}
