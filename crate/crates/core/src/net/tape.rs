//! A small reverse-mode tape over dense matrices.
//!
//! Every value is a 2-D `f64` array. Parameters enter the tape by reference,
//! so building a graph for one window copies no weights. `backward` returns
//! one gradient per parameter touched by the graph.

use std::borrow::Cow;

use ndarray::{s, Array2, Axis};

use crate::crf::{self, TransitionMatrix};
use crate::error::Result;

pub type NodeId = usize;

const LN_EPS: f64 = 1e-5;

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(NodeId, NodeId),
    /// `a · bᵀ`
    MatMulTransB(NodeId, NodeId),
    /// Adds a `1 × c` row to every row of `a`.
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Causal window stacking: row t holds rows t-k+1..=t of the input,
    /// oldest first, zero-padded on the left.
    Im2Col(NodeId, usize),
    RowSoftmax(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    Elu(NodeId),
    Sigmoid(NodeId),
    /// Row `t·n + b` is row `t` of block `b`.
    Interleave(Vec<NodeId>),
    /// Row-major reshape.
    Reshape(NodeId),
    /// Row broadcast of a `1 × c` value to `rows × c`.
    Broadcast(NodeId),
    CrfNll {
        emissions: NodeId,
        transitions: NodeId,
        start: NodeId,
        grads: crf::CrfGradients,
    },
    BceLogits {
        logits: NodeId,
        grad: Array2<f64>,
    },
}

struct Node<'p> {
    value: Cow<'p, Array2<f64>>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p [Array2<f64>],
    nodes: Vec<Node<'p>>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Array2<f64>]) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(256),
            param_nodes: vec![None; params.len()],
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, index: usize) -> NodeId {
        if let Some(id) = self.param_nodes[index] {
            return id;
        }
        self.nodes.push(Node {
            value: Cow::Borrowed(&self.params[index]),
            op: Op::Param(index),
        });
        let id = self.nodes.len() - 1;
        self.param_nodes[index] = Some(id);
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulTransB(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    /// `x · w + b`
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn im2col(&mut self, a: NodeId, k: usize) -> NodeId {
        let x = self.value(a);
        let (t_len, d) = x.dim();
        let mut out = Array2::zeros((t_len, k * d));
        for t in 0..t_len {
            for j in 0..k {
                // slot j holds x[t - (k-1) + j]
                let src = t as isize - (k as isize - 1) + j as isize;
                if src >= 0 {
                    out.slice_mut(s![t, j * d..(j + 1) * d]).assign(&x.row(src as usize));
                }
            }
        }
        self.push(out, Op::Im2Col(a, k))
    }

    pub fn row_softmax(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row /= sum;
        }
        self.push(v, Op::RowSoftmax(a))
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let is = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let v = &xhat * self.value(gain) + self.value(bias);
        self.push(
            v,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.push(v, Op::Elu(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn interleave(&mut self, blocks: &[NodeId]) -> NodeId {
        let n = blocks.len();
        let (t_len, d) = self.value(blocks[0]).dim();
        let mut out = Array2::zeros((n * t_len, d));
        for (b, &id) in blocks.iter().enumerate() {
            let x = self.value(id);
            for t in 0..t_len {
                out.row_mut(t * n + b).assign(&x.row(t));
            }
        }
        self.push(out, Op::Interleave(blocks.to_vec()))
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> NodeId {
        let x = self.value(a);
        let v = Array2::from_shape_vec((rows, cols), x.iter().copied().collect())
            .expect("reshape preserves element count");
        self.push(v, Op::Reshape(a))
    }

    pub fn broadcast_rows(&mut self, a: NodeId, rows: usize) -> NodeId {
        let v = self.value(a).broadcast((rows, self.value(a).ncols())).unwrap().to_owned();
        self.push(v, Op::Broadcast(a))
    }

    /// CRF negative log-likelihood of `gold` as a `1 × 1` node. `start` is
    /// a `1 × m` row.
    pub fn crf_nll(&mut self, emissions: NodeId, transitions: NodeId, start: NodeId, gold: &[usize]) -> Result<NodeId> {
        let trans = TransitionMatrix {
            scores: self.value(transitions).clone(),
            start: self.value(start).row(0).to_owned(),
        };
        let (nll, grads) = crf::nll_and_gradients(self.value(emissions).view(), gold, &trans)?;
        Ok(self.push(
            Array2::from_elem((1, 1), nll),
            Op::CrfNll {
                emissions,
                transitions,
                start,
                grads,
            },
        ))
    }

    /// Mean binary cross-entropy of a `T × 1` logit column against 0/1 targets.
    pub fn bce_logits(&mut self, logits: NodeId, targets: &[f64]) -> NodeId {
        let z = self.value(logits);
        let n = targets.len() as f64;
        let mut loss = 0.0;
        let mut grad = Array2::zeros(z.dim());
        for (i, &y) in targets.iter().enumerate() {
            let x = z[[i, 0]];
            loss += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
            grad[[i, 0]] = (sigmoid(x) - y) / n;
        }
        self.push(Array2::from_elem((1, 1), loss / n), Op::BceLogits { logits, grad })
    }

    /// Gradients of the scalar `root` with respect to every parameter, or
    /// `None` for parameters the graph never used.
    pub fn backward(&self, root: NodeId) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Array2::ones(self.value(root).dim()));
        let mut out: Vec<Option<Array2<f64>>> = vec![None; self.params.len()];
        fn acc(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
            match slot {
                Some(x) => *x += &g,
                None => *slot = Some(g),
            }
        }
        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => out[*p] = Some(g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads[*a], ga);
                    acc(&mut grads[*b], gb);
                }
                Op::MatMulTransB(a, b) => {
                    let ga = g.dot(self.value(*b));
                    let gb = g.t().dot(self.value(*a));
                    acc(&mut grads[*a], ga);
                    acc(&mut grads[*b], gb);
                }
                Op::AddRow(a, r) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads[*r], gr);
                    acc(&mut grads[*a], g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads[*b], g.clone());
                    acc(&mut grads[*a], g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads[*a], ga);
                    acc(&mut grads[*b], gb);
                }
                Op::Scale(a, c) => acc(&mut grads[*a], g * *c),
                Op::Im2Col(a, k) => {
                    let (t_len, d) = self.value(*a).dim();
                    let mut ga = Array2::zeros((t_len, d));
                    for t in 0..t_len {
                        for j in 0..*k {
                            let src = t as isize - (*k as isize - 1) + j as isize;
                            if src >= 0 {
                                let mut row = ga.row_mut(src as usize);
                                row += &g.slice(s![t, j * d..(j + 1) * d]);
                            }
                        }
                    }
                    acc(&mut grads[*a], ga);
                }
                Op::RowSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = Array2::zeros(y.dim());
                    for ((yr, gr), mut out_r) in y.rows().into_iter().zip(g.rows()).zip(ga.rows_mut()) {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, &yv), &gv) in out_r.iter_mut().zip(yr).zip(gr) {
                            *o = yv * (gv - dot);
                        }
                    }
                    acc(&mut grads[*a], ga);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let gamma = self.value(*gain);
                    acc(&mut grads[*bias], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads[*gain], (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * gamma;
                    let d = xhat.ncols() as f64;
                    let mut gx = Array2::zeros(xhat.dim());
                    for (t, mut row) in gx.rows_mut().into_iter().enumerate() {
                        let dh = dxhat.row(t);
                        let xh = xhat.row(t);
                        let s1 = dh.sum();
                        let s2: f64 = dh.iter().zip(xh).map(|(a, b)| a * b).sum();
                        for ((o, &a), &b) in row.iter_mut().zip(dh).zip(xh) {
                            *o = inv_std[t] / d * (d * a - s1 - b * s2);
                        }
                    }
                    acc(&mut grads[*x], gx);
                }
                Op::Elu(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(self.value(*a))
                        .map_collect(|&g, &x| if x > 0.0 { g } else { g * x.exp() });
                    acc(&mut grads[*a], ga);
                }
                Op::Sigmoid(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(&*node.value)
                        .map_collect(|&g, &y| g * y * (1.0 - y));
                    acc(&mut grads[*a], ga);
                }
                Op::Interleave(blocks) => {
                    let n = blocks.len();
                    let t_len = g.nrows() / n;
                    for (b, &bid) in blocks.iter().enumerate() {
                        let gb = g.slice(s![b..n * t_len;n, ..]).to_owned();
                        acc(&mut grads[bid], gb);
                    }
                }
                Op::Reshape(a) => {
                    let dim = self.value(*a).dim();
                    let ga = Array2::from_shape_vec(dim, g.iter().copied().collect()).unwrap();
                    acc(&mut grads[*a], ga);
                }
                Op::Broadcast(a) => acc(&mut grads[*a], g.sum_axis(Axis(0)).insert_axis(Axis(0))),
                Op::CrfNll {
                    emissions,
                    transitions,
                    start,
                    grads: cg,
                } => {
                    let c = g[[0, 0]];
                    acc(&mut grads[*emissions], &cg.emissions * c);
                    acc(&mut grads[*transitions], &cg.transitions * c);
                    acc(&mut grads[*start], (&cg.start * c).insert_axis(Axis(0)));
                }
                Op::BceLogits { logits, grad } => acc(&mut grads[*logits], grad * g[[0, 0]]),
            }
        }
        out
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rand_mat(r: usize, c: usize, rng: &mut impl Rng) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    /// Checks d(sum(out ⊙ w)) / d(param) against central differences for a
    /// graph built by `f` over the given parameters.
    fn check(params: Vec<Array2<f64>>, f: impl Fn(&mut Tape) -> NodeId) {
        let mut rng = crate::rng::substream(99, "probe", &[]);
        let probe = {
            let tape_params = params.clone();
            let mut tape = Tape::new(&tape_params);
            let out = f(&mut tape);
            let dim = tape.value(out).dim();
            rand_mat(dim.0, dim.1, &mut rng)
        };
        let loss = |ps: &[Array2<f64>]| {
            let mut tape = Tape::new(ps);
            let out = f(&mut tape);
            let p = tape.input(probe.clone());
            let m = tape.mul(out, p);
            let ones = tape.input(Array2::ones((tape.value(m).ncols(), 1)));
            let col = tape.matmul(m, ones);
            let ones_r = tape.input(Array2::ones((1, tape.value(col).nrows())));
            let s = tape.matmul(ones_r, col);
            (tape.scalar(s), tape.backward(s))
        };
        let (_, grads) = loss(&params);
        let h = 1e-6;
        for (pi, p) in params.iter().enumerate() {
            let g = grads[pi].as_ref().expect("every parameter is used");
            for idx in ndarray::indices(p.dim()) {
                let mut plus = params.clone();
                plus[pi][idx] += h;
                let mut minus = params.clone();
                minus[pi][idx] -= h;
                let fd = (loss(&plus).0 - loss(&minus).0) / (2.0 * h);
                let err = (fd - g[idx]).abs() / fd.abs().max(g[idx].abs()).max(1e-4);
                assert!(err < 1e-5, "param {pi} {idx:?}: fd {fd} vs {}", g[idx]);
            }
        }
    }

    #[test]
    fn matmul_family() {
        let mut rng = crate::rng::substream(1, "t", &[]);
        let ps = vec![rand_mat(3, 4, &mut rng), rand_mat(4, 2, &mut rng), rand_mat(5, 4, &mut rng), rand_mat(1, 2, &mut rng)];
        check(ps, |t| {
            let (a, b, c, r) = (t.param(0), t.param(1), t.param(2), t.param(3));
            let ab = t.affine(a, b, r);
            let ac = t.matmul_t(a, c);
            let s = t.scale(ac, 0.7);
            let sq = t.mul(s, s);
            let x = t.matmul(sq, c);
            let y = t.matmul(x, b);
            t.add(y, ab)
        });
    }

    #[test]
    fn softmax_norm_and_activations() {
        let mut rng = crate::rng::substream(2, "t", &[]);
        let ps = vec![rand_mat(4, 5, &mut rng), rand_mat(1, 5, &mut rng), rand_mat(1, 5, &mut rng)];
        check(ps, |t| {
            let x = t.param(0);
            let sm = t.row_softmax(x);
            let (g, b) = (t.param(1), t.param(2));
            let ln = t.layer_norm(x, g, b);
            let e = t.elu(ln);
            let s = t.sigmoid(x);
            let a = t.add(sm, e);
            t.mul(a, s)
        });
    }

    #[test]
    fn stacking_ops() {
        let mut rng = crate::rng::substream(3, "t", &[]);
        let ps = vec![rand_mat(5, 3, &mut rng), rand_mat(5, 3, &mut rng), rand_mat(1, 3, &mut rng)];
        check(ps, |t| {
            let (a, b) = (t.param(0), t.param(1));
            let col = t.im2col(a, 4);
            let il = t.interleave(&[a, b]);
            let r = t.reshape(il, 5, 6);
            let p2 = t.param(2);
            let bc = t.broadcast_rows(p2, 20);
            let rr = t.reshape(r, 5, 6);
            let mix = t.add(rr, r);
            let c = t.matmul_t(mix, mix);
            let v = t.matmul(c, col);
            let v = t.reshape(v, 20, 3);
            t.add(v, bc)
        });
    }

    #[test]
    fn im2col_is_causal() {
        let mut x = Array2::zeros((10, 2));
        x[[5, 0]] = 1.0;
        let ps = vec![x];
        let mut t = Tape::new(&ps);
        let p = t.param(0);
        let c = t.im2col(p, 4);
        let v = t.value(c);
        let nonzero: Vec<usize> = (0..10).filter(|&r| v.row(r).iter().any(|&z| z != 0.0)).collect();
        assert_eq!(nonzero, vec![5, 6, 7, 8]);
    }

    #[test]
    fn losses_match_scalar_oracles() {
        let mut rng = crate::rng::substream(4, "t", &[]);
        let ps = vec![rand_mat(4, 3, &mut rng), rand_mat(3, 3, &mut rng), rand_mat(1, 3, &mut rng), rand_mat(4, 1, &mut rng)];
        let gold = [0, 2, 1, 1];
        let targets = [0.0, 1.0, 0.0, 0.0];
        let mut t = Tape::new(&ps);
        let (e, tr, st, lg) = (t.param(0), t.param(1), t.param(2), t.param(3));
        let nll = t.crf_nll(e, tr, st, &gold).unwrap();
        let bce = t.bce_logits(lg, &targets);
        let total = t.add(nll, bce);
        let trans = TransitionMatrix {
            scores: ps[1].clone(),
            start: ps[2].row(0).to_owned(),
        };
        let oracle_nll = crf::negative_log_likelihood(ps[0].view(), &gold, &trans).unwrap();
        let oracle_bce: f64 = targets
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let p = 1.0 / (1.0 + (-ps[3][[i, 0]]).exp());
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 4.0;
        assert!((t.scalar(total) - oracle_nll - oracle_bce).abs() < 1e-12);
        // uniform zero logits give log 2 whatever the labels
        let zeros = vec![Array2::zeros((6, 1))];
        let mut t = Tape::new(&zeros);
        let z = t.param(0);
        let b = t.bce_logits(z, &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!((t.scalar(b) - 2f64.ln()).abs() < 1e-15);
    }
}
