//! Linear-chain CRF over per-step room emissions.
//!
//! A path `y` of length T scores
//! `start[y_0] + Σ_t e[t, y_t] + Σ_{t≥1} trans[y_{t-1}, y_t]`; training
//! minimises `log Z − score(gold)` and prediction takes the Viterbi path.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    /// `scores[[from, to]]`.
    pub scores: Array2<f64>,
    pub start: Array1<f64>,
}

impl TransitionMatrix {
    pub fn zeros(m: usize) -> Self {
        TransitionMatrix {
            scores: Array2::zeros((m, m)),
            start: Array1::zeros(m),
        }
    }

    pub fn n_labels(&self) -> usize {
        self.start.len()
    }

    /// Aligned text table, one row per source room.
    pub fn render(&self, names: &[&str]) -> String {
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(8);
        let mut out = format!("{:>width$}", "from\\to");
        for n in names {
            out += &format!(" {n:>width$}");
        }
        out.push('\n');
        out += &format!("{:>width$}", "start");
        for v in &self.start {
            out += &format!(" {v:>width$.4}");
        }
        out.push('\n');
        for (i, row) in self.scores.rows().into_iter().enumerate() {
            out += &format!("{:>width$}", names[i]);
            for v in row {
                out += &format!(" {v:>width$.4}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check(em: &ArrayView2<f64>, trans: &TransitionMatrix) -> Result<()> {
    let m = trans.n_labels();
    if trans.scores.dim() != (m, m) || em.ncols() != m {
        return Err(Error::shape(
            format!("{m} labels"),
            format!("emissions {:?}, transitions {:?}", em.dim(), trans.scores.dim()),
        ));
    }
    if em.nrows() == 0 {
        return Err(Error::invalid("empty emission sequence"));
    }
    Ok(())
}

fn check_gold(gold: &[usize], t: usize, m: usize) -> Result<()> {
    if gold.len() != t {
        return Err(Error::shape(format!("{t} labels"), format!("{}", gold.len())));
    }
    if let Some(&label) = gold.iter().find(|&&g| g >= m) {
        return Err(Error::LabelOutOfRange { label, rooms: m });
    }
    Ok(())
}

/// Forward log-messages `alpha[t, j]` = log-sum of all prefixes ending in `j`.
fn forward(em: &ArrayView2<f64>, trans: &TransitionMatrix) -> Array2<f64> {
    let (t_len, m) = em.dim();
    let mut alpha = Array2::zeros((t_len, m));
    for j in 0..m {
        alpha[[0, j]] = trans.start[j] + em[[0, j]];
    }
    for t in 1..t_len {
        for j in 0..m {
            alpha[[t, j]] = em[[t, j]] + log_sum_exp((0..m).map(|i| alpha[[t - 1, i]] + trans.scores[[i, j]]));
        }
    }
    alpha
}

/// Backward log-messages `beta[t, i]` = log-sum of all suffixes after `i`.
fn backward(em: &ArrayView2<f64>, trans: &TransitionMatrix) -> Array2<f64> {
    let (t_len, m) = em.dim();
    let mut beta = Array2::zeros((t_len, m));
    for t in (0..t_len - 1).rev() {
        for i in 0..m {
            beta[[t, i]] = log_sum_exp((0..m).map(|j| trans.scores[[i, j]] + em[[t + 1, j]] + beta[[t + 1, j]]));
        }
    }
    beta
}

pub fn log_partition(em: ArrayView2<f64>, trans: &TransitionMatrix) -> Result<f64> {
    check(&em, trans)?;
    let alpha = forward(&em, trans);
    Ok(log_sum_exp(alpha.row(em.nrows() - 1).iter().copied()))
}

/// The same partition function computed from the backward messages.
pub fn log_partition_backward(em: ArrayView2<f64>, trans: &TransitionMatrix) -> Result<f64> {
    check(&em, trans)?;
    let beta = backward(&em, trans);
    Ok(log_sum_exp((0..trans.n_labels()).map(|j| trans.start[j] + em[[0, j]] + beta[[0, j]])))
}

pub fn path_score(em: ArrayView2<f64>, path: &[usize], trans: &TransitionMatrix) -> Result<f64> {
    check(&em, trans)?;
    check_gold(path, em.nrows(), trans.n_labels())?;
    let mut s = trans.start[path[0]];
    for (t, &y) in path.iter().enumerate() {
        s += em[[t, y]];
        if t > 0 {
            s += trans.scores[[path[t - 1], y]];
        }
    }
    Ok(s)
}

pub fn negative_log_likelihood(em: ArrayView2<f64>, gold: &[usize], trans: &TransitionMatrix) -> Result<f64> {
    Ok(log_partition(em, trans)? - path_score(em, gold, trans)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradients {
    pub emissions: Array2<f64>,
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
}

/// NLL and its gradient: model marginals minus gold indicator counts.
pub fn nll_and_gradients(
    em: ArrayView2<f64>,
    gold: &[usize],
    trans: &TransitionMatrix,
) -> Result<(f64, CrfGradients)> {
    check(&em, trans)?;
    check_gold(gold, em.nrows(), trans.n_labels())?;
    let (t_len, m) = em.dim();
    let alpha = forward(&em, trans);
    let beta = backward(&em, trans);
    let log_z = log_sum_exp(alpha.row(t_len - 1).iter().copied());
    let mut g_em = Array2::zeros((t_len, m));
    for t in 0..t_len {
        for j in 0..m {
            g_em[[t, j]] = (alpha[[t, j]] + beta[[t, j]] - log_z).exp();
        }
    }
    let g_start = g_em.row(0).to_owned();
    let mut g_tr = Array2::zeros((m, m));
    for t in 1..t_len {
        for i in 0..m {
            for j in 0..m {
                g_tr[[i, j]] +=
                    (alpha[[t - 1, i]] + trans.scores[[i, j]] + em[[t, j]] + beta[[t, j]] - log_z).exp();
            }
        }
    }
    let mut grads = CrfGradients {
        emissions: g_em,
        transitions: g_tr,
        start: g_start,
    };
    grads.start[gold[0]] -= 1.0;
    for (t, &y) in gold.iter().enumerate() {
        grads.emissions[[t, y]] -= 1.0;
        if t > 0 {
            grads.transitions[[gold[t - 1], y]] -= 1.0;
        }
    }
    let nll = log_z - path_score(em, gold, trans)?;
    Ok((nll, grads))
}

/// Highest-scoring path and its score. Among equal scores the lower room
/// index wins, both for the final state and at every backpointer.
pub fn viterbi_decode(em: ArrayView2<f64>, trans: &TransitionMatrix) -> Result<(Vec<usize>, f64)> {
    check(&em, trans)?;
    let (t_len, m) = em.dim();
    let mut delta: Array1<f64> = &trans.start + &em.row(0);
    let mut back = Array2::<usize>::zeros((t_len, m));
    for t in 1..t_len {
        let mut next = Array1::zeros(m);
        for j in 0..m {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for i in 0..m {
                let v = delta[i] + trans.scores[[i, j]];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + em[[t, j]];
            back[[t, j]] = arg;
        }
        delta = next;
    }
    let (mut y, score) = argmax_first(delta.view());
    let mut path = vec![0; t_len];
    path[t_len - 1] = y;
    for t in (1..t_len).rev() {
        y = back[[t, y]];
        path[t - 1] = y;
    }
    Ok((path, score))
}

fn argmax_first(v: ArrayView1<f64>) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}
