//! CART random forest with Gini splits, sample weights and bootstrap.

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    Uniform,
    /// `n / (k · n_c)` for class `c`.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    /// Refitting keeps already grown trees and only adds the missing ones.
    pub warm_start: bool,
    /// Features tried per split; `None` means `round(sqrt(p))`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub class_weight: ClassWeight,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            min_samples_leaf: 1,
            warm_start: false,
            max_features: None,
            max_depth: None,
            bootstrap: true,
            class_weight: ClassWeight::Uniform,
            seed: 0,
        }
    }
}

impl ForestParams {
    /// The 2 × 2 × 2 search space over trees, leaf size and warm start.
    pub fn grid(base: &ForestParams) -> Vec<ForestParams> {
        let mut out = vec![];
        for n_trees in [200, 250] {
            for min_samples_leaf in [1, 5] {
                for warm_start in [true, false] {
                    out.push(ForestParams {
                        n_trees,
                        min_samples_leaf,
                        warm_start,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

/// Gini impurity of weighted class counts.
pub fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted impurity decrease per unit of node weight.
    pub gain: f64,
}

fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

struct Data<'a> {
    x: &'a Array2<f64>,
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
}

impl Data<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += self.w[i];
        }
        c
    }

    fn best_split(&self, idx: &[usize], features: &[usize], min_leaf: usize) -> Option<Split> {
        let parent = self.counts(idx);
        let total: f64 = parent.iter().sum();
        let parent_gini = gini(&parent);
        let mut best: Option<Split> = None;
        let mut order = idx.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
            let mut left = vec![0.0; self.n_classes];
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.y[i]] += self.w[i];
                let n_left = pos + 1;
                if n_left < min_leaf || order.len() - n_left < min_leaf {
                    continue;
                }
                let (a, b) = (self.x[[i, f]], self.x[[order[pos + 1], f]]);
                if a == b {
                    continue;
                }
                let wl: f64 = left.iter().sum();
                let right: Vec<f64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
                let wr = total - wl;
                let gain = parent_gini - (wl * gini(&left) + wr * gini(&right)) / total;
                if best.is_none_or(|s| gain > s.gain) {
                    let mid = a + (b - a) / 2.0;
                    best = Some(Split {
                        feature: f,
                        threshold: if mid < b { mid } else { a },
                        gain,
                    });
                }
            }
        }
        best.filter(|s| s.gain > 1e-12)
    }
}

fn grow(data: &Data, idx: Vec<usize>, p: &ForestParams, n_try: usize, rng: &mut impl Rng) -> Tree {
    let n_features = data.x.ncols();
    let mut nodes = vec![];
    // (node slot, sample indices, depth)
    let mut stack = vec![(0usize, idx, 0usize)];
    nodes.push(Node::Leaf { class: 0 });
    while let Some((slot, idx, depth)) = stack.pop() {
        let counts = data.counts(&idx);
        let class = argmax_lowest(&counts);
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_ok = p.max_depth.is_none_or(|m| depth < m);
        let split = if pure || !depth_ok || idx.len() < 2 * p.min_samples_leaf {
            None
        } else {
            let features: Vec<usize> = sample(rng, n_features, n_try).into_vec();
            data.best_split(&idx, &features, p.min_samples_leaf)
        };
        match split {
            None => nodes[slot] = Node::Leaf { class },
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| data.x[[i, s.feature]] <= s.threshold);
                let (li, ri) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { class: 0 });
                nodes.push(Node::Leaf { class: 0 });
                nodes[slot] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: li,
                    right: ri,
                };
                stack.push((ri, r, depth + 1));
                stack.push((li, l, depth + 1));
            }
        }
    }
    Tree { nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn new(params: ForestParams, n_classes: usize) -> Self {
        RandomForest {
            params,
            n_classes,
            trees: vec![],
        }
    }

    /// Grows trees up to `params.n_trees`. Tree `i` draws its bootstrap and
    /// feature subsets from its own stream, so a warm-started forest equals
    /// one grown from scratch with the same seed.
    pub fn fit(&mut self, x: &Array2<f64>, y: &[usize], weights: Option<&[f64]>) -> Result<()> {
        let (n, p) = x.dim();
        if n == 0 || y.len() != n {
            return Err(Error::shape(format!("{n} labels for {n} rows"), y.len().to_string()));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= self.n_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                rooms: self.n_classes,
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("forest features must be finite"));
        }
        if self.params.n_trees == 0 || self.params.min_samples_leaf == 0 {
            return Err(Error::invalid("n_trees and min_samples_leaf must be positive"));
        }
        let mut w: Vec<f64> = weights.map_or_else(|| vec![1.0; n], |w| w.to_vec());
        if w.len() != n {
            return Err(Error::shape(format!("{n} weights"), w.len().to_string()));
        }
        if self.params.class_weight == ClassWeight::Balanced {
            let mut freq = vec![0usize; self.n_classes];
            for &c in y {
                freq[c] += 1;
            }
            let present = freq.iter().filter(|&&f| f > 0).count() as f64;
            for (wi, &c) in w.iter_mut().zip(y) {
                *wi *= n as f64 / (present * freq[c] as f64);
            }
        }
        if !self.params.warm_start || self.trees.len() > self.params.n_trees {
            self.trees.clear();
        }
        let n_try = self.params.max_features.unwrap_or_else(|| (p as f64).sqrt().round() as usize).clamp(1, p);
        let data = Data {
            x,
            y,
            w: &w,
            n_classes: self.n_classes,
        };
        let params = &self.params;
        let new: Vec<Tree> = (self.trees.len()..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(params.seed, "tree", &[t as u64]);
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow(&data, idx, params, n_try, &mut rng)
            })
            .collect();
        self.trees.extend(new);
        Ok(())
    }

    /// Fraction of trees voting for each class.
    pub fn votes(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let mut v = vec![0.0; self.n_classes];
        for t in &self.trees {
            v[t.predict(x)] += 1.0;
        }
        let n = self.trees.len().max(1) as f64;
        v.iter_mut().for_each(|c| *c /= n);
        v
    }

    /// Majority vote; the lower class index wins ties.
    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        argmax_lowest(&self.votes(x))
    }

    pub fn predict_all(&self, x: &Array2<f64>) -> Vec<usize> {
        (0..x.nrows()).into_par_iter().map(|i| self.predict(x.row(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = substream(seed, "toy", &[]);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y = x.outer_iter().map(|r| usize::from(r[1] > 0.2)).collect();
        (x, y)
    }

    #[test]
    fn gini_arithmetic() {
        assert_eq!(gini(&[2.0, 2.0]), 0.5);
        assert_eq!(gini(&[3.0, 0.0]), 0.0);
        assert!((gini(&[1.0, 1.0, 1.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pure_split_at_root() {
        let x = Array2::from_shape_vec((4, 2), vec![0.3, 1.0, 0.1, 2.0, 0.7, 3.0, 0.9, 4.0]).unwrap();
        let y = [0, 0, 1, 1];
        let w = [1.0; 4];
        let d = Data {
            x: &x,
            y: &y,
            w: &w,
            n_classes: 2,
        };
        let s = d.best_split(&[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.feature, 0);
        assert!((s.gain - 0.5).abs() < 1e-15);
        assert!((s.threshold - 0.5).abs() < 1e-15);
        let params = ForestParams {
            bootstrap: false,
            max_features: Some(2),
            ..Default::default()
        };
        let tree = grow(&d, vec![0, 1, 2, 3], &params, 2, &mut substream(0, "t", &[]));
        assert_eq!(tree.depth(), 1);
        for (i, &c) in y.iter().enumerate() {
            assert_eq!(tree.predict(x.row(i)), c);
        }
    }

    #[test]
    fn single_class_is_constant() {
        let (x, _) = toy(30, 1);
        let mut f = RandomForest::new(ForestParams { n_trees: 5, ..Default::default() }, 6);
        f.fit(&x, &[3; 30], None).unwrap();
        assert!(f.predict_all(&x).iter().all(|&c| c == 3));
    }

    #[test]
    fn leaves_respect_minimum_size() {
        let (x, y) = toy(200, 2);
        let p = ForestParams {
            n_trees: 3,
            min_samples_leaf: 5,
            bootstrap: false,
            max_features: Some(3),
            ..Default::default()
        };
        let mut f = RandomForest::new(p, 2);
        f.fit(&x, &y, None).unwrap();
        for t in &f.trees {
            let mut sizes = vec![0usize; t.nodes.len()];
            for r in x.outer_iter() {
                let mut i = 0;
                while let Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } = t.nodes[i]
                {
                    i = if r[feature] <= threshold { left } else { right };
                }
                sizes[i] += 1;
            }
            for (i, n) in t.nodes.iter().enumerate() {
                if matches!(n, Node::Leaf { .. }) {
                    assert!(sizes[i] >= 5, "leaf {i} holds {}", sizes[i]);
                }
            }
        }
    }

    #[test]
    fn deterministic_and_warm_start_equivalent() {
        let (x, y) = toy(150, 3);
        let p = ForestParams {
            n_trees: 12,
            seed: 9,
            ..Default::default()
        };
        let mut a = RandomForest::new(p.clone(), 2);
        a.fit(&x, &y, None).unwrap();
        let mut b = RandomForest::new(p.clone(), 2);
        b.fit(&x, &y, None).unwrap();
        assert_eq!(a, b);
        let mut warm = RandomForest::new(
            ForestParams {
                n_trees: 5,
                warm_start: true,
                ..p.clone()
            },
            2,
        );
        warm.fit(&x, &y, None).unwrap();
        warm.params.n_trees = 12;
        warm.fit(&x, &y, None).unwrap();
        assert_eq!(warm.trees, a.trees);
        let acc = a.predict_all(&x).iter().zip(&y).filter(|(p, t)| p == t).count();
        assert!(acc as f64 / 150.0 > 0.95);
    }

    #[test]
    fn balanced_weights_lift_the_rare_class() {
        // a single minority sample is outvoted unless weighted up
        let x = Array2::from_shape_vec((20, 1), (0..20).map(|i| i as f64).collect()).unwrap();
        let mut y = vec![0; 20];
        y[19] = 1;
        let base = ForestParams {
            n_trees: 1,
            min_samples_leaf: 4,
            bootstrap: false,
            ..Default::default()
        };
        let mut plain = RandomForest::new(base.clone(), 2);
        plain.fit(&x, &y, None).unwrap();
        assert_eq!(plain.predict(x.row(19)), 0);
        let mut bal = RandomForest::new(
            ForestParams {
                class_weight: ClassWeight::Balanced,
                ..base
            },
            2,
        );
        bal.fit(&x, &y, None).unwrap();
        assert_eq!(bal.predict(x.row(19)), 1);
        assert_eq!(bal.predict(x.row(0)), 0);
    }

    #[test]
    fn grid_has_eight_points() {
        let g = ForestParams::grid(&ForestParams::default());
        assert_eq!(g.len(), 8);
        assert_eq!((g[0].n_trees, g[0].min_samples_leaf, g[0].warm_start), (200, 1, true));
        assert_eq!((g[7].n_trees, g[7].min_samples_leaf, g[7].warm_start), (250, 5, false));
    }
}
