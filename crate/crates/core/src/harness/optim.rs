//! RAdam wrapped in Lookahead.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Fast steps between slow-weight syncs.
    pub lookahead_k: usize,
    pub lookahead_alpha: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lookahead_k: 5,
            lookahead_alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RAdam {
    pub config: OptimConfig,
    pub lr: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl RAdam {
    pub fn new(params: &[Array2<f64>], lr: f64, config: OptimConfig) -> Self {
        let zeros = || params.iter().map(|p| Array2::zeros(p.dim())).collect();
        RAdam {
            config,
            lr,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Length of the approximated simple moving average at step `t`.
    pub fn rho(beta2: f64, t: u64) -> f64 {
        let rho_inf = 2.0 / (1.0 - beta2) - 1.0;
        let b2t = beta2.powi(t as i32);
        rho_inf - 2.0 * t as f64 * b2t / (1.0 - b2t)
    }

    pub fn update(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        self.step += 1;
        let OptimConfig { beta1, beta2, eps, .. } = self.config;
        let t = self.step;
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        let rho_inf = 2.0 / (1.0 - beta2) - 1.0;
        let rho_t = Self::rho(beta2, t);
        // variance is tractable once the SMA length exceeds 5
        let rect = (rho_t > 5.0).then(|| {
            ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)).sqrt()
        });
        let lr = self.lr;
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                match rect {
                    Some(r) => *p -= lr * r * m_hat / ((*v / bc2).sqrt() + eps),
                    None => *p -= lr * m_hat,
                }
            });
        }
    }
}

/// Keeps slow weights and pulls them toward the fast weights every `k`
/// inner steps, then resets the fast weights onto them.
#[derive(Debug, Clone)]
pub struct Lookahead {
    pub inner: RAdam,
    slow: Vec<Array2<f64>>,
    counter: usize,
}

impl Lookahead {
    pub fn new(params: &[Array2<f64>], inner: RAdam) -> Self {
        Lookahead {
            inner,
            slow: params.to_vec(),
            counter: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        self.inner.update(params, grads);
        self.counter += 1;
        if self.counter % self.inner.config.lookahead_k == 0 {
            let alpha = self.inner.config.lookahead_alpha;
            for (slow, fast) in self.slow.iter_mut().zip(params.iter_mut()) {
                Zip::from(&mut *slow).and(&*fast).for_each(|s, &f| *s += alpha * (f - *s));
                fast.assign(slow);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_steps_are_momentum_sgd() {
        let cfg = OptimConfig::default();
        // ρ_t stays at or below 5 for the first few steps with β2 = 0.999
        assert!(RAdam::rho(0.999, 1) <= 5.0 && RAdam::rho(0.999, 5) <= 5.0);
        assert!(RAdam::rho(0.999, 6) > 5.0);
        let mut p = vec![Array2::from_elem((1, 1), 1.0)];
        let g = vec![Array2::from_elem((1, 1), 2.0)];
        let mut opt = RAdam::new(&p, 0.1, cfg);
        opt.update(&mut p, &g);
        // m̂ = g on the first step
        assert!((p[0][[0, 0]] - (1.0 - 0.1 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn rectified_step_matches_hand_computation() {
        let cfg = OptimConfig::default();
        let mut p = vec![Array2::from_elem((1, 1), 0.0)];
        let g = vec![Array2::from_elem((1, 1), 1.0)];
        let mut opt = RAdam::new(&p, 0.01, cfg);
        for _ in 0..6 {
            opt.update(&mut p, &g);
        }
        // constant gradient: m̂ = v̂ = 1 at every step
        let mut expect = 0.0;
        for t in 1..=6u64 {
            let rho = RAdam::rho(0.999, t);
            let rho_inf = 2.0 / 0.001 - 1.0;
            expect -= if rho > 5.0 {
                let r = ((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)).sqrt();
                0.01 * r / (1.0 + 1e-8)
            } else {
                0.01
            };
        }
        assert!((p[0][[0, 0]] - expect).abs() < 1e-12);
    }

    #[test]
    fn lookahead_syncs_every_k_steps() {
        let cfg = OptimConfig {
            lookahead_k: 2,
            ..Default::default()
        };
        let mut p = vec![Array2::from_elem((1, 1), 1.0)];
        let g = vec![Array2::from_elem((1, 1), 1.0)];
        let mut la = Lookahead::new(&p, RAdam::new(&p, 0.1, cfg));
        la.step(&mut p, &g);
        assert!((p[0][[0, 0]] - 0.9).abs() < 1e-12);
        la.step(&mut p, &g);
        // fast reached 0.8; slow moves halfway from 1.0
        assert!((p[0][[0, 0]] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = vec![Array2::from_shape_vec((1, 2), vec![3.0, -2.0]).unwrap()];
        let mut la = Lookahead::new(&p, RAdam::new(&p, 0.05, OptimConfig::default()));
        for _ in 0..2000 {
            let g = vec![&p[0] * 2.0];
            la.step(&mut p, &g);
        }
        assert!(p[0].iter().all(|x| x.abs() < 1e-2), "{:?}", p[0]);
    }
}
