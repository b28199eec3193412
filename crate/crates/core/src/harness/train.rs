use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{MdcsaConfig, MdcsaModel, Mode};
use crate::pipeline::SensorWindow;
use crate::rng::substream;
use crate::room::Room;

use super::metrics::weighted_metrics;
use super::optim::{Lookahead, OptimConfig, RAdam};

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub d: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainGrid {
    pub d: Vec<usize>,
    pub epochs: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl Default for TrainGrid {
    fn default() -> Self {
        TrainGrid {
            d: vec![128, 256],
            epochs: vec![200, 300],
            learning_rate: vec![0.01, 0.0001],
        }
    }
}

impl TrainGrid {
    /// Grid points in `d`-major order; this order breaks ties.
    pub fn points(&self) -> Vec<Hyper> {
        let mut out = vec![];
        for &d in &self.d {
            for &epochs in &self.epochs {
                for &learning_rate in &self.learning_rate {
                    out.push(Hyper { d, epochs, learning_rate });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub grid: TrainGrid,
    pub kernels: Vec<usize>,
    pub dropout: f64,
    /// Validation evaluations without improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Windows drawn (without replacement) per epoch; `None` uses all.
    pub windows_per_epoch: Option<usize>,
    /// Chronologically last share of the training windows held out.
    pub val_fraction: f64,
    /// Evenly spaced subsample of the validation windows.
    pub max_val_windows: Option<usize>,
    pub optim: OptimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grid: TrainGrid::default(),
            kernels: vec![1, 4, 7],
            dropout: 0.15,
            patience: 20,
            batch_size: 32,
            seed: 0,
            windows_per_epoch: None,
            val_fraction: 0.1,
            max_val_windows: None,
            optim: OptimConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.d.is_empty() || g.epochs.is_empty() || g.learning_rate.is_empty() {
            return Err(Error::invalid("every grid axis needs at least one value"));
        }
        if g.d.contains(&0) || g.epochs.contains(&0) || g.learning_rate.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("grid values must be positive"));
        }
        if self.patience == 0 || self.batch_size == 0 {
            return Err(Error::invalid("patience and batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::invalid("val_fraction must lie in [0, 1)"));
        }
        if self.windows_per_epoch == Some(0) || self.max_val_windows == Some(0) {
            return Err(Error::invalid("window caps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean batch loss after every optimiser step.
    pub losses: Vec<f64>,
    /// Validation weighted F1 after every epoch.
    pub val_f1: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MdcsaModel,
    pub history: TrainHistory,
}

/// Splits off the chronologically last `fraction` of `windows` (at least
/// one window when `fraction > 0` and there are two or more).
pub fn chronological_split(windows: &[SensorWindow], fraction: f64) -> (Vec<SensorWindow>, Vec<SensorWindow>) {
    let mut sorted = windows.to_vec();
    sorted.sort_by(|a, b| a.start_ms.cmp(&b.start_ms).then_with(|| a.participant.cmp(&b.participant)));
    let n = sorted.len();
    let mut n_val = (n as f64 * fraction).round() as usize;
    if fraction > 0.0 && n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    }
    let val = sorted.split_off(n - n_val);
    (sorted, val)
}

/// Every `len / cap`-th element, keeping at most `cap`.
pub fn evenly_spaced<T: Clone>(xs: &[T], cap: Option<usize>) -> Vec<T> {
    match cap {
        Some(c) if xs.len() > c => (0..c).map(|i| xs[i * xs.len() / c].clone()).collect(),
        _ => xs.to_vec(),
    }
}

pub fn predict_windows(model: &MdcsaModel, windows: &[SensorWindow]) -> Result<Vec<Vec<Room>>> {
    windows.par_iter().map(|w| model.predict(w)).collect()
}

/// Step-level weighted F1 of the model over `windows`.
pub fn window_f1(model: &MdcsaModel, windows: &[SensorWindow]) -> Result<f64> {
    let pred = predict_windows(model, windows)?;
    let p: Vec<usize> = pred.iter().flatten().map(|r| r.index()).collect();
    let t: Vec<usize> = windows.iter().flat_map(|w| w.labels.iter().map(|r| r.index())).collect();
    Ok(weighted_metrics(&p, &t, model.config.n_rooms)?.f1)
}

fn sum_grads(parts: Vec<(f64, Vec<Array2<f64>>)>) -> (f64, Vec<Array2<f64>>) {
    let n = parts.len() as f64;
    let mut iter = parts.into_iter();
    let (mut loss, mut acc) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        for (a, b) in acc.iter_mut().zip(g) {
            *a += &b;
        }
    }
    for a in &mut acc {
        *a /= n;
    }
    (loss / n, acc)
}

/// Trains on normalised windows and returns the best-on-validation model.
pub fn train_model(
    train: &[SensorWindow],
    val: &[SensorWindow],
    config: &TrainConfig,
    hyper: &Hyper,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    let first = &train[0];
    let net_config = MdcsaConfig {
        d: hyper.d,
        kernels: config.kernels.clone(),
        dropout: config.dropout,
        rssi_channels: first.rssi.ncols(),
        accel_channels: first.accel.as_ref().map_or(0, |a| a.ncols()),
        window_len: first.len(),
        ..Default::default()
    };
    let seed = config.seed;
    let mut model = MdcsaModel::new(net_config, &mut substream(seed, "init", &[]))?;
    let mut opt = Lookahead::new(
        &model.params.values,
        RAdam::new(&model.params.values, hyper.learning_rate, config.optim),
    );
    let val = evenly_spaced(val, config.max_val_windows);
    let mut history = TrainHistory {
        losses: vec![],
        val_f1: vec![],
        best_epoch: 0,
        best_val_f1: f64::NEG_INFINITY,
        stopped_early: false,
    };
    let mut best = model.params.clone();
    let mut since_best = 0;
    let mut step = 0u64;
    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut substream(seed, "epoch", &[epoch as u64]));
        if let Some(cap) = config.windows_per_epoch {
            order.truncate(cap);
        }
        for batch in order.chunks(config.batch_size) {
            let parts = batch
                .par_iter()
                .enumerate()
                .map(|(j, &i)| {
                    let mut rng = substream(seed, "dropout", &[step, j as u64]);
                    model.loss_and_gradients(&train[i], Mode::Train(&mut rng))
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = sum_grads(parts);
            if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
                return Err(Error::Diverged { step: step as usize, loss });
            }
            opt.step(&mut model.params.values, &grads);
            history.losses.push(loss);
            step += 1;
        }
        let f1 = window_f1(&model, &val)?;
        history.val_f1.push(f1);
        if f1 > history.best_val_f1 {
            history.best_val_f1 = f1;
            history.best_epoch = epoch;
            best = model.params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                history.stopped_early = epoch + 1 < hyper.epochs;
                break;
            }
        }
    }
    model.params = best;
    Ok(TrainOutcome { model, history })
}

/// Index of the candidate with the highest mean score; the first wins ties.
pub fn select_best(scores: &[Vec<f64>]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    let mut best = 0;
    let mut best_mean = f64::NEG_INFINITY;
    for (i, s) in scores.iter().enumerate() {
        let m = s.iter().sum::<f64>() / s.len().max(1) as f64;
        if m > best_mean {
            best_mean = m;
            best = i;
        }
    }
    Ok(best)
}

/// Scores every grid point on every fold with `eval` and returns the
/// winner together with the scores.
pub fn grid_search<P: Clone>(
    grid: &[P],
    n_folds: usize,
    mut eval: impl FnMut(&P, usize) -> Result<f64>,
) -> Result<(P, Vec<Vec<f64>>)> {
    let mut scores = Vec::with_capacity(grid.len());
    for p in grid {
        scores.push((0..n_folds).map(|f| eval(p, f)).collect::<Result<Vec<f64>>>()?);
    }
    let best = select_best(&scores)?;
    Ok((grid[best].clone(), scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{annotated_windows, mask_channels, NormalizationStats};
    use crate::simhome::{generate_cohort, SimConfig};

    fn windows(n: usize, seed: u64) -> Vec<SensorWindow> {
        let cohort = generate_cohort(1, 1, seed, &SimConfig {
            annotated_hours_per_day: 0.1,
            ..Default::default()
        })
        .unwrap();
        let w = annotated_windows(&cohort, &cohort.participants[1]);
        let w = evenly_spaced(&w, Some(n));
        let stats = NormalizationStats::fit(&w, &crate::pipeline::ChannelLayout::full()).unwrap();
        stats.apply_all(&w).unwrap()
    }

    fn quick(lr: f64, epochs: usize) -> (TrainConfig, Hyper) {
        (
            TrainConfig {
                batch_size: 8,
                patience: 1000,
                ..Default::default()
            },
            Hyper {
                d: 16,
                epochs,
                learning_rate: lr,
            },
        )
    }

    #[test]
    fn split_is_chronological() {
        let w = windows(20, 1);
        let (a, b) = chronological_split(&w, 0.1);
        assert_eq!((a.len(), b.len()), (18, 2));
        assert!(a.iter().all(|x| b.iter().all(|y| x.start_ms < y.start_ms)));
        assert_eq!(evenly_spaced(&[1, 2, 3, 4, 5, 6], Some(3)), vec![1, 3, 5]);
    }

    #[test]
    fn same_seed_same_trace_and_loss_falls() {
        let w = windows(8, 2);
        let (cfg, hyper) = quick(0.01, 30);
        let a = train_model(&w, &w, &cfg, &hyper).unwrap();
        let b = train_model(&w, &w, &cfg, &hyper).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model.params, b.model.params);
        assert!(a.history.losses[29] < a.history.losses[9]);
    }

    #[test]
    fn frozen_validation_stops_at_patience() {
        let w = windows(8, 3);
        let (mut cfg, hyper) = quick(1e-300, 100);
        cfg.patience = 4;
        let out = train_model(&w, &w, &cfg, &hyper).unwrap();
        assert_eq!(out.history.val_f1.len(), 5);
        assert!(out.history.stopped_early);
        assert_eq!(out.history.best_epoch, 0);
    }

    #[test]
    fn divergence_is_reported() {
        let mut w = windows(8, 4);
        w[3].rssi[[0, 0]] = f64::NAN;
        let (cfg, hyper) = quick(0.01, 2);
        assert!(matches!(train_model(&w, &w, &cfg, &hyper), Err(Error::Diverged { .. })));
    }

    #[test]
    fn rssi_only_windows_train() {
        let w: Vec<SensorWindow> = windows(8, 5)
            .iter()
            .map(|x| mask_channels(x, &crate::pipeline::ChannelLayout::full(), &[1, 2, 3, 4], false).unwrap().0)
            .collect();
        let (cfg, hyper) = quick(0.01, 3);
        let out = train_model(&w, &w, &cfg, &hyper).unwrap();
        assert!(out.model.config.rssi_only());
        assert_eq!(out.model.config.rssi_channels, 8);
    }

    #[test]
    fn grid_selection() {
        let one = TrainGrid {
            d: vec![8],
            epochs: vec![1],
            learning_rate: vec![0.1],
        };
        let (p, _) = grid_search(&one.points(), 3, |_, _| Ok(0.5)).unwrap();
        assert_eq!(p, one.points()[0]);
        // the second point dominates on every fold
        let g = TrainGrid::default().points();
        assert_eq!(g.len(), 8);
        let (p, s) = grid_search(&g, 2, |h, f| Ok(if h.d == 128 && h.epochs == 300 { 0.9 } else { 0.1 * f as f64 }))
            .unwrap();
        assert_eq!((p.d, p.epochs, p.learning_rate), (128, 300, 0.01));
        assert_eq!(select_best(&s).unwrap(), 2);
        // ties go to the first point
        assert_eq!(select_best(&[vec![0.5], vec![0.5]]).unwrap(), 0);
    }
}
