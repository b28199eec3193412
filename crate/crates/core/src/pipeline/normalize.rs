use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ChannelLayout, SensorWindow};

/// Per-channel z-score statistics over all steps of a window set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub layout: ChannelLayout,
    pub mean: Vec<f64>,
    /// Population standard deviation; a degenerate channel gets 1.
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn fit(windows: &[SensorWindow], layout: &ChannelLayout) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::invalid("cannot fit normalisation on zero windows"));
        }
        let c = layout.n_rssi() + layout.n_accel();
        let mut sum = vec![0.0; c];
        let mut n = 0usize;
        for w in windows {
            let f = w.features();
            if f.ncols() != c {
                return Err(Error::shape(format!("{c} channels"), format!("{}", f.ncols())));
            }
            for row in f.rows() {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
            }
            n += f.nrows();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; c];
        for w in windows {
            for row in w.features().rows() {
                for ((q, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *q += (v - m) * (v - m);
                }
            }
        }
        let std = sq
            .iter()
            .map(|q| {
                let s = (q / n as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(NormalizationStats {
            layout: layout.clone(),
            mean,
            std,
        })
    }

    fn check(&self, w: &SensorWindow) -> Result<()> {
        let (r, a) = (self.layout.n_rssi(), self.layout.n_accel());
        let got_a = w.accel.as_ref().map_or(0, |x| x.ncols());
        if w.rssi.ncols() != r || got_a != a {
            return Err(Error::shape(
                format!("{r} RSSI + {a} accelerometer channels"),
                format!("{} + {got_a}", w.rssi.ncols()),
            ));
        }
        Ok(())
    }

    fn map(&self, w: &SensorWindow, f: impl Fn(f64, f64, f64) -> f64) -> Result<SensorWindow> {
        self.check(w)?;
        let r = self.layout.n_rssi();
        let mut out = w.clone();
        for mut row in out.rssi.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f(*v, self.mean[c], self.std[c]);
            }
        }
        if let Some(a) = out.accel.as_mut() {
            for mut row in a.rows_mut() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = f(*v, self.mean[r + c], self.std[r + c]);
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, w: &SensorWindow) -> Result<SensorWindow> {
        self.map(w, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, w: &SensorWindow) -> Result<SensorWindow> {
        self.map(w, |v, m, s| v * s + m)
    }

    pub fn apply_all(&self, windows: &[SensorWindow]) -> Result<Vec<SensorWindow>> {
        windows.iter().map(|w| self.apply(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{N_ACCEL, N_RSSI, WINDOW_LEN};
    use crate::room::Room;
    use ndarray::Array2;
    use rand::Rng;

    fn random_windows(n: usize, seed: u64) -> Vec<SensorWindow> {
        let mut rng = crate::rng::substream(seed, "w", &[]);
        (0..n)
            .map(|i| SensorWindow {
                rssi: Array2::from_shape_fn((WINDOW_LEN, N_RSSI), |(_, c)| {
                    if c == 3 {
                        -120.0
                    } else {
                        rng.random_range(-100.0..-40.0)
                    }
                }),
                accel: Some(Array2::from_shape_fn((WINDOW_LEN, N_ACCEL), |_| rng.random_range(-3.0..12.0))),
                labels: vec![Room::Kitchen; WINDOW_LEN],
                participant: "p".into(),
                start_ms: i as i64 * 5000,
            })
            .collect()
    }

    #[test]
    fn standardised_moments_and_degenerate_channel() {
        let w = random_windows(20, 1);
        let stats = NormalizationStats::fit(&w, &ChannelLayout::full()).unwrap();
        assert_eq!(stats.std[3], 1.0);
        let z = stats.apply_all(&w).unwrap();
        let feats: Vec<Array2<f64>> = z.iter().map(|w| w.features()).collect();
        for c in 0..26 {
            let vals: Vec<f64> = feats.iter().flat_map(|f| f.column(c).to_vec()).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-9, "channel {c} mean {m}");
            if c != 3 {
                assert!((v.sqrt() - 1.0).abs() < 1e-9, "channel {c} sd {}", v.sqrt());
            } else {
                assert!(vals.iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn identity_stats_leave_windows_unchanged_and_invert_recovers() {
        let w = random_windows(3, 2);
        let id = NormalizationStats {
            layout: ChannelLayout::full(),
            mean: vec![0.0; 26],
            std: vec![1.0; 26],
        };
        assert_eq!(id.apply(&w[0]).unwrap(), w[0]);
        let stats = NormalizationStats::fit(&w, &ChannelLayout::full()).unwrap();
        let back = stats.invert(&stats.apply(&w[1]).unwrap()).unwrap();
        let diff = (back.features() - w[1].features()).mapv(f64::abs);
        assert!(diff.iter().all(|&d| d < 1e-9));
    }

    #[test]
    fn rejects_wrong_layout() {
        let w = random_windows(2, 3);
        let layout = ChannelLayout {
            aps: vec![1, 2],
            accel: true,
        };
        assert!(NormalizationStats::fit(&w, &layout).is_err());
    }
}
