use crate::error::{Error, Result};

/// Support-weighted precision, recall and F1 over class indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `confusion[truth][pred]` counts over `n_classes`.
pub fn confusion(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!("{} predictions", truth.len()), pred.len().to_string()));
    }
    let mut c = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::LabelOutOfRange {
                label: p.max(t),
                rooms: n_classes,
            });
        }
        c[t][p] += 1;
    }
    Ok(c)
}

/// Classes absent from the truth carry zero weight; a class never
/// predicted has precision 0.
pub fn weighted_metrics(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<WeightedMetrics> {
    if truth.is_empty() {
        return Err(Error::invalid("metrics need at least one label"));
    }
    let c = confusion(pred, truth, n_classes)?;
    let n = truth.len() as f64;
    let mut out = WeightedMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    for k in 0..n_classes {
        let support: usize = c[k].iter().sum();
        if support == 0 {
            continue;
        }
        let tp = c[k][k] as f64;
        let predicted: usize = c.iter().map(|row| row[k]).sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = tp / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let w = support as f64 / n;
        out.precision += w * precision;
        out.recall += w * recall;
        out.f1 += w * f1;
    }
    Ok(out)
}

/// Per-class F1, `None` for classes absent from both sequences.
pub fn per_class_f1(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<Option<f64>>> {
    let c = confusion(pred, truth, n_classes)?;
    Ok((0..n_classes)
        .map(|k| {
            let tp = c[k][k] as f64;
            let support: usize = c[k].iter().sum();
            let predicted: usize = c.iter().map(|row| row[k]).sum();
            if support + predicted == 0 {
                None
            } else {
                Some(2.0 * tp / (support + predicted) as f64)
            }
        })
        .collect())
}

/// Mean and population standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}
