//! Train a small MDCSA network on one control participant and decode rooms
//! for a PD participant it has never seen.

use mdcsa::harness::metrics::weighted_metrics;
use mdcsa::harness::train::{chronological_split, train_model, Hyper, TrainConfig};
use mdcsa::pipeline::{annotated_windows, ChannelLayout, NormalizationStats};
use mdcsa::simhome::{generate_cohort, SimConfig};

fn main() -> mdcsa::Result<()> {
    let cohort = generate_cohort(1, 1, 5, &SimConfig::default())?;
    let hc = cohort.controls().next().expect("control");
    let pd = cohort.pd().next().expect("PD participant");
    let layout = ChannelLayout::full();

    let windows = annotated_windows(&cohort, hc);
    let (train, val) = chronological_split(&windows, 0.1);
    let stats = NormalizationStats::fit(&train, &layout)?;
    let cfg = TrainConfig {
        windows_per_epoch: Some(512),
        ..Default::default()
    };
    let hyper = Hyper { d: 16, epochs: 8, learning_rate: 0.001 };
    let out = train_model(&stats.apply_all(&train)?, &stats.apply_all(&val)?, &cfg, &hyper)?;
    for (e, (l, f)) in out.history.losses.iter().zip(&out.history.val_f1).enumerate() {
        println!("epoch {e:>2}: loss {l:.4}, validation F1 {f:.4}");
    }

    let test = stats.apply_all(&annotated_windows(&cohort, pd))?;
    let mut pred = vec![];
    let mut truth = vec![];
    for w in &test {
        pred.extend(out.model.predict(w)?.iter().map(|r| r.index()));
        truth.extend(w.labels.iter().map(|r| r.index()));
    }
    let m = weighted_metrics(&pred, &truth, mdcsa::N_ROOMS)?;
    println!("{} on {}: weighted F1 {:.4}, precision {:.4}", hc.id(), pd.id(), m.f1, m.precision);
    Ok(())
}
