//! Run a cross-validation protocol end to end and print the fold table.
//!
//! `cargo run --release --example cross_validation -- LOO-PD MDCSA-RSSI`

use mdcsa::harness::protocol::{run_protocol, EvalConfig, Protocol, ProtocolData, Variant};
use mdcsa::harness::train::{TrainConfig, TrainGrid};
use mdcsa::simhome::{generate_cohort, SimConfig};

fn main() -> mdcsa::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let protocol = Protocol::parse(args.first().map_or("4m-HC", |s| s.as_str()))?;
    let variant = Variant::parse(args.get(1).map_or("MDCSA", |s| s.as_str()))?;
    let cohort = generate_cohort(3, 1, 1, &SimConfig::default())?;
    let data = ProtocolData::from_cohort(&cohort);
    let cfg = EvalConfig {
        train: TrainConfig {
            grid: TrainGrid { d: vec![16], epochs: vec![5], learning_rate: vec![0.001] },
            windows_per_epoch: Some(512),
            ..Default::default()
        },
        max_test_windows: Some(300),
        gait_minutes_per_slot: 5,
        ..Default::default()
    };
    let (folds, summary) = run_protocol(&data, protocol, variant, &cfg)?;
    for f in &folds {
        println!(
            "fold {:<5} train {:?} test {} windows: F1 {:.4}, precision {:.4}",
            f.report.fold, f.audit.train_participants, f.audit.n_test, f.report.f1, f.report.precision
        );
    }
    println!(
        "{} {}: F1 {:.4} ({:.4}) over {} folds",
        protocol.name(),
        variant.name(),
        summary.f1.0,
        summary.f1.1,
        summary.n_folds
    );
    Ok(())
}
