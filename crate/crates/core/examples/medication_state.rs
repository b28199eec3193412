//! Leave-one-participant-out medication-state classification from truth
//! gait features and from demographics with and without UPDRS-III.

use mdcsa::gaitfeat::{aggregate_features, extract_from_segments};
use mdcsa::medstate::{default_med_forest, demographic_samples, gait_samples, run_med_protocol};
use mdcsa::simhome::{generate_cohort, SimConfig};

fn main() -> mdcsa::Result<()> {
    let cohort = generate_cohort(6, 5, 2, &SimConfig::default())?;
    let rows: Vec<_> = cohort
        .pd()
        .flat_map(|p| aggregate_features(p.id(), &extract_from_segments(&cohort.full_truth(p)), p.schedule.as_ref().unwrap(), cohort.days))
        .collect();
    let params = default_med_forest(2);
    for (name, samples) in [
        ("gait-from-truth", gait_samples(&rows)),
        ("demographic", demographic_samples(&cohort, true)),
        ("demographic-no-leak", demographic_samples(&cohort, false)),
    ] {
        let r = run_med_protocol(name, &samples, &params)?;
        println!("{name:<20} F1 {:.3} ({:.3})  AUROC {:?}", r.f1_mean, r.f1_sd, r.auroc_mean);
    }
    Ok(())
}
