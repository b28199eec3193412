//! Hallway transitions from ground truth, the mean-duration table and the
//! per-slot gait features used for medication-state classification.

use mdcsa::gaitfeat::{aggregate_features, extract_from_segments, mean_transition_table, render_table};
use mdcsa::simhome::{generate_cohort, SimConfig};

fn main() -> mdcsa::Result<()> {
    let cohort = generate_cohort(2, 2, 4, &SimConfig::default())?;
    let mut groups = vec![];
    for p in cohort.pd() {
        let t = extract_from_segments(&cohort.full_truth(p));
        let rows = aggregate_features(p.id(), &t, p.schedule.as_ref().unwrap(), cohort.days);
        for r in rows.iter().take(4) {
            println!("{} day {} slot {} {:?}: {:?}", r.participant, r.day, r.slot, r.state, r.features());
        }
        groups.push((p.id().to_string(), t));
    }
    print!("{}", render_table(&mean_transition_table(&groups)));
    Ok(())
}
