//! Generate a small synthetic cohort, print what it contains and write it to
//! a temporary directory.

use mdcsa::gaitfeat::extract_from_segments;
use mdcsa::simhome::io::save_cohort;
use mdcsa::simhome::{generate_cohort, SimConfig};

fn main() -> mdcsa::Result<()> {
    let cohort = generate_cohort(2, 2, 7, &SimConfig::default())?;
    for p in &cohort.participants {
        let truth = cohort.full_truth(p);
        let transitions = extract_from_segments(&truth);
        let sessions = cohort.sessions_of(p);
        let annotated_min: i64 = sessions.iter().map(|(a, b)| b - a).sum::<i64>() / 60_000;
        print!("{}: {} truth runs, {} hallway transitions, {annotated_min} annotated min", p.id(), truth.len(), transitions.len());
        match &p.schedule {
            Some(s) => println!(", OFF window on day {}", s.off_window().day),
            None => println!(),
        }
    }
    let dir = std::env::temp_dir().join("mdcsa-example-cohort");
    let written = save_cohort(&cohort, &dir, true)?;
    println!("wrote {} files under {}", written.len(), dir.display());
    Ok(())
}
