//! Wilcoxon signed-rank, Friedman, Holm and critical-difference cliques on
//! a made-up score table.

use mdcsa::stats::{compare_models, wilcoxon_signed_rank, Alternative, WilcoxonOptions};

fn main() -> mdcsa::Result<()> {
    // OFF vs ON mean transition seconds for twelve participants
    let off_on: Vec<(f64, f64)> = (0..12).map(|i| (15.0 + i as f64 * 0.7 + (i % 3) as f64, 13.5 + i as f64 * 0.5)).collect();
    let w = wilcoxon_signed_rank(&off_on, &WilcoxonOptions { alternative: Alternative::Greater, ..Default::default() })?;
    println!("W = {:.1}, z = {:.3}, p = {:.4} ({})", w.w_plus, w.z, w.p, if w.exact { "exact" } else { "normal" });

    let models: Vec<String> = ["RF", "MDCSA", "MDCSA-RSSI", "MDCSA-4APS"].map(String::from).to_vec();
    let scores: Vec<Vec<f64>> = (0..12)
        .map(|f| {
            let j = (f % 4) as f64 * 0.01;
            vec![0.80 + j, 0.90 - j, 0.86 + j / 2.0, 0.84]
        })
        .collect();
    print!("{}", compare_models("F1", &models, &scores, 0.05)?.render());
    Ok(())
}
