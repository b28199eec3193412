//! The random-forest baseline on flattened windows, with the 8-point grid
//! and class-balanced weighting.

use mdcsa::harness::forest::{ClassWeight, ForestParams, RandomForest};
use mdcsa::pipeline::annotated_windows;
use mdcsa::simhome::{generate_cohort, SimConfig};
use ndarray::Array2;

fn flatten(ws: &[mdcsa::pipeline::SensorWindow]) -> (Array2<f64>, Vec<usize>) {
    let p = ws[0].features().len();
    let mut x = Array2::zeros((ws.len(), p));
    for (i, w) in ws.iter().enumerate() {
        x.row_mut(i).assign(&ndarray::Array1::from_iter(w.features().iter().copied()));
    }
    (x, ws.iter().map(|w| w.mode_label().index()).collect())
}

fn main() -> mdcsa::Result<()> {
    let cohort = generate_cohort(1, 1, 9, &SimConfig::default())?;
    let (x, y) = flatten(&annotated_windows(&cohort, cohort.controls().next().unwrap()));
    let (xt, yt) = flatten(&annotated_windows(&cohort, cohort.pd().next().unwrap()));
    let base = ForestParams {
        n_trees: 20,
        class_weight: ClassWeight::Balanced,
        ..Default::default()
    };
    println!("grid has {} points", ForestParams::grid(&base).len());
    let mut forest = RandomForest::new(base, mdcsa::N_ROOMS);
    forest.fit(&x, &y, None)?;
    let pred = forest.predict_all(&xt);
    let acc = pred.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;
    let depth = forest.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
    println!("{} trees, deepest {depth}; window accuracy on the PD participant {acc:.3}", forest.trees.len());
    Ok(())
}
