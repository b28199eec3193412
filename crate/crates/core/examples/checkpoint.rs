//! Save a freshly initialised network with its normalisation and load it
//! back; decoded rooms agree exactly.

use mdcsa::net::{load_checkpoint, save_checkpoint, Checkpoint, MdcsaConfig, MdcsaModel};
use mdcsa::pipeline::{annotated_windows, ChannelLayout, NormalizationStats};
use mdcsa::rng::substream;
use mdcsa::simhome::{generate_cohort, SimConfig};

fn main() -> mdcsa::Result<()> {
    let cohort = generate_cohort(1, 1, 8, &SimConfig::default())?;
    let windows = annotated_windows(&cohort, cohort.controls().next().unwrap());
    let stats = NormalizationStats::fit(&windows, &ChannelLayout::full())?;
    let config = MdcsaConfig { d: 16, ..Default::default() };
    let model = MdcsaModel::new(config, &mut substream(8, "init", &[]))?;
    println!("{} parameter tensors, {} scalars", model.params.len(), model.params.n_scalars());

    let path = std::env::temp_dir().join("mdcsa-example.ckpt");
    let ckpt = Checkpoint { model, normalization: Some(stats) };
    save_checkpoint(&ckpt, &path)?;
    let back = load_checkpoint(&path)?;
    let w = back.normalization.as_ref().unwrap().apply(&windows[0])?;
    let a = ckpt.model.predict(&w)?;
    let b = back.model.predict(&w)?;
    println!("round trip through {}: identical decoding = {}", path.display(), a == b);
    Ok(())
}
