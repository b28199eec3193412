//! Cut annotated sessions into 5 s windows, pick the four busiest access
//! points and normalise with statistics from a training subset.

use mdcsa::pipeline::{annotated_windows, mask_channels, masked_layout, top_aps, ChannelLayout, NormalizationStats};
use mdcsa::simhome::{generate_cohort, SimConfig};

fn main() -> mdcsa::Result<()> {
    let cohort = generate_cohort(1, 1, 3, &SimConfig::default())?;
    let hc = cohort.controls().next().expect("one control");
    let windows = annotated_windows(&cohort, hc);
    let full = ChannelLayout::full();
    let w = &windows[0];
    println!("{} windows; first starts at {} ms, rssi {:?}, accel {:?}", windows.len(), w.start_ms, w.rssi.dim(), w.accel.as_ref().map(|a| a.dim()));

    let aps = top_aps(&windows, &full, 4);
    let four = masked_layout(&full, &aps, false)?;
    let (masked, _) = mask_channels(w, &full, &aps, false)?;
    println!("top APs {aps:?}: {} RSSI channels, accelerometer kept: {}", four.n_rssi(), masked.accel.is_some());

    let stats = NormalizationStats::fit(&windows[..windows.len() / 2], &full)?;
    let z = stats.apply(w)?;
    let mean = z.rssi.mean().unwrap_or(0.0);
    println!("normalised first window: mean RSSI z-score {mean:.3}, mode room {}", w.mode_label().name());
    Ok(())
}
