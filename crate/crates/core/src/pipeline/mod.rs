//! Raw traces to model-ready windows: 5 Hz resampling, imputation of absent
//! packets, non-overlapping 25-step windows, normalisation and channel masks.

pub mod normalize;
mod store;

pub use normalize::NormalizationStats;
pub use store::{index_path, load_windows, save_windows, WindowSet, WINDOW_MAGIC, WINDOW_VERSION};

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::room::Room;
use crate::simhome::cohort::{Cohort, Participant, RawTrace, TruthSegment};
use crate::simhome::layout::N_ACCESS_POINTS;
use crate::simhome::{AccelSample, RssiPacket, Wearable, TICK_MS};

pub const WINDOW_LEN: usize = 25;
pub const N_RSSI: usize = 2 * N_ACCESS_POINTS;
pub const N_ACCEL: usize = 6;
/// Stand-in for a packet that never arrived; below anything a receiver reports.
pub const MISSING_DBM: f64 = -120.0;

/// Which channels a window carries. RSSI columns are wearable-major
/// (left then right), each block ordered by ascending AP id; the
/// accelerometer block is left x, y, z then right x, y, z.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub aps: Vec<u8>,
    pub accel: bool,
}

impl ChannelLayout {
    pub fn full() -> Self {
        ChannelLayout {
            aps: (1..=N_ACCESS_POINTS as u8).collect(),
            accel: true,
        }
    }

    pub fn n_rssi(&self) -> usize {
        2 * self.aps.len()
    }

    pub fn n_accel(&self) -> usize {
        if self.accel {
            N_ACCEL
        } else {
            0
        }
    }

    pub fn channel_names(&self) -> Vec<String> {
        let mut names = vec![];
        for w in Wearable::BOTH {
            for ap in &self.aps {
                names.push(format!("{}_ap{ap:02}", w.name()));
            }
        }
        if self.accel {
            for w in Wearable::BOTH {
                for axis in ["x", "y", "z"] {
                    names.push(format!("{}_{axis}", w.name()));
                }
            }
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorWindow {
    /// T × (2 · APs) dBm.
    pub rssi: Array2<f64>,
    /// T × 6 m/s²; absent when the accelerometer is masked out.
    pub accel: Option<Array2<f64>>,
    pub labels: Vec<Room>,
    pub participant: String,
    pub start_ms: i64,
}

impl SensorWindow {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// All channels side by side, RSSI first.
    pub fn features(&self) -> Array2<f64> {
        match &self.accel {
            Some(a) => ndarray::concatenate(ndarray::Axis(1), &[self.rssi.view(), a.view()]).unwrap(),
            None => self.rssi.clone(),
        }
    }

    /// Most frequent label, ties to the lowest room index.
    pub fn mode_label(&self) -> Room {
        let mut counts = [0usize; crate::room::N_ROOMS];
        for r in &self.labels {
            counts[r.index()] += 1;
        }
        let best = (0..counts.len()).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap();
        Room::from_index(best).unwrap()
    }
}

/// Synchronised 5 Hz streams of one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStream {
    pub participant: String,
    pub ticks: Vec<i64>,
    pub rssi: Array2<f64>,
    pub accel: Array2<f64>,
    /// `None` where no annotation exists.
    pub labels: Vec<Option<Room>>,
}

pub fn tick_grid(start_ms: i64, end_ms: i64) -> Vec<i64> {
    let first = (start_ms + TICK_MS - 1).div_euclid(TICK_MS) * TICK_MS;
    (first..end_ms).step_by(TICK_MS as usize).collect()
}

fn bin_of(ticks: &[i64], t: i64) -> Option<usize> {
    let i = ticks.partition_point(|&k| k <= t);
    (i > 0 && t < ticks[i - 1] + TICK_MS).then(|| i - 1)
}

/// Averages 30 Hz samples into the 200 ms bin starting at each tick.
///
/// A bin without samples repeats the previous tick's value; leading empty
/// bins take the first observed value. A wearable with no samples at all
/// yields zeros.
pub fn resample_accel(samples: &[AccelSample], ticks: &[i64]) -> Array2<f64> {
    let n = ticks.len();
    let mut sum = Array2::<f64>::zeros((n, N_ACCEL));
    let mut count = vec![[0usize; 2]; n];
    for s in samples {
        if let Some(i) = bin_of(ticks, s.timestamp_ms) {
            let w = s.wearable.index();
            sum[[i, 3 * w]] += s.x;
            sum[[i, 3 * w + 1]] += s.y;
            sum[[i, 3 * w + 2]] += s.z;
            count[i][w] += 1;
        }
    }
    let mut out = Array2::<f64>::zeros((n, N_ACCEL));
    for w in 0..2 {
        let cols = 3 * w..3 * w + 3;
        let Some(first) = (0..n).find(|&i| count[i][w] > 0) else {
            continue;
        };
        let mut last: Vec<f64> = cols.clone().map(|c| sum[[first, c]] / count[first][w] as f64).collect();
        for i in 0..n {
            if count[i][w] > 0 {
                for (j, c) in cols.clone().enumerate() {
                    last[j] = sum[[i, c]] / count[i][w] as f64;
                }
            }
            for (j, c) in cols.clone().enumerate() {
                out[[i, c]] = last[j];
            }
        }
    }
    out
}

pub fn rssi_channel(wearable: Wearable, ap: u8) -> usize {
    wearable.index() * N_ACCESS_POINTS + (ap as usize - 1)
}

/// Dense 20-channel grid with absent packets set to [`MISSING_DBM`].
pub fn impute_rssi(packets: &[RssiPacket], ticks: &[i64]) -> Array2<f64> {
    let mut out = Array2::from_elem((ticks.len(), N_RSSI), MISSING_DBM);
    for p in packets {
        if let Some(i) = bin_of(ticks, p.timestamp_ms) {
            out[[i, rssi_channel(p.wearable, p.ap)]] = p.dbm;
        }
    }
    out
}

pub fn labels_on(truth: &[TruthSegment], ticks: &[i64]) -> Vec<Option<Room>> {
    ticks
        .iter()
        .map(|&t| {
            let i = truth.partition_point(|s| s.end_ms <= t);
            truth.get(i).filter(|s| s.start_ms <= t).map(|s| s.room)
        })
        .collect()
}

pub fn dense_stream(trace: &RawTrace, ticks: Vec<i64>, annotated: &[(i64, i64)]) -> DenseStream {
    let labels = labels_on(&trace.truth, &ticks)
        .into_iter()
        .zip(&ticks)
        .map(|(r, &t)| r.filter(|_| annotated.iter().any(|&(a, b)| a <= t && t < b)))
        .collect();
    DenseStream {
        participant: trace.participant.clone(),
        rssi: impute_rssi(&trace.rssi, &ticks),
        accel: resample_accel(&trace.accel, &ticks),
        labels,
        ticks,
    }
}

/// Non-overlapping 25-step windows. Each maximal run of consecutive
/// labelled ticks is windowed from its first tick and its partial tail is
/// dropped, so no window spans an annotation gap.
pub fn make_windows(stream: &DenseStream) -> Vec<SensorWindow> {
    let n = stream.ticks.len();
    let mut out = vec![];
    let mut i = 0;
    while i < n {
        if stream.labels[i].is_none() {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < n && stream.labels[j].is_some() && stream.ticks[j] == stream.ticks[j - 1] + TICK_MS {
            j += 1;
        }
        let mut k = i;
        while k + WINDOW_LEN <= j {
            out.push(SensorWindow {
                rssi: stream.rssi.slice(s![k..k + WINDOW_LEN, ..]).to_owned(),
                accel: Some(stream.accel.slice(s![k..k + WINDOW_LEN, ..]).to_owned()),
                labels: stream.labels[k..k + WINDOW_LEN].iter().map(|r| r.unwrap()).collect(),
                participant: stream.participant.clone(),
                start_ms: stream.ticks[k],
            });
            k += WINDOW_LEN;
        }
        i = j;
    }
    out
}

/// Windows over the participant's camera-annotated sessions.
pub fn annotated_windows(cohort: &Cohort, participant: &Participant) -> Vec<SensorWindow> {
    let sessions = cohort.sessions_of(participant);
    sessions
        .iter()
        .flat_map(|&(a, b)| {
            let trace = cohort.raw_trace(participant, a, b);
            make_windows(&dense_stream(&trace, tick_grid(a, b), sessions))
        })
        .collect()
}

/// Windows tiling arbitrary ranges (for instance whole days), labelled with
/// full truth. Used to run a trained model outside the annotated sessions.
pub fn range_windows(cohort: &Cohort, participant: &Participant, ranges: &[(i64, i64)]) -> Vec<SensorWindow> {
    ranges
        .iter()
        .flat_map(|&(a, b)| {
            let trace = cohort.raw_trace(participant, a, b);
            make_windows(&dense_stream(&trace, tick_grid(a, b), &[(a, b)]))
        })
        .collect()
}

/// Annotated windows of every participant, in cohort order.
pub fn cohort_windows(cohort: &Cohort) -> Vec<(String, Vec<SensorWindow>)> {
    cohort
        .participants
        .par_iter()
        .map(|p| (p.id().to_string(), annotated_windows(cohort, p)))
        .collect()
}

/// The `k` APs with most received packets over `windows` (raw dBm,
/// both wearables pooled); ties go to the lower AP id. Result is sorted.
pub fn top_aps(windows: &[SensorWindow], layout: &ChannelLayout, k: usize) -> Vec<u8> {
    let n_ap = layout.aps.len();
    let mut counts = vec![0usize; n_ap];
    for w in windows {
        for row in w.rssi.rows() {
            for (c, &v) in row.iter().enumerate() {
                if v > MISSING_DBM {
                    counts[c % n_ap] += 1;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n_ap).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(counts[i]), layout.aps[i]));
    let mut keep: Vec<u8> = order.into_iter().take(k).map(|i| layout.aps[i]).collect();
    keep.sort_unstable();
    keep
}

/// Drops AP columns outside `keep_aps` from both wearable blocks, and the
/// accelerometer block when `keep_accel` is false.
pub fn mask_channels(
    window: &SensorWindow,
    layout: &ChannelLayout,
    keep_aps: &[u8],
    keep_accel: bool,
) -> Result<(SensorWindow, ChannelLayout)> {
    let new_layout = masked_layout(layout, keep_aps, keep_accel)?;
    let n_ap = layout.aps.len();
    let cols: Vec<usize> = (0..2)
        .flat_map(|w| {
            new_layout
                .aps
                .iter()
                .map(move |ap| w * n_ap + layout.aps.iter().position(|a| a == ap).unwrap())
        })
        .collect();
    let rssi = window.rssi.select(ndarray::Axis(1), &cols);
    let accel = if keep_accel { window.accel.clone() } else { None };
    Ok((
        SensorWindow {
            rssi,
            accel,
            labels: window.labels.clone(),
            participant: window.participant.clone(),
            start_ms: window.start_ms,
        },
        new_layout,
    ))
}

pub fn masked_layout(layout: &ChannelLayout, keep_aps: &[u8], keep_accel: bool) -> Result<ChannelLayout> {
    if keep_aps.is_empty() {
        return Err(Error::invalid("at least one access point must be kept"));
    }
    let mut aps = keep_aps.to_vec();
    aps.sort_unstable();
    aps.dedup();
    if let Some(ap) = aps.iter().find(|a| !layout.aps.contains(a)) {
        return Err(Error::invalid(format!("AP {ap} is not present in the input layout")));
    }
    if keep_accel && !layout.accel {
        return Err(Error::invalid("accelerometer channels were already removed"));
    }
    Ok(ChannelLayout {
        aps,
        accel: keep_accel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simhome::{generate_cohort, SimConfig};

    fn sample(t: i64, w: Wearable, v: f64) -> AccelSample {
        AccelSample {
            timestamp_ms: t,
            wearable: w,
            x: v,
            y: v,
            z: v,
        }
    }

    #[test]
    fn constant_signal_survives_resampling() {
        let samples: Vec<_> = (0..300)
            .flat_map(|k| {
                let t = crate::simhome::accel::sample_time(k);
                Wearable::BOTH.map(|w| sample(t, w, 9.81))
            })
            .collect();
        let ticks = tick_grid(0, 10_000);
        let out = resample_accel(&samples, &ticks);
        assert_eq!(out.nrows(), 50);
        assert!(out.iter().all(|&v| v == 9.81));
    }

    #[test]
    fn bin_mean_and_forward_fill() {
        let mut samples: Vec<_> = (1..=6).map(|v| sample((v - 1) * 33, Wearable::Left, v as f64)).collect();
        samples.push(sample(450, Wearable::Left, 10.0));
        samples.extend((0..3).map(|k| sample(k * 200, Wearable::Right, 1.0)));
        let out = resample_accel(&samples, &tick_grid(0, 800));
        assert_eq!(out[[0, 0]], 3.5);
        // bin 200..400 is empty on the left wrist: previous tick carried over
        assert_eq!(out[[1, 1]], 3.5);
        assert_eq!(out[[2, 2]], 10.0);
        assert_eq!(out[[3, 0]], 10.0);
        assert_eq!(out[[3, 3]], 1.0);
    }

    #[test]
    fn imputation_fills_every_cell() {
        let ticks = tick_grid(0, 600);
        let packets = vec![RssiPacket {
            timestamp_ms: 200,
            wearable: Wearable::Right,
            ap: 4,
            dbm: -55.0,
        }];
        let out = impute_rssi(&packets, &ticks);
        assert_eq!(out.row(0).to_vec(), vec![MISSING_DBM; 20]);
        assert_eq!(out[[1, rssi_channel(Wearable::Right, 4)]], -55.0);
        assert_eq!(out.iter().filter(|&&v| v == MISSING_DBM).count(), 59);
        // idempotent: re-imputing the dense grid gives the same grid
        assert_eq!(impute_rssi(&packets, &ticks), out);
    }

    #[test]
    fn masking_one_ap_on_one_wearable_leaves_one_missing_column() {
        let cohort = generate_cohort(1, 1, 2, &SimConfig::default()).unwrap();
        let p = &cohort.participants[0];
        let (a, _) = cohort.sessions_of(p)[0];
        let mut trace = cohort.raw_trace(p, a, a + 10_000);
        let full = impute_rssi(&trace.rssi, &tick_grid(a, a + 10_000));
        trace.rssi.retain(|k| !(k.ap == 7 && k.wearable == Wearable::Left));
        let masked = impute_rssi(&trace.rssi, &tick_grid(a, a + 10_000));
        let col = rssi_channel(Wearable::Left, 7);
        for c in 0..N_RSSI {
            let same = full.column(c) == masked.column(c);
            assert_eq!(same, c != col || full.column(c).iter().all(|&v| v == MISSING_DBM), "column {c}");
        }
        assert!(masked.column(col).iter().all(|&v| v == MISSING_DBM));
    }

    fn stream(labels: Vec<Option<Room>>) -> DenseStream {
        let n = labels.len();
        DenseStream {
            participant: "x".into(),
            ticks: (0..n as i64).map(|i| i * TICK_MS).collect(),
            rssi: Array2::zeros((n, N_RSSI)),
            accel: Array2::zeros((n, N_ACCEL)),
            labels,
        }
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(&stream(vec![Some(Room::Kitchen); 50])).len(), 2);
        assert_eq!(make_windows(&stream(vec![Some(Room::Kitchen); 60])).len(), 2);
        assert!(make_windows(&stream(vec![Some(Room::Kitchen); 24])).is_empty());
        let mut labels = vec![Some(Room::Kitchen); 50];
        labels[30] = None;
        let w = make_windows(&stream(labels));
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start_ms, 0);
    }

    #[test]
    fn channel_masks() {
        let layout = ChannelLayout::full();
        let w = make_windows(&stream(vec![Some(Room::Dining); 25])).remove(0);
        let (same, l) = mask_channels(&w, &layout, &layout.aps, true).unwrap();
        assert_eq!(same, w);
        assert_eq!(l, layout);
        let (four, l4) = mask_channels(&w, &layout, &[1, 4, 7, 9], true).unwrap();
        assert_eq!(four.rssi.dim(), (25, 8));
        assert_eq!(l4.channel_names()[4], "right_ap01");
        let (rssi_only, l0) = mask_channels(&w, &layout, &layout.aps, false).unwrap();
        assert!(rssi_only.accel.is_none());
        assert_eq!(l0.n_accel(), 0);
        assert!(mask_channels(&w, &layout, &[], true).is_err());
        assert!(mask_channels(&w, &layout, &[11], true).is_err());
    }

    #[test]
    fn masking_selects_the_right_columns() {
        let layout = ChannelLayout::full();
        let mut w = make_windows(&stream(vec![Some(Room::Dining); 25])).remove(0);
        for c in 0..N_RSSI {
            w.rssi.column_mut(c).fill(c as f64);
        }
        let (m, _) = mask_channels(&w, &layout, &[3, 8], true).unwrap();
        assert_eq!(m.rssi.row(0).to_vec(), vec![2.0, 7.0, 12.0, 17.0]);
    }

    #[test]
    fn top_aps_by_packet_count() {
        let layout = ChannelLayout::full();
        let mut w = make_windows(&stream(vec![Some(Room::Dining); 25])).remove(0);
        w.rssi.fill(MISSING_DBM);
        for (ap, n) in [(2u8, 5usize), (9, 5), (5, 3), (1, 1), (10, 1)] {
            for t in 0..n {
                w.rssi[[t, rssi_channel(Wearable::Left, ap)]] = -60.0;
            }
        }
        assert_eq!(top_aps(&[w], &layout, 4), vec![1, 2, 5, 9]);
    }

    #[test]
    fn session_windows_carry_synchronised_streams() {
        let cohort = generate_cohort(1, 1, 4, &SimConfig {
            annotated_hours_per_day: 0.1,
            ..Default::default()
        })
        .unwrap();
        let p = &cohort.participants[1];
        let windows = annotated_windows(&cohort, p);
        // 0.1 h over 3 sessions: 120 s each, 24 windows of 5 s per session
        assert_eq!(windows.len(), 72);
        for w in &windows {
            assert_eq!(w.rssi.dim(), (WINDOW_LEN, N_RSSI));
            assert_eq!(w.accel.as_ref().unwrap().dim(), (WINDOW_LEN, N_ACCEL));
            let truth = cohort.truth(p, w.start_ms, w.start_ms + 5000);
            let ticks: Vec<Room> = crate::simhome::cohort::expand_truth(&truth).into_iter().map(|x| x.1).collect();
            assert_eq!(ticks, w.labels);
        }
    }
}
