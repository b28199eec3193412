//! Hallway-mediated room-to-room transitions and their 4-hour aggregates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::room::{Room, RoomPair};
use crate::simhome::cohort::TruthSegment;
use crate::simhome::io::{read_file, write_file};
use crate::simhome::profile::{day_slot_of, MedState, MedicationSchedule, SLOTS_PER_DAY};
use crate::simhome::TICK_MS;

/// Longest hallway stay that still counts as a transition.
pub const MAX_TRANSITION_S: f64 = 60.0;

/// A room per 200 ms step. Consecutive timestamps more than one step apart
/// mark a gap; no run spans a gap.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoomSequence {
    pub participant: String,
    pub timestamps_ms: Vec<i64>,
    pub rooms: Vec<Room>,
}

impl RoomSequence {
    pub fn from_segments(participant: &str, segments: &[TruthSegment]) -> Self {
        let mut seq = RoomSequence {
            participant: participant.to_string(),
            ..Default::default()
        };
        for s in segments {
            for t in (s.start_ms..s.end_ms).step_by(TICK_MS as usize) {
                seq.timestamps_ms.push(t);
                seq.rooms.push(s.room);
            }
        }
        seq
    }

    pub fn push_window(&mut self, start_ms: i64, rooms: &[Room]) {
        for (i, &r) in rooms.iter().enumerate() {
            self.timestamps_ms.push(start_ms + i as i64 * TICK_MS);
            self.rooms.push(r);
        }
    }

    /// Maximal runs `(start_ms, end_ms, room)`, with `None` between runs
    /// separated by a gap.
    pub fn runs(&self) -> Vec<Option<(i64, i64, Room)>> {
        let mut out: Vec<Option<(i64, i64, Room)>> = vec![];
        for (&t, &r) in self.timestamps_ms.iter().zip(&self.rooms) {
            match out.last_mut() {
                Some(Some((_, end, room))) if *end == t && *room == r => *end = t + TICK_MS,
                Some(Some((_, end, _))) if *end == t => out.push(Some((t, t + TICK_MS, r))),
                None => out.push(Some((t, t + TICK_MS, r))),
                _ => {
                    out.push(None);
                    out.push(Some((t, t + TICK_MS, r)));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: Room,
    pub to: Room,
    pub pair: RoomPair,
    /// First hallway step.
    pub start_ms: i64,
    /// End of the last hallway step.
    pub end_ms: i64,
    pub duration_s: f64,
}

fn runs_from_segments(segments: &[TruthSegment]) -> Vec<Option<(i64, i64, Room)>> {
    let mut out: Vec<Option<(i64, i64, Room)>> = vec![];
    for s in segments {
        if s.end_ms <= s.start_ms {
            continue;
        }
        match out.last_mut() {
            Some(Some((_, end, room))) if *end == s.start_ms && *room == s.room => *end = s.end_ms,
            Some(Some((_, end, _))) if *end != s.start_ms => {
                out.push(None);
                out.push(Some((s.start_ms, s.end_ms, s.room)));
            }
            _ => out.push(Some((s.start_ms, s.end_ms, s.room))),
        }
    }
    out
}

fn transitions_from_runs(runs: &[Option<(i64, i64, Room)>]) -> Vec<Transition> {
    let mut out = vec![];
    for i in 1..runs.len().saturating_sub(1) {
        let (Some(prev), Some(cur), Some(next)) = (runs[i - 1], runs[i], runs[i + 1]) else {
            continue;
        };
        if !cur.2.is_hallway() {
            continue;
        }
        let Some(pair) = RoomPair::of(prev.2, next.2) else {
            continue;
        };
        let duration_s = (cur.1 - cur.0) as f64 / 1000.0;
        if duration_s > MAX_TRANSITION_S {
            continue;
        }
        out.push(Transition {
            from: prev.2,
            to: next.2,
            pair,
            start_ms: cur.0,
            end_ms: cur.1,
            duration_s,
        });
    }
    out
}

/// Every hallway run flanked by two different tracked rooms, at most 60 s.
pub fn extract_transitions(seq: &RoomSequence) -> Vec<Transition> {
    transitions_from_runs(&seq.runs())
}

/// The same extraction over run-length encoded truth.
pub fn extract_from_segments(segments: &[TruthSegment]) -> Vec<Transition> {
    transitions_from_runs(&runs_from_segments(segments))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitFeatureRow {
    pub participant: String,
    pub day: u32,
    pub slot: u32,
    /// Kitchen–Living, Kitchen–Dining, Dining–Living.
    pub mean_duration: [f64; 3],
    pub count: [u32; 3],
    pub state: MedState,
}

impl GaitFeatureRow {
    pub fn features(&self) -> [f64; 6] {
        let [a, b, c] = self.mean_duration;
        let [x, y, z] = self.count.map(f64::from);
        [a, b, c, x, y, z]
    }
}

/// One row per (day, slot); a pair with no transitions in a slot gets
/// count 0 and a mean at the 60 s cap. Transitions outside 06:00–22:00 are
/// ignored; each counts in the slot where its hallway stay starts.
pub fn aggregate_features(
    participant: &str,
    transitions: &[Transition],
    schedule: &MedicationSchedule,
    days: u32,
) -> Vec<GaitFeatureRow> {
    let n_slots = (days * SLOTS_PER_DAY) as usize;
    let mut sums = vec![[0.0f64; 3]; n_slots];
    let mut counts = vec![[0u32; 3]; n_slots];
    for t in transitions {
        let Some((day, slot)) = day_slot_of(t.start_ms) else { continue };
        if day < 1 || day > days {
            continue;
        }
        let k = ((day - 1) * SLOTS_PER_DAY + slot) as usize;
        sums[k][t.pair.index()] += t.duration_s;
        counts[k][t.pair.index()] += 1;
    }
    (0..n_slots)
        .map(|k| {
            let day = k as u32 / SLOTS_PER_DAY + 1;
            let slot = k as u32 % SLOTS_PER_DAY;
            let mut mean = [MAX_TRANSITION_S; 3];
            for p in 0..3 {
                if counts[k][p] > 0 {
                    mean[p] = sums[k][p] / counts[k][p] as f64;
                }
            }
            GaitFeatureRow {
                participant: participant.to_string(),
                day,
                slot,
                mean_duration: mean,
                count: counts[k],
                state: schedule.state_of(day, slot).unwrap_or(MedState::On),
            }
        })
        .collect()
}

/// Mean and population sd of the captured durations for one pair, or
/// `None` (rendered "N/A") when nothing was captured.
pub type TableCell = Option<(f64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTableRow {
    pub source: String,
    pub cells: [TableCell; 3],
}

pub fn mean_transition_table(groups: &[(String, Vec<Transition>)]) -> Vec<TransitionTableRow> {
    groups
        .iter()
        .map(|(source, ts)| {
            let mut cells = [None; 3];
            for (p, cell) in cells.iter_mut().enumerate() {
                let d: Vec<f64> = ts.iter().filter(|t| t.pair.index() == p).map(|t| t.duration_s).collect();
                if !d.is_empty() {
                    *cell = Some(crate::harness::metrics::mean_sd(&d));
                }
            }
            TransitionTableRow {
                source: source.clone(),
                cells,
            }
        })
        .collect()
}

pub fn render_table(rows: &[TransitionTableRow]) -> String {
    let width = rows.iter().map(|r| r.source.len()).max().unwrap_or(0).max(6);
    let mut s = format!("{:<width$}", "source");
    for p in RoomPair::ALL {
        s.push_str(&format!("  {:>16}", p.label()));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{:<width$}", r.source));
        for c in &r.cells {
            let text = match c {
                Some((m, sd)) => format!("{m:.2} ({sd:.2})"),
                None => "N/A".to_string(),
            };
            s.push_str(&format!("  {text:>16}"));
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize, Deserialize)]
struct TableRecord {
    source: String,
    pair: String,
    mean_s: Option<f64>,
    sd_s: Option<f64>,
}

pub fn write_table_csv(path: &Path, rows: &[TransitionTableRow]) -> Result<()> {
    let mut records = vec![];
    for r in rows {
        for (p, c) in RoomPair::ALL.iter().zip(&r.cells) {
            records.push(TableRecord {
                source: r.source.clone(),
                pair: p.label().to_string(),
                mean_s: c.map(|c| c.0),
                sd_s: c.map(|c| c.1),
            });
        }
    }
    write_file(path, "transition-table", &records)
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureRecord {
    participant: String,
    day: u32,
    slot: u32,
    mean_kitchen_living: f64,
    mean_kitchen_dining: f64,
    mean_dining_living: f64,
    count_kitchen_living: u32,
    count_kitchen_dining: u32,
    count_dining_living: u32,
    state: MedState,
}

pub fn write_features(path: &Path, rows: &[GaitFeatureRow]) -> Result<()> {
    let records: Vec<FeatureRecord> = rows
        .iter()
        .map(|r| FeatureRecord {
            participant: r.participant.clone(),
            day: r.day,
            slot: r.slot,
            mean_kitchen_living: r.mean_duration[0],
            mean_kitchen_dining: r.mean_duration[1],
            mean_dining_living: r.mean_duration[2],
            count_kitchen_living: r.count[0],
            count_kitchen_dining: r.count[1],
            count_dining_living: r.count[2],
            state: r.state,
        })
        .collect();
    write_file(path, "gait-features", &records)
}

pub fn read_features(path: &Path) -> Result<Vec<GaitFeatureRow>> {
    let records: Vec<FeatureRecord> = read_file(path, "gait-features")?;
    Ok(records
        .into_iter()
        .map(|r| GaitFeatureRow {
            participant: r.participant,
            day: r.day,
            slot: r.slot,
            mean_duration: [r.mean_kitchen_living, r.mean_kitchen_dining, r.mean_dining_living],
            count: [r.count_kitchen_living, r.count_kitchen_dining, r.count_dining_living],
            state: r.state,
        })
        .collect())
}
