use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, label_of, substream};
use crate::room::Room;

use super::accel::{synthesize_accel, AccelSample};
use super::layout::{build_default_layout, HouseLayout};
use super::profile::{
    slot_start_ms, Group, MedicationSchedule, ParticipantProfile, DAY_END_HOUR, DAY_START_HOUR,
    MS_PER_DAY, MS_PER_HOUR, SLOTS_PER_DAY, SLOT_HOURS,
};
use super::radio::{synthesize_rssi, RssiPacket};
use super::trajectory::{simulate_trajectory, Trajectory, TICK_MS};
use super::SimConfig;

/// Sensor streams are synthesized in independent one-minute chunks, each
/// with its own random stream, so any sub-range can be regenerated exactly.
pub const CHUNK_MS: i64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSegment {
    pub start_ms: i64,
    pub end_ms: i64,
    pub room: Room,
}

/// Sensor and truth streams of one participant over a time range.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTrace {
    pub participant: String,
    pub rssi: Vec<RssiPacket>,
    pub accel: Vec<AccelSample>,
    /// Run-length encoded 5 Hz room truth; segment ends are exclusive.
    pub truth: Vec<TruthSegment>,
}

impl RawTrace {
    /// Expands the truth to one `(timestamp, room)` per 5 Hz tick.
    pub fn truth_ticks(&self) -> Vec<(i64, Room)> {
        expand_truth(&self.truth)
    }
}

pub fn expand_truth(segments: &[TruthSegment]) -> Vec<(i64, Room)> {
    segments
        .iter()
        .flat_map(|s| {
            (s.start_ms..s.end_ms)
                .step_by(TICK_MS as usize)
                .map(move |t| (t, s.room))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub profile: ParticipantProfile,
    pub schedule: Option<MedicationSchedule>,
    /// 1-based pair number; both partners share camera sessions.
    pub pair: u32,
    pub trajectory: Trajectory,
}

impl Participant {
    pub fn id(&self) -> &str {
        &self.profile.id
    }

    pub fn is_pd(&self) -> bool {
        self.profile.group == Group::Parkinsons
    }
}

/// A simulated study: one PD and one control participant per pair, free
/// living for `days` days, sensors and movement from 06:00 to 22:00.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub seed: u64,
    pub days: u32,
    pub config: SimConfig,
    pub layout: HouseLayout,
    /// Ordered PD01, HC01, PD02, HC02, ...
    pub participants: Vec<Participant>,
    /// Camera-annotated intervals per pair, sorted and disjoint.
    pub sessions: Vec<Vec<(i64, i64)>>,
}

pub fn participant_id(group: Group, pair: u32) -> String {
    format!("{}{pair:02}", group.label())
}

/// Daytime interval of study day `day` (1-based).
pub fn day_range(day: u32) -> (i64, i64) {
    let base = (day as i64 - 1) * MS_PER_DAY;
    (
        base + DAY_START_HOUR * MS_PER_HOUR,
        base + DAY_END_HOUR * MS_PER_HOUR,
    )
}

fn sample_sessions(n_pairs: u32, days: u32, config: &SimConfig, seed: u64) -> Vec<Vec<(i64, i64)>> {
    let per_session = (config.annotated_hours_per_day * 3600.0 / config.sessions_per_day as f64)
        .round() as i64
        * 1000;
    let slot_ms = SLOT_HOURS * MS_PER_HOUR;
    (1..=n_pairs)
        .map(|pair| {
            let mut out = vec![];
            for day in 1..=days {
                let mut rng = substream(seed, "sessions", &[pair as u64, day as u64]);
                let mut slots: Vec<usize> = sample_indices(
                    &mut rng,
                    SLOTS_PER_DAY as usize,
                    config.sessions_per_day as usize,
                )
                .into_vec();
                slots.sort_unstable();
                for slot in slots {
                    let base = slot_start_ms(day, slot as u32);
                    let len = per_session.min(slot_ms);
                    let slack_s = (slot_ms - len) / 1000;
                    let offset = if slack_s > 0 {
                        rng.random_range(0..=slack_s) * 1000
                    } else {
                        0
                    };
                    out.push((base + offset, base + offset + len));
                }
            }
            out
        })
        .collect()
}

pub fn generate_cohort(n_pairs: u32, days: u32, seed: u64, config: &SimConfig) -> Result<Cohort> {
    if n_pairs == 0 || days == 0 {
        return Err(Error::invalid(format!(
            "cohort needs at least one pair and one day, got {n_pairs} pairs and {days} days"
        )));
    }
    config.validate()?;
    let layout = build_default_layout();
    let mut seeds = vec![];
    for pair in 1..=n_pairs {
        for group in [Group::Parkinsons, Group::Control] {
            seeds.push((pair, group));
        }
    }
    let move_seed = derive_seed(seed, "movement", &[]);
    let participants = seeds
        .into_par_iter()
        .map(|(pair, group)| {
            let id = participant_id(group, pair);
            let mut rng = substream(seed, "profile", &[label_of(&id)]);
            let profile = ParticipantProfile::sample(id.clone(), group, config, &mut rng);
            profile.validate()?;
            let schedule = match group {
                Group::Parkinsons => {
                    let mut rng = substream(seed, "schedule", &[label_of(&id)]);
                    Some(MedicationSchedule::sample(id.clone(), days, &mut rng)?)
                }
                Group::Control => None,
            };
            let mut legs = vec![];
            for day in 1..=days {
                let (start, end) = day_range(day);
                let t = simulate_trajectory(
                    &layout,
                    &profile,
                    schedule.as_ref(),
                    start,
                    (end - start) as f64 / 1000.0,
                    config,
                    move_seed,
                )?;
                legs.extend(t.legs);
            }
            Ok(Participant {
                profile,
                schedule,
                pair,
                trajectory: Trajectory {
                    participant: id,
                    legs,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Cohort {
        seed,
        days,
        config: config.clone(),
        layout,
        participants,
        sessions: sample_sessions(n_pairs, days, config, seed),
    })
}

impl Cohort {
    pub fn n_pairs(&self) -> u32 {
        self.sessions.len() as u32
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p.id() == id)
    }

    pub fn participant(&self, id: &str) -> Result<&Participant> {
        self.index_of(id)
            .map(|i| &self.participants[i])
            .ok_or_else(|| Error::invalid(format!("unknown participant {id}")))
    }

    pub fn pd(&self) -> impl Iterator<Item = &Participant> {
        self.participants.iter().filter(|p| p.is_pd())
    }

    pub fn controls(&self) -> impl Iterator<Item = &Participant> {
        self.participants.iter().filter(|p| !p.is_pd())
    }

    pub fn sessions_of(&self, participant: &Participant) -> &[(i64, i64)] {
        &self.sessions[participant.pair as usize - 1]
    }

    pub fn days_ranges(&self) -> Vec<(i64, i64)> {
        (1..=self.days).map(day_range).collect()
    }

    /// Run-length encoded room truth over `[start, end)`.
    pub fn truth(
        &self,
        participant: &Participant,
        start_ms: i64,
        end_ms: i64,
    ) -> Vec<TruthSegment> {
        let mut out: Vec<TruthSegment> = vec![];
        for s in participant
            .trajectory
            .sample(&self.layout, start_ms, end_ms)
        {
            match out.last_mut() {
                Some(last) if last.room == s.room && last.end_ms == s.timestamp_ms => {
                    last.end_ms += TICK_MS
                }
                _ => out.push(TruthSegment {
                    start_ms: s.timestamp_ms,
                    end_ms: s.timestamp_ms + TICK_MS,
                    room: s.room,
                }),
            }
        }
        out
    }

    /// Full-length daytime truth for every day of the study.
    pub fn full_truth(&self, participant: &Participant) -> Vec<TruthSegment> {
        self.days_ranges()
            .into_iter()
            .flat_map(|(s, e)| self.truth(participant, s, e))
            .collect()
    }

    /// Synthesizes all streams over `[start, end)`. Output is independent of
    /// how a longer range is split into calls.
    pub fn raw_trace(&self, participant: &Participant, start_ms: i64, end_ms: i64) -> RawTrace {
        let label = label_of(participant.id());
        let burst_seed = derive_seed(self.seed, "bursts", &[]);
        let mut trace = RawTrace {
            participant: participant.id().to_string(),
            truth: self.truth(participant, start_ms, end_ms),
            ..Default::default()
        };
        if end_ms <= start_ms {
            return trace;
        }
        let first = start_ms.div_euclid(CHUNK_MS);
        let last = (end_ms - 1).div_euclid(CHUNK_MS);
        for chunk in first..=last {
            let (c0, c1) = (chunk * CHUNK_MS, (chunk + 1) * CHUNK_MS);
            let positions: Vec<_> = participant
                .trajectory
                .sample(&self.layout, c0, c1)
                .into_iter()
                .map(|s| (s.timestamp_ms, s.position))
                .collect();
            if positions.is_empty() {
                continue;
            }
            let mut rng = substream(self.seed, "rssi", &[label, chunk as u64]);
            let mut shadow = vec![];
            let rssi = synthesize_rssi(
                &positions,
                &self.layout,
                &self.config.path_loss,
                self.config.wearable_offset_m,
                &mut shadow,
                &mut rng,
            );
            trace.rssi.extend(
                rssi.into_iter()
                    .filter(|p| p.timestamp_ms >= start_ms && p.timestamp_ms < end_ms),
            );
            let mut rng = substream(self.seed, "accel", &[label, chunk as u64]);
            let accel = synthesize_accel(
                &participant.trajectory,
                &participant.profile,
                participant.schedule.as_ref(),
                c0,
                c1,
                &self.config.accel,
                burst_seed,
                &mut rng,
            );
            trace.accel.extend(
                accel
                    .into_iter()
                    .filter(|s| s.timestamp_ms >= start_ms && s.timestamp_ms < end_ms),
            );
        }
        trace
    }
}
