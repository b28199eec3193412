use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::room::{Room, N_ROOMS};

use super::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "PD")]
    Parkinsons,
    #[serde(rename = "HC")]
    Control,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::Parkinsons => "PD",
            Group::Control => "HC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MedState {
    #[serde(rename = "ON")]
    On,
    #[serde(rename = "OFF")]
    Off,
}

impl fmt::Display for MedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MedState::On => "ON",
            MedState::Off => "OFF",
        })
    }
}

impl FromStr for MedState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ON" | "on" => Ok(MedState::On),
            "OFF" | "off" => Ok(MedState::Off),
            other => Err(Error::invalid(format!(
                "unknown medication state `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: f64,
    pub gender: Gender,
    pub years_since_diagnosis: f64,
    pub updrs_on: f64,
    pub updrs_off: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub id: String,
    pub group: Group,
    /// m/s², zero for controls.
    pub tremor_amplitude: f64,
    pub tremor_frequency_hz: f64,
    pub walk_speed_on: f64,
    pub walk_speed_off: f64,
    /// Mean dwell seconds per room, indexed by `Room::index`. The hallway
    /// entry is unused: the hallway is only ever traversed.
    pub dwell_means: [f64; N_ROOMS],
    pub demographics: Demographics,
}

impl ParticipantProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid(format!("profile {}: {reason}", self.id)));
        if self.group == Group::Control && self.tremor_amplitude != 0.0 {
            return bad("controls carry no tremor");
        }
        if self.group == Group::Parkinsons && self.walk_speed_off > self.walk_speed_on {
            return bad("OFF walk speed exceeds ON walk speed");
        }
        if !(self.walk_speed_on > 0.0 && self.walk_speed_off > 0.0) {
            return bad("walk speeds must be positive");
        }
        if self.demographics.updrs_off < self.demographics.updrs_on {
            return bad("OFF UPDRS below ON UPDRS");
        }
        Ok(())
    }

    pub fn dwell_mean(&self, room: Room) -> f64 {
        self.dwell_means[room.index()]
    }

    pub fn walk_speed(&self, state: MedState) -> f64 {
        match state {
            MedState::On => self.walk_speed_on,
            MedState::Off => self.walk_speed_off,
        }
    }

    pub fn sample<R: Rng>(id: String, group: Group, config: &SimConfig, rng: &mut R) -> Self {
        let jitter = |rng: &mut R| rng.random_range(0.8..1.2);
        let mut dwell_means = [0.0; N_ROOMS];
        for room in Room::ALL {
            if !room.is_hallway() {
                dwell_means[room.index()] = config.dwell_means_s[room.index()] * jitter(rng);
            }
        }
        let gender = if rng.random_bool(0.5) {
            Gender::Female
        } else {
            Gender::Male
        };
        match group {
            Group::Parkinsons => {
                let on = rng.random_range(config.pd_walk_speed.0..config.pd_walk_speed.1);
                let factor = config.off_speed_factor * rng.random_range(0.95..1.05);
                let updrs_on = rng.random_range(15.0..35.0f64).round();
                ParticipantProfile {
                    id,
                    group,
                    tremor_amplitude: rng
                        .random_range(config.tremor_amplitude.0..config.tremor_amplitude.1),
                    tremor_frequency_hz: rng.random_range(4.0..6.0),
                    walk_speed_on: on,
                    walk_speed_off: (on * factor).min(on),
                    dwell_means,
                    demographics: Demographics {
                        age: (61.25 + 8.0 * (rng.random::<f64>() - 0.5) * 2.0).round(),
                        gender,
                        years_since_diagnosis: (rng.random_range(0.5..19.0f64) * 2.0).round() / 2.0,
                        updrs_on,
                        updrs_off: updrs_on + rng.random_range(5.0..20.0f64).round(),
                    },
                }
            }
            Group::Control => {
                let speed = rng.random_range(config.hc_walk_speed.0..config.hc_walk_speed.1);
                let updrs = rng.random_range(0.0..5.0f64).round();
                ParticipantProfile {
                    id,
                    group,
                    tremor_amplitude: 0.0,
                    tremor_frequency_hz: 0.0,
                    walk_speed_on: speed,
                    walk_speed_off: speed,
                    dwell_means,
                    demographics: Demographics {
                        age: (59.25 + 8.0 * (rng.random::<f64>() - 0.5) * 2.0).round(),
                        gender,
                        years_since_diagnosis: 0.0,
                        updrs_on: updrs,
                        updrs_off: updrs,
                    },
                }
            }
        }
    }
}

/// Number of 4-hour slots between 06:00 and 22:00.
pub const SLOTS_PER_DAY: u32 = 4;
pub const DAY_START_HOUR: i64 = 6;
pub const DAY_END_HOUR: i64 = 22;
pub const SLOT_HOURS: i64 = 4;
pub const MS_PER_HOUR: i64 = 3_600_000;
pub const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayWindow {
    /// 1-based study day.
    pub day: u32,
    /// 0..4, slot `s` spans 06:00 + 4s hours.
    pub slot: u32,
    pub state: MedState,
}

impl DayWindow {
    pub fn start_ms(&self) -> i64 {
        slot_start_ms(self.day, self.slot)
    }

    pub fn end_ms(&self) -> i64 {
        self.start_ms() + SLOT_HOURS * MS_PER_HOUR
    }
}

pub fn slot_start_ms(day: u32, slot: u32) -> i64 {
    (day as i64 - 1) * MS_PER_DAY + (DAY_START_HOUR + SLOT_HOURS * slot as i64) * MS_PER_HOUR
}

/// Maps a study timestamp to its (day, slot), if it falls within 06:00–22:00.
pub fn day_slot_of(t_ms: i64) -> Option<(u32, u32)> {
    if t_ms < 0 {
        return None;
    }
    let day = (t_ms / MS_PER_DAY) as u32 + 1;
    let tod = t_ms % MS_PER_DAY;
    let start = DAY_START_HOUR * MS_PER_HOUR;
    let end = DAY_END_HOUR * MS_PER_HOUR;
    if tod < start || tod >= end {
        return None;
    }
    Some((day, ((tod - start) / (SLOT_HOURS * MS_PER_HOUR)) as u32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedicationSchedule {
    pub participant: String,
    pub day_windows: Vec<DayWindow>,
}

impl MedicationSchedule {
    /// Validates that the windows tile `days` full days and that exactly one
    /// window is OFF.
    pub fn new(participant: String, day_windows: Vec<DayWindow>) -> Result<Self> {
        let reject = |reason: String| Error::InvalidSchedule {
            participant: participant.clone(),
            reason,
        };
        if day_windows.is_empty() || day_windows.len() % SLOTS_PER_DAY as usize != 0 {
            return Err(reject(format!(
                "{} windows do not tile whole days",
                day_windows.len()
            )));
        }
        let days = (day_windows.len() / SLOTS_PER_DAY as usize) as u32;
        for (i, w) in day_windows.iter().enumerate() {
            let (day, slot) = (i as u32 / SLOTS_PER_DAY + 1, i as u32 % SLOTS_PER_DAY);
            if w.day != day || w.slot != slot {
                return Err(reject(format!(
                    "window {i} is (day {}, slot {}), expected (day {day}, slot {slot}) of {days} days",
                    w.day, w.slot
                )));
            }
        }
        let off = day_windows
            .iter()
            .filter(|w| w.state == MedState::Off)
            .count();
        if off != 1 {
            return Err(reject(format!("{off} OFF windows, expected exactly one")));
        }
        Ok(MedicationSchedule {
            participant,
            day_windows,
        })
    }

    pub fn sample<R: Rng>(participant: String, days: u32, rng: &mut R) -> Result<Self> {
        let n = days * SLOTS_PER_DAY;
        let off = rng.random_range(0..n);
        let windows = (0..n)
            .map(|i| DayWindow {
                day: i / SLOTS_PER_DAY + 1,
                slot: i % SLOTS_PER_DAY,
                state: if i == off {
                    MedState::Off
                } else {
                    MedState::On
                },
            })
            .collect();
        MedicationSchedule::new(participant, windows)
    }

    pub fn days(&self) -> u32 {
        self.day_windows.len() as u32 / SLOTS_PER_DAY
    }

    pub fn state_at(&self, t_ms: i64) -> MedState {
        match day_slot_of(t_ms) {
            Some((day, slot)) => self.state_of(day, slot).unwrap_or(MedState::On),
            None => MedState::On,
        }
    }

    pub fn state_of(&self, day: u32, slot: u32) -> Option<MedState> {
        self.day_windows
            .iter()
            .find(|w| w.day == day && w.slot == slot)
            .map(|w| w.state)
    }

    pub fn off_window(&self) -> &DayWindow {
        self.day_windows
            .iter()
            .find(|w| w.state == MedState::Off)
            .expect("validated schedule has one OFF window")
    }
}
