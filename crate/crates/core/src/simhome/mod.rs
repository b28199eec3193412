//! Synthetic smart-home cohort: house geometry, participants, movement,
//! radio and wrist accelerometry.

pub mod accel;
pub mod cohort;
pub mod io;
pub mod layout;
pub mod profile;
pub mod radio;
pub mod trajectory;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use accel::{synthesize_accel, AccelConfig, AccelSample};
pub use cohort::{generate_cohort, Cohort, Participant, RawTrace, TruthSegment};
pub use layout::{build_default_layout, HouseLayout, Point};
pub use profile::{DayWindow, Gender, Group, MedState, MedicationSchedule, ParticipantProfile};
pub use radio::{synthesize_rssi, PathLossConfig, RssiPacket, Wearable};
pub use trajectory::{simulate_trajectory, Trajectory, TICK_MS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub path_loss: PathLossConfig,
    pub accel: AccelConfig,
    /// Mean dwell seconds, indexed by room (the hallway entry is unused).
    pub dwell_means_s: [f64; 6],
    pub min_dwell_s: f64,
    /// Dwell points keep this distance from room walls.
    pub dwell_margin_m: f64,
    pub pd_walk_speed: (f64, f64),
    pub hc_walk_speed: (f64, f64),
    /// OFF walk speed as a fraction of ON speed.
    pub off_speed_factor: f64,
    /// Per-traversal speed multiplier is uniform in 1 ± this.
    pub speed_jitter: f64,
    pub tremor_amplitude: (f64, f64),
    pub wearable_offset_m: f64,
    /// Camera-annotated time per day, shared by both members of a pair.
    pub annotated_hours_per_day: f64,
    pub sessions_per_day: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            path_loss: PathLossConfig::default(),
            accel: AccelConfig::default(),
            dwell_means_s: [360.0, 0.0, 300.0, 600.0, 60.0, 60.0],
            min_dwell_s: 5.0,
            dwell_margin_m: 0.3,
            pd_walk_speed: (0.6, 0.9),
            hc_walk_speed: (0.9, 1.3),
            off_speed_factor: 0.6,
            speed_jitter: 0.15,
            tremor_amplitude: (0.3, 1.5),
            wearable_offset_m: 0.3,
            annotated_hours_per_day: 1.25,
            sessions_per_day: 3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("simulation: {what}")));
        if self.dwell_means_s.iter().any(|&m| !(m >= 0.0)) {
            return bad("dwell means must be non-negative");
        }
        if !(self.min_dwell_s > 0.0) {
            return bad("min_dwell_s must be positive");
        }
        for (name, (lo, hi)) in [
            ("pd_walk_speed", self.pd_walk_speed),
            ("hc_walk_speed", self.hc_walk_speed),
        ] {
            if !(lo > 0.0 && hi > lo) {
                return bad(&format!("{name} must be an increasing positive range"));
            }
        }
        if !(self.tremor_amplitude.0 >= 0.0 && self.tremor_amplitude.1 > self.tremor_amplitude.0) {
            return bad("tremor_amplitude must be an increasing non-negative range");
        }
        if !(self.off_speed_factor > 0.0 && self.off_speed_factor <= 1.0) {
            return bad("off_speed_factor must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.speed_jitter) {
            return bad("speed_jitter must lie in [0, 1)");
        }
        if !(self.dwell_margin_m >= 0.0 && self.dwell_margin_m < 0.7) {
            return bad("dwell_margin_m must lie in [0, 0.7)");
        }
        if !(self.annotated_hours_per_day > 0.0 && self.annotated_hours_per_day <= 16.0) {
            return bad("annotated_hours_per_day must lie in (0, 16]");
        }
        if self.sessions_per_day == 0 || self.sessions_per_day > profile::SLOTS_PER_DAY {
            return bad("sessions_per_day must lie in 1..=4");
        }
        if !(self.path_loss.shadowing_sigma_db >= 0.0 && self.accel.noise_sigma >= 0.0) {
            return bad("noise scales must be non-negative");
        }
        Ok(())
    }
}
