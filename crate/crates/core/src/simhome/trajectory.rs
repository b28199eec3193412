use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{label_of, substream};
use crate::room::Room;

use super::layout::{HouseLayout, Point};
use super::profile::{MedState, MedicationSchedule, ParticipantProfile};
use super::SimConfig;

/// 5 Hz tick spacing shared by RSSI, resampled accelerometry and labels.
pub const TICK_MS: i64 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activity {
    Dwell {
        room: Room,
        at: Point,
    },
    Walk {
        path: Vec<Point>,
        /// Cumulative arc length at each vertex of `path`.
        arc: Vec<f64>,
        speed: f64,
        from: Room,
        to: Room,
        state: MedState,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub start_ms: i64,
    pub end_ms: i64,
    pub activity: Activity,
}

impl Leg {
    pub fn position_at(&self, t_ms: i64) -> Point {
        match &self.activity {
            Activity::Dwell { at, .. } => *at,
            Activity::Walk {
                path, arc, speed, ..
            } => {
                let s = ((t_ms - self.start_ms) as f64 / 1000.0 * speed)
                    .clamp(0.0, *arc.last().unwrap());
                let i = arc.partition_point(|&a| a <= s).clamp(1, path.len() - 1);
                let seg = arc[i] - arc[i - 1];
                let frac = if seg > 0.0 {
                    (s - arc[i - 1]) / seg
                } else {
                    0.0
                };
                path[i - 1].lerp(path[i], frac)
            }
        }
    }

    pub fn is_walking(&self) -> bool {
        matches!(self.activity, Activity::Walk { .. })
    }

    pub fn speed(&self) -> f64 {
        match self.activity {
            Activity::Walk { speed, .. } => speed,
            Activity::Dwell { .. } => 0.0,
        }
    }
}

/// A continuous semi-Markov walk through the house, possibly spanning
/// several disjoint daytime intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub participant: String,
    pub legs: Vec<Leg>,
}

impl Trajectory {
    pub fn leg_index_at(&self, t_ms: i64) -> Option<usize> {
        let i = self.legs.partition_point(|l| l.end_ms <= t_ms);
        match self.legs.get(i) {
            Some(l) if l.start_ms <= t_ms => Some(i),
            _ => None,
        }
    }

    pub fn leg_at(&self, t_ms: i64) -> Option<&Leg> {
        self.leg_index_at(t_ms).map(|i| &self.legs[i])
    }

    pub fn position_at(&self, t_ms: i64) -> Option<Point> {
        self.leg_at(t_ms).map(|l| l.position_at(t_ms))
    }

    pub fn room_at(&self, layout: &HouseLayout, t_ms: i64) -> Option<Room> {
        let leg = self.leg_at(t_ms)?;
        match &leg.activity {
            Activity::Dwell { room, .. } => Some(*room),
            Activity::Walk { .. } => layout.room_at(leg.position_at(t_ms)),
        }
    }

    /// Covered intervals `[start, end)` in ms, merging touching legs.
    pub fn coverage(&self) -> Vec<(i64, i64)> {
        let mut out: Vec<(i64, i64)> = vec![];
        for leg in &self.legs {
            match out.last_mut() {
                Some(last) if last.1 == leg.start_ms => last.1 = leg.end_ms,
                _ => out.push((leg.start_ms, leg.end_ms)),
            }
        }
        out
    }

    /// Samples body position and room truth on the 5 Hz grid within `[start, end)`.
    pub fn sample(&self, layout: &HouseLayout, start_ms: i64, end_ms: i64) -> Vec<PositionSample> {
        let first = start_ms.div_euclid(TICK_MS) * TICK_MS;
        let first = if first < start_ms {
            first + TICK_MS
        } else {
            first
        };
        (0..)
            .map(|i| first + i * TICK_MS)
            .take_while(|&t| t < end_ms)
            .filter_map(|t| {
                let leg = self.leg_at(t)?;
                let p = leg.position_at(t);
                let room = match &leg.activity {
                    Activity::Dwell { room, .. } => *room,
                    Activity::Walk { .. } => layout.room_at(p)?,
                };
                Some(PositionSample {
                    timestamp_ms: t,
                    position: p,
                    room,
                })
            })
            .collect()
    }

    pub fn samples(&self, layout: &HouseLayout) -> Vec<PositionSample> {
        self.coverage()
            .into_iter()
            .flat_map(|(s, e)| self.sample(layout, s, e))
            .collect()
    }

    pub fn walks(&self) -> impl Iterator<Item = &Leg> {
        self.legs.iter().filter(|l| l.is_walking())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSample {
    pub timestamp_ms: i64,
    pub position: Point,
    pub room: Room,
}

fn random_point_in<R: Rng>(layout: &HouseLayout, room: Room, margin: f64, rng: &mut R) -> Point {
    let poly = layout.polygon(room);
    let (lo, hi) = poly.bounds();
    loop {
        let p = Point::new(
            rng.random_range(lo.x + margin..hi.x - margin),
            rng.random_range(lo.y + margin..hi.y - margin),
        );
        if poly.contains(p) {
            return p;
        }
    }
}

fn walk_path(
    layout: &HouseLayout,
    from_point: Point,
    from: Room,
    to_point: Point,
    to: Room,
) -> (Vec<Point>, Vec<f64>) {
    let path = vec![
        from_point,
        layout.centroid(from),
        layout.centroid(layout.hallway),
        layout.centroid(to),
        to_point,
    ];
    let mut arc = vec![0.0];
    for w in path.windows(2) {
        arc.push(arc.last().unwrap() + w[0].distance(w[1]));
    }
    (path, arc)
}

/// Simulates `duration_s` seconds of movement starting at `start_ms`.
///
/// Dwell times are exponential with the profile's per-room mean; each
/// traversal goes through the hallway to a uniformly chosen other room at the
/// ON or OFF walk speed in force when the walk starts.
pub fn simulate_trajectory(
    layout: &HouseLayout,
    profile: &ParticipantProfile,
    schedule: Option<&MedicationSchedule>,
    start_ms: i64,
    duration_s: f64,
    config: &SimConfig,
    seed: u64,
) -> Result<Trajectory> {
    if !(duration_s > 0.0) {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let mut rng = substream(
        seed,
        "trajectory",
        &[label_of(&profile.id), start_ms as u64],
    );
    let end_ms = start_ms + (duration_s * 1000.0).round() as i64;
    let dwell_rooms: Vec<Room> = layout.destinations(layout.hallway);
    let mut room = dwell_rooms[rng.random_range(0..dwell_rooms.len())];
    let mut at = random_point_in(layout, room, config.dwell_margin_m, &mut rng);
    let mut t = start_ms;
    let mut legs = vec![];
    while t < end_ms {
        let mean = profile.dwell_mean(room).max(config.min_dwell_s);
        let dwell_s = Exp::new(1.0 / mean)
            .unwrap()
            .sample(&mut rng)
            .max(config.min_dwell_s);
        let dwell_end = (t + (dwell_s * 1000.0).round() as i64).min(end_ms);
        legs.push(Leg {
            start_ms: t,
            end_ms: dwell_end,
            activity: Activity::Dwell { room, at },
        });
        t = dwell_end;
        if t >= end_ms {
            break;
        }
        let options = layout.destinations(room);
        let next = options[rng.random_range(0..options.len())];
        let next_at = random_point_in(layout, next, config.dwell_margin_m, &mut rng);
        let state = schedule.map_or(MedState::On, |s| s.state_at(t));
        let jitter = rng.random_range(1.0 - config.speed_jitter..1.0 + config.speed_jitter);
        let speed = profile.walk_speed(state) * jitter;
        let (path, arc) = walk_path(layout, at, room, next_at, next);
        let walk_ms = (arc.last().unwrap() / speed * 1000.0).round() as i64;
        let walk_end = (t + walk_ms.max(1)).min(end_ms);
        legs.push(Leg {
            start_ms: t,
            end_ms: walk_end,
            activity: Activity::Walk {
                path,
                arc,
                speed,
                from: room,
                to: next,
                state,
            },
        });
        t = walk_end;
        room = next;
        at = next_at;
    }
    Ok(Trajectory {
        participant: profile.id.clone(),
        legs,
    })
}
