//! Wrist accelerometry: gravity, activity, Parkinsonian tremor and noise.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{label_of, substream};
use crate::room::Room;

use super::profile::{MedState, MedicationSchedule, ParticipantProfile};
use super::radio::Wearable;
use super::trajectory::{Activity, Trajectory};

pub const ACCEL_HZ: i64 = 30;
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelConfig {
    pub noise_sigma: f64,
    /// Peak vertical acceleration while walking at 1 m/s.
    pub walk_amplitude: f64,
    /// Wrist oscillation during kitchen bursts (stirring, chopping).
    pub kitchen_burst_amplitude: f64,
    pub kitchen_burst_hz: f64,
    pub kitchen_burst_mean_s: f64,
    pub kitchen_gap_mean_s: f64,
    pub tremor_off_multiplier: f64,
    /// Forearm tilt while seated in the living room; shifts gravity onto x.
    pub living_tilt_deg: f64,
}

impl Default for AccelConfig {
    fn default() -> Self {
        AccelConfig {
            noise_sigma: 0.1,
            walk_amplitude: 3.0,
            kitchen_burst_amplitude: 2.5,
            kitchen_burst_hz: 1.2,
            kitchen_burst_mean_s: 6.0,
            kitchen_gap_mean_s: 6.0,
            tremor_off_multiplier: 1.5,
            living_tilt_deg: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub timestamp_ms: i64,
    pub wearable: Wearable,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Timestamp of global 30 Hz sample `k`, rounded to the millisecond.
pub fn sample_time(k: i64) -> i64 {
    (k * 1000 + 15).div_euclid(ACCEL_HZ)
}

/// First global sample index at or after `t_ms`.
pub fn first_sample_at_or_after(t_ms: i64) -> i64 {
    let mut k = (t_ms * ACCEL_HZ).div_euclid(1000);
    while sample_time(k) < t_ms {
        k += 1;
    }
    while k > 0 && sample_time(k - 1) >= t_ms {
        k -= 1;
    }
    k
}

/// Step frequency grows with walking speed: 2 Hz at 1 m/s.
pub fn step_frequency(speed: f64) -> f64 {
    1.4 + 0.6 * speed
}

fn kitchen_bursts(
    participant: &str,
    leg_start: i64,
    leg_end: i64,
    cfg: &AccelConfig,
    seed: u64,
) -> Vec<(i64, i64)> {
    let mut rng = substream(
        seed,
        "kitchen-bursts",
        &[label_of(participant), leg_start as u64],
    );
    let gap = Exp::new(1.0 / cfg.kitchen_gap_mean_s).unwrap();
    let burst = Exp::new(1.0 / cfg.kitchen_burst_mean_s).unwrap();
    let mut out = vec![];
    let mut t = leg_start;
    while t < leg_end {
        t += (gap.sample(&mut rng) * 1000.0) as i64;
        let end = (t + (burst.sample(&mut rng) * 1000.0) as i64).min(leg_end);
        if t < end {
            out.push((t, end));
        }
        t = end;
    }
    out
}

/// Synthesizes both wrists at 30 Hz over `[start_ms, end_ms)`.
///
/// Deterministic components (activity bursts, phases) depend only on `seed`
/// and the trajectory; white noise is drawn from `rng`, so a caller that
/// seeds `rng` per fixed time chunk gets identical streams regardless of how
/// a range is split.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_accel<R: Rng>(
    trajectory: &Trajectory,
    profile: &ParticipantProfile,
    schedule: Option<&MedicationSchedule>,
    start_ms: i64,
    end_ms: i64,
    cfg: &AccelConfig,
    seed: u64,
    rng: &mut R,
) -> Vec<AccelSample> {
    let mut bursts: HashMap<usize, Vec<(i64, i64)>> = HashMap::new();
    let mut out = vec![];
    let mut k = first_sample_at_or_after(start_ms);
    loop {
        let t = sample_time(k);
        k += 1;
        if t >= end_ms {
            break;
        }
        let Some(leg_idx) = trajectory.leg_index_at(t) else {
            continue;
        };
        let leg = &trajectory.legs[leg_idx];
        let secs = t as f64 / 1000.0;
        let state = schedule.map_or(MedState::On, |s| s.state_at(t));
        let tremor = if profile.tremor_amplitude > 0.0 {
            let mult = if state == MedState::Off {
                cfg.tremor_off_multiplier
            } else {
                1.0
            };
            profile.tremor_amplitude * mult
        } else {
            0.0
        };
        let in_burst = match &leg.activity {
            Activity::Dwell {
                room: Room::Kitchen,
                ..
            } => bursts
                .entry(leg_idx)
                .or_insert_with(|| kitchen_bursts(&profile.id, leg.start_ms, leg.end_ms, cfg, seed))
                .iter()
                .any(|&(a, b)| a <= t && t < b),
            _ => false,
        };
        for wearable in Wearable::BOTH {
            let side = match wearable {
                Wearable::Left => 0.0,
                Wearable::Right => 1.0,
            };
            let (mut x, mut y, mut z) = (0.0, 0.0, GRAVITY);
            if let Activity::Dwell {
                room: Room::Living, ..
            } = leg.activity
            {
                let tilt = cfg.living_tilt_deg.to_radians();
                x = GRAVITY * tilt.sin();
                z = GRAVITY * tilt.cos();
            }
            if let Activity::Walk { speed, .. } = leg.activity {
                let amp = cfg.walk_amplitude * speed;
                let f = step_frequency(speed);
                z += amp * (2.0 * PI * f * secs).sin();
                // arm swing at stride frequency, wrists in antiphase
                x += 0.5 * amp * (PI * f * secs + side * PI).sin();
            }
            if in_burst {
                let gain = if wearable == Wearable::Right {
                    1.0
                } else {
                    0.3
                };
                let b = gain * cfg.kitchen_burst_amplitude;
                let w = 2.0 * PI * cfg.kitchen_burst_hz * secs;
                x += b * w.cos();
                y += b * w.sin();
            }
            if tremor > 0.0 {
                let gain = if wearable == Wearable::Right {
                    1.0
                } else {
                    0.5
                };
                let w = 2.0 * PI * profile.tremor_frequency_hz * secs;
                x += gain * tremor * w.sin();
                y += 0.5 * gain * tremor * (w + 1.0).sin();
            }
            if cfg.noise_sigma > 0.0 {
                let n: [f64; 3] = [
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                ];
                x += cfg.noise_sigma * n[0];
                y += cfg.noise_sigma * n[1];
                z += cfg.noise_sigma * n[2];
            }
            out.push(AccelSample {
                timestamp_ms: t,
                wearable,
                x,
                y,
                z,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simhome::layout::Point;
    use crate::simhome::profile::Group;
    use crate::simhome::trajectory::Leg;
    use crate::simhome::SimConfig;
    use rustfft_free::band_power;

    /// Independent DFT oracle for band power; avoids any FFT dependency.
    mod rustfft_free {
        use std::f64::consts::PI;

        pub fn band_power(signal: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
            let n = signal.len();
            let mean = signal.iter().sum::<f64>() / n as f64;
            let mut total = 0.0;
            for k in 1..n / 2 {
                let f = k as f64 * fs / n as f64;
                if f < lo || f > hi {
                    continue;
                }
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &s) in signal.iter().enumerate() {
                    let a = 2.0 * PI * k as f64 * i as f64 / n as f64;
                    re += (s - mean) * a.cos();
                    im -= (s - mean) * a.sin();
                }
                total += re * re + im * im;
            }
            total / n as f64
        }

        pub fn peak_frequency(signal: &[f64], fs: f64) -> f64 {
            let n = signal.len();
            let mean = signal.iter().sum::<f64>() / n as f64;
            let mut best = (0.0, 0.0);
            for k in 1..n / 2 {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &s) in signal.iter().enumerate() {
                    let a = 2.0 * PI * k as f64 * i as f64 / n as f64;
                    re += (s - mean) * a.cos();
                    im -= (s - mean) * a.sin();
                }
                let p = re * re + im * im;
                if p > best.1 {
                    best = (k as f64 * fs / n as f64, p);
                }
            }
            best.0
        }
    }

    fn still(room: Room, secs: i64) -> Trajectory {
        Trajectory {
            participant: "t".into(),
            legs: vec![Leg {
                start_ms: 0,
                end_ms: secs * 1000,
                activity: Activity::Dwell {
                    room,
                    at: Point::new(2.0, 3.0),
                },
            }],
        }
    }

    fn profile(group: Group) -> ParticipantProfile {
        let mut rng = substream(1, "p", &[]);
        ParticipantProfile::sample("t".into(), group, &SimConfig::default(), &mut rng)
    }

    fn axis(samples: &[AccelSample], w: Wearable, f: impl Fn(&AccelSample) -> f64) -> Vec<f64> {
        samples.iter().filter(|s| s.wearable == w).map(f).collect()
    }

    #[test]
    fn sample_grid_is_six_per_200ms() {
        let ks: Vec<i64> = (0..7).map(sample_time).collect();
        assert_eq!(ks, vec![0, 33, 67, 100, 133, 167, 200]);
        assert_eq!(first_sample_at_or_after(34), 2);
        assert_eq!(first_sample_at_or_after(33), 1);
    }

    #[test]
    fn resting_control_without_noise_reads_gravity() {
        let cfg = AccelConfig {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let traj = still(Room::Dining, 10);
        let mut rng = substream(0, "n", &[]);
        let s = synthesize_accel(
            &traj,
            &profile(Group::Control),
            None,
            0,
            10_000,
            &cfg,
            0,
            &mut rng,
        );
        assert_eq!(s.len(), 2 * 300);
        for sample in s {
            assert_eq!((sample.x, sample.y, sample.z), (0.0, 0.0, GRAVITY));
        }
    }

    #[test]
    fn tremor_band_power_only_for_pd() {
        let cfg = AccelConfig::default();
        let traj = still(Room::Living, 20);
        let mut pd = profile(Group::Parkinsons);
        pd.tremor_amplitude = 1.0;
        let hc = profile(Group::Control);
        let mut rng = substream(0, "n", &[]);
        let s_pd = synthesize_accel(&traj, &pd, None, 0, 20_000, &cfg, 0, &mut rng);
        let s_hc = synthesize_accel(&traj, &hc, None, 0, 20_000, &cfg, 0, &mut rng);
        let x_pd = axis(&s_pd, Wearable::Right, |s| s.x);
        let x_hc = axis(&s_hc, Wearable::Right, |s| s.x);
        let band_pd = band_power(&x_pd, 30.0, 4.0, 6.0);
        let band_hc = band_power(&x_hc, 30.0, 4.0, 6.0);
        assert!(band_pd > 50.0 * band_hc, "{band_pd} vs {band_hc}");
    }

    #[test]
    fn walking_peaks_near_two_hz() {
        let cfg = AccelConfig::default();
        let a = Point::new(0.5, 3.0);
        let b = Point::new(100.5, 3.0);
        let arc = vec![0.0, a.distance(b)];
        let traj = Trajectory {
            participant: "w".into(),
            legs: vec![Leg {
                start_ms: 0,
                end_ms: 20_000,
                activity: Activity::Walk {
                    path: vec![a, b],
                    arc,
                    speed: 1.0,
                    from: Room::Dining,
                    to: Room::Kitchen,
                    state: MedState::On,
                },
            }],
        };
        let mut rng = substream(0, "n", &[]);
        let s = synthesize_accel(
            &traj,
            &profile(Group::Control),
            None,
            0,
            20_000,
            &cfg,
            0,
            &mut rng,
        );
        let z = axis(&s, Wearable::Left, |s| s.z);
        let f = rustfft_free::peak_frequency(&z, 30.0);
        assert!((f - 2.0).abs() < 0.15, "peak at {f} Hz");
    }

    #[test]
    fn chunking_does_not_change_deterministic_part() {
        let cfg = AccelConfig {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let traj = still(Room::Kitchen, 60);
        let p = profile(Group::Parkinsons);
        let mut rng = substream(0, "n", &[]);
        let whole = synthesize_accel(&traj, &p, None, 0, 60_000, &cfg, 7, &mut rng);
        let mut parts = synthesize_accel(&traj, &p, None, 0, 25_000, &cfg, 7, &mut rng);
        parts.extend(synthesize_accel(
            &traj, &p, None, 25_000, 60_000, &cfg, 7, &mut rng,
        ));
        assert_eq!(whole, parts);
        // bursts actually happen in the kitchen
        assert!(whole
            .iter()
            .any(|s| s.wearable == Wearable::Right && s.x.abs() > 1.0));
    }
}
