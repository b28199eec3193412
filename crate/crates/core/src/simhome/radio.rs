//! Log-distance path loss with wall and floor attenuation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layout::{AccessPoint, HouseLayout, Point};
use super::trajectory::TICK_MS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Wearable {
    #[serde(rename = "left")]
    Left = 0,
    #[serde(rename = "right")]
    Right = 1,
}

impl Wearable {
    pub const BOTH: [Wearable; 2] = [Wearable::Left, Wearable::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Wearable::Left => "left",
            Wearable::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Wearable> {
        match s {
            "left" => Some(Wearable::Left),
            "right" => Some(Wearable::Right),
            _ => None,
        }
    }

    /// Lateral offset of the wrist from the body position.
    pub fn offset(self, offset_m: f64) -> f64 {
        match self {
            Wearable::Left => -offset_m,
            Wearable::Right => offset_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossConfig {
    /// Received power at the reference distance.
    pub p0_dbm: f64,
    pub d0_m: f64,
    pub exponent: f64,
    pub wall_db: f64,
    /// Extra attenuation to an AP on another storey.
    pub floor_db: f64,
    pub shadowing_sigma_db: f64,
    /// Packets weaker than this are never received.
    pub reception_floor_dbm: f64,
    /// Time constant of the AR(1) shadowing process. Zero gives independent
    /// draws per packet; the marginal is Gaussian(0, sigma) either way.
    pub shadowing_correlation_s: f64,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        PathLossConfig {
            p0_dbm: -40.0,
            d0_m: 1.0,
            exponent: 2.5,
            wall_db: 5.0,
            floor_db: 20.0,
            shadowing_sigma_db: 4.0,
            reception_floor_dbm: -100.0,
            shadowing_correlation_s: 0.0,
        }
    }
}

impl PathLossConfig {
    /// Noise-free received power from a wearable at `p`.
    pub fn mean_dbm(&self, layout: &HouseLayout, ap: &AccessPoint, p: Point) -> f64 {
        let dist = p.distance(ap.position).max(self.d0_m);
        let walls = layout.walls_between(p, ap.position) as f64;
        self.p0_dbm
            - 10.0 * self.exponent * (dist / self.d0_m).log10()
            - walls * self.wall_db
            - ap.floor as f64 * self.floor_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiPacket {
    pub timestamp_ms: i64,
    pub wearable: Wearable,
    /// 1-based AP id.
    pub ap: u8,
    pub dbm: f64,
}

/// Synthesizes 5 Hz packets for each wearable and AP along `positions`
/// (body positions on the 5 Hz grid). The shadowing state is carried
/// through `shadow`, one entry per (wearable, AP) channel, so consecutive
/// chunks of one stream can be generated independently of query bounds.
pub fn synthesize_rssi<R: Rng>(
    positions: &[(i64, Point)],
    layout: &HouseLayout,
    config: &PathLossConfig,
    wearable_offset_m: f64,
    shadow: &mut Vec<f64>,
    rng: &mut R,
) -> Vec<RssiPacket> {
    let n_ap = layout.access_points.len();
    let sigma = config.shadowing_sigma_db;
    let rho = if config.shadowing_correlation_s > 0.0 {
        (-(TICK_MS as f64 / 1000.0) / config.shadowing_correlation_s).exp()
    } else {
        0.0
    };
    if shadow.len() != 2 * n_ap {
        *shadow = (0..2 * n_ap)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            })
            .collect();
    }
    let innovation = sigma * (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(positions.len() * 2 * n_ap);
    for &(t, body) in positions {
        for wearable in Wearable::BOTH {
            let p = Point::new(body.x + wearable.offset(wearable_offset_m), body.y);
            for (k, ap) in layout.access_points.iter().enumerate() {
                let slot = &mut shadow[wearable.index() * n_ap + k];
                let z: f64 = StandardNormal.sample(rng);
                *slot = rho * *slot + innovation * z;
                let dbm = config.mean_dbm(layout, ap, p) + *slot;
                if dbm >= config.reception_floor_dbm {
                    out.push(RssiPacket {
                        timestamp_ms: t,
                        wearable,
                        ap: ap.id,
                        dbm,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::simhome::layout::build_default_layout;

    #[test]
    fn reference_distance_gives_p0() {
        let layout = build_default_layout();
        let cfg = PathLossConfig::default();
        let ap = layout.access_points[0];
        assert_eq!(cfg.mean_dbm(&layout, &ap, ap.position), cfg.p0_dbm);
        // inside d0 is clamped to the reference level
        let near = Point::new(ap.position.x + 0.2, ap.position.y);
        assert_eq!(cfg.mean_dbm(&layout, &ap, near), cfg.p0_dbm);
    }

    #[test]
    fn closed_form_without_noise() {
        let layout = build_default_layout();
        let cfg = PathLossConfig {
            shadowing_sigma_db: 0.0,
            ..Default::default()
        };
        // body at (2.7, 7.8): left wrist at (2.4, 7.8), 1.2 m from AP 1 at
        // (1.2, 7.8) in the same room; right wrist at (3.0, 7.8), 1.8 m.
        let body = Point::new(2.7, 7.8);
        let positions: Vec<(i64, Point)> = (0..5).map(|i| (i * 200, body)).collect();
        let mut rng = substream(0, "r", &[]);
        let mut shadow = vec![];
        let packets = synthesize_rssi(&positions, &layout, &cfg, 0.3, &mut shadow, &mut rng);
        let expect_left = -40.0 - 25.0 * 1.2f64.log10();
        let expect_right = -40.0 - 25.0 * 1.8f64.log10();
        let ap1: Vec<&RssiPacket> = packets.iter().filter(|p| p.ap == 1).collect();
        assert_eq!(ap1.len(), 10);
        for p in ap1 {
            let expect = match p.wearable {
                Wearable::Left => expect_left,
                Wearable::Right => expect_right,
            };
            assert!((p.dbm - expect).abs() < 1e-12, "{} vs {expect}", p.dbm);
        }
        // AP 4 in the living room sits two walls away
        let ap4 = layout.access_points[3];
        let d = Point::new(2.4, 7.8).distance(ap4.position);
        let expect = -40.0 - 25.0 * d.log10() - 2.0 * 5.0;
        let got = packets
            .iter()
            .find(|p| p.ap == 4 && p.wearable == Wearable::Left)
            .unwrap()
            .dbm;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn weak_channels_are_absent() {
        let layout = build_default_layout();
        let cfg = PathLossConfig {
            shadowing_sigma_db: 0.0,
            reception_floor_dbm: -70.0,
            ..Default::default()
        };
        let body = Point::new(1.0, 8.0);
        let mut shadow = vec![];
        let mut rng = substream(0, "r", &[]);
        let packets = synthesize_rssi(&[(0, body)], &layout, &cfg, 0.3, &mut shadow, &mut rng);
        for ap in &layout.access_points {
            for w in Wearable::BOTH {
                let p = Point::new(body.x + w.offset(0.3), body.y);
                let present = packets.iter().any(|k| k.ap == ap.id && k.wearable == w);
                assert_eq!(
                    present,
                    cfg.mean_dbm(&layout, ap, p) >= -70.0,
                    "AP {}",
                    ap.id
                );
            }
        }
        assert!(packets.iter().all(|p| p.dbm >= -70.0));
        assert!(packets.len() < 20);
    }

    #[test]
    fn correlated_shadowing_keeps_marginal_sigma() {
        let layout = build_default_layout();
        let cfg = PathLossConfig {
            shadowing_correlation_s: 5.0,
            reception_floor_dbm: -1000.0,
            ..Default::default()
        };
        let body = Point::new(2.0, 7.0);
        let positions: Vec<(i64, Point)> = (0..20_000).map(|i| (i * 200, body)).collect();
        let mut shadow = vec![];
        let mut rng = substream(4, "r", &[]);
        let packets = synthesize_rssi(&positions, &layout, &cfg, 0.3, &mut shadow, &mut rng);
        let ap = layout.access_points[0];
        let mean = cfg.mean_dbm(&layout, &ap, Point::new(1.7, 7.0));
        let res: Vec<f64> = packets
            .iter()
            .filter(|p| p.ap == 1 && p.wearable == Wearable::Left)
            .map(|p| p.dbm - mean)
            .collect();
        let var = res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64;
        assert!((var.sqrt() - 4.0).abs() < 0.6, "sd {}", var.sqrt());
    }
}
