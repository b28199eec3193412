use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The six annotated ground-floor zones. The discriminant is the class index
/// used by every model head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Room {
    Kitchen = 0,
    Hallway = 1,
    Dining = 2,
    Living = 3,
    Stairs = 4,
    Porch = 5,
}

pub const N_ROOMS: usize = 6;

impl Room {
    pub const ALL: [Room; N_ROOMS] = [
        Room::Kitchen,
        Room::Hallway,
        Room::Dining,
        Room::Living,
        Room::Stairs,
        Room::Porch,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Room> {
        Room::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Room::Kitchen => "kitchen",
            Room::Hallway => "hallway",
            Room::Dining => "dining",
            Room::Living => "living",
            Room::Stairs => "stairs",
            Room::Porch => "porch",
        }
    }

    pub fn is_hallway(self) -> bool {
        self == Room::Hallway
    }
}

impl fmt::Display for Room {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Room {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Room::ALL
            .iter()
            .copied()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown room `{s}`")))
    }
}

/// One of the three hallway-mediated room pairs tracked as gait features.
/// Pairs are unordered: kitchen to living and living to kitchen pool together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoomPair {
    KitchenLiving = 0,
    KitchenDining = 1,
    DiningLiving = 2,
}

impl RoomPair {
    pub const ALL: [RoomPair; 3] = [
        RoomPair::KitchenLiving,
        RoomPair::KitchenDining,
        RoomPair::DiningLiving,
    ];

    pub fn of(a: Room, b: Room) -> Option<RoomPair> {
        use Room::*;
        match (a, b) {
            (Kitchen, Living) | (Living, Kitchen) => Some(RoomPair::KitchenLiving),
            (Kitchen, Dining) | (Dining, Kitchen) => Some(RoomPair::KitchenDining),
            (Dining, Living) | (Living, Dining) => Some(RoomPair::DiningLiving),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            RoomPair::KitchenLiving => "kitchen-living",
            RoomPair::KitchenDining => "kitchen-dining",
            RoomPair::DiningLiving => "dining-living",
        }
    }
}

impl fmt::Display for RoomPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
