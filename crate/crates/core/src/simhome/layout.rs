use serde::{Deserialize, Serialize};

use crate::room::Room;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon {
            vertices: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        }
    }

    /// Even-odd ray casting. Points on the lower/left edges count as inside,
    /// points on the upper/right edges as outside, so tiled rectangles
    /// partition the plane without overlap.
    pub fn contains(&self, p: Point) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn centroid(&self) -> Point {
        // area-weighted centroid of a simple polygon
        let v = &self.vertices;
        let (mut area, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            let cross = a.x * b.y - b.x * a.y;
            area += cross;
            cx += (a.x + b.x) * cross;
            cy += (a.y + b.y) * cross;
        }
        area *= 0.5;
        Point::new(cx / (6.0 * area), cy / (6.0 * area))
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: Point,
    pub b: Point,
}

impl Wall {
    fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Wall {
            a: Point::new(ax, ay),
            b: Point::new(bx, by),
        }
    }

    /// Proper crossing test between the wall and the segment `p`-`q`.
    pub fn crosses(&self, p: Point, q: Point) -> bool {
        fn orient(a: Point, b: Point, c: Point) -> f64 {
            (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
        }
        let d1 = orient(self.a, self.b, p);
        let d2 = orient(self.a, self.b, q);
        let d3 = orient(p, q, self.a);
        let d4 = orient(p, q, self.b);
        (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    /// 1-based id, as used in channel names and AP masks.
    pub id: u8,
    pub position: Point,
    /// 0 = ground floor, 1 = first floor.
    pub floor: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseLayout {
    pub rooms: Vec<(Room, Polygon)>,
    pub access_points: Vec<AccessPoint>,
    pub hallway: Room,
    pub adjacency: Vec<(Room, Room)>,
    pub walls: Vec<Wall>,
    pub building: Polygon,
}

pub const N_ACCESS_POINTS: usize = 10;

/// The fixed two-storey house: six annotated ground-floor zones around a
/// central hallway, seven ground-floor APs and three upstairs.
///
/// ```text
///  y=9 +---------+----+-----------+
///      | kitchen |    |  living   |
///  y=5 +---------+ ha +--+--------+ y=4.5
///      | dining  | ll |st| utility|
/// y=1.5+---------+----+--+--------+
///      |         |porch|          |
///  y=0 +---------+----+-----------+
///      0        4.5  6.5 8.5      12
/// ```
pub fn build_default_layout() -> HouseLayout {
    let rooms = vec![
        (Room::Kitchen, Polygon::rect(0.0, 5.0, 4.5, 9.0)),
        (Room::Hallway, Polygon::rect(4.5, 1.5, 6.5, 9.0)),
        (Room::Dining, Polygon::rect(0.0, 1.5, 4.5, 5.0)),
        (Room::Living, Polygon::rect(6.5, 4.5, 12.0, 9.0)),
        (Room::Stairs, Polygon::rect(6.5, 1.5, 8.5, 4.5)),
        (Room::Porch, Polygon::rect(4.5, 0.0, 6.5, 1.5)),
    ];
    let ap = |id, x, y, floor| AccessPoint {
        id,
        position: Point::new(x, y),
        floor,
    };
    let access_points = vec![
        ap(1, 1.2, 7.8, 0),
        ap(2, 1.5, 2.5, 0),
        ap(3, 5.5, 7.5, 0),
        ap(4, 10.5, 8.0, 0),
        ap(5, 7.5, 5.5, 0),
        ap(6, 7.5, 2.5, 0),
        ap(7, 5.5, 0.7, 0),
        ap(8, 2.0, 7.0, 1),
        ap(9, 9.0, 7.0, 1),
        ap(10, 10.0, 2.5, 1),
    ];
    let walls = vec![
        // exterior
        Wall::new(0.0, 0.0, 12.0, 0.0),
        Wall::new(12.0, 0.0, 12.0, 9.0),
        Wall::new(12.0, 9.0, 0.0, 9.0),
        Wall::new(0.0, 9.0, 0.0, 0.0),
        // interior
        Wall::new(4.5, 0.0, 4.5, 9.0),
        Wall::new(6.5, 0.0, 6.5, 9.0),
        Wall::new(0.0, 5.0, 4.5, 5.0),
        Wall::new(0.0, 1.5, 12.0, 1.5),
        Wall::new(6.5, 4.5, 12.0, 4.5),
        Wall::new(8.5, 1.5, 8.5, 4.5),
    ];
    let adjacency = Room::ALL
        .iter()
        .copied()
        .filter(|r| !r.is_hallway())
        .map(|r| (Room::Hallway, r))
        .collect();
    HouseLayout {
        rooms,
        access_points,
        hallway: Room::Hallway,
        adjacency,
        walls,
        building: Polygon::rect(0.0, 0.0, 12.0, 9.0),
    }
}

impl HouseLayout {
    pub fn polygon(&self, room: Room) -> &Polygon {
        &self
            .rooms
            .iter()
            .find(|(r, _)| *r == room)
            .expect("every labelled room has a polygon")
            .1
    }

    pub fn centroid(&self, room: Room) -> Point {
        self.polygon(room).centroid()
    }

    /// The labelled room containing `p`, if any.
    pub fn room_at(&self, p: Point) -> Option<Room> {
        self.rooms
            .iter()
            .find(|(_, poly)| poly.contains(p))
            .map(|(r, _)| *r)
    }

    pub fn are_adjacent(&self, a: Room, b: Room) -> bool {
        self.adjacency
            .iter()
            .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// Rooms reachable from `room` through the hallway hub.
    pub fn destinations(&self, room: Room) -> Vec<Room> {
        Room::ALL
            .iter()
            .copied()
            .filter(|&r| r != room && r != self.hallway)
            .filter(|&r| self.are_adjacent(self.hallway, r))
            .collect()
    }

    pub fn walls_between(&self, p: Point, q: Point) -> usize {
        self.walls.iter().filter(|w| w.crosses(p, q)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hallway_is_the_hub() {
        let layout = build_default_layout();
        for room in [
            Room::Kitchen,
            Room::Dining,
            Room::Living,
            Room::Stairs,
            Room::Porch,
        ] {
            assert!(layout.are_adjacent(Room::Hallway, room), "{room}");
        }
        assert!(!layout.are_adjacent(Room::Kitchen, Room::Dining));
        assert_eq!(layout.rooms.len(), 6);
    }

    #[test]
    fn access_points_inside_building() {
        let layout = build_default_layout();
        assert_eq!(layout.access_points.len(), N_ACCESS_POINTS);
        for ap in &layout.access_points {
            assert!(layout.building.contains(ap.position), "AP {}", ap.id);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(build_default_layout(), build_default_layout());
    }

    #[test]
    fn centroid_to_hallway_centroid_stays_in_two_rooms() {
        let layout = build_default_layout();
        let hub = layout.centroid(Room::Hallway);
        for room in layout.destinations(Room::Hallway) {
            let start = layout.centroid(room);
            let mut seen = vec![];
            for i in 0..=1000 {
                let p = start.lerp(hub, i as f64 / 1000.0);
                let r = layout.room_at(p).expect("path stays inside labelled rooms");
                if seen.last() != Some(&r) {
                    seen.push(r);
                }
            }
            assert_eq!(seen, vec![room, Room::Hallway], "{room}");
        }
    }

    #[test]
    fn wall_counting() {
        let layout = build_default_layout();
        // kitchen to living straight through the hallway crosses two walls
        assert_eq!(
            layout.walls_between(Point::new(2.0, 7.0), Point::new(9.0, 7.0)),
            2
        );
        assert_eq!(
            layout.walls_between(Point::new(2.0, 7.0), Point::new(3.0, 8.0)),
            0
        );
    }
}
