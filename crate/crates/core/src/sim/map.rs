//! Four-arm intersection geometry: drivable area, routes, and spawn slots.
//!
//! The map is a plus-shaped road: two orthogonal strips crossing at the
//! origin. Each arm carries `lanes_per_arm` entry lanes and the same number
//! of exit lanes under right-hand traffic. Routes run from the outer end of
//! an entry lane to the outer end of an exit lane on another arm, connected
//! inside the central square by a straight line (through movements) or a
//! quadratic Bezier curve (turns).

use super::geom::{closest_point_on_segment, Vec2};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub const ARM_COUNT: usize = 4;
/// Polyline resolution for turn connectors (segments per curve).
const BEZIER_SEGMENTS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    East,
    North,
    West,
    South,
}

impl Arm {
    pub const ALL: [Arm; ARM_COUNT] = [Arm::East, Arm::North, Arm::West, Arm::South];

    pub fn index(self) -> usize {
        match self {
            Arm::East => 0,
            Arm::North => 1,
            Arm::West => 2,
            Arm::South => 3,
        }
    }

    /// Unit vector pointing from the center outward along this arm.
    pub fn outward(self) -> Vec2 {
        match self {
            Arm::East => Vec2::new(1.0, 0.0),
            Arm::North => Vec2::new(0.0, 1.0),
            Arm::West => Vec2::new(-1.0, 0.0),
            Arm::South => Vec2::new(0.0, -1.0),
        }
    }

    pub fn opposite(self) -> Arm {
        match self {
            Arm::East => Arm::West,
            Arm::North => Arm::South,
            Arm::West => Arm::East,
            Arm::South => Arm::North,
        }
    }

    /// Heading (radians) of traffic entering the intersection from this arm.
    pub fn entry_heading(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            Arm::East => PI,
            Arm::North => -FRAC_PI_2,
            Arm::West => 0.0,
            Arm::South => FRAC_PI_2,
        }
    }

    /// Heading of traffic leaving the intersection onto this arm.
    pub fn exit_heading(self) -> f64 {
        self.opposite().entry_heading()
    }
}

/// A complete path across the intersection, stored as a polyline with
/// cumulative arc length and evenly spaced checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Route {
    pub id: usize,
    pub entry_arm: Arm,
    pub entry_lane: usize,
    pub exit_arm: Arm,
    pub exit_lane: usize,
    pub points: Vec<Vec2>,
    /// Arc length from the route start to each point; same length as `points`.
    pub cum_len: Vec<f64>,
    pub total_len: f64,
    /// Arc positions of navigation checkpoints (every `checkpoint_spacing`
    /// meters, always including the endpoint).
    pub checkpoints: Vec<f64>,
}

impl Route {
    fn from_points(points: Vec<Vec2>, checkpoint_spacing: f64) -> Route {
        let mut cum_len = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum_len.push(0.0);
        for w in points.windows(2) {
            acc += w[0].dist(w[1]);
            cum_len.push(acc);
        }
        let mut checkpoints = Vec::new();
        let mut s = checkpoint_spacing;
        while s < acc {
            checkpoints.push(s);
            s += checkpoint_spacing;
        }
        checkpoints.push(acc);
        Route {
            id: 0,
            entry_arm: Arm::East,
            entry_lane: 0,
            exit_arm: Arm::West,
            exit_lane: 0,
            points,
            cum_len,
            total_len: acc,
            checkpoints,
        }
    }

    /// Position and unit tangent at arc position `s` (clamped to the route).
    pub fn point_at(&self, s: f64) -> (Vec2, Vec2) {
        let s = s.clamp(0.0, self.total_len);
        // Index of the segment containing s.
        let i = match self
            .cum_len
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(self.points.len() - 2),
            Err(i) => (i - 1).min(self.points.len() - 2),
        };
        let a = self.points[i];
        let b = self.points[i + 1];
        let seg_len = self.cum_len[i + 1] - self.cum_len[i];
        let t = if seg_len > 0.0 {
            (s - self.cum_len[i]) / seg_len
        } else {
            0.0
        };
        let dir = b.sub(a);
        let n = dir.norm();
        let tangent = if n > 0.0 {
            dir.scale(1.0 / n)
        } else {
            Vec2::new(1.0, 0.0)
        };
        (a.add(dir.scale(t)), tangent)
    }

    /// Arc position of the point on the route closest to `p`, searched only
    /// within the window `[s_lo, s_hi]`. Windowed search keeps projection
    /// stable where a curving route passes near itself.
    pub fn project(&self, p: Vec2, s_lo: f64, s_hi: f64) -> f64 {
        let s_lo = s_lo.clamp(0.0, self.total_len);
        let s_hi = s_hi.clamp(0.0, self.total_len);
        let mut best_d2 = f64::INFINITY;
        let mut best_s = s_lo;
        for i in 0..self.points.len() - 1 {
            if self.cum_len[i + 1] < s_lo || self.cum_len[i] > s_hi {
                continue;
            }
            let a = self.points[i];
            let b = self.points[i + 1];
            let (q, t) = closest_point_on_segment(p, a, b);
            let d2 = q.sub(p).dot(q.sub(p));
            if d2 < best_d2 {
                best_d2 = d2;
                best_s = self.cum_len[i] + t * (self.cum_len[i + 1] - self.cum_len[i]);
            }
        }
        best_s.clamp(s_lo, s_hi)
    }

    /// Checkpoint arc positions strictly ahead of `s` (first two are used in
    /// observations). Always returns at least the route endpoint.
    pub fn next_checkpoints(&self, s: f64) -> (f64, f64) {
        let idx = self.checkpoints.partition_point(|&c| c <= s);
        let first = *self
            .checkpoints
            .get(idx)
            .unwrap_or(&self.total_len);
        let second = *self.checkpoints.get(idx + 1).unwrap_or(&first);
        (first, second)
    }
}

/// Static intersection geometry shared by every episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapGeometry {
    pub arm_length: f64,
    pub lane_width: f64,
    pub lanes_per_arm: usize,
    /// Half the width of each road strip; also the half-side of the central
    /// conflict square.
    pub half_width: f64,
    pub routes: Vec<Route>,
    /// Outline of the drivable plus shape as 12 segments, counterclockwise.
    pub boundary: Vec<(Vec2, Vec2)>,
}

impl MapGeometry {
    pub fn new(
        arm_length: f64,
        lane_width: f64,
        lanes_per_arm: usize,
        checkpoint_spacing: f64,
    ) -> Result<MapGeometry> {
        if arm_length <= 0.0 || lane_width <= 0.0 || lanes_per_arm == 0 {
            return Err(Error::Sim(format!(
                "invalid map dimensions: arm_length={arm_length} lane_width={lane_width} \
                 lanes_per_arm={lanes_per_arm}"
            )));
        }
        if checkpoint_spacing <= 0.0 {
            return Err(Error::Sim(format!(
                "checkpoint spacing must be positive, got {checkpoint_spacing}"
            )));
        }
        let half_width = lanes_per_arm as f64 * lane_width;
        let mut geo = MapGeometry {
            arm_length,
            lane_width,
            lanes_per_arm,
            half_width,
            routes: Vec::new(),
            boundary: boundary_segments(half_width, half_width + arm_length),
        };
        geo.build_routes(checkpoint_spacing);
        Ok(geo)
    }

    /// Lateral center offset of entry/exit lane `k` from the arm axis.
    fn lane_offset(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.lane_width
    }

    /// Unit vector pointing to the right of a heading.
    fn right_of(heading: f64) -> Vec2 {
        Vec2::new(heading.sin(), -heading.cos())
    }

    /// Start of entry lane `k` on `arm` (at the outer end) and the point
    /// where it meets the central square.
    fn entry_lane_ends(&self, arm: Arm, k: usize) -> (Vec2, Vec2) {
        let out = arm.outward();
        let r = Self::right_of(arm.entry_heading()).scale(self.lane_offset(k));
        let outer = out.scale(self.half_width + self.arm_length).add(r);
        let inner = out.scale(self.half_width).add(r);
        (outer, inner)
    }

    /// Point where exit lane `k` on `arm` leaves the central square, and its
    /// outer end.
    fn exit_lane_ends(&self, arm: Arm, k: usize) -> (Vec2, Vec2) {
        let out = arm.outward();
        let r = Self::right_of(arm.exit_heading()).scale(self.lane_offset(k));
        let inner = out.scale(self.half_width).add(r);
        let outer = out.scale(self.half_width + self.arm_length).add(r);
        (inner, outer)
    }

    fn build_routes(&mut self, checkpoint_spacing: f64) {
        let mut routes = Vec::new();
        for &entry in &Arm::ALL {
            for k in 0..self.lanes_per_arm {
                for &exit in &Arm::ALL {
                    if exit == entry {
                        continue; // no U-turns
                    }
                    let (entry_outer, entry_inner) = self.entry_lane_ends(entry, k);
                    let (exit_inner, exit_outer) = self.exit_lane_ends(exit, k);
                    let mut points = vec![entry_outer, entry_inner];
                    if exit == entry.opposite() {
                        // Through movement: entry and exit lanes are collinear.
                        points.push(exit_inner);
                    } else {
                        // Turn: quadratic Bezier with its control point at the
                        // intersection of the two lane center lines.
                        let control = if entry.outward().x != 0.0 {
                            Vec2::new(exit_inner.x, entry_inner.y)
                        } else {
                            Vec2::new(entry_inner.x, exit_inner.y)
                        };
                        for i in 1..=BEZIER_SEGMENTS {
                            let t = i as f64 / BEZIER_SEGMENTS as f64;
                            let mt = 1.0 - t;
                            let p = entry_inner
                                .scale(mt * mt)
                                .add(control.scale(2.0 * mt * t))
                                .add(exit_inner.scale(t * t));
                            points.push(p);
                        }
                    }
                    points.push(exit_outer);
                    let mut route = Route::from_points(points, checkpoint_spacing);
                    route.id = routes.len();
                    route.entry_arm = entry;
                    route.entry_lane = k;
                    route.exit_arm = exit;
                    route.exit_lane = k;
                    routes.push(route);
                }
            }
        }
        self.routes = routes;
    }

    /// Whether `p` lies on the road (boundary inclusive).
    pub fn on_road(&self, p: Vec2) -> bool {
        let ext = self.half_width + self.arm_length;
        let h = self.half_width;
        (p.x.abs() <= ext && p.y.abs() <= h) || (p.y.abs() <= ext && p.x.abs() <= h)
    }

    /// Whether `p` lies inside the central conflict square (closed).
    pub fn in_conflict_zone(&self, p: Vec2) -> bool {
        p.x.abs() <= self.half_width && p.y.abs() <= self.half_width
    }

    /// Spawn position for queue slot `slot` on the entry leg of `route`:
    /// arc position, world position, and heading. Slot 0 sits `setback`
    /// meters behind the conflict-square edge; each further slot another
    /// `headway` meters back. Fails when the arm is too short.
    pub fn spawn_state(
        &self,
        route: &Route,
        slot: usize,
        setback: f64,
        headway: f64,
    ) -> Result<(f64, Vec2, f64)> {
        let back = setback + slot as f64 * headway;
        let s = self.arm_length - back;
        if s < 0.0 {
            return Err(Error::Sim(format!(
                "no room for spawn slot {slot}: needs {back:.1} m of queue on a {:.1} m arm",
                self.arm_length
            )));
        }
        let (pos, tangent) = route.point_at(s);
        Ok((s, pos, tangent.y.atan2(tangent.x)))
    }
}

fn boundary_segments(h: f64, ext: f64) -> Vec<(Vec2, Vec2)> {
    let corners = [
        Vec2::new(h, h),
        Vec2::new(h, ext),
        Vec2::new(-h, ext),
        Vec2::new(-h, h),
        Vec2::new(-ext, h),
        Vec2::new(-ext, -h),
        Vec2::new(-h, -h),
        Vec2::new(-h, -ext),
        Vec2::new(h, -ext),
        Vec2::new(h, -h),
        Vec2::new(ext, -h),
        Vec2::new(ext, h),
    ];
    (0..corners.len())
        .map(|i| (corners[i], corners[(i + 1) % corners.len()]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_map() -> MapGeometry {
        MapGeometry::new(60.0, 3.5, 2, 10.0).unwrap()
    }

    #[test]
    fn route_count_at_defaults() {
        assert_eq!(default_map().routes.len(), 24);
    }

    #[test]
    fn no_u_turns() {
        for r in &default_map().routes {
            assert_ne!(r.entry_arm, r.exit_arm);
        }
    }

    #[test]
    fn routes_stay_on_road_and_are_continuous() {
        let map = default_map();
        for r in &map.routes {
            for w in r.points.windows(2) {
                assert!(w[0].dist(w[1]) > 0.0, "degenerate segment on route {}", r.id);
            }
            // Sample densely along the centerline.
            let mut s = 0.0;
            while s <= r.total_len {
                let (p, _) = r.point_at(s);
                assert!(map.on_road(p), "route {} leaves the road at s={s}", r.id);
                s += 0.25;
            }
        }
    }

    #[test]
    fn through_route_is_straight_and_measures_correctly() {
        let map = default_map();
        let r = map
            .routes
            .iter()
            .find(|r| r.entry_arm == Arm::West && r.exit_arm == Arm::East && r.entry_lane == 0)
            .unwrap();
        // 60 m entry + 14 m across the square + 60 m exit.
        assert!((r.total_len - 134.0).abs() < 1e-9);
        let (p0, t0) = r.point_at(0.0);
        assert!((p0.x - (-67.0)).abs() < 1e-9);
        assert!((p0.y - (-1.75)).abs() < 1e-9);
        assert!((t0.x - 1.0).abs() < 1e-12);
        let (pe, _) = r.point_at(r.total_len);
        assert!((pe.x - 67.0).abs() < 1e-9 && (pe.y - (-1.75)).abs() < 1e-9);
    }

    #[test]
    fn right_hand_traffic_lane_placement() {
        let map = default_map();
        // Westbound entry from the east arm keeps to the north half.
        let (outer, inner) = map.entry_lane_ends(Arm::East, 0);
        assert!(outer.y > 0.0 && inner.y > 0.0);
        assert!((outer.x - 67.0).abs() < 1e-9 && (inner.x - 7.0).abs() < 1e-9);
        // Southbound entry from the north arm keeps to the west half.
        let (outer, _) = map.entry_lane_ends(Arm::North, 1);
        assert!((outer.x - (-5.25)).abs() < 1e-9);
        // Northbound exit onto the north arm keeps to the east half.
        let (inner, _) = map.exit_lane_ends(Arm::North, 0);
        assert!((inner.x - 1.75).abs() < 1e-9);
    }

    #[test]
    fn turn_connectors_stay_inside_conflict_square() {
        let map = default_map();
        for r in &map.routes {
            if r.exit_arm == r.entry_arm.opposite() {
                continue;
            }
            // Between the two boundary crossings the curve must stay in the square.
            let mut s = 0.0;
            while s <= r.total_len {
                let (p, _) = r.point_at(s);
                let inside_x = p.x.abs() <= map.half_width + 1e-9;
                let inside_y = p.y.abs() <= map.half_width + 1e-9;
                if p.x.abs() < map.half_width && p.y.abs() < map.half_width {
                    assert!(inside_x && inside_y);
                }
                s += 0.1;
            }
        }
    }

    #[test]
    fn checkpoints_every_ten_meters_plus_endpoint() {
        let map = default_map();
        let r = &map.routes[0];
        for w in r.checkpoints.windows(2) {
            assert!(w[1] - w[0] <= 10.0 + 1e-9);
        }
        assert!((r.checkpoints.last().unwrap() - r.total_len).abs() < 1e-12);
        let (c1, c2) = r.next_checkpoints(0.0);
        assert!((c1 - 10.0).abs() < 1e-9 && (c2 - 20.0).abs() < 1e-9);
        let (e1, e2) = r.next_checkpoints(r.total_len);
        assert!((e1 - r.total_len).abs() < 1e-12 && (e2 - e1).abs() < 1e-12);
    }

    #[test]
    fn projection_recovers_arc_position() {
        let map = default_map();
        for r in map.routes.iter().take(6) {
            for i in 0..20 {
                let s = r.total_len * i as f64 / 19.0;
                let (p, _) = r.point_at(s);
                let s_hat = r.project(p, (s - 8.0).max(0.0), s + 8.0);
                assert!(
                    (s_hat - s).abs() < 0.05,
                    "route {}: projected {s_hat} for true {s}",
                    r.id
                );
            }
        }
    }

    #[test]
    fn spawn_slots_fill_backwards() {
        let map = default_map();
        let r = &map.routes[0];
        let (s0, p0, h0) = map.spawn_state(r, 0, 5.0, 10.0).unwrap();
        assert!((s0 - 55.0).abs() < 1e-9);
        assert!((p0.dist(Vec2::new(12.0, 1.75))).abs() < 1e-9);
        assert!((h0 - std::f64::consts::PI).abs() < 1e-9);
        let (s5, ..) = map.spawn_state(r, 5, 5.0, 10.0).unwrap();
        assert!((s5 - 5.0).abs() < 1e-9);
        assert!(map.spawn_state(r, 6, 5.0, 10.0).is_err());
    }

    #[test]
    fn conflict_zone_is_closed_square() {
        let map = default_map();
        assert!(map.in_conflict_zone(Vec2::new(7.0, 7.0)));
        assert!(map.in_conflict_zone(Vec2::new(0.0, 0.0)));
        assert!(!map.in_conflict_zone(Vec2::new(7.000001, 0.0)));
    }

    #[test]
    fn boundary_has_twelve_segments_and_closes() {
        let map = default_map();
        assert_eq!(map.boundary.len(), 12);
        for i in 0..12 {
            let (_, b) = map.boundary[i];
            let (a_next, _) = map.boundary[(i + 1) % 12];
            assert_eq!(b, a_next);
        }
    }
}
