//! Per-step driving reward: progress/speed/arrival terms, per-step crash and
//! off-road penalties, a front-sector safe-distance penalty, and rule-based
//! right-of-way responsibility that redistributes crash penalties within a
//! colliding pair.

use crate::sim::world::{CollisionEvent, StepOutcome, WorldState};
use crate::sim::geom::wrap_angle;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Reward per meter of route progress.
    pub c_progress: f64,
    /// Reward per step at full forward speed.
    pub c_speed: f64,
    pub arrival_bonus: f64,
    /// Positive magnitude; applied as a negative reward per contacting step.
    pub crash_penalty_per_step: f64,
    /// Positive magnitude; applied as a negative reward per off-road step.
    pub out_of_road_penalty_per_step: f64,
    pub safe_distance_enabled: bool,
    pub right_of_way_enabled: bool,
    /// Distance below which the safe-distance penalty ramps in.
    pub safe_distance_threshold: f64,
    /// Half-angle of the front lidar sector used for the safe distance, in
    /// degrees; rays with offset in [-half, +half) count (10 rays at 72-ray
    /// default).
    pub front_sector_half_angle_deg: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            c_progress: 1.0,
            c_speed: 0.1,
            arrival_bonus: 10.0,
            crash_penalty_per_step: 5.0,
            out_of_road_penalty_per_step: 5.0,
            safe_distance_enabled: true,
            right_of_way_enabled: true,
            safe_distance_threshold: 5.0,
            front_sector_half_angle_deg: 25.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> crate::Result<()> {
        for (name, v) in [
            ("c_progress", self.c_progress),
            ("c_speed", self.c_speed),
            ("arrival_bonus", self.arrival_bonus),
            ("crash_penalty_per_step", self.crash_penalty_per_step),
            ("out_of_road_penalty_per_step", self.out_of_road_penalty_per_step),
            ("safe_distance_threshold", self.safe_distance_threshold),
            ("front_sector_half_angle_deg", self.front_sector_half_angle_deg),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(crate::Error::Config(format!(
                    "reward coefficient {name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One agent-step's reward, split into its components. `total` is always the
/// sum of the other fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub progress: f64,
    pub speed: f64,
    pub arrival: f64,
    pub crash_penalty: f64,
    pub out_of_road_penalty: f64,
    pub safe_distance_penalty: f64,
    pub right_of_way_adjustment: f64,
    pub total: f64,
}

impl RewardBreakdown {
    fn finalize(mut self) -> Self {
        self.total = self.progress
            + self.speed
            + self.arrival
            + self.crash_penalty
            + self.out_of_road_penalty
            + self.safe_distance_penalty
            + self.right_of_way_adjustment;
        self
    }
}

/// Progress, speed, arrival, and flat per-step penalties; both shaping
/// fields stay zero.
pub fn base_reward(outcome: &StepOutcome, v_max: f64, cfg: &RewardConfig) -> RewardBreakdown {
    RewardBreakdown {
        progress: cfg.c_progress * outcome.progress_delta,
        speed: cfg.c_speed * outcome.speed.max(0.0) / v_max,
        arrival: if outcome.arrived_now { cfg.arrival_bonus } else { 0.0 },
        crash_penalty: if outcome.in_contact {
            -cfg.crash_penalty_per_step
        } else {
            0.0
        },
        out_of_road_penalty: if outcome.off_road {
            -cfg.out_of_road_penalty_per_step
        } else {
            0.0
        },
        ..Default::default()
    }
    .finalize()
}

/// Smallest normalized return among the rays inside the front sector
/// [-half, half) degrees around the heading (1.0 for an empty scan).
pub fn safe_front_sector_min(scan: &[f64], cfg: &RewardConfig) -> f64 {
    if scan.is_empty() {
        return 1.0;
    }
    let spacing = 360.0 / scan.len() as f64;
    let half = cfg.front_sector_half_angle_deg;
    let mut min_norm = f64::INFINITY;
    for (i, &v) in scan.iter().enumerate() {
        let mut offset = i as f64 * spacing;
        if offset >= 180.0 {
            offset -= 360.0;
        }
        if (-half..half).contains(&offset) {
            min_norm = min_norm.min(v);
        }
    }
    if min_norm.is_finite() {
        min_norm
    } else {
        1.0
    }
}

/// Penalty ramping linearly from 0 at the threshold distance to -0.5 at
/// contact, driven by the closest front-sector lidar return.
pub fn safe_distance_penalty(scan: &[f64], range: f64, cfg: &RewardConfig) -> f64 {
    if !cfg.safe_distance_enabled || scan.is_empty() {
        return 0.0;
    }
    let min_norm = safe_front_sector_min(scan, cfg);
    let t = cfg.safe_distance_threshold;
    let d = (min_norm * range).min(t);
    if d >= t {
        0.0
    } else {
        -0.5 * (t - d) / t
    }
}

fn sector_contains(heading: f64, from: crate::sim::Vec2, to: crate::sim::Vec2, half: f64) -> bool {
    let bearing = (to.y - from.y).atan2(to.x - from.x);
    wrap_angle(bearing - heading).abs() <= half
}

/// Clockwise angle from `heading` to the direction of `to`, in [0, 2*pi).
fn clockwise_bearing(heading: f64, from: crate::sim::Vec2, to: crate::sim::Vec2) -> f64 {
    let bearing = (to.y - from.y).atan2(to.x - from.x);
    let cw = wrap_angle(heading - bearing);
    if cw < 0.0 {
        cw + 2.0 * PI
    } else {
        cw
    }
}

/// Pick the agent responsible for a collision. Ordered rules:
/// 1. rear-end: contact point in one vehicle's front quarter (within 45
///    degrees of its heading) and the other's rear quarter — the front
///    hitter is responsible;
/// 2. right-hand priority inside the conflict zone: a vehicle with the other
///    approaching from its right (clockwise bearing in the open interval
///    (0, 180) degrees) had to yield and is responsible; the lower-id agent
///    is examined first;
/// 3. otherwise the faster vehicle (by absolute speed); exact ties go to the
///    lower id.
pub fn assign_responsibility(event: &CollisionEvent, world: &WorldState) -> usize {
    let (i, j) = event.pair;
    let vi = &world.vehicles[i];
    let vj = &world.vehicles[j];
    let cp = event.contact_point;
    let quarter = PI / 4.0;

    let front_i = sector_contains(vi.heading, vi.position, cp, quarter);
    let rear_i = sector_contains(vi.heading + PI, vi.position, cp, quarter);
    let front_j = sector_contains(vj.heading, vj.position, cp, quarter);
    let rear_j = sector_contains(vj.heading + PI, vj.position, cp, quarter);
    if front_i && rear_j {
        return i;
    }
    if front_j && rear_i {
        return j;
    }

    if world.in_conflict_zone(vi.position) && world.in_conflict_zone(vj.position) {
        let cw_i = clockwise_bearing(vi.heading, vi.position, vj.position);
        if cw_i > 0.0 && cw_i < PI {
            return i;
        }
        let cw_j = clockwise_bearing(vj.heading, vj.position, vi.position);
        if cw_j > 0.0 && cw_j < PI {
            return j;
        }
    }

    let si = vi.speed.abs();
    let sj = vj.speed.abs();
    if sj > si {
        j
    } else {
        i
    }
}

/// Crash penalty and right-of-way adjustment for the two members of a
/// colliding pair, ordered (i, j). With the rule enabled the responsible
/// agent carries the whole pair penalty (doubled) and the other is spared;
/// disabled, both take the flat per-step penalty.
pub fn right_of_way_penalty(
    event: &CollisionEvent,
    responsible: usize,
    cfg: &RewardConfig,
) -> [(f64, f64); 2] {
    let p = cfg.crash_penalty_per_step;
    if !cfg.right_of_way_enabled {
        return [(-p, 0.0), (-p, 0.0)];
    }
    let split = |agent: usize| if agent == responsible { (-p, -p) } else { (0.0, 0.0) };
    [split(event.pair.0), split(event.pair.1)]
}

/// Full reward for one agent-step: base terms, safe-distance shaping from
/// the scan, and per-pair crash accounting over this step's collision
/// events.
pub fn total_reward(
    world: &WorldState,
    agent: usize,
    outcome: &StepOutcome,
    scan: Option<&[f64]>,
    events: &[CollisionEvent],
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let mut r = base_reward(outcome, world.config.vehicle.max_speed, cfg);
    if let Some(scan) = scan {
        r.safe_distance_penalty = safe_distance_penalty(scan, world.config.lidar.range, cfg);
    }
    if cfg.right_of_way_enabled {
        // Replace the flat penalty with per-pair responsibility splits.
        r.crash_penalty = 0.0;
        r.right_of_way_adjustment = 0.0;
        for e in events {
            let (i, j) = e.pair;
            if i != agent && j != agent {
                continue;
            }
            let responsible = assign_responsibility(e, world);
            let pair = right_of_way_penalty(e, responsible, cfg);
            let (crash, adj) = if agent == i { pair[0] } else { pair[1] };
            r.crash_penalty += crash;
            r.right_of_way_adjustment += adj;
        }
    }
    r.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Action, SimConfig, Vec2, VehicleState, WorldState};

    fn outcome(progress: f64, speed: f64) -> StepOutcome {
        StepOutcome {
            acted: true,
            progress_delta: progress,
            speed,
            ..Default::default()
        }
    }

    #[test]
    fn base_reward_progress_and_speed() {
        let cfg = RewardConfig::default();
        let r = base_reward(&outcome(1.0, 10.0), 10.0, &cfg);
        assert!((r.total - 1.1).abs() < 1e-12);
    }

    #[test]
    fn base_reward_arrival_step() {
        let cfg = RewardConfig::default();
        let mut o = outcome(0.5, 5.0);
        o.arrived_now = true;
        let r = base_reward(&o, 10.0, &cfg);
        assert!((r.total - 10.55).abs() < 1e-12);
    }

    #[test]
    fn base_reward_contact_and_off_road() {
        let cfg = RewardConfig::default();
        let mut o = outcome(0.0, 0.0);
        o.in_contact = true;
        o.off_road = true;
        let r = base_reward(&o, 10.0, &cfg);
        assert!((r.total - (-10.0)).abs() < 1e-12);
        assert!((r.crash_penalty - (-5.0)).abs() < 1e-12);
        assert!((r.out_of_road_penalty - (-5.0)).abs() < 1e-12);
    }

    #[test]
    fn reversing_earns_no_speed_reward() {
        let cfg = RewardConfig::default();
        let r = base_reward(&outcome(-0.1, -2.0), 10.0, &cfg);
        assert_eq!(r.speed, 0.0);
        assert!(r.progress < 0.0);
    }

    fn scan_with_front(front_m: f64) -> Vec<f64> {
        let mut scan = vec![1.0; 72];
        scan[0] = front_m / 50.0;
        scan
    }

    #[test]
    fn safe_distance_matches_the_formula() {
        let cfg = RewardConfig::default();
        assert_eq!(safe_distance_penalty(&scan_with_front(5.0), 50.0, &cfg), 0.0);
        assert!(
            (safe_distance_penalty(&scan_with_front(2.5), 50.0, &cfg) - (-0.25)).abs() < 1e-12
        );
        assert!((safe_distance_penalty(&scan_with_front(0.0), 50.0, &cfg) - (-0.5)).abs() < 1e-12);
        // Exact over the whole ramp.
        for k in 0..=50 {
            let d = k as f64 * 0.1;
            let expect = -0.5 * (5.0 - d) / 5.0;
            let got = safe_distance_penalty(&scan_with_front(d), 50.0, &cfg);
            assert!((got - expect).abs() < 1e-12, "d={d}");
        }
        // Continuous at the threshold.
        let just_below = safe_distance_penalty(&scan_with_front(5.0 - 1e-9), 50.0, &cfg);
        assert!(just_below.abs() < 1e-9);
    }

    #[test]
    fn front_sector_is_exactly_ten_rays() {
        let cfg = RewardConfig::default();
        // A close obstacle on each ray in turn; only the 10 front rays bite.
        let mut hot = Vec::new();
        for ray in 0..72 {
            let mut scan = vec![1.0; 72];
            scan[ray] = 0.02; // 1 m
            if safe_distance_penalty(&scan, 50.0, &cfg) < 0.0 {
                hot.push(ray);
            }
        }
        assert_eq!(hot, vec![0, 1, 2, 3, 4, 67, 68, 69, 70, 71]);
    }

    #[test]
    fn disabled_safe_distance_is_silent() {
        let cfg = RewardConfig {
            safe_distance_enabled: false,
            ..RewardConfig::default()
        };
        assert_eq!(safe_distance_penalty(&scan_with_front(0.5), 50.0, &cfg), 0.0);
    }

    /// Two-vehicle world with hand-placed states for responsibility tests.
    fn staged_world(states: Vec<(Vec2, f64, f64)>) -> WorldState {
        let cfg = SimConfig {
            n_vehicles: states.len(),
            ..SimConfig::default()
        };
        let mut w = WorldState::reset(&cfg, 0).unwrap();
        for (k, (pos, heading, speed)) in states.into_iter().enumerate() {
            let mut v = VehicleState::new(pos, heading, w.vehicles[k].route_id, 0.0);
            v.speed = speed;
            w.vehicles[k] = v;
        }
        w
    }

    fn event_for(w: &WorldState, i: usize, j: usize) -> CollisionEvent {
        CollisionEvent {
            pair: (i, j),
            contact_point: w.vehicles[i]
                .position
                .add(w.vehicles[j].position)
                .scale(0.5),
            step: 1,
            onset: true,
        }
    }

    #[test]
    fn rear_end_blames_the_follower() {
        // Leader ahead at rest, follower driving into its tail.
        let w = staged_world(vec![
            (Vec2::new(30.0, 1.75), std::f64::consts::PI, 3.0), // follower (heading west)
            (Vec2::new(25.8, 1.75), std::f64::consts::PI, 0.0), // leader
        ]);
        let e = event_for(&w, 0, 1);
        assert_eq!(assign_responsibility(&e, &w), 0);
        // Swap roles: now the higher id tails the lower.
        let w = staged_world(vec![
            (Vec2::new(25.8, 1.75), std::f64::consts::PI, 0.0),
            (Vec2::new(30.0, 1.75), std::f64::consts::PI, 3.0),
        ]);
        let e = event_for(&w, 0, 1);
        assert_eq!(assign_responsibility(&e, &w), 1);
    }

    #[test]
    fn right_hand_priority_blames_the_non_yielder() {
        // Agent 1 approaches from agent 0's right inside the conflict zone,
        // so agent 0 had to yield and is responsible.
        let w = staged_world(vec![
            (Vec2::new(0.0, 0.0), std::f64::consts::FRAC_PI_2, 4.0), // heading north
            (Vec2::new(2.0, 0.0), std::f64::consts::PI, 4.0),        // from the east, heading west
        ]);
        let e = event_for(&w, 0, 1);
        assert_eq!(assign_responsibility(&e, &w), 0);
    }

    #[test]
    fn symmetric_head_on_falls_to_lower_id() {
        let w = staged_world(vec![
            (Vec2::new(-2.0, 0.0), 0.0, 3.0),
            (Vec2::new(2.0, 0.0), std::f64::consts::PI, 3.0),
        ]);
        let e = event_for(&w, 0, 1);
        assert_eq!(assign_responsibility(&e, &w), 0);
    }

    #[test]
    fn faster_vehicle_is_responsible_outside_other_rules() {
        // Head-on but with unequal speeds, outside the conflict zone.
        let w = staged_world(vec![
            (Vec2::new(20.0, 1.75), std::f64::consts::PI, 2.0),
            (Vec2::new(24.0, 1.75), 0.0, 5.0),
        ]);
        let e = event_for(&w, 0, 1);
        assert_eq!(assign_responsibility(&e, &w), 1);
    }

    #[test]
    fn responsibility_is_deterministic() {
        let w = staged_world(vec![
            (Vec2::new(0.0, 0.0), 0.4, 3.0),
            (Vec2::new(2.0, 1.0), 2.0, 3.0),
        ]);
        let e = event_for(&w, 0, 1);
        let first = assign_responsibility(&e, &w);
        for _ in 0..10 {
            assert_eq!(assign_responsibility(&e, &w), first);
        }
    }

    #[test]
    fn right_of_way_split_doubles_and_spares() {
        let cfg = RewardConfig::default();
        let w = staged_world(vec![
            (Vec2::new(-1.0, 0.0), 0.0, 3.0),
            (Vec2::new(1.0, 0.0), std::f64::consts::PI, 3.0),
        ]);
        let e = event_for(&w, 0, 1);
        let [a, b] = right_of_way_penalty(&e, 0, &cfg);
        assert_eq!(a, (-5.0, -5.0));
        assert_eq!(b, (0.0, 0.0));

        let off = RewardConfig {
            right_of_way_enabled: false,
            ..cfg
        };
        let [a, b] = right_of_way_penalty(&e, 0, &off);
        assert_eq!(a, (-5.0, 0.0));
        assert_eq!(b, (-5.0, 0.0));
    }

    #[test]
    fn pair_penalty_sum_is_conserved() {
        // Enabled or not, each pair loses 2 * P_c per contacting step.
        let on = RewardConfig::default();
        let off = RewardConfig {
            right_of_way_enabled: false,
            ..RewardConfig::default()
        };
        for (pi, pj) in [(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.5)), (Vec2::new(3.0, 2.0), Vec2::new(3.5, 0.1))] {
            let w = staged_world(vec![(pi, 0.3, 2.0), (pj, 2.8, 4.0)]);
            let e = event_for(&w, 0, 1);
            let responsible = assign_responsibility(&e, &w);
            let sum = |pens: [(f64, f64); 2]| pens[0].0 + pens[0].1 + pens[1].0 + pens[1].1;
            assert!((sum(right_of_way_penalty(&e, responsible, &on)) - (-10.0)).abs() < 1e-12);
            assert!((sum(right_of_way_penalty(&e, responsible, &off)) - (-10.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn pileup_pairs_resolve_independently() {
        let cfg = RewardConfig::default();
        // Chain collision heading west: 0 into 1 into 2.
        let w = staged_world(vec![
            (Vec2::new(30.0, 1.75), std::f64::consts::PI, 4.0),
            (Vec2::new(26.0, 1.75), std::f64::consts::PI, 2.0),
            (Vec2::new(22.0, 1.75), std::f64::consts::PI, 0.0),
        ]);
        let e01 = event_for(&w, 0, 1);
        let e12 = event_for(&w, 1, 2);
        let events = vec![e01, e12];
        let mut o = outcome(0.0, 0.0);
        o.in_contact = true;

        let r0 = total_reward(&w, 0, &o, None, &events, &cfg);
        let r1 = total_reward(&w, 1, &o, None, &events, &cfg);
        let r2 = total_reward(&w, 2, &o, None, &events, &cfg);
        // Each rear-ender answers for its own pair.
        assert!((r0.crash_penalty + r0.right_of_way_adjustment - (-10.0)).abs() < 1e-12);
        assert!((r1.crash_penalty + r1.right_of_way_adjustment - (-10.0)).abs() < 1e-12);
        assert!((r2.crash_penalty + r2.right_of_way_adjustment).abs() < 1e-12);
        // Totals within each pair sum to -2 * P_c.
        let pair01 = -10.0;
        let share0 = r0.crash_penalty + r0.right_of_way_adjustment;
        let share1_in_01 = 0.0; // agent 1 not responsible in (0,1)
        assert!((share0 + share1_in_01 - pair01).abs() < 1e-12);
    }

    #[test]
    fn total_reward_composes_components() {
        let cfg = RewardConfig::default();
        let w = staged_world(vec![
            (Vec2::new(30.0, 1.75), std::f64::consts::PI, 10.0),
            (Vec2::new(50.0, 1.75), std::f64::consts::PI, 0.0),
        ]);
        // Clean driving: progress + speed only.
        let r = total_reward(&w, 0, &outcome(1.0, 10.0), Some(&vec![1.0; 72]), &[], &cfg);
        assert!((r.total - 1.1).abs() < 1e-12);
        // Tailgating at 2.5 m shaves a quarter point.
        let r = total_reward(
            &w,
            0,
            &outcome(1.0, 10.0),
            Some(&scan_with_front(2.5)),
            &[],
            &cfg,
        );
        assert!((r.total - 0.85).abs() < 1e-12);
        // Responsible crash with both rules on.
        let mut o = outcome(0.0, 3.0);
        o.in_contact = true;
        let w2 = staged_world(vec![
            (Vec2::new(30.0, 1.75), std::f64::consts::PI, 3.0),
            (Vec2::new(25.8, 1.75), std::f64::consts::PI, 0.0),
        ]);
        let e = event_for(&w2, 0, 1);
        let r = total_reward(&w2, 0, &o, Some(&scan_with_front(2.0)), &[e], &cfg);
        let expected = 0.03 - 10.0 - 0.3; // speed + pair penalty + safe distance
        assert!((r.total - expected).abs() < 1e-12, "got {}", r.total);
        assert!((r.total
            - (r.progress
                + r.speed
                + r.arrival
                + r.crash_penalty
                + r.out_of_road_penalty
                + r.safe_distance_penalty
                + r.right_of_way_adjustment))
            .abs()
            < 1e-12);
    }

    #[test]
    fn tailgating_episode_scores_lower_with_shaping() {
        let run = |shaped: bool| {
            let cfg = RewardConfig {
                safe_distance_enabled: shaped,
                ..RewardConfig::default()
            };
            let sim_cfg = SimConfig {
                n_vehicles: 2,
                ..SimConfig::default()
            };
            let mut w = WorldState::reset(&sim_cfg, 0).unwrap();
            // Same lane, 6.5 m between centers: 4.25 m of clear road ahead.
            let route = w.vehicles[0].route_id;
            let r = &w.map.routes[route];
            let (p0, t0) = r.point_at(20.0);
            let (p1, _) = r.point_at(26.5);
            let h = t0.y.atan2(t0.x);
            w.vehicles[0] = VehicleState::new(p0, h, route, 20.0);
            w.vehicles[1] = VehicleState::new(p1, h, route, 26.5);
            let mut total = 0.0;
            for _ in 0..10 {
                let outcomes = w.step(&[Action::default(), Action::default()]).unwrap();
                let scan = w.lidar_scan(0).unwrap();
                let r = total_reward(&w, 0, &outcomes[0], Some(&scan), &[], &cfg);
                total += r.total;
            }
            total
        };
        let shaped = run(true);
        let flat = run(false);
        assert!(
            shaped < flat,
            "shaped {shaped} should be strictly below unshaped {flat}"
        );
    }
}
