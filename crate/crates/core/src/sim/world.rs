//! Full simulator state and the reset/step/observe cycle.

use super::collision::{find_contacts, ContactPair};
use super::geom::{wrap_angle, Vec2};
use super::lidar::{self, LidarConfig};
use super::map::MapGeometry;
use super::vehicle::{bicycle_step, Action, VehicleSpec, VehicleState};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_vehicles: usize,
    pub dt: f64,
    pub max_steps: u64,
    pub arm_length: f64,
    pub lane_width: f64,
    pub lanes_per_arm: usize,
    pub checkpoint_spacing: f64,
    pub spawn_setback: f64,
    pub spawn_headway: f64,
    pub arrival_radius: f64,
    pub vehicle: VehicleSpec,
    pub lidar: LidarConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_vehicles: 40,
            dt: 0.1,
            max_steps: 1000,
            arm_length: 60.0,
            lane_width: 3.5,
            lanes_per_arm: 2,
            checkpoint_spacing: 10.0,
            spawn_setback: 5.0,
            spawn_headway: 10.0,
            arrival_radius: 4.0,
            vehicle: VehicleSpec::default(),
            lidar: LidarConfig::default(),
        }
    }
}

impl SimConfig {
    /// Observation vector length under this config: 6 ego features, 5
    /// navigation features, one entry per lidar ray.
    pub fn obs_dim(&self) -> usize {
        6 + 5 + self.lidar.rays
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vehicles == 0 {
            return Err(Error::Sim("n_vehicles must be at least 1".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::Sim(format!("dt must be positive, got {}", self.dt)));
        }
        if self.lanes_per_arm == 0 {
            return Err(Error::Sim("lanes_per_arm must be at least 1".into()));
        }
        if self.spawn_headway < self.vehicle.length {
            return Err(Error::Sim(format!(
                "spawn_headway {} is shorter than a vehicle ({})",
                self.spawn_headway, self.vehicle.length
            )));
        }
        if self.lidar.rays == 0 || self.lidar.range <= 0.0 {
            return Err(Error::Sim("lidar needs at least one ray and positive range".into()));
        }
        Ok(())
    }
}

/// One collision record: agent pair (i < j), nominal contact point, the step
/// on which it was observed, and whether this is the first contacting step
/// of the pair's current contact interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub pair: (usize, usize),
    pub contact_point: Vec2,
    pub step: u64,
    pub onset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SimEvent {
    Contact(CollisionEvent),
    OffRoad { agent: usize, step: u64 },
    Arrival { agent: usize, step: u64 },
}

/// Per-agent result of one step call.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StepOutcome {
    /// False when the agent was inactive before the step (no action consumed).
    pub acted: bool,
    pub progress_delta: f64,
    pub speed: f64,
    pub in_contact: bool,
    pub off_road: bool,
    /// True only on the step that triggers arrival.
    pub arrived_now: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub config: SimConfig,
    pub map: MapGeometry,
    pub vehicles: Vec<VehicleState>,
    pub step: u64,
    pub rng: ChaCha8Rng,
    pub event_log: Vec<SimEvent>,
    /// Contacting pairs after the most recent step.
    pub contact_pairs: Vec<(usize, usize)>,
    /// Contacting pairs one step earlier (onset reference).
    pub prev_contact_pairs: Vec<(usize, usize)>,
}

impl WorldState {
    /// Spawn `config.n_vehicles` vehicles queued on the entry lanes. Routes
    /// are drawn round-robin from a seeded shuffle of all legal routes; each
    /// vehicle takes the next free queue slot on its entry lane.
    pub fn reset(config: &SimConfig, seed: u64) -> Result<WorldState> {
        config.validate()?;
        let map = MapGeometry::new(
            config.arm_length,
            config.lane_width,
            config.lanes_per_arm,
            config.checkpoint_spacing,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..map.routes.len()).collect();
        order.shuffle(&mut rng);

        let mut slot_used = vec![vec![0usize; config.lanes_per_arm]; 4];
        let mut vehicles = Vec::with_capacity(config.n_vehicles);
        for v in 0..config.n_vehicles {
            let route = &map.routes[order[v % order.len()]];
            let lane_key = (route.entry_arm.index(), route.entry_lane);
            let slot = slot_used[lane_key.0][lane_key.1];
            slot_used[lane_key.0][lane_key.1] += 1;
            let (s, pos, heading) =
                map.spawn_state(route, slot, config.spawn_setback, config.spawn_headway)?;
            vehicles.push(VehicleState::new(pos, heading, route.id, s));
        }
        if !find_contacts(&vehicles, &config.vehicle).is_empty() {
            return Err(Error::Sim(
                "initial placement overlaps; shorten the queue or the vehicle list".into(),
            ));
        }
        Ok(WorldState {
            config: config.clone(),
            map,
            vehicles,
            step: 0,
            rng,
            event_log: Vec::new(),
            contact_pairs: Vec::new(),
            prev_contact_pairs: Vec::new(),
        })
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.active)
            .map(|(i, _)| i)
            .collect()
    }

    /// Episode termination: everyone has arrived or the step budget is spent.
    pub fn done(&self) -> bool {
        self.step >= self.config.max_steps || self.vehicles.iter().all(|v| !v.active)
    }

    /// Advance every active vehicle by one tick. `actions[k]` drives the
    /// k-th active agent in ascending id order.
    pub fn step(&mut self, actions: &[Action]) -> Result<Vec<StepOutcome>> {
        let active = self.active_ids();
        if actions.len() != active.len() {
            return Err(Error::Sim(format!(
                "expected {} actions for {} active agents, got {}",
                active.len(),
                active.len(),
                actions.len()
            )));
        }

        let mut outcomes = vec![StepOutcome::default(); self.vehicles.len()];
        for (k, &id) in active.iter().enumerate() {
            let v = &mut self.vehicles[id];
            let s_before = v.route_progress;
            bicycle_step(v, actions[k], &self.config.vehicle, self.config.dt);

            let route = &self.map.routes[v.route_id];
            let window = self.config.vehicle.max_speed * self.config.dt + 5.0;
            let s_new = route.project(v.position, s_before - window, s_before + window);
            // Forward motion ratchets progress; reversing may roll it back.
            v.route_progress = if v.speed >= 0.0 {
                s_new.max(s_before)
            } else {
                s_new
            };

            let was_off_road = v.off_road;
            v.off_road = !self.map.on_road(v.position);
            v.in_contact = false;

            let o = &mut outcomes[id];
            o.acted = true;
            o.progress_delta = v.route_progress - s_before;
            o.speed = v.speed;
            o.off_road = v.off_road;
            if v.off_road && !was_off_road {
                self.event_log.push(SimEvent::OffRoad {
                    agent: id,
                    step: self.step + 1,
                });
            }
        }

        self.step += 1;

        // Contacts among vehicles that were active during the motion.
        let contacts = find_contacts(&self.vehicles, &self.config.vehicle);
        let new_pairs: Vec<(usize, usize)> = contacts.iter().map(|c| (c.i, c.j)).collect();
        for c in &contacts {
            let onset = !self.contact_pairs.contains(&(c.i, c.j));
            self.event_log.push(SimEvent::Contact(CollisionEvent {
                pair: (c.i, c.j),
                contact_point: c.point,
                step: self.step,
                onset,
            }));
            self.vehicles[c.i].in_contact = true;
            self.vehicles[c.j].in_contact = true;
            outcomes[c.i].in_contact = true;
            outcomes[c.j].in_contact = true;
        }
        self.prev_contact_pairs = std::mem::replace(&mut self.contact_pairs, new_pairs);

        // Arrivals take effect after this step's contacts: the vehicle was
        // on the road while it moved, and disappears from the next step on.
        for &id in &active {
            let v = &mut self.vehicles[id];
            let route = &self.map.routes[v.route_id];
            let end = route.points[route.points.len() - 1];
            if v.position.dist(end) <= self.config.arrival_radius {
                v.arrived = true;
                v.active = false;
                outcomes[id].arrived_now = true;
                self.event_log.push(SimEvent::Arrival {
                    agent: id,
                    step: self.step,
                });
            }
        }

        Ok(outcomes)
    }

    /// Contacts as of the current vehicle positions, with onset judged
    /// against the previous step's contact set.
    pub fn detect_collisions(&self) -> Vec<CollisionEvent> {
        find_contacts(&self.vehicles, &self.config.vehicle)
            .iter()
            .map(|c| CollisionEvent {
                pair: (c.i, c.j),
                contact_point: c.point,
                step: self.step,
                onset: !self.prev_contact_pairs.contains(&(c.i, c.j)),
            })
            .collect()
    }

    /// Current contacting pairs (positions already stepped).
    pub fn current_contacts(&self) -> Vec<ContactPair> {
        find_contacts(&self.vehicles, &self.config.vehicle)
    }

    pub fn in_conflict_zone(&self, p: Vec2) -> bool {
        self.map.in_conflict_zone(p)
    }

    fn require_active(&self, agent: usize) -> Result<&VehicleState> {
        let v = self
            .vehicles
            .get(agent)
            .ok_or_else(|| Error::Sim(format!("no agent {agent}")))?;
        if !v.active {
            return Err(Error::Sim(format!("agent {agent} is not active")));
        }
        Ok(v)
    }

    /// Normalized lidar distances for one agent; other active vehicles and
    /// the road boundary are obstacles.
    pub fn lidar_scan(&self, agent: usize) -> Result<Vec<f64>> {
        let v = self.require_active(agent)?;
        let boxes: Vec<[Vec2; 4]> = self
            .vehicles
            .iter()
            .enumerate()
            .filter(|(i, o)| *i != agent && o.active)
            .map(|(_, o)| o.corners(&self.config.vehicle))
            .collect();
        Ok(lidar::scan(
            v.position,
            v.heading,
            &boxes,
            &self.map.boundary,
            &self.config.lidar,
        ))
    }

    /// Fixed-layout observation vector: 6 ego features, 5 navigation
    /// features, then the lidar block.
    pub fn observe(&self, agent: usize) -> Result<Vec<f64>> {
        let v = self.require_active(agent)?;
        let route = &self.map.routes[v.route_id];
        let (anchor, tangent) = route.point_at(v.route_progress);
        let heading_err = wrap_angle(v.heading - tangent.y.atan2(tangent.x));
        let left = Vec2::new(-tangent.y, tangent.x);
        let lateral = v.position.sub(anchor).dot(left);

        let mut obs = Vec::with_capacity(self.config.obs_dim());
        obs.push(v.speed / self.config.vehicle.max_speed);
        obs.push(heading_err.cos());
        obs.push(heading_err.sin());
        obs.push(lateral / self.config.lane_width);
        obs.push(v.last_action.steer);
        obs.push(v.last_action.throttle);

        let (c1, c2) = route.next_checkpoints(v.route_progress);
        for s in [c1, c2] {
            let (p, _) = route.point_at(s);
            let rel = p.sub(v.position).rotate(-v.heading);
            obs.push(rel.x / 50.0);
            obs.push(rel.y / 50.0);
        }
        obs.push((route.total_len - v.route_progress) / route.total_len);

        obs.extend(self.lidar_scan(agent)?);
        debug_assert_eq!(obs.len(), self.config.obs_dim());
        Ok(obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(n: usize) -> SimConfig {
        SimConfig {
            n_vehicles: n,
            ..SimConfig::default()
        }
    }

    #[test]
    fn reset_spawns_forty_without_contact() {
        let w = WorldState::reset(&small_cfg(40), 7).unwrap();
        assert_eq!(w.vehicles.len(), 40);
        assert!(w.vehicles.iter().all(|v| v.active && v.speed == 0.0));
        assert!(w.current_contacts().is_empty());
        assert_eq!(w.step, 0);
    }

    #[test]
    fn reset_single_vehicle_at_first_slot() {
        let w = WorldState::reset(&small_cfg(1), 0).unwrap();
        assert_eq!(w.vehicles.len(), 1);
        let v = &w.vehicles[0];
        assert_eq!(v.speed, 0.0);
        // Slot 0 sits spawn_setback meters behind the conflict square, i.e.
        // arc position arm_length - setback on its route.
        assert!((v.route_progress - 55.0).abs() < 1e-9);
    }

    #[test]
    fn reset_is_deterministic() {
        let a = WorldState::reset(&small_cfg(12), 3).unwrap();
        let b = WorldState::reset(&small_cfg(12), 3).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = WorldState::reset(&small_cfg(12), 4).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn too_many_vehicles_is_rejected() {
        // At defaults each of the 8 entry lanes holds 6 queue slots.
        assert!(WorldState::reset(&small_cfg(48), 0).is_ok());
        assert!(WorldState::reset(&small_cfg(49), 0).is_err());
    }

    #[test]
    fn zero_actions_from_standstill_only_advance_the_clock() {
        let cfg = small_cfg(4);
        let mut w = WorldState::reset(&cfg, 1).unwrap();
        let before = serde_json::to_string(&w.vehicles).unwrap();
        let out = w.step(&vec![Action::default(); 4]).unwrap();
        assert_eq!(w.step, 1);
        assert_eq!(before, serde_json::to_string(&w.vehicles).unwrap());
        assert!(out.iter().all(|o| o.acted && !o.in_contact && !o.off_road));
    }

    #[test]
    fn action_count_mismatch_is_an_error() {
        let mut w = WorldState::reset(&small_cfg(4), 1).unwrap();
        assert!(w.step(&[Action::default(); 3]).is_err());
    }

    #[test]
    fn straight_route_full_throttle_arrives() {
        let mut cfg = small_cfg(1);
        cfg.max_steps = 400;
        let mut w = WorldState::reset(&cfg, 0).unwrap();
        // Pin the vehicle to a through movement so zero steer suffices.
        let straight = w
            .map
            .routes
            .iter()
            .find(|r| r.exit_arm == r.entry_arm.opposite())
            .unwrap()
            .id;
        let (s, pos, heading) = w
            .map
            .spawn_state(&w.map.routes[straight], 0, 5.0, 10.0)
            .unwrap();
        w.vehicles[0] = VehicleState::new(pos, heading, straight, s);

        let mut arrived_at = None;
        for _ in 0..cfg.max_steps {
            let out = w
                .step(&[Action {
                    steer: 0.0,
                    throttle: 1.0,
                }])
                .unwrap();
            assert!(!w.vehicles[0].off_road);
            if out[0].arrived_now {
                arrived_at = Some(w.step);
                break;
            }
        }
        let t = arrived_at.expect("vehicle should reach the route end");
        // 79 m to the 4 m arrival ring at up to 10 m/s: roughly 100 steps.
        assert!(t > 50 && t < 150, "arrived at step {t}");
        assert!(w.done());
        assert!(w.vehicles[0].arrived && !w.vehicles[0].active);
        assert!(matches!(
            w.event_log.last(),
            Some(SimEvent::Arrival { agent: 0, .. })
        ));
    }

    #[test]
    fn overlapping_vehicles_report_contact_with_single_onset() {
        let mut w = WorldState::reset(&small_cfg(2), 5).unwrap();
        w.vehicles[1].position = w.vehicles[0].position;
        w.vehicles[1].heading = w.vehicles[0].heading;

        let out = w.step(&[Action::default(), Action::default()]).unwrap();
        assert!(out[0].in_contact && out[1].in_contact);
        assert!(w.vehicles[0].in_contact && w.vehicles[1].in_contact);
        let onsets = |w: &WorldState| {
            w.event_log
                .iter()
                .filter(|e| matches!(e, SimEvent::Contact(c) if c.onset))
                .count()
        };
        assert_eq!(onsets(&w), 1);

        // Still overlapping next step: contact persists, no second onset.
        w.step(&[Action::default(), Action::default()]).unwrap();
        assert_eq!(onsets(&w), 1);
        assert_eq!(
            w.event_log
                .iter()
                .filter(|e| matches!(e, SimEvent::Contact(_)))
                .count(),
            2
        );
    }

    #[test]
    fn onset_repeats_after_a_clean_break() {
        let mut w = WorldState::reset(&small_cfg(2), 5).unwrap();
        let base = w.vehicles[0].position;
        w.vehicles[1].heading = w.vehicles[0].heading;

        let onsets = |w: &WorldState| {
            w.event_log
                .iter()
                .filter(|e| matches!(e, SimEvent::Contact(c) if c.onset))
                .count()
        };
        // Contact, separation, contact again: two onsets.
        w.vehicles[1].position = base;
        w.step(&[Action::default(), Action::default()]).unwrap();
        assert_eq!(onsets(&w), 1);
        w.vehicles[1].position = Vec2::new(base.x + 20.0, base.y);
        w.step(&[Action::default(), Action::default()]).unwrap();
        assert_eq!(onsets(&w), 1);
        w.vehicles[1].position = base;
        w.step(&[Action::default(), Action::default()]).unwrap();
        assert_eq!(onsets(&w), 2);
    }

    #[test]
    fn arrived_vehicles_vanish_from_lidar_and_collisions() {
        let mut cfg = small_cfg(2);
        cfg.max_steps = 2000;
        let mut w = WorldState::reset(&cfg, 0).unwrap();
        // Force agent 1 to arrive by teleporting it to its route end.
        let end = {
            let r = &w.map.routes[w.vehicles[1].route_id];
            r.points[r.points.len() - 1]
        };
        w.vehicles[1].position = end;
        w.step(&[Action::default(), Action::default()]).unwrap();
        assert!(w.vehicles[1].arrived && !w.vehicles[1].active);

        // Park agent 0 exactly on top of the arrived one: no contact, and
        // the scan equals what an empty road would return from that pose.
        w.vehicles[0].position = end;
        let out = w.step(&[Action::default()]).unwrap();
        assert!(!out[0].in_contact);
        assert!(w.current_contacts().is_empty());
        let ghost_free = crate::sim::lidar::scan(
            w.vehicles[0].position,
            w.vehicles[0].heading,
            &[],
            &w.map.boundary,
            &w.config.lidar,
        );
        assert_eq!(w.lidar_scan(0).unwrap(), ghost_free);
        assert!(w.observe(1).is_err());
        assert!(w.lidar_scan(1).is_err());
    }

    #[test]
    fn observation_layout_and_standstill_values() {
        let w = WorldState::reset(&small_cfg(3), 2).unwrap();
        let obs = w.observe(0).unwrap();
        assert_eq!(obs.len(), 83);
        // Standstill at lane center, aligned with the lane tangent.
        assert_eq!(obs[0], 0.0);
        assert!((obs[1] - 1.0).abs() < 1e-9);
        assert!(obs[2].abs() < 1e-9);
        assert!(obs[3].abs() < 1e-6);
        assert_eq!(obs[4], 0.0);
        assert_eq!(obs[5], 0.0);
        // First checkpoint is straight ahead within 10 m.
        assert!(obs[6] > 0.0 && obs[6] <= 10.0 / 50.0 + 1e-9);
        assert!(obs[7].abs() < 1e-6);
        // Fresh spawn: most of the route remains.
        assert!(obs[10] > 0.5 && obs[10] <= 1.0);
        assert!(obs[11..].iter().all(|&d| (0.0..=1.0).contains(&d)));
    }

    #[test]
    fn full_speed_observation_leads_with_one() {
        let mut w = WorldState::reset(&small_cfg(1), 0).unwrap();
        w.vehicles[0].speed = 10.0;
        let obs = w.observe(0).unwrap();
        assert!((obs[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speed_stays_bounded_under_wild_inputs() {
        let mut w = WorldState::reset(&small_cfg(6), 9).unwrap();
        for i in 0..200 {
            let n = w.active_ids().len();
            let acts: Vec<Action> = (0..n)
                .map(|k| Action {
                    steer: ((i + k) as f64).sin() * 3.0,
                    throttle: ((i * k) as f64).cos() * 5.0,
                })
                .collect();
            w.step(&acts).unwrap();
            for v in &w.vehicles {
                assert!(v.speed <= 10.0 + 1e-12 && v.speed >= -2.0 - 1e-12);
            }
        }
    }

    #[test]
    fn step_log_is_reproducible() {
        let run = || {
            let mut w = WorldState::reset(&small_cfg(8), 11).unwrap();
            for i in 0..120 {
                let n = w.active_ids().len();
                let acts: Vec<Action> = (0..n)
                    .map(|k| Action {
                        steer: (0.3 * (i + k) as f64).sin(),
                        throttle: 0.8,
                    })
                    .collect();
                w.step(&acts).unwrap();
            }
            serde_json::to_string(&(&w.event_log, &w.vehicles)).unwrap()
        };
        assert_eq!(run(), run());
    }
}
