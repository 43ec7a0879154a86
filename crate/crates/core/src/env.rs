//! Gym-style wrapper tying the simulator to rewards, observations, and
//! optional trajectory recording, with auto-reset for continuous collection.

use crate::rewards::{safe_front_sector_min, total_reward, RewardConfig};
use crate::sim::{lidar, Action, CollisionEvent, SimConfig, SimEvent, Vec2, WorldState};
use crate::trajlog::{LogMeta, StepRecord, TrajectoryLog};
use crate::{Error, Result};

/// Reward and termination info for one agent that acted this step.
#[derive(Debug, Clone)]
pub struct AgentStep {
    pub agent: usize,
    pub reward: crate::rewards::RewardBreakdown,
    /// Arrived this step or the episode ended under it.
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct EnvStep {
    pub agents: Vec<AgentStep>,
    pub episode_ended: bool,
}

pub struct TrafficEnv {
    pub world: WorldState,
    pub sim_cfg: SimConfig,
    pub reward_cfg: RewardConfig,
    base_seed: u64,
    episodes_started: u64,
    /// Re-seed and respawn automatically when an episode finishes.
    pub auto_reset: bool,
    recording: Option<TrajectoryLog>,
    config_hash: String,
}

impl TrafficEnv {
    pub fn new(sim_cfg: SimConfig, reward_cfg: RewardConfig, base_seed: u64) -> Result<TrafficEnv> {
        reward_cfg.validate()?;
        let world = WorldState::reset(&sim_cfg, base_seed)?;
        Ok(TrafficEnv {
            world,
            sim_cfg,
            reward_cfg,
            base_seed,
            episodes_started: 1,
            auto_reset: false,
            recording: None,
            config_hash: String::new(),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.sim_cfg.obs_dim()
    }

    pub fn episode_seed(&self) -> u64 {
        self.base_seed + self.episodes_started - 1
    }

    /// Stamp saved logs with the run configuration's hash.
    pub fn set_config_hash(&mut self, hash: &str) {
        self.config_hash = hash.to_string();
    }

    /// Restart from the given seed, dropping any in-progress recording.
    pub fn reset(&mut self, seed: u64) -> Result<()> {
        self.world = WorldState::reset(&self.sim_cfg, seed)?;
        self.base_seed = seed;
        self.episodes_started = 1;
        if self.recording.is_some() {
            self.recording = Some(TrajectoryLog::new(self.log_meta(seed)));
        }
        Ok(())
    }

    fn log_meta(&self, seed: u64) -> LogMeta {
        LogMeta {
            n_vehicles: self.sim_cfg.n_vehicles,
            max_steps: self.sim_cfg.max_steps,
            dt: self.sim_cfg.dt,
            arm_length: self.sim_cfg.arm_length,
            lane_width: self.sim_cfg.lane_width,
            lanes_per_arm: self.sim_cfg.lanes_per_arm,
            vehicle_length: self.sim_cfg.vehicle.length,
            vehicle_width: self.sim_cfg.vehicle.width,
            seed,
            config_hash: self.config_hash.clone(),
        }
    }

    /// Record every subsequent step until [`TrafficEnv::take_log`].
    pub fn start_recording(&mut self) {
        self.recording = Some(TrajectoryLog::new(self.log_meta(self.episode_seed())));
    }

    pub fn take_log(&mut self) -> Option<TrajectoryLog> {
        self.recording.take()
    }

    pub fn active_agents(&self) -> Vec<usize> {
        self.world.active_ids()
    }

    pub fn done(&self) -> bool {
        self.world.done()
    }

    /// Observations for every active agent, in ascending agent order.
    pub fn observe_active(&self) -> Result<Vec<(usize, Vec<f64>)>> {
        self.world
            .active_ids()
            .into_iter()
            .map(|i| Ok((i, self.world.observe(i)?)))
            .collect()
    }

    /// Lidar scan for an agent that may have arrived this very step (the
    /// simulator only scans active agents).
    fn scan_any(&self, agent: usize) -> Vec<f64> {
        if self.world.vehicles[agent].active {
            return self.world.lidar_scan(agent).expect("active agent scans");
        }
        let v = &self.world.vehicles[agent];
        let boxes: Vec<[Vec2; 4]> = self
            .world
            .vehicles
            .iter()
            .enumerate()
            .filter(|(i, o)| *i != agent && o.active)
            .map(|(_, o)| o.corners(&self.sim_cfg.vehicle))
            .collect();
        lidar::scan(
            v.position,
            v.heading,
            &boxes,
            &self.world.map.boundary,
            &self.sim_cfg.lidar,
        )
    }

    /// Advance one tick: `actions[k]` drives the k-th active agent. Returns
    /// one entry per acting agent with its shaped reward; auto-resets when
    /// the episode ends if enabled.
    pub fn step(&mut self, actions: &[Action]) -> Result<EnvStep> {
        if self.world.done() {
            return Err(Error::Sim("step on a finished episode".into()));
        }
        let acting = self.world.active_ids();
        let outcomes = self.world.step(actions)?;
        let step_now = self.world.step;
        let events: Vec<CollisionEvent> = self
            .world
            .event_log
            .iter()
            .filter_map(|e| match e {
                SimEvent::Contact(c) if c.step == step_now => Some(*c),
                _ => None,
            })
            .collect();
        let episode_ended = self.world.done();

        let mut agents = Vec::with_capacity(acting.len());
        // `outcomes` is indexed by vehicle id across all n vehicles, not by
        // position in the (possibly shrunken) active list.
        for agent in acting.iter().copied() {
            let outcome = &outcomes[agent];
            let scan = self.scan_any(agent);
            let reward = total_reward(
                &self.world,
                agent,
                outcome,
                Some(&scan),
                &events,
                &self.reward_cfg,
            );
            if let Some(log) = self.recording.as_mut() {
                let v = &self.world.vehicles[agent];
                let onset = events
                    .iter()
                    .any(|e| e.onset && (e.pair.0 == agent || e.pair.1 == agent));
                log.records.push(StepRecord {
                    step: step_now,
                    agent,
                    x: v.position.x,
                    y: v.position.y,
                    heading: v.heading,
                    speed: v.speed,
                    steer: v.last_action.steer,
                    throttle: v.last_action.throttle,
                    reward,
                    in_contact: outcome.in_contact,
                    contact_onset: onset,
                    off_road: outcome.off_road,
                    arrived: outcome.arrived_now,
                    in_zone: self.world.map.in_conflict_zone(v.position),
                    front_min: safe_front_sector_min(&scan, &self.reward_cfg),
                    lidar_mean: scan.iter().sum::<f64>() / scan.len() as f64,
                });
            }
            agents.push(AgentStep {
                agent,
                reward,
                done: outcome.arrived_now || episode_ended,
            });
        }

        if episode_ended && self.auto_reset {
            self.episodes_started += 1;
            let seed = self.base_seed + self.episodes_started - 1;
            self.world = WorldState::reset(&self.sim_cfg, seed)?;
            if self.recording.is_some() {
                self.recording = Some(TrajectoryLog::new(self.log_meta(seed)));
            }
        }

        Ok(EnvStep {
            agents,
            episode_ended,
        })
    }
}
