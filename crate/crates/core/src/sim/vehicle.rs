//! Vehicle state and the kinematic bicycle integrator.

use super::geom::{wrap_angle, Vec2};
use serde::{Deserialize, Serialize};

/// Physical limits and dimensions shared by all vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
    pub max_steer: f64,
    pub max_accel: f64,
    pub max_brake: f64,
    pub max_speed: f64,
    pub max_reverse_speed: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        VehicleSpec {
            length: 4.5,
            width: 2.0,
            wheelbase: 2.5,
            max_steer: 0.7,
            max_accel: 2.0,
            max_brake: 4.0,
            max_speed: 10.0,
            max_reverse_speed: 2.0,
        }
    }
}

/// Continuous control input; both components are clamped to [-1, 1] before
/// integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub steer: f64,
    pub throttle: f64,
}

impl Action {
    pub fn clamped(self) -> Action {
        Action {
            steer: self.steer.clamp(-1.0, 1.0),
            throttle: self.throttle.clamp(-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    /// Signed longitudinal speed; negative while reversing.
    pub speed: f64,
    pub route_id: usize,
    /// Monotone arc position along the route while moving forward.
    pub route_progress: f64,
    pub last_action: Action,
    pub in_contact: bool,
    pub off_road: bool,
    pub arrived: bool,
    /// False once the vehicle has arrived and been removed from play.
    pub active: bool,
}

impl VehicleState {
    pub fn new(position: Vec2, heading: f64, route_id: usize, route_progress: f64) -> Self {
        VehicleState {
            position,
            heading,
            speed: 0.0,
            route_id,
            route_progress,
            last_action: Action::default(),
            in_contact: false,
            off_road: false,
            arrived: false,
            active: true,
        }
    }

    /// Corners of the vehicle footprint (an oriented rectangle centered on
    /// `position`), counterclockwise.
    pub fn corners(&self, spec: &VehicleSpec) -> [Vec2; 4] {
        footprint_corners(self.position, self.heading, spec.length, spec.width)
    }
}

pub fn footprint_corners(center: Vec2, heading: f64, length: f64, width: f64) -> [Vec2; 4] {
    let hl = length / 2.0;
    let hw = width / 2.0;
    let f = Vec2::from_angle(heading);
    let l = Vec2::new(-f.y, f.x); // left of heading
    [
        center.add(f.scale(hl)).add(l.scale(hw)),
        center.sub(f.scale(hl)).add(l.scale(hw)),
        center.sub(f.scale(hl)).sub(l.scale(hw)),
        center.add(f.scale(hl)).sub(l.scale(hw)),
    ]
}

/// Advance one vehicle by `dt` seconds under `action` (semi-implicit Euler).
///
/// Throttle maps to acceleration: positive throttle accelerates forward up to
/// `max_accel`; negative throttle brakes at up to `max_brake` while moving
/// forward (speed floors at zero within the step) and accelerates in reverse
/// (up to `max_accel`, capped at `max_reverse_speed`) once stopped. The
/// heading integrates with the updated speed, and the position advances along
/// the updated heading.
pub fn bicycle_step(state: &mut VehicleState, action: Action, spec: &VehicleSpec, dt: f64) {
    let action = action.clamped();
    let v0 = state.speed;

    let accel = if action.throttle >= 0.0 {
        action.throttle * spec.max_accel
    } else if v0 > 0.0 {
        action.throttle * spec.max_brake
    } else {
        action.throttle * spec.max_accel
    };

    let mut v = v0 + accel * dt;
    if v0 > 0.0 && action.throttle < 0.0 && v < 0.0 {
        v = 0.0; // braking stops at rest; reversing needs a fresh step
    }
    v = v.clamp(-spec.max_reverse_speed, spec.max_speed);

    let steer_angle = action.steer * spec.max_steer;
    state.heading = wrap_angle(state.heading + (v / spec.wheelbase) * steer_angle.tan() * dt);
    state.position = state
        .position
        .add(Vec2::from_angle(state.heading).scale(v * dt));
    state.speed = v;
    state.last_action = action;
}
