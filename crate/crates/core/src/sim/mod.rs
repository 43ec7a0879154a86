//! Deterministic 2-D intersection simulator: map and routes, bicycle
//! kinematics, lidar, rectangle collisions, spawn and arrival logic.

pub mod collision;
pub mod geom;
pub mod lidar;
pub mod map;
pub mod vehicle;
pub mod world;

pub use collision::{obb_contact, ContactPair};
pub use geom::Vec2;
pub use lidar::LidarConfig;
pub use map::{Arm, MapGeometry, Route};
pub use vehicle::{bicycle_step, footprint_corners, Action, VehicleSpec, VehicleState};
pub use world::{CollisionEvent, SimConfig, SimEvent, StepOutcome, WorldState};
