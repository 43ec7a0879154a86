//! Oriented-bounding-box contact tests via the separating-axis theorem.

use super::geom::Vec2;
use super::vehicle::{VehicleSpec, VehicleState};
use serde::{Deserialize, Serialize};

/// A pair of vehicles in contact this step (`i < j`) and the nominal contact
/// point (midpoint of the two centers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    pub i: usize,
    pub j: usize,
    pub point: Vec2,
}

fn project(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &c in corners {
        let d = c.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// True when the two rectangles overlap or touch. Separation requires a
/// strictly positive gap along one of the four face normals; a zero-width
/// gap (touching edges or corners) still counts as contact.
pub fn obb_contact(a: &[Vec2; 4], b: &[Vec2; 4]) -> bool {
    let axes = [
        a[1].sub(a[0]),
        a[3].sub(a[0]),
        b[1].sub(b[0]),
        b[3].sub(b[0]),
    ];
    for axis in axes {
        let n = axis.norm();
        if n <= f64::EPSILON {
            continue;
        }
        let axis = axis.scale(1.0 / n);
        let (a_lo, a_hi) = project(a, axis);
        let (b_lo, b_hi) = project(b, axis);
        if b_lo - a_hi > 0.0 || a_lo - b_hi > 0.0 {
            return false;
        }
    }
    true
}

/// All contacting pairs among the active vehicles.
pub fn find_contacts(states: &[VehicleState], spec: &VehicleSpec) -> Vec<ContactPair> {
    let radius = (spec.length / 2.0).hypot(spec.width / 2.0);
    let reach2 = (2.0 * radius) * (2.0 * radius);
    let corners: Vec<Option<[Vec2; 4]>> = states
        .iter()
        .map(|s| s.active.then(|| s.corners(spec)))
        .collect();
    let mut out = Vec::new();
    for i in 0..states.len() {
        let Some(ca) = &corners[i] else { continue };
        for j in i + 1..states.len() {
            let Some(cb) = &corners[j] else { continue };
            let d = states[j].position.sub(states[i].position);
            if d.dot(d) > reach2 {
                continue;
            }
            if obb_contact(ca, cb) {
                out.push(ContactPair {
                    i,
                    j,
                    point: states[i]
                        .position
                        .add(states[j].position)
                        .scale(0.5),
                });
            }
        }
    }
    out
}
