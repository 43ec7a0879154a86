//! Beam lidar: evenly spaced rays tested against the road outline and the
//! other vehicles' footprints.

use super::geom::{ray_segment_intersection, wrap_angle, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub rays: usize,
    pub range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            rays: 72,
            range: 50.0,
        }
    }
}

/// Cast all rays from `origin`. Ray 0 points along `heading`; successive
/// rays step counterclockwise by `TAU / rays`. Returns one distance per ray
/// normalized to [0, 1], where 1 means nothing within range.
///
/// Boundary segments are tested for every ray; vehicle boxes are first
/// culled to the narrow fan of rays that can reach them.
pub fn scan(
    origin: Vec2,
    heading: f64,
    vehicle_boxes: &[[Vec2; 4]],
    boundary: &[(Vec2, Vec2)],
    cfg: &LidarConfig,
) -> Vec<f64> {
    let spacing = TAU / cfg.rays as f64;
    let mut dist = vec![cfg.range; cfg.rays];
    let dirs: Vec<Vec2> = (0..cfg.rays)
        .map(|i| Vec2::from_angle(heading + i as f64 * spacing))
        .collect();

    for &(a, b) in boundary {
        for (i, &d) in dirs.iter().enumerate() {
            if let Some(t) = ray_segment_intersection(origin, d, a, b) {
                if t < dist[i] {
                    dist[i] = t;
                }
            }
        }
    }

    for corners in vehicle_boxes {
        let center = corners
            .iter()
            .fold(Vec2::new(0.0, 0.0), |acc, &c| acc.add(c))
            .scale(0.25);
        let radius = corners
            .iter()
            .map(|c| c.dist(center))
            .fold(0.0f64, f64::max);
        let to_center = center.sub(origin);
        let d = to_center.norm();
        if d > cfg.range + radius {
            continue;
        }
        let edges = [
            (corners[0], corners[1]),
            (corners[1], corners[2]),
            (corners[2], corners[3]),
            (corners[3], corners[0]),
        ];
        let mut test_ray = |i: usize| {
            for &(a, b) in &edges {
                if let Some(t) = ray_segment_intersection(origin, dirs[i], a, b) {
                    if t < dist[i] {
                        dist[i] = t;
                    }
                }
            }
        };
        if d <= radius {
            // Origin inside the box's bounding circle: no useful cone.
            for i in 0..cfg.rays {
                test_ray(i);
            }
        } else {
            let bearing = wrap_angle(to_center.y.atan2(to_center.x) - heading);
            let half_angle = (radius / d).min(1.0).asin() + spacing;
            let lo = ((bearing - half_angle) / spacing).floor() as i64;
            let hi = ((bearing + half_angle) / spacing).ceil() as i64;
            for k in lo..=hi {
                test_ray(k.rem_euclid(cfg.rays as i64) as usize);
            }
        }
    }

    dist.iter().map(|&d| d / cfg.range).collect()
}
