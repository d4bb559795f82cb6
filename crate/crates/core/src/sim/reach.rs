//! Geometric reachability test standing in for a motion-planner query.
//!
//! A grasp is reachable when all three hold:
//!
//! 1. the required aperture fits the gripper,
//! 2. both contacts and the standoff point above them lie in the workspace,
//! 3. no other object's bounding cylinder intrudes on the vertical corridor
//!    swept by the fingers on their way down.
//!
//! The corridor's footprint is the segment between the contacts thickened by
//! the finger clearance; it spans heights from `contact_z - finger_depth` up
//! to the standoff.

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use super::grasp::{GraspCandidate, Reachability};
use super::scene::SceneObject;
use super::SimConfig;

/// Axis-aligned box in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Workspace {
    fn default() -> Self {
        Self { min: [-400.0, -400.0, 0.0], max: [400.0, 400.0, 500.0] }
    }
}

impl Workspace {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// The point the gripper backs off to before moving in.
pub fn standoff_point(g: &GraspCandidate, standoff: f64) -> Point3<f64> {
    g.center() - g.approach * standoff
}

/// Distance from `p` to the segment `a`–`b` in the horizontal plane.
pub fn segment_distance(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

fn corridor_blocked(g: &GraspCandidate, cfg: &SimConfig, others: &[SceneObject]) -> bool {
    let a = g.contacts[0].xy();
    let b = g.contacts[1].xy();
    let bottom = g.contacts[0].z.min(g.contacts[1].z) - cfg.finger_depth;
    others.iter().filter(|o| o.id != g.object).any(|o| {
        let center = Point2::new(o.pose.x, o.pose.y);
        let horizontal =
            segment_distance(center, a, b) < cfg.finger_clearance + o.shape.bounding_radius();
        let vertical = o.pose.z + o.shape.height() > bottom;
        horizontal && vertical
    })
}

/// `objects` is the scene as currently perceived.
pub fn check_reachability(
    g: &GraspCandidate,
    cfg: &SimConfig,
    objects: &[SceneObject],
) -> Reachability {
    let fits = g.aperture <= cfg.max_aperture;
    let inside = g.contacts.iter().all(|c| cfg.workspace.contains(c))
        && cfg.workspace.contains(&standoff_point(g, cfg.standoff));
    if fits && inside && !corridor_blocked(g, cfg, objects) {
        Reachability::Reachable
    } else {
        Reachability::Unreachable
    }
}
