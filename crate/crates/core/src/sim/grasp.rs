//! Top-down grasp synthesis for blocks and cylinders.
//!
//! Blocks are grasped at the centers of two opposing vertical faces, one
//! candidate per face pair. Cylinders are grasped at diametrically opposed
//! points at half height, at `n` azimuths evenly spread over a half turn.
//! Every candidate approaches straight down.

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::scene::{ObjectId, SceneObject, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraspId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reachability {
    Pending,
    Reachable,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub id: GraspId,
    pub object: ObjectId,
    pub label: String,
    /// Finger contact points, millimeters.
    pub contacts: [Point3<f64>; 2],
    /// Unit approach direction.
    pub approach: Vector3<f64>,
    /// Finger opening needed to span the contacts, millimeters.
    pub aperture: f64,
    pub reachability: Reachability,
}

impl GraspCandidate {
    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.contacts[0], &self.contacts[1])
    }
}

pub fn top_down() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -1.0)
}

fn place(obj: &SceneObject, local: Vector3<f64>) -> Point3<f64> {
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), obj.pose.yaw);
    Point3::new(obj.pose.x, obj.pose.y, obj.pose.z) + rot * local
}

/// Two candidates, ordered by face pair: local ±x faces, then ±y faces.
///
/// Returns an empty list for non-block objects.
pub fn plan_block_grasps(obj: &SceneObject) -> Vec<GraspCandidate> {
    let Shape::Block { side } = obj.shape else {
        return Vec::new();
    };
    let h = side / 2.0;
    let pairs = [
        [Vector3::new(h, 0.0, h), Vector3::new(-h, 0.0, h)],
        [Vector3::new(0.0, h, h), Vector3::new(0.0, -h, h)],
    ];
    pairs
        .iter()
        .enumerate()
        .map(|(i, [a, b])| GraspCandidate {
            id: GraspId(i as u32),
            object: obj.id,
            label: format!("face pair {i}"),
            contacts: [place(obj, *a), place(obj, *b)],
            approach: top_down(),
            aperture: side,
            reachability: Reachability::Pending,
        })
        .collect()
}

/// `n` candidates at azimuths `k * 180° / n` relative to the object's yaw.
pub fn plan_cylinder_grasps(obj: &SceneObject, n: usize) -> Vec<GraspCandidate> {
    let Shape::Cylinder { radius, height } = obj.shape else {
        return Vec::new();
    };
    let z = height * 0.5;
    (0..n)
        .map(|k| {
            let azimuth = k as f64 * std::f64::consts::PI / n as f64;
            let (s, c) = azimuth.sin_cos();
            let a = Vector3::new(radius * c, radius * s, z);
            let b = Vector3::new(-radius * c, -radius * s, z);
            GraspCandidate {
                id: GraspId(k as u32),
                object: obj.id,
                label: format!("azimuth {:.0} deg", azimuth.to_degrees()),
                contacts: [place(obj, a), place(obj, b)],
                approach: top_down(),
                aperture: 2.0 * radius,
                reachability: Reachability::Pending,
            }
        })
        .collect()
}

pub fn plan_grasps(obj: &SceneObject, cylinder_azimuths: usize) -> Vec<GraspCandidate> {
    match obj.shape {
        Shape::Block { .. } => plan_block_grasps(obj),
        Shape::Cylinder { .. } => plan_cylinder_grasps(obj, cylinder_azimuths.max(1)),
    }
}
