//! Stand-in object recognizer: perturbs true poses and drops detections.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::scene::{Scene, SceneObject, Zone};
use super::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("recognition found no objects")]
pub struct RecognitionFailure;

/// Detects the objects still in the pick area.
///
/// Each object is missed independently with the configured probability;
/// detected poses carry Gaussian noise in x, y and yaw. The random draws per
/// object are fixed in number, so a given RNG stream always lines up with
/// the same objects.
pub fn recognize<R: Rng + ?Sized>(
    scene: &Scene,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Vec<SceneObject>, RecognitionFailure> {
    let xy = Normal::new(0.0, cfg.recognition_sigma.max(0.0)).expect("finite sigma");
    let yaw = Normal::new(0.0, cfg.recognition_yaw_sigma.max(0.0)).expect("finite sigma");
    let mut detected = Vec::new();
    for obj in scene.in_zone(Zone::PickArea) {
        let miss = rng.random::<f64>() < cfg.recognition_failure;
        let (dx, dy, dyaw) = (xy.sample(rng), xy.sample(rng), yaw.sample(rng));
        if miss {
            continue;
        }
        let mut seen = obj.clone();
        seen.pose.x += dx;
        seen.pose.y += dy;
        seen.pose.yaw += dyaw;
        detected.push(seen);
    }
    if detected.is_empty() {
        Err(RecognitionFailure)
    } else {
        Ok(detected)
    }
}
