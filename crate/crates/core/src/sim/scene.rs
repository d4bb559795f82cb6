//! Tabletop scene: objects resting on the table plane, in millimeters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

pub const MM_PER_INCH: f64 = 25.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "object {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Block { side: f64 },
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    pub fn height(&self) -> f64 {
        match *self {
            Shape::Block { side } => side,
            Shape::Cylinder { height, .. } => height,
        }
    }

    /// Radius of the vertical cylinder enclosing the object.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Block { side } => side * std::f64::consts::FRAC_1_SQRT_2,
            Shape::Cylinder { radius, .. } => radius,
        }
    }
}

/// Position of the object's base center plus rotation about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, z: 0.0, yaw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    #[serde(rename = "pick")]
    PickArea,
    #[serde(rename = "place")]
    PlaceArea,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    /// Benchmark label: block1, block2, block3 or ycb.
    pub label: String,
    pub shape: Shape,
    pub pose: Pose,
    pub zone: Zone,
}

impl SceneObject {
    pub fn horizontal_distance(&self, other: &SceneObject) -> f64 {
        (self.pose.x - other.pose.x).hypot(self.pose.y - other.pose.y)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default, rename = "object")]
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Three blocks of 2, 2.5 and 3 inches plus a shaving-cream-can cylinder,
    /// all in the pick area.
    pub fn default_tabletop() -> Self {
        let block = |id: u32, label: &str, inches: f64, x: f64| SceneObject {
            id: ObjectId(id),
            label: label.to_string(),
            shape: Shape::Block { side: inches * MM_PER_INCH },
            pose: Pose::new(x, -150.0, 0.0),
            zone: Zone::PickArea,
        };
        Scene {
            objects: vec![
                block(1, "block1", 2.0, -255.0),
                block(2, "block2", 2.5, -85.0),
                block(3, "block3", 3.0, 85.0),
                SceneObject {
                    id: ObjectId(4),
                    label: "ycb".to_string(),
                    shape: Shape::Cylinder { radius: 33.0, height: 170.0 },
                    pose: Pose::new(255.0, -150.0, 0.0),
                    zone: Zone::PickArea,
                },
            ],
        }
    }

    pub fn get(&self, id: ObjectId) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn get_mut(&mut self, id: ObjectId) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn in_zone(&self, zone: Zone) -> impl Iterator<Item = &SceneObject> {
        self.objects.iter().filter(move |o| o.zone == zone)
    }

    /// Objects must rest on the table, have positive dimensions, unique ids
    /// and disjoint bounding cylinders.
    pub fn validate(&self) -> Result<(), SimError> {
        for (i, o) in self.objects.iter().enumerate() {
            if o.pose.z.abs() > 1e-9 {
                return Err(SimError::InvalidScene(format!("{} does not rest on the table", o.id)));
            }
            let ok = match o.shape {
                Shape::Block { side } => side > 0.0,
                Shape::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
            };
            if !ok {
                return Err(SimError::InvalidScene(format!("{} has a non-positive dimension", o.id)));
            }
            for other in &self.objects[i + 1..] {
                if other.id == o.id {
                    return Err(SimError::InvalidScene(format!("duplicate id {}", o.id.0)));
                }
                let gap = o.horizontal_distance(other)
                    - o.shape.bounding_radius()
                    - other.shape.bounding_radius();
                if gap < 0.0 {
                    return Err(SimError::InvalidScene(format!(
                        "{} and {} interpenetrate",
                        o.id, other.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let scene: Scene =
            toml::from_str(text).map_err(|e| SimError::InvalidScene(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::InvalidScene(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
