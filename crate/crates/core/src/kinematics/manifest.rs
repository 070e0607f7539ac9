//! JSON manifest describing a manipulator: kinematic tree, limits,
//! anchor attachments and the preliminary end-effector frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: JointKind,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    pub origin: Pose,
    pub parent: String,
    pub child: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub index: usize,
    pub link: String,
    pub offset: [f64; 3],
    pub region: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EefSpec {
    pub parent: String,
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub links: Vec<String>,
    pub joints: Vec<JointSpec>,
    pub anchors: Vec<AnchorSpec>,
    pub palm_anchors: [usize; 2],
    pub eef: EefSpec,
}

impl Manifest {
    /// Parses a manifest document. Errors carry serde's line/column and
    /// the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
