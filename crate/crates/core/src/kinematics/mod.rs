//! Kinematic trees: manifests, forward kinematics, point Jacobians,
//! joint sampling and anchor inverse kinematics.

mod anchor;
mod ik;
mod manifest;
mod model;

pub use anchor::{Finger, Region, Segment, ANCHOR_COUNT, FINGERTIPS, PALM, THUMB_TIP};
pub use ik::{solve_ik_anchors, solve_regularized, IkConfig, IkOutcome, Smoothness};
pub use manifest::{AnchorSpec, EefSpec, JointKind, JointSpec, Manifest};
pub use model::{AnchorAttachment, FkResult, Joint, JointVector, ManipulatorModel};
