//! Rigid transforms in SE(3) stored as a rotation matrix plus translation.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

/// A proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    /// Rotation about a unit `axis` by `angle` radians.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self::new(*rot.matrix(), Vector3::zeros())
    }

    /// Builds a transform from a translation and roll-pitch-yaw angles
    /// (fixed-axis x, then y, then z: `R = Rz(yaw)·Ry(pitch)·Rx(roll)`).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        let rot = Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]);
        Self::new(*rot.matrix(), Vector3::from(xyz))
    }

    pub fn xyz(&self) -> [f64; 3] {
        self.translation.into()
    }

    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = Rotation3::from_matrix_unchecked(self.rotation).euler_angles();
        [r, p, y]
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Rotation angle plus translation norm; the increment size used to
    /// track frame-refinement convergence.
    pub fn magnitude(&self) -> f64 {
        self.angle() + self.translation.norm()
    }

    /// Largest deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.amax().max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite())
    }
}

/// Serialized form `{"xyz": [..], "rpy": [..]}` shared by manifests,
/// checkpoints and trajectory files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

impl From<&RigidTransform> for Pose {
    fn from(t: &RigidTransform) -> Self {
        Pose {
            xyz: t.xyz(),
            rpy: t.rpy(),
        }
    }
}

impl From<&Pose> for RigidTransform {
    fn from(p: &Pose) -> Self {
        RigidTransform::from_xyz_rpy(p.xyz, p.rpy)
    }
}
