//! Anchor-based postural synergies shared across manipulators of
//! different morphologies.
//!
//! Every manipulator is described by 22 ordered anchors expressed in an
//! end-effector frame ([`adf`]). A conditional VAE ([`cvae`]) maps anchor
//! sets into a shared latent space, and a PCA ([`pca`]) over the latents
//! gives variable-length synergy coefficients. [`refine`] alternates
//! training with per-manipulator frame alignment, and [`retarget`] moves
//! poses between manipulators through the shared coefficients.

pub mod adf;
pub mod cvae;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod kinematics;
pub mod nn;
pub mod pca;
pub mod refine;
pub mod retarget;
pub mod synergy;
pub mod transform;
pub mod zoo;

pub use adf::{aperture, anchor_weights, compute_anchors, AnchorSet, AnchorWeights, FrameAdjustment};
pub use error::{Error, Result};
pub use synergy::SynergyModel;
pub use kinematics::{IkConfig, IkOutcome, JointVector, ManipulatorModel, Manifest, ANCHOR_COUNT};
pub use transform::{Pose, RigidTransform};
