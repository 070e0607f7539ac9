//! Encode and decode passes through the synergy space, cross-manipulator
//! retargeting, and the direct anchor-matching baseline.

use crate::adf::{anchor_weights, compute_anchors, AnchorSet, FrameAdjustment};
use crate::error::{Error, Result};
use crate::kinematics::{solve_regularized, IkConfig, IkOutcome, ManipulatorModel, Smoothness};
use crate::synergy::SynergyModel;
use crate::transform::RigidTransform;

/// Joints → anchors under δ → normalize → posterior mean → first `n`
/// principal coefficients.
pub fn encode_pass(psi: &SynergyModel, manip: &str, j: &[f64], n: usize) -> Result<Vec<f64>> {
    let id = psi.index_of(manip)?;
    if !(1..=crate::cvae::LATENT_DIM).contains(&n) {
        return Err(Error::ComponentCount(n));
    }
    let anchors = compute_anchors(&psi.models[id], j, &psi.deltas[id])?;
    let (mu, _) = psi.cvae.encode_id(&psi.normalizer.normalize(&anchors), id)?;
    psi.pca.forward(&mu, n)
}

/// Coefficients → latent → decoded anchors in metres, in the
/// manipulator's refined end-effector frame.
pub fn decode_anchors(psi: &SynergyModel, manip: &str, coeffs: &[f64]) -> Result<AnchorSet> {
    let id = psi.index_of(manip)?;
    let z = psi.pca.inverse(coeffs)?;
    psi.decode_latent(&z, id)
}

/// Decoded anchors solved back to joints, warm-started at `j_init`. A
/// non-converged solve is returned with its residual.
pub fn decode_pass(
    psi: &SynergyModel,
    manip: &str,
    coeffs: &[f64],
    j_init: &[f64],
) -> Result<IkOutcome> {
    let id = psi.index_of(manip)?;
    let targets = decode_anchors(psi, manip, coeffs)?;
    let model = &psi.models[id];
    solve_regularized(
        model,
        &targets,
        &anchor_weights([model]),
        &psi.frame(id),
        j_init,
        None,
        &psi.ik,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetargetResult {
    pub joints: Vec<f64>,
    /// The source end-effector pose, unchanged.
    pub eef_pose: RigidTransform,
    /// Weighted RMS distance between decoded and reached anchors, metres.
    pub anchor_residual: f64,
    pub iterations: usize,
}

/// Moves `j_src` of `src` onto `tgt` through the first `n` shared
/// coefficients. The end-effector pose is passed through.
pub fn retarget(
    psi: &SynergyModel,
    src: &str,
    j_src: &[f64],
    tgt: &str,
    j_init_tgt: &[f64],
    n: usize,
    eef_pose: RigidTransform,
) -> Result<RetargetResult> {
    psi.index_of(tgt)?;
    let coeffs = encode_pass(psi, src, j_src, n)?;
    let out = decode_pass(psi, tgt, &coeffs, j_init_tgt)?;
    Ok(RetargetResult {
        joints: out.joints,
        eef_pose,
        anchor_residual: out.residual,
        iterations: out.iterations,
    })
}

/// Fits `model` directly to `targets` (expressed in its frame under
/// `delta`) by minimizing `Σ wᵢ‖αᵢ − fᵢ(j)‖² + λ‖j_prev − j‖²`, warm-started
/// at `j_prev`.
pub fn baseline_retarget(
    targets: &AnchorSet,
    model: &ManipulatorModel,
    delta: &FrameAdjustment,
    j_prev: &[f64],
    smoothness: f64,
    config: &IkConfig,
) -> Result<IkOutcome> {
    solve_regularized(
        model,
        targets,
        &anchor_weights([model]),
        &crate::adf::anchor_frame(model, delta),
        j_prev,
        Some(Smoothness {
            previous: j_prev,
            weight: smoothness,
        }),
        config,
    )
}
