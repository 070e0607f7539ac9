//! Multi-anchor inverse kinematics by damped least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{JointVector, ManipulatorModel};
use super::ANCHOR_COUNT;
use crate::adf::{AnchorSet, AnchorWeights};
use crate::error::{Error, Result};
use crate::transform::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkConfig {
    /// Floor of the Levenberg–Marquardt damping.
    pub damping: f64,
    pub max_iterations: usize,
    /// Weighted RMS anchor residual (metres) at which the solve stops.
    pub tolerance: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            damping: 1e-4,
            max_iterations: 200,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkOutcome {
    pub joints: JointVector,
    /// Weighted RMS anchor residual in metres.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Quadratic pull towards a previous configuration, `λ‖j_prev − j‖²`.
#[derive(Debug, Clone, Copy)]
pub struct Smoothness<'a> {
    pub previous: &'a [f64],
    pub weight: f64,
}

struct Problem<'a> {
    model: &'a ManipulatorModel,
    targets: &'a AnchorSet,
    sqrt_w: [f64; ANCHOR_COUNT],
    weight_sum: f64,
    /// Maps root-frame points into the anchor frame.
    to_frame: RigidTransform,
    smooth: Option<Smoothness<'a>>,
}

impl Problem<'_> {
    /// Weighted anchor residual vector and the anchor part of the cost.
    fn residual(&self, j: &[f64]) -> Result<(DVector<f64>, f64)> {
        let fk = self.model.fk(j)?;
        let mut r = DVector::zeros(3 * ANCHOR_COUNT);
        let mut sq = 0.0;
        for i in 0..ANCHOR_COUNT {
            let p = self.to_frame.transform_point(&self.model.anchor_world(&fk, i));
            let e = (self.targets[i] - p) * self.sqrt_w[i];
            sq += e.norm_squared();
            r.fixed_rows_mut::<3>(3 * i).copy_from(&e);
        }
        Ok((r, sq))
    }

    fn cost(&self, j: &[f64], anchor_sq: f64) -> f64 {
        anchor_sq
            + self.smooth.map_or(0.0, |s| {
                s.weight
                    * j.iter()
                        .zip(s.previous)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
            })
    }

    fn rms(&self, anchor_sq: f64) -> f64 {
        if self.weight_sum > 0.0 {
            (anchor_sq / self.weight_sum).sqrt()
        } else {
            0.0
        }
    }

    fn jacobian(&self, j: &[f64]) -> Result<DMatrix<f64>> {
        let fk = self.model.fk(j)?;
        let mut jac = DMatrix::zeros(3 * ANCHOR_COUNT, self.model.dof());
        for i in 0..ANCHOR_COUNT {
            let link = self.model.anchors()[i].link;
            let p = self.model.anchor_world(&fk, i);
            self.model.point_jacobian_into(&fk, link, &p, &mut jac, 3 * i);
        }
        // Rotate each 3-row block into the anchor frame and weight it.
        let rot = self.to_frame.rotation;
        for i in 0..ANCHOR_COUNT {
            let block = jac.fixed_rows::<3>(3 * i).into_owned();
            jac.fixed_rows_mut::<3>(3 * i)
                .copy_from(&(rot * block * self.sqrt_w[i]));
        }
        Ok(jac)
    }
}

/// Minimizes `Σ wᵢ‖targetᵢ − anchorᵢ(j)‖²` over joints, where anchors are
/// measured in `frame` (a root-frame pose). Joints are clamped to their
/// limits after every step; a non-converged result is still returned.
pub fn solve_ik_anchors(
    model: &ManipulatorModel,
    targets: &AnchorSet,
    weights: &AnchorWeights,
    frame: &RigidTransform,
    j_init: &[f64],
    config: &IkConfig,
) -> Result<IkOutcome> {
    solve_regularized(model, targets, weights, frame, j_init, None, config)
}

/// [`solve_ik_anchors`] with an optional smoothness term added to the cost.
pub fn solve_regularized(
    model: &ManipulatorModel,
    targets: &AnchorSet,
    weights: &AnchorWeights,
    frame: &RigidTransform,
    j_init: &[f64],
    smooth: Option<Smoothness<'_>>,
    config: &IkConfig,
) -> Result<IkOutcome> {
    model.check_joints(j_init)?;
    if !targets.is_finite() {
        return Err(Error::NonFinite("IK targets"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Config("IK weights must be finite and non-negative".into()));
    }
    if let Some(s) = smooth {
        model.check_joints(s.previous)?;
        if !(s.weight.is_finite() && s.weight >= 0.0) {
            return Err(Error::Config("smoothness weight must be non-negative".into()));
        }
    }
    let problem = Problem {
        model,
        targets,
        sqrt_w: weights.map(f64::sqrt),
        weight_sum: weights.iter().sum(),
        to_frame: frame.inverse(),
        smooth,
    };

    let dof = model.dof();
    let mut j = j_init.to_vec();
    model.clamp(&mut j);
    let (mut r, mut sq) = problem.residual(&j)?;
    let mut cost = problem.cost(&j, sq);
    let mut mu = config.damping;
    let mut iterations = 0;

    while iterations < config.max_iterations && problem.rms(sq) >= config.tolerance {
        iterations += 1;
        let jac = problem.jacobian(&j)?;
        let mut lhs = jac.transpose() * &jac;
        let mut rhs = jac.transpose() * &r;
        if let Some(s) = smooth {
            for k in 0..dof {
                lhs[(k, k)] += s.weight;
                rhs[k] += s.weight * (s.previous[k] - j[k]);
            }
        }
        for k in 0..dof {
            lhs[(k, k)] += mu;
        }
        let Some(step) = lhs.cholesky().map(|c| c.solve(&rhs)) else {
            mu *= 10.0;
            continue;
        };
        let mut trial: Vec<f64> = j.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
        model.clamp(&mut trial);
        let (trial_r, trial_sq) = problem.residual(&trial)?;
        let trial_cost = problem.cost(&trial, trial_sq);
        if trial_cost < cost {
            let moved = trial
                .iter()
                .zip(&j)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let gain = cost - trial_cost;
            j = trial;
            r = trial_r;
            sq = trial_sq;
            cost = trial_cost;
            mu = (mu * 0.1).max(config.damping);
            if moved < 1e-12 || gain <= 1e-15 * cost.max(1e-300) {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e8 {
                break;
            }
        }
    }

    let residual = problem.rms(sq);
    Ok(IkOutcome {
        joints: j,
        residual,
        iterations,
        converged: residual < config.tolerance,
    })
}
