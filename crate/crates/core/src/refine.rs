//! End-effector frame refinement by single-step weighted ICP against the
//! reference manipulators, and the outer train/refine loop.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::adf::{anchor_weights, aperture, AnchorSet, FrameAdjustment};
use crate::cvae::{reconstruction_error, train_from, weighted_l1, Cvae, LossParts, TrainConfig, TrainingSet};
use crate::dataset::{anchor_views, JointDataset, Normalizer};
use crate::error::{Error, Result};
use crate::kinematics::{IkConfig, ManipulatorModel, ANCHOR_COUNT, FINGERTIPS};
use crate::pca::PcaBasis;
use crate::synergy::SynergyModel;
use crate::transform::{Pose, RigidTransform};
use crate::zoo::REFERENCES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    /// Number of evenly spaced samples along the first component.
    pub k: usize,
    pub pc_range: [f64; 2],
    pub icp_weights: [f64; ANCHOR_COUNT],
    pub budget: usize,
    pub references: Vec<String>,
}

/// 2.0 on the thumb anchors and the fingertips, 1.0 elsewhere.
pub fn default_icp_weights() -> [f64; ANCHOR_COUNT] {
    let mut w = [1.0; ANCHOR_COUNT];
    for i in (0..4).chain(FINGERTIPS) {
        w[i] = 2.0;
    }
    w
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            k: 9,
            pc_range: [-2.5, 2.5],
            icp_weights: default_icp_weights(),
            budget: 3,
            references: REFERENCES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RefineConfig {
    pub fn validate<S: AsRef<str>>(&self, registry: &[S]) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.budget < 1 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        let [lo, hi] = self.pc_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid pc_range [{lo}, {hi}]")));
        }
        if self.icp_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || self.icp_weights.iter().all(|w| *w == 0.0)
        {
            return Err(Error::Config("ICP weights must be non-negative and not all zero".into()));
        }
        if self.references.is_empty() {
            return Err(Error::Config("reference set is empty".into()));
        }
        for r in &self.references {
            if !registry.iter().any(|n| n.as_ref() == r) {
                return Err(Error::UnknownManipulator {
                    name: r.clone(),
                    registered: registry.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(", "),
                });
            }
        }
        Ok(())
    }

    /// The `k` first-component coefficients swept during refinement.
    pub fn coefficients(&self) -> Vec<f64> {
        linspace(self.pc_range[0], self.pc_range[1], self.k)
    }
}

pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Rigid transform `{R, t}` minimizing `Σ wᵢ‖dstᵢ − R·srcᵢ − t‖²`
/// (weighted Kabsch with a reflection fix). When either cloud collapses
/// to a single point the rotation is the identity and `t` maps centroid
/// to centroid.
pub fn weighted_icp_step(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    weights: &[f64],
) -> Result<RigidTransform> {
    if src.len() != dst.len() || src.len() != weights.len() {
        return Err(Error::Shape(format!(
            "ICP needs equal cardinalities, got {}, {} and {} weights",
            src.len(),
            dst.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Config("ICP weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Config("ICP weights are all zero".into()));
    }
    if src.iter().chain(dst).any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("ICP points"));
    }
    let centroid = |pts: &[Vector3<f64>]| {
        pts.iter()
            .zip(weights)
            .fold(Vector3::zeros(), |acc, (p, w)| acc + p * *w)
            / total
    };
    let cs = centroid(src);
    let cd = centroid(dst);
    let mut h = Matrix3::zeros();
    for ((s, d), w) in src.iter().zip(dst).zip(weights) {
        h += (s - cs) * (d - cd).transpose() * *w;
    }
    if h.iter().all(|v| *v == 0.0) {
        return Ok(RigidTransform::from_translation(cd - cs));
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let mut fix = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let rotation = v * fix * u.transpose();
    Ok(RigidTransform::new(rotation, cd - rotation * cs))
}

/// Weighted RMS of `dst − T·src`.
pub fn icp_residual(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    weights: &[f64],
    t: &RigidTransform,
) -> f64 {
    let total: f64 = weights.iter().sum();
    let sq: f64 = src
        .iter()
        .zip(dst)
        .zip(weights)
        .map(|((s, d), w)| w * (d - t.transform_point(s)).norm_squared())
        .sum();
    (sq / total).sqrt()
}

type Cloud = Vec<Vector3<f64>>;

/// Outcome of one frame refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRefinement {
    /// Increment to compose on the right of the current δ.
    pub step: FrameAdjustment,
    /// Weighted RMS misalignment before and after the step, metres.
    pub residual_before: f64,
    pub residual_after: f64,
}

/// Decoded target anchors along the first component, and the mean of the
/// reference manipulators' decoded anchors at the same coefficients, all
/// in metres.
pub fn sweep_clouds(
    psi: &SynergyModel,
    tgt: usize,
    config: &RefineConfig,
) -> Result<(Cloud, Cloud)> {
    let refs = config
        .references
        .iter()
        .map(|r| psi.index_of(r))
        .collect::<Result<Vec<_>>>()?;
    let mut src = Vec::with_capacity(config.k * ANCHOR_COUNT);
    let mut dst = Vec::with_capacity(config.k * ANCHOR_COUNT);
    for c in config.coefficients() {
        let z = psi.pca.inverse(&[c])?;
        let target = psi.decode_latent(&z, tgt)?;
        let decoded = refs
            .iter()
            .map(|&r| psi.decode_latent(&z, r))
            .collect::<Result<Vec<_>>>()?;
        let mean = AnchorSet::mean(&decoded).expect("reference set is non-empty");
        src.extend(target.iter());
        dst.extend(mean.iter());
    }
    Ok((src, dst))
}

/// One weighted ICP step aligning the target's decoded anchors to the
/// reference mean. The returned step moves the frame, so anchors
/// re-expressed under `δ ∘ step` follow the registration transform.
pub fn refine_frame(psi: &SynergyModel, tgt: &str, config: &RefineConfig) -> Result<FrameRefinement> {
    let id = psi.index_of(tgt)?;
    let (src, dst) = sweep_clouds(psi, id, config)?;
    let weights: Vec<f64> = (0..src.len()).map(|i| config.icp_weights[i % ANCHOR_COUNT]).collect();
    let t = weighted_icp_step(&src, &dst, &weights)?;
    Ok(FrameRefinement {
        step: t.inverse(),
        residual_before: icp_residual(&src, &dst, &weights, &RigidTransform::identity()),
        residual_after: icp_residual(&src, &dst, &weights, &t),
    })
}

/// Orients the first component so that larger coefficients open the
/// reference manipulators on average.
pub fn orient_first_component(psi: &mut SynergyModel, config: &RefineConfig) -> Result<()> {
    let [lo, hi] = config.pc_range;
    let mean_aperture = |psi: &SynergyModel, c: f64| -> Result<f64> {
        let z = psi.pca.inverse(&[c])?;
        let mut sum = 0.0;
        for r in &config.references {
            sum += aperture(&psi.decode_latent(&z, psi.index_of(r)?)?);
        }
        Ok(sum / config.references.len() as f64)
    };
    if mean_aperture(psi, hi)? < mean_aperture(psi, lo)? {
        psi.pca.flip(0);
    }
    psi.pca.aperture_oriented = true;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub manip: String,
    /// Accumulated δ after this iteration.
    pub delta: Pose,
    pub step: Pose,
    /// Rotation angle plus translation norm of the step.
    pub increment: f64,
    pub icp_residual_before: f64,
    pub icp_residual_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub losses: Vec<LossParts>,
    /// Held-out weighted L1 per manipulator, normalized units.
    pub held_out_recon: Vec<f64>,
    /// Same metric for the per-manipulator mean-anchor predictor.
    pub mean_predictor: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub frames: Vec<FrameLog>,
    pub mean_residual_before: f64,
    pub mean_residual_after: f64,
}

/// Number of leading samples per manipulator used for training; the rest
/// are held out.
pub fn training_count(n: usize, held_out_fraction: f64) -> usize {
    let held = ((n as f64 * held_out_fraction).round() as usize).min(n.saturating_sub(1));
    n - held
}

/// Alternates training and frame refinement `config.budget` times,
/// starting from identity frame adjustments. Each pass continues training
/// from the previous pass's networks. The returned model pairs the last
/// pass's networks with the frames they were trained in; that pass's own
/// refinement is only logged.
pub fn iterative_learn(
    models: &[ManipulatorModel],
    dataset: &JointDataset,
    config: &RefineConfig,
    train_config: &TrainConfig,
) -> Result<SynergyModel> {
    let registry: Vec<&str> = models.iter().map(|m| m.name()).collect();
    config.validate(&registry)?;
    train_config.validate()?;
    dataset.check_models(models)?;
    let n_train = training_count(dataset.n, train_config.held_out_fraction);
    let weights = anchor_weights(models);
    let mut deltas = vec![FrameAdjustment::identity(); models.len()];
    let mut history: Vec<IterationLog> = Vec::new();
    let mut last: Option<SynergyModel> = None;

    for iteration in 1..=config.budget {
        let wrap = |e: Error| Error::Iteration {
            iteration,
            source: Box::new(e),
        };
        let views = anchor_views(models, dataset, &deltas).map_err(wrap)?;
        let normalizer =
            Normalizer::fit(views.iter().flat_map(|v| &v[..n_train])).map_err(wrap)?;
        let normalized: Vec<Vec<AnchorSet>> = views
            .iter()
            .map(|v| v.iter().map(|a| normalizer.normalize(a)).collect())
            .collect();
        let split = |range: fn(&[AnchorSet], usize) -> &[AnchorSet]| {
            TrainingSet::from_sets(
                normalized
                    .iter()
                    .enumerate()
                    .flat_map(|(id, v)| range(v, n_train).iter().map(move |a| (a, id))),
            )
        };
        let train_set = split(|v, n| &v[..n]);
        let held_set = split(|v, n| &v[n..]);

        log::info!("iteration {iteration}: training on {} anchor sets", train_set.len());
        let init = match &last {
            Some(prev) => prev.cvae.clone(),
            None => Cvae::new(models.len(), train_config.hidden, train_config.seed),
        };
        let (cvae, report) = train_from(init, &train_set, &weights, train_config).map_err(wrap)?;
        let (mu, _) = cvae.encode_batch(train_set.x.view(), &train_set.ids).map_err(wrap)?;
        let latents: Vec<_> = mu
            .outer_iter()
            .map(|r| std::array::from_fn(|k| r[k]))
            .collect();
        let pca = PcaBasis::fit(&latents).map_err(wrap)?;

        let mut psi = SynergyModel {
            models: models.to_vec(),
            normalizer,
            deltas: deltas.clone(),
            cvae,
            pca,
            anchor_weights: weights,
            train_config: train_config.clone(),
            refine_config: config.clone(),
            ik: IkConfig::default(),
            refinement: Vec::new(),
        };
        orient_first_component(&mut psi, config).map_err(wrap)?;

        let held_out_recon = reconstruction_error(&psi.cvae, &held_set, &weights).map_err(wrap)?;
        let mean_predictor = normalized
            .iter()
            .map(|v| mean_predictor_error(&v[..n_train], &v[n_train..], &weights))
            .collect();

        let mut frames = Vec::with_capacity(models.len());
        let mut new_deltas = deltas.clone();
        for (id, m) in models.iter().enumerate() {
            let r = refine_frame(&psi, m.name(), config).map_err(wrap)?;
            new_deltas[id] = deltas[id].compose(&r.step);
            frames.push(FrameLog {
                manip: m.name().to_string(),
                delta: Pose::from(&new_deltas[id]),
                step: Pose::from(&r.step),
                increment: r.step.magnitude(),
                icp_residual_before: r.residual_before,
                icp_residual_after: r.residual_after,
            });
        }
        let mean = |f: fn(&FrameLog) -> f64| frames.iter().map(f).sum::<f64>() / frames.len() as f64;
        let entry = IterationLog {
            iteration,
            losses: report.epochs,
            held_out_recon,
            mean_predictor,
            explained_ratio: psi.pca.explained_ratio().to_vec(),
            mean_residual_before: mean(|f| f.icp_residual_before),
            mean_residual_after: mean(|f| f.icp_residual_after),
            frames,
        };
        log::info!(
            "iteration {iteration}: mean ICP residual {:.5} -> {:.5} m",
            entry.mean_residual_before,
            entry.mean_residual_after
        );
        history.push(entry);
        deltas = new_deltas;
        last = Some(psi);
    }

    let mut psi = last.expect("budget is at least 1");
    psi.refinement = history;
    Ok(psi)
}

/// Weighted L1 error of predicting every `test` set by the mean of `train`.
pub fn mean_predictor_error(
    train: &[AnchorSet],
    test: &[AnchorSet],
    weights: &crate::adf::AnchorWeights,
) -> f64 {
    let Some(mean) = AnchorSet::mean(train) else {
        return 0.0;
    };
    if test.is_empty() {
        return 0.0;
    }
    let m = mean.to_flat();
    test.iter()
        .map(|a| weighted_l1(&a.to_flat(), &m, weights))
        .sum::<f64>()
        / test.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cloud() -> Vec<Vector3<f64>> {
        (0..22)
            .map(|i| {
                let t = i as f64;
                Vector3::new(t.sin(), (1.3 * t).cos(), 0.1 * t - 1.0)
            })
            .collect()
    }

    #[test]
    fn identical_clouds_give_identity() {
        let p = cloud();
        let t = weighted_icp_step(&p, &p, &[1.0; 22]).unwrap();
        assert!((t.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!(t.translation.amax() < 1e-12);
    }

    #[test]
    fn coincident_points_give_centroid_translation() {
        let src = vec![Vector3::new(1.0, 2.0, 3.0); 5];
        let dst = vec![Vector3::new(0.0, 0.0, 1.0); 5];
        let t = weighted_icp_step(&src, &dst, &[1.0; 5]).unwrap();
        assert_eq!(t.rotation, Matrix3::identity());
        assert_eq!(t.translation, Vector3::new(-1.0, -2.0, -2.0));
    }

    #[test]
    fn reflection_spectrum_still_gives_rotation() {
        let src = cloud();
        let dst: Vec<_> = src.iter().map(|p| Vector3::new(p.x, p.y, -p.z)).collect();
        let t = weighted_icp_step(&src, &dst, &[1.0; 22]).unwrap();
        assert_relative_eq!(t.rotation.determinant(), 1.0, epsilon = 1e-9);
        assert!(t.orthonormality_error() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = cloud();
        assert!(weighted_icp_step(&p, &p[..3], &[1.0; 22]).is_err());
        assert!(weighted_icp_step(&p, &p, &[0.0; 22]).is_err());
        let mut w = [1.0; 22];
        w[3] = -1.0;
        assert!(weighted_icp_step(&p, &p, &w).is_err());
    }

    #[test]
    fn default_weights_favor_thumb_and_tips() {
        let w = default_icp_weights();
        assert_eq!(w.iter().filter(|&&v| v == 2.0).count(), 8);
        assert_eq!(w[20], 1.0);
        assert_eq!(w[19], 2.0);
    }

    #[test]
    fn linspace_endpoints() {
        let c = RefineConfig::default().coefficients();
        assert_eq!(c.len(), 9);
        assert_eq!(c[0], -2.5);
        assert_eq!(c[8], 2.5);
        assert_eq!(c[4], 0.0);
    }

    #[test]
    fn config_validation() {
        let names = crate::zoo::NAMES;
        assert!(RefineConfig::default().validate(&names).is_ok());
        let bad = RefineConfig { k: 1, ..RefineConfig::default() };
        assert!(bad.validate(&names).is_err());
        let bad = RefineConfig { budget: 0, ..RefineConfig::default() };
        assert!(bad.validate(&names).is_err());
        let bad = RefineConfig { references: vec!["nope".into()], ..RefineConfig::default() };
        assert!(matches!(bad.validate(&names), Err(Error::UnknownManipulator { .. })));
    }

    #[test]
    fn split_keeps_a_training_sample() {
        assert_eq!(training_count(2000, 0.1), 1800);
        assert_eq!(training_count(1, 0.5), 1);
        assert_eq!(training_count(3, 0.9), 1);
    }
}
