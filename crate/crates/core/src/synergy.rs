//! The trained synergy model ψ and its JSON checkpoint.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adf::{anchor_frame, AnchorSet, AnchorWeights, FrameAdjustment};
use crate::cvae::{Cvae, TrainConfig};
use crate::dataset::Normalizer;
use crate::error::{Error, Result};
use crate::kinematics::{IkConfig, Manifest, ManipulatorModel};
use crate::nn::{Mlp, MlpState};
use crate::pca::PcaBasis;
use crate::refine::{IterationLog, RefineConfig};
use crate::transform::{Pose, RigidTransform};

pub const CHECKPOINT_VERSION: u32 = 1;

/// CVAE, PCA basis, normalizer and per-manipulator frame adjustments,
/// all indexed by the same manipulator registry.
#[derive(Debug, Clone)]
pub struct SynergyModel {
    pub models: Vec<ManipulatorModel>,
    pub normalizer: Normalizer,
    pub deltas: Vec<FrameAdjustment>,
    pub cvae: Cvae,
    pub pca: PcaBasis,
    /// Reconstruction weights used in training.
    pub anchor_weights: AnchorWeights,
    pub train_config: TrainConfig,
    pub refine_config: RefineConfig,
    pub ik: IkConfig,
    pub refinement: Vec<IterationLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub registry: Vec<String>,
    pub normalizer: Normalizer,
    pub deltas: BTreeMap<String, Pose>,
    pub encoder: MlpState,
    pub decoder: MlpState,
    pub pca: PcaBasis,
    pub train_config: TrainConfig,
    pub refine_config: RefineConfig,
    pub ik: IkConfig,
    pub anchor_weights: Vec<f64>,
    pub models: Vec<Manifest>,
    #[serde(default)]
    pub refinement: Vec<IterationLog>,
}

impl SynergyModel {
    pub fn registry(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.name()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m.name() == name)
            .ok_or_else(|| Error::UnknownManipulator {
                name: name.to_string(),
                registered: self.registry().join(", "),
            })
    }

    pub fn model(&self, name: &str) -> Result<&ManipulatorModel> {
        Ok(&self.models[self.index_of(name)?])
    }

    /// Refined end-effector frame of manipulator `id` in its root frame.
    pub fn frame(&self, id: usize) -> RigidTransform {
        anchor_frame(&self.models[id], &self.deltas[id])
    }

    /// Decodes latent `z` for manipulator `id` into anchors in metres.
    pub fn decode_latent(&self, z: &crate::cvae::LatentVector, id: usize) -> Result<AnchorSet> {
        let normalized = self.cvae.decode_id(z, id)?;
        Ok(self.normalizer.denormalize(&normalized))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            registry: self.registry().iter().map(|s| s.to_string()).collect(),
            normalizer: self.normalizer,
            deltas: self
                .models
                .iter()
                .zip(&self.deltas)
                .map(|(m, d)| (m.name().to_string(), Pose::from(d)))
                .collect(),
            encoder: self.cvae.encoder.to_state(),
            decoder: self.cvae.decoder.to_state(),
            pca: self.pca.clone(),
            train_config: self.train_config.clone(),
            refine_config: self.refine_config.clone(),
            ik: self.ik,
            anchor_weights: self.anchor_weights.to_vec(),
            models: self.models.iter().map(|m| m.manifest().clone()).collect(),
            refinement: self.refinement.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        let models = ck
            .models
            .into_iter()
            .map(ManipulatorModel::load)
            .collect::<Result<Vec<_>>>()?;
        let names: Vec<&str> = models.iter().map(|m| m.name()).collect();
        if names != ck.registry.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Validation(
                "checkpoint registry does not match its embedded manifests".into(),
            ));
        }
        let deltas = ck
            .registry
            .iter()
            .map(|name| {
                ck.deltas
                    .get(name)
                    .map(RigidTransform::from)
                    .ok_or_else(|| Error::Validation(format!("no frame adjustment for `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let m = models.len();
        let encoder = Mlp::from_state(&ck.encoder).map_err(Error::Validation)?;
        let decoder = Mlp::from_state(&ck.decoder).map_err(Error::Validation)?;
        let cvae_dims = [
            encoder.input_dim() == crate::cvae::ANCHOR_DIM + m,
            encoder.output_dim() == 2 * crate::cvae::LATENT_DIM,
            decoder.input_dim() == crate::cvae::LATENT_DIM + m,
            decoder.output_dim() == crate::cvae::ANCHOR_DIM,
        ];
        if cvae_dims.contains(&false) {
            return Err(Error::Validation(format!(
                "network shapes do not match a registry of {m} manipulators"
            )));
        }
        let anchor_weights: AnchorWeights = ck
            .anchor_weights
            .as_slice()
            .try_into()
            .map_err(|_| Error::Validation("anchor_weights must have 22 entries".into()))?;
        ck.refine_config.validate(&ck.registry)?;
        Ok(Self {
            models,
            normalizer: ck.normalizer,
            deltas,
            cvae: Cvae {
                manipulators: m,
                encoder,
                decoder,
            },
            pca: ck.pca,
            anchor_weights,
            train_config: ck.train_config,
            refine_config: ck.refine_config,
            ik: ck.ik,
            refinement: ck.refinement,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_checkpoint())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("checkpoint: {e}")))?;
        Self::from_checkpoint(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
