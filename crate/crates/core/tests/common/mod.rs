#![allow(dead_code)]

use synergy_core::kinematics::{AnchorSpec, EefSpec, JointKind, JointSpec, Region};
use synergy_core::{Manifest, Pose};

pub fn joint(
    name: &str,
    kind: JointKind,
    axis: [f64; 3],
    xyz: [f64; 3],
    parent: &str,
    child: &str,
    limits: Option<[f64; 2]>,
) -> JointSpec {
    JointSpec {
        name: name.into(),
        kind,
        axis,
        origin: Pose { xyz, rpy: [0.0; 3] },
        parent: parent.into(),
        child: child.into(),
        limits,
    }
}

/// A manifest whose 22 anchors all sit on `anchor_link` at distinct
/// offsets; the end-effector frame is the identity on `root`.
pub fn manifest(name: &str, links: &[&str], joints: Vec<JointSpec>, anchor_link: &str) -> Manifest {
    let anchors = (0..22)
        .map(|i| AnchorSpec {
            index: i,
            link: anchor_link.into(),
            offset: [0.01 * i as f64, 0.002 * (i % 5) as f64, 0.003 * (i % 3) as f64],
            region: Region::canonical(i).unwrap().to_string(),
        })
        .collect();
    Manifest {
        name: name.into(),
        links: links.iter().map(|s| s.to_string()).collect(),
        joints,
        anchors,
        palm_anchors: [20, 21],
        eef: EefSpec {
            parent: links[0].into(),
            xyz: [0.0; 3],
            rpy: [0.0; 3],
        },
    }
}

/// A quickly trained model on a small slice of the zoo data.
pub fn tiny_psi(budget: usize) -> synergy_core::SynergyModel {
    use synergy_core::cvae::TrainConfig;
    use synergy_core::refine::{iterative_learn, RefineConfig};
    let models = synergy_core::zoo::builtin_models();
    let ds = synergy_core::dataset::build_dataset(&models, 40, 3).unwrap();
    let train = TrainConfig {
        epochs: 4,
        batch_size: 32,
        hidden: 16,
        ..TrainConfig::default()
    };
    let refine = RefineConfig {
        budget,
        ..RefineConfig::default()
    };
    iterative_learn(&models, &ds, &refine, &train).unwrap()
}
