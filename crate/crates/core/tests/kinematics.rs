mod common;

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synergy_core::kinematics::{solve_ik_anchors, IkConfig, JointKind};
use synergy_core::transform::RigidTransform;
use synergy_core::zoo::{self, builtin_models};
use synergy_core::{compute_anchors, Error, ManipulatorModel};

use common::{joint, manifest};

fn load(m: synergy_core::Manifest) -> ManipulatorModel {
    ManipulatorModel::load(m).unwrap()
}

#[test]
fn revolute_at_zero_gives_origin_transform() {
    let m = load(manifest(
        "r",
        &["base", "l1"],
        vec![joint("j", JointKind::Revolute, [0.0, 0.0, 1.0], [0.2, -0.1, 0.3], "base", "l1", Some([-2.0, 2.0]))],
        "l1",
    ));
    let poses = m.forward_kinematics(&[0.0]).unwrap();
    assert_eq!(poses["l1"], RigidTransform::from_translation(Vector3::new(0.2, -0.1, 0.3)));
    assert_eq!(poses["base"], RigidTransform::identity());
}

#[test]
fn quarter_turn_moves_child_offset_onto_y() {
    let m = load(manifest(
        "q",
        &["base", "l1", "l2"],
        vec![
            joint("j", JointKind::Revolute, [0.0, 0.0, 1.0], [0.5, 0.0, 0.0], "base", "l1", Some([-2.0, 2.0])),
            joint("f", JointKind::Fixed, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], "l1", "l2", None),
        ],
        "l2",
    ));
    let poses = m.forward_kinematics(&[FRAC_PI_2]).unwrap();
    let rel = poses["l1"].inverse().compose(&poses["l2"]).translation;
    let in_joint_frame = poses["l1"].rotation * rel;
    assert!((in_joint_frame - Vector3::new(0.0, 1.0, 0.0)).amax() < 1e-15);
    assert!((poses["l2"].translation - Vector3::new(0.5, 1.0, 0.0)).amax() < 1e-15);
}

#[test]
fn stacked_prismatic_joints_add() {
    let m = load(manifest(
        "p",
        &["base", "a", "b"],
        vec![
            joint("p1", JointKind::Prismatic, [1.0, 0.0, 0.0], [0.01, 0.0, 0.0], "base", "a", Some([0.0, 1.0])),
            joint("p2", JointKind::Prismatic, [1.0, 0.0, 0.0], [0.02, 0.0, 0.0], "a", "b", Some([0.0, 1.0])),
        ],
        "b",
    ));
    let poses = m.forward_kinematics(&[0.1, 0.2]).unwrap();
    assert!((poses["b"].translation.x - 0.33).abs() < 1e-15);
}

#[test]
fn joint_count_mismatch_is_an_error() {
    let m = &builtin_models()[0];
    assert!(matches!(m.fk(&[0.0, 0.0]), Err(Error::JointCount { expected: 1, got: 2 })));
}

#[test]
fn fk_is_bitwise_deterministic() {
    for m in builtin_models() {
        let j = m.sample_joints(3);
        assert_eq!(m.forward_kinematics(&j).unwrap(), m.forward_kinematics(&j).unwrap());
    }
}

#[test]
fn elementary_jacobian_columns() {
    let m = load(manifest(
        "pj",
        &["base", "a", "b"],
        vec![
            joint("p", JointKind::Prismatic, [1.0, 0.0, 0.0], [0.0; 3], "base", "a", Some([-1.0, 1.0])),
            joint("r", JointKind::Revolute, [0.0, 0.0, 1.0], [0.0; 3], "a", "b", Some([-1.0, 1.0])),
        ],
        "b",
    ));
    let jac = m.point_jacobian(&[0.0, 0.0], "b", &Vector3::new(1.0, 0.0, 0.0)).unwrap();
    assert_eq!(jac.column(0).into_owned(), Vector3::new(1.0, 0.0, 0.0));
    assert!((jac.column(1).into_owned() - Vector3::new(0.0, 1.0, 0.0)).amax() < 1e-15);
    // the base is upstream of both joints
    let jac = m.point_jacobian(&[0.3, 0.2], "base", &Vector3::new(1.0, 2.0, 0.0)).unwrap();
    assert!(jac.iter().all(|v| *v == 0.0));
    assert!(matches!(
        m.point_jacobian(&[0.0, 0.0], "nope", &Vector3::zeros()),
        Err(Error::UnknownLink(_))
    ));
}

#[test]
fn jacobian_matches_central_differences() {
    let h = 1e-6;
    for m in builtin_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let j = m.sample_joints_with(&mut rng);
            for a in m.anchors() {
                let link = &m.links()[a.link];
                let jac = m.point_jacobian(&j, link, &a.offset).unwrap();
                for d in 0..m.dof() {
                    let mut hi = j.clone();
                    let mut lo = j.clone();
                    hi[d] += h;
                    lo[d] -= h;
                    let p = |q: &[f64]| m.fk(q).unwrap().links[a.link].transform_point(&a.offset);
                    let fd = (p(&hi) - p(&lo)) / (2.0 * h);
                    worst = worst.max((jac.column(d) - fd).amax());
                }
            }
        }
        assert!(worst < 1e-6, "{}: {worst:e}", m.name());
    }
}

#[test]
fn sampling_respects_limits_and_seed() {
    for m in builtin_models() {
        for seed in 0..50 {
            let j = m.sample_joints(seed);
            assert!(m.within_limits(&j));
            assert_eq!(j, m.sample_joints(seed));
        }
    }
}

#[test]
fn unit_interval_sample_mean() {
    let m = load(manifest(
        "u",
        &["base", "a"],
        vec![joint("p", JointKind::Prismatic, [1.0, 0.0, 0.0], [0.0; 3], "base", "a", Some([0.0, 1.0]))],
        "a",
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mean = (0..10_000).map(|_| m.sample_joints_with(&mut rng)[0]).sum::<f64>() / 10_000.0;
    assert!((mean - 0.5).abs() < 0.02, "{mean}");
}

fn weighted_rms(model: &ManipulatorModel, j: &[f64], targets: &synergy_core::AnchorSet, w: &[f64; 22]) -> f64 {
    let a = compute_anchors(model, j, &RigidTransform::identity()).unwrap();
    let sq: f64 = (0..22).map(|i| w[i] * (a[i] - targets[i]).norm_squared()).sum();
    (sq / w.iter().sum::<f64>()).sqrt()
}

#[test]
fn ik_fixed_point() {
    for m in builtin_models() {
        let j = m.sample_joints(9);
        let targets = compute_anchors(&m, &j, &RigidTransform::identity()).unwrap();
        let out = solve_ik_anchors(&m, &targets, &[1.0; 22], m.preliminary_eef(), &j, &IkConfig::default()).unwrap();
        assert_eq!(out.joints, j);
        assert_eq!(out.iterations, 0);
    }
}

#[test]
fn ik_recovers_reachable_targets() {
    let w = [1.0; 22];
    for m in builtin_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let target_j = m.sample_joints_with(&mut rng);
            let targets = compute_anchors(&m, &target_j, &RigidTransform::identity()).unwrap();
            let out = solve_ik_anchors(&m, &targets, &w, m.preliminary_eef(), &m.mid_range(), &IkConfig::default()).unwrap();
            assert!(m.within_limits(&out.joints));
            let r = weighted_rms(&m, &out.joints, &targets, &w);
            assert!(r < 1e-3, "{}: residual {r}", m.name());
            assert!((r - out.residual).abs() < 1e-12);
        }
    }
}

#[test]
fn ik_outside_workspace_matches_grid_search() {
    let m = ManipulatorModel::load(zoo::gripper_parallel()).unwrap();
    let w = [1.0; 22];
    let mut targets = compute_anchors(&m, &[0.03], &RigidTransform::identity()).unwrap();
    for i in 0..22 {
        targets[i] += Vector3::new(0.0, 10.0, 0.0);
    }
    let out = solve_ik_anchors(&m, &targets, &w, m.preliminary_eef(), &m.mid_range(), &IkConfig::default()).unwrap();
    assert!(!out.converged);
    assert!(m.within_limits(&out.joints));
    let (lo, hi) = m.limits()[0];
    let steps = 100_000;
    let best = (0..=steps)
        .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
        .map(|q| (weighted_rms(&m, &[q], &targets, &w), q))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    assert!((out.residual - best.0).abs() < 1e-4);
    let reached = compute_anchors(&m, &out.joints, &RigidTransform::identity()).unwrap();
    let oracle = compute_anchors(&m, &[best.1], &RigidTransform::identity()).unwrap();
    assert!(reached.rms_distance(&oracle) < 1e-4);
}

#[test]
fn ik_rejects_non_finite_targets_and_bad_joint_counts() {
    let m = &builtin_models()[2];
    let mut targets = compute_anchors(m, &m.mid_range(), &RigidTransform::identity()).unwrap();
    assert!(matches!(
        solve_ik_anchors(m, &targets, &[1.0; 22], m.preliminary_eef(), &[0.0], &IkConfig::default()),
        Err(Error::JointCount { .. })
    ));
    targets[4].x = f64::NAN;
    assert!(matches!(
        solve_ik_anchors(m, &targets, &[1.0; 22], m.preliminary_eef(), &m.mid_range(), &IkConfig::default()),
        Err(Error::NonFinite(_))
    ));
}

#[test]
fn parallel_gripper_manifest_has_one_dof() {
    let m = ManipulatorModel::load(zoo::gripper_parallel()).unwrap();
    assert_eq!(m.dof(), 1);
    assert_eq!(m.anchors().len(), 22);
    let dofs: Vec<usize> = builtin_models().iter().map(|m| m.dof()).collect();
    assert_eq!(dofs, vec![1, 1, 2, 6, 12, 15]);
}

fn validation_message(m: synergy_core::Manifest) -> String {
    match ManipulatorModel::load(m) {
        Err(Error::Validation(msg)) => msg,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn duplicate_anchor_index_rejected() {
    let mut m = zoo::gripper_parallel();
    m.anchors[8].index = 7;
    assert!(validation_message(m).contains("duplicate anchor index"));
}

#[test]
fn empty_joint_range_rejected() {
    let mut m = zoo::gripper_parallel();
    for j in &mut m.joints {
        if j.limits.is_some() {
            j.limits = Some([0.04, 0.04]);
        }
    }
    assert!(validation_message(m).contains("empty joint range"));
}

#[test]
fn cyclic_tree_rejected() {
    let m = manifest(
        "c",
        &["base", "a", "b"],
        vec![
            joint("ab", JointKind::Fixed, [0.0, 0.0, 1.0], [0.0; 3], "a", "b", None),
            joint("ba", JointKind::Fixed, [0.0, 0.0, 1.0], [0.0; 3], "b", "a", None),
        ],
        "base",
    );
    assert!(validation_message(m).contains("cyclic"));
}

#[test]
fn malformed_manifest_reports_position() {
    let text = zoo::gripper_parallel().to_json_pretty().replace("\"prismatic\"", "\"sliding\"");
    match ManipulatorModel::from_json(&text) {
        Err(Error::Parse(msg)) => assert!(msg.contains("line"), "{msg}"),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn eef_on_moving_link_rejected() {
    let mut m = zoo::gripper_parallel();
    m.eef.parent = "right_jaw".into();
    assert!(validation_message(m).contains("rigidly attached"));
}

#[test]
fn manifests_round_trip_through_json() {
    for m in zoo::builtin() {
        let back = synergy_core::Manifest::from_json(&m.to_json_pretty()).unwrap();
        assert_eq!(back, m);
    }
}
