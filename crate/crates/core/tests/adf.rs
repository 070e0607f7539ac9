mod common;

use nalgebra::Vector3;
use proptest::prelude::*;
use synergy_core::kinematics::{FINGERTIPS, PALM, THUMB_TIP};
use synergy_core::transform::RigidTransform;
use synergy_core::zoo::{self, builtin_models};
use synergy_core::{anchor_weights, aperture, compute_anchors, ManipulatorModel};

fn model(m: synergy_core::Manifest) -> ManipulatorModel {
    ManipulatorModel::load(m).unwrap()
}

#[test]
fn identity_delta_expresses_offsets_in_preliminary_frame() {
    let m = model(zoo::gripper_parallel());
    let j = [0.0];
    let a = compute_anchors(&m, &j, &RigidTransform::identity()).unwrap();
    let fk = m.forward_kinematics(&j).unwrap();
    let inv = m.preliminary_eef().inverse();
    for (i, att) in m.anchors().iter().enumerate() {
        let world = fk[&m.links()[att.link]].transform_point(&att.offset);
        assert!((a[i] - inv.transform_point(&world)).amax() < 1e-15);
    }
}

#[test]
fn translation_delta_shifts_rows() {
    for m in builtin_models() {
        let j = m.sample_joints(1);
        let t = Vector3::new(0.01, -0.02, 0.005);
        let base = compute_anchors(&m, &j, &RigidTransform::identity()).unwrap();
        let moved = compute_anchors(&m, &j, &RigidTransform::from_translation(t)).unwrap();
        for i in 0..22 {
            // δ has R = I, so the shift −Rᵀt is −t
            assert!((moved[i] - base[i] + t).amax() < 1e-12);
        }
    }
}

#[test]
fn merged_finger_anchors_form_coincident_quadruples() {
    let m = model(zoo::two_finger());
    let a = compute_anchors(&m, &m.sample_joints(4), &RigidTransform::identity()).unwrap();
    let fingers: Vec<usize> = (4..20).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &fingers {
        match groups.iter_mut().find(|g| (a[g[0]] - a[i]).norm() == 0.0) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    assert_eq!(groups.len(), 4);
    assert!(groups.iter().all(|g| g.len() == 4));
    // thumb anchors stay distinct
    for i in 0..4 {
        for k in (i + 1)..4 {
            assert!((a[i] - a[k]).norm() > 0.0);
        }
    }
}

#[test]
fn row_regions_are_fixed() {
    for m in builtin_models() {
        for (i, att) in m.anchors().iter().enumerate() {
            assert_eq!(att.region, synergy_core::kinematics::Region::canonical(i).unwrap());
        }
    }
}

#[test]
fn five_finger_weights_are_uniform() {
    let hand = model(zoo::five_finger());
    let w = anchor_weights([&hand, &hand]);
    assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn gripper_weights_favor_thumb() {
    let g = model(zoo::gripper_parallel());
    let w = anchor_weights([&g]);
    for t in 0..4 {
        for f in 4..20 {
            assert!((w[t] / w[f] - 4.0).abs() < 1e-12);
        }
    }
    assert_eq!(w[PALM[0]], w[0]);
    assert!((w.iter().sum::<f64>() - 22.0).abs() < 1e-9);
}

#[test]
fn zoo_weights_positive_and_normalized() {
    let models = builtin_models();
    let w = anchor_weights(&models);
    assert!(w.iter().all(|v| *v > 0.0));
    assert!((w.iter().sum::<f64>() - 22.0).abs() < 1e-9);
}

#[test]
fn open_gripper_has_larger_aperture() {
    for m in [model(zoo::gripper_parallel()), model(zoo::gripper_wide())] {
        let open = aperture(&compute_anchors(&m, &m.upper_limits(), &RigidTransform::identity()).unwrap());
        let closed = aperture(&compute_anchors(&m, &m.lower_limits(), &RigidTransform::identity()).unwrap());
        assert!(open > closed, "{}: {open} vs {closed}", m.name());
    }
}

#[test]
fn aperture_measures_thumb_tip_to_fingertips() {
    let mut a = synergy_core::AnchorSet::default();
    a[THUMB_TIP] = Vector3::new(1.0, 1.0, 1.0);
    for &f in &FINGERTIPS {
        a[f] = Vector3::new(1.0, 1.0, 1.2);
    }
    assert!((aperture(&a) - 0.2).abs() < 1e-12);
}

fn arb_delta() -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        -3.0f64..3.0,
        prop::array::uniform3(-0.1f64..0.1),
    )
        .prop_filter("axis", |(a, _, _)| Vector3::from(*a).norm() > 1e-3)
        .prop_map(|(axis, angle, t)| {
            RigidTransform::from_axis_angle(&Vector3::from(axis), angle)
                .compose(&RigidTransform::from_translation(Vector3::from(t)))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_change_composes(d1 in arb_delta(), d2 in arb_delta(), seed in 0u64..1000, which in 0usize..6) {
        let m = &builtin_models()[which];
        let j = m.sample_joints(seed);
        let a1 = compute_anchors(m, &j, &d1).unwrap();
        let a21 = compute_anchors(m, &j, &d1.compose(&d2)).unwrap();
        let expected = a1.transformed(&d2.inverse());
        for i in 0..22 {
            prop_assert!((a21[i] - expected[i]).amax() < 1e-12);
        }
    }
}
