use synergy_core::dataset::{anchor_views, build_dataset, fit_normalizer, JointDataset, Normalizer};
use synergy_core::zoo::{self, builtin_models};
use synergy_core::{FrameAdjustment, ManipulatorModel};

#[test]
fn single_sample_dataset() {
    let models = vec![ManipulatorModel::load(zoo::gripper_wide()).unwrap()];
    let ds = build_dataset(&models, 1, 3).unwrap();
    assert_eq!(ds.entries.len(), 1);
    assert_eq!(ds.entries[0].joints.len(), 1);
}

#[test]
fn rebuild_is_byte_identical() {
    let models = builtin_models();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    build_dataset(&models, 50, 42).unwrap().save(&a).unwrap();
    build_dataset(&models, 50, 42).unwrap().save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = build_dataset(&models, 50, 43).unwrap();
    assert_ne!(other, JointDataset::load(&a).unwrap());
}

#[test]
fn file_round_trip_and_header() {
    let models = builtin_models();
    let ds = build_dataset(&models, 7, 1).unwrap();
    let mut buf = Vec::new();
    ds.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["version"], 1);
    assert_eq!(header["n"], 7);
    assert_eq!(header["manipulators"].as_array().unwrap().len(), 6);
    let rec: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    assert_eq!(rec["manip"], "gripper_parallel");
    assert_eq!(rec["idx"], 0);
    assert_eq!(text.lines().count(), 1 + 6 * 7);
    let back = JointDataset::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn malformed_record_reports_line() {
    let models = builtin_models();
    let mut buf = Vec::new();
    build_dataset(&models, 2, 1).unwrap().write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap().replacen("\"idx\":1", "\"idx\":\"x\"", 1);
    let err = JointDataset::read_jsonl(text.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn samples_do_not_depend_on_registry_order() {
    let models = builtin_models();
    let reversed: Vec<_> = models.iter().rev().cloned().collect();
    let a = build_dataset(&models, 5, 9).unwrap();
    let b = build_dataset(&reversed, 5, 9).unwrap();
    assert_eq!(a.entries[0].joints, b.entries[5].joints);
}

#[test]
fn normalized_data_is_unit_gaussian_and_refit_is_idempotent() {
    let models = builtin_models();
    let ds = build_dataset(&models, 200, 5).unwrap();
    let deltas = vec![FrameAdjustment::identity(); models.len()];
    let norm = fit_normalizer(&models, &ds, &deltas).unwrap();
    let views = anchor_views(&models, &ds, &deltas).unwrap();
    let normalized: Vec<_> = views.iter().flatten().map(|a| norm.normalize(a)).collect();
    let again = Normalizer::fit(normalized.iter()).unwrap();
    for k in 0..3 {
        assert!(again.mean[k].abs() < 1e-9, "{:?}", again.mean);
        assert!((again.std[k] - 1.0).abs() < 1e-9, "{:?}", again.std);
    }
}

#[test]
fn planar_gripper_dataset_is_flat_in_z() {
    let models = vec![ManipulatorModel::load(zoo::two_finger()).unwrap()];
    let ds = build_dataset(&models, 500, 2).unwrap();
    let norm = fit_normalizer(&models, &ds, &[FrameAdjustment::identity()]).unwrap();
    assert!(norm.std[2] < 0.1 * norm.std[0].min(norm.std[1]), "{:?}", norm.std);
    assert!(norm.anisotropy() < 0.1);
}

#[test]
fn normalize_round_trip_on_random_sets() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let norm = Normalizer {
        mean: [0.02, -0.01, 0.07],
        std: [0.03, 0.05, 0.011],
    };
    for _ in 0..1000 {
        let flat: Vec<f64> = (0..66).map(|_| rng.random_range(-0.2..0.2)).collect();
        let a = synergy_core::AnchorSet::from_flat(&flat).unwrap();
        let back = norm.denormalize(&norm.normalize(&a));
        assert!(a.iter().zip(back.iter()).all(|(x, y)| (x - y).amax() < 1e-12));
    }
}

#[test]
fn dataset_must_match_models() {
    let models = builtin_models();
    let ds = build_dataset(&models[..2], 3, 1).unwrap();
    assert!(ds.check_models(&models).is_err());
}
