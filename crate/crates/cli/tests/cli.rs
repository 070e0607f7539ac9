use std::path::Path;
use std::process::{Command, Output};

fn synergy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synergy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small checkpoint trained on the full zoo with a two-line refinement log.
fn small_checkpoint(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data.jsonl");
    let ckpt = dir.join("psi.json");
    let full = dir.join("full");
    assert!(synergy(&["zoo", "init", s(&full)]).status.success());
    let o = synergy(&["dataset", "build", "--zoo", s(&full), "--n", "30", "--seed", "3", "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = dir.join("log.jsonl");
    let o = synergy(&[
        "train", "--dataset", s(&data), "--budget", "2", "--k", "3", "--epochs", "2", "--hidden", "8",
        "--batch-size", "16", "--out", s(&ckpt), "--log", s(&log),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = std::fs::read_to_string(&log).unwrap();
    assert_eq!(lines.lines().count(), 2);
    for line in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("frames").is_some());
    }
    ckpt
}

#[test]
fn zoo_init_writes_six_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = dir.path().join("zoo");
    let o = synergy(&["zoo", "init", s(&zoo)]);
    assert_eq!(o.status.code(), Some(0));
    let count = std::fs::read_dir(&zoo).unwrap().count();
    assert_eq!(count, 6);
}

#[test]
fn train_requires_reference_manipulators() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = dir.path().join("zoo");
    assert!(synergy(&["zoo", "init", s(&zoo)]).status.success());
    for name in ["two_finger", "four_finger", "five_finger", "gripper_wide"] {
        std::fs::remove_file(zoo.join(format!("{name}.json"))).unwrap();
    }
    let data = dir.path().join("data.jsonl");
    let o = synergy(&["dataset", "build", "--zoo", s(&zoo), "--n", "20", "--seed", "3", "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = synergy(&[
        "train", "--dataset", s(&data), "--zoo", s(&zoo), "--epochs", "1", "--out",
        s(&dir.path().join("psi.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gripper_wide"), "{}", stderr(&o));
}

#[test]
fn invalid_arguments_exit_1() {
    assert_eq!(synergy(&[]).status.code(), Some(1));
    assert_eq!(synergy(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(synergy(&["dataset", "build", "--n", "0", "--zoo", "z", "--out", "o"]).status.code(), Some(1));
    assert_eq!(
        synergy(&["retarget", "--ckpt", "c", "--src", "a", "--tgt", "b", "--n-pc", "11", "--in", "i", "--out", "o"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(synergy(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = synergy(&["eval", "--ckpt", s(&dir.path().join("none.json")), "--report", s(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn dataset_build_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = dir.path().join("zoo");
    assert!(synergy(&["zoo", "init", s(&zoo)]).status.success());
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        let o = synergy(&["dataset", "build", "--zoo", s(&zoo), "--n", "7", "--seed", "11", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = small_checkpoint(dir.path());

    // retarget: unknown manipulator lists the registry
    let traj = dir.path().join("in.jsonl");
    std::fs::write(
        &traj,
        "{\"t\":0.0,\"joints\":[0.01,0.02],\"eef\":{\"xyz\":[0.1,0.2,0.3],\"rpy\":[0.0,0.1,0.2]}}\n\
         {\"t\":0.1,\"joints\":[0.02,0.03],\"eef\":{\"xyz\":[0.1,0.2,0.3],\"rpy\":[0.0,0.1,0.2]}}\n",
    )
    .unwrap();
    let out = dir.path().join("out.jsonl");
    let o = synergy(&[
        "retarget", "--ckpt", s(&ckpt), "--src", "two_finger", "--tgt", "robotiq", "--n-pc", "3", "--in",
        s(&traj), "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("robotiq"));
    for name in ["gripper_parallel", "gripper_wide", "two_finger", "three_finger", "four_finger", "five_finger"] {
        assert!(msg.contains(name), "{msg}");
    }

    let o = synergy(&[
        "retarget", "--ckpt", s(&ckpt), "--src", "two_finger", "--tgt", "three_finger", "--n-pc", "3", "--in",
        s(&traj), "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["joints"].as_array().unwrap().len(), 6);
    assert_eq!(rows[1]["t"], 0.1);
    assert_eq!(rows[0]["eef"]["xyz"], serde_json::json!([0.1, 0.2, 0.3]));
    let again = dir.path().join("again.jsonl");
    let o = synergy(&[
        "retarget", "--ckpt", s(&ckpt), "--src", "two_finger", "--tgt", "three_finger", "--n-pc", "3", "--in",
        s(&traj), "--out", s(&again),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    // wrong joint count in the trajectory
    std::fs::write(&traj, "{\"t\":0.0,\"joints\":[0.01],\"eef\":{\"xyz\":[0,0,0],\"rpy\":[0,0,0]}}\n").unwrap();
    let o = synergy(&[
        "retarget", "--ckpt", s(&ckpt), "--src", "two_finger", "--tgt", "three_finger", "--n-pc", "3", "--in",
        s(&traj), "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));

    // sweep-pc
    let plys = dir.path().join("sweep");
    let o = synergy(&[
        "sweep-pc", "--ckpt", s(&ckpt), "--manip", "five_finger", "--from", "-3", "--to", "3", "--steps", "5",
        "--out", s(&plys),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = std::fs::read_dir(&plys)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 5);
    assert_eq!(names[0], "five_finger_pc1_000.ply");
    let ply = std::fs::read_to_string(plys.join(&names[4])).unwrap();
    assert!(ply.starts_with("ply\nformat ascii 1.0\nelement vertex 22\n"));

    // eval
    let report = dir.path().join("report.json");
    let o = synergy(&["eval", "--ckpt", s(&ckpt), "--report", s(&report), "--samples", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["version", "registry", "config", "round_trip", "aperture", "refinement", "summary"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["round_trip"].as_array().unwrap().len(), 6);
    assert_eq!(v["round_trip"][0]["rms_by_n"].as_array().unwrap().len(), 10);
    assert_eq!(v["refinement"].as_array().unwrap().len(), 2);
    let first = std::fs::read(&report).unwrap();
    let o = synergy(&["eval", "--ckpt", s(&ckpt), "--report", s(&report), "--samples", "3"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&report).unwrap(), first);
}

#[test]
fn train_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = dir.path().join("zoo");
    assert!(synergy(&["zoo", "init", s(&zoo)]).status.success());
    let data = dir.path().join("d.jsonl");
    assert!(synergy(&["dataset", "build", "--zoo", s(&zoo), "--n", "20", "--seed", "1", "--out", s(&data)])
        .status
        .success());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = synergy(&[
            "train", "--dataset", s(&data), "--zoo", s(&zoo), "--budget", "2", "--k", "3", "--epochs", "2",
            "--hidden", "8", "--batch-size", "8", "--seed", "5", "--out", s(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
