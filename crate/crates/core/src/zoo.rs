//! Built-in synthetic manipulators spanning 1 to 15 degrees of freedom.
//!
//! Conventions shared by every model, in its base link frame: fingers
//! extend along +z, the palm faces +x and the thumb side is +y. Hands
//! place the preliminary end-effector frame with x out of the palm and y
//! towards the wrist; grippers with x along the approach direction and y
//! towards the thumb jaw.

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::Result;
use crate::kinematics::{
    AnchorSpec, EefSpec, Finger, JointKind, JointSpec, Manifest, ManipulatorModel, Region,
    ANCHOR_COUNT,
};
use crate::transform::Pose;

/// Zoo stand-ins for the reference roles: a parallel gripper, a wide
/// gripper, a three-finger gripper and an anthropomorphic hand.
pub const REFERENCES: [&str; 4] = ["gripper_parallel", "gripper_wide", "three_finger", "five_finger"];

pub const NAMES: [&str; 6] = [
    "gripper_parallel",
    "gripper_wide",
    "two_finger",
    "three_finger",
    "four_finger",
    "five_finger",
];

const PAD: f64 = 0.008;

struct Builder {
    name: String,
    links: Vec<String>,
    joints: Vec<JointSpec>,
    anchors: Vec<Option<AnchorSpec>>,
}

impl Builder {
    fn new(name: &str, root: &str) -> Self {
        Self {
            name: name.into(),
            links: vec![root.into()],
            joints: Vec::new(),
            anchors: vec![None; ANCHOR_COUNT],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn joint(
        &mut self,
        name: &str,
        kind: JointKind,
        axis: [f64; 3],
        xyz: [f64; 3],
        rpy: [f64; 3],
        parent: &str,
        child: &str,
        limits: Option<[f64; 2]>,
    ) {
        self.links.push(child.into());
        self.joints.push(JointSpec {
            name: name.into(),
            kind,
            axis,
            origin: Pose { xyz, rpy },
            parent: parent.into(),
            child: child.into(),
            limits,
        });
    }

    fn anchor(&mut self, index: usize, link: &str, offset: [f64; 3]) {
        self.anchors[index] = Some(AnchorSpec {
            index,
            link: link.into(),
            offset,
            region: Region::canonical(index).unwrap().to_string(),
        });
    }

    /// Places all four anchors of `slot` at the given attachments.
    fn finger_anchors(&mut self, slot: Finger, attach: &[(&str, [f64; 3]); 4]) {
        let base = 4 * slot as usize;
        for (k, (link, offset)) in attach.iter().enumerate() {
            self.anchor(base + k, link, *offset);
        }
    }

    /// Adds the palm anchors and places the preliminary end-effector frame
    /// midway between them with the given x and y axes.
    fn build(mut self, root: &str, palm: [[f64; 3]; 2], x_axis: Vector3<f64>, y_axis: Vector3<f64>) -> Manifest {
        self.anchor(20, root, palm[0]);
        self.anchor(21, root, palm[1]);
        let origin = (Vector3::from(palm[0]) + Vector3::from(palm[1])) * 0.5;
        let z_axis = x_axis.cross(&y_axis);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x_axis, y_axis, z_axis]));
        let (r, p, y) = rot.euler_angles();
        Manifest {
            name: self.name,
            links: self.links,
            joints: self.joints,
            anchors: self.anchors.into_iter().map(|a| a.expect("all anchors placed")).collect(),
            palm_anchors: [20, 21],
            eef: EefSpec {
                parent: root.into(),
                xyz: origin.into(),
                rpy: [r, p, y],
            },
        }
    }
}

fn hand_frame() -> (Vector3<f64>, Vector3<f64>) {
    (Vector3::x(), -Vector3::z())
}

fn gripper_frame() -> (Vector3<f64>, Vector3<f64>) {
    (Vector3::z(), Vector3::y())
}

/// A three-joint flexing finger rooted on `parent`; returns its link names.
fn hand_finger(
    b: &mut Builder,
    prefix: &str,
    parent: &str,
    xyz: [f64; 3],
    rpy: [f64; 3],
    lengths: [f64; 3],
    limits: [[f64; 2]; 3],
) -> [String; 3] {
    let names = ["proximal", "middle", "distal"].map(|s| format!("{prefix}_{s}"));
    b.joint(&format!("{prefix}_j1"), JointKind::Revolute, [0.0, 1.0, 0.0], xyz, rpy, parent, &names[0], Some(limits[0]));
    b.joint(&format!("{prefix}_j2"), JointKind::Revolute, [0.0, 1.0, 0.0], [0.0, 0.0, lengths[0]], [0.0; 3], &names[0], &names[1], Some(limits[1]));
    b.joint(&format!("{prefix}_j3"), JointKind::Revolute, [0.0, 1.0, 0.0], [0.0, 0.0, lengths[1]], [0.0; 3], &names[1], &names[2], Some(limits[2]));
    names
}

fn hand_finger_attach(names: &[String; 3], lengths: [f64; 3]) -> [(&str, [f64; 3]); 4] {
    [
        (names[0].as_str(), [PAD, 0.0, 0.5 * lengths[0]]),
        (names[1].as_str(), [PAD, 0.0, 0.5 * lengths[1]]),
        (names[2].as_str(), [PAD, 0.0, 0.5 * lengths[2]]),
        (names[2].as_str(), [0.5 * PAD, 0.0, lengths[2]]),
    ]
}

/// Opposable thumb: a rotation about its own long axis sweeps the
/// flexion plane towards the fingers, followed by two flexion joints.
fn hand_thumb(b: &mut Builder, root: &str, xyz: [f64; 3], lengths: [f64; 3], limits: [[f64; 2]; 3]) {
    let names = ["thumb_metacarpal", "thumb_proximal", "thumb_distal"];
    b.joint("thumb_rot", JointKind::Revolute, [0.0, 0.0, -1.0], xyz, [-FRAC_PI_4, 0.0, 0.0], root, names[0], Some(limits[0]));
    b.joint("thumb_j2", JointKind::Revolute, [0.0, 1.0, 0.0], [0.0, 0.0, lengths[0]], [0.0; 3], names[0], names[1], Some(limits[1]));
    b.joint("thumb_j3", JointKind::Revolute, [0.0, 1.0, 0.0], [0.0, 0.0, lengths[1]], [0.0; 3], names[1], names[2], Some(limits[2]));
    b.finger_anchors(
        Finger::Thumb,
        &[
            (names[0], [PAD, 0.0, 0.5 * lengths[0]]),
            (names[1], [PAD, 0.0, 0.5 * lengths[1]]),
            (names[2], [PAD, 0.0, 0.5 * lengths[2]]),
            (names[2], [0.5 * PAD, 0.0, lengths[2]]),
        ],
    );
}

/// 1-DoF parallel-jaw gripper: the thumb jaw is fixed and the opposite
/// jaw slides towards it.
pub fn gripper_parallel() -> Manifest {
    let root = "base";
    let mut b = Builder::new("gripper_parallel", root);
    b.joint("left_mount", JointKind::Fixed, [0.0, 0.0, 1.0], [0.0, 0.0425, 0.06], [0.0; 3], root, "left_jaw", None);
    b.joint("right_slide", JointKind::Prismatic, [0.0, -1.0, 0.0], [0.0, 0.0375, 0.06], [0.0; 3], root, "right_jaw", Some([0.0, 0.08]));
    let heights = [-0.02, -0.008, 0.006, 0.02];
    let xs = [0.003, -0.003, 0.003, 0.0];
    let left: [(&str, [f64; 3]); 4] = std::array::from_fn(|k| ("left_jaw", [xs[k], -0.004, heights[k]]));
    let right: [(&str, [f64; 3]); 4] = std::array::from_fn(|k| ("right_jaw", [xs[k], 0.004, heights[k]]));
    b.finger_anchors(Finger::Thumb, &left);
    for f in [Finger::Index, Finger::Middle, Finger::Ring, Finger::Pinky] {
        b.finger_anchors(f, &right);
    }
    let (x, y) = gripper_frame();
    b.build(root, [[0.0, 0.015, 0.0], [0.0, -0.015, 0.0]], x, y)
}

/// 1-DoF wide gripper: a long swinging jaw closes against a fixed one.
pub fn gripper_wide() -> Manifest {
    let root = "base";
    let mut b = Builder::new("gripper_wide", root);
    b.joint("thumb_mount", JointKind::Fixed, [0.0, 0.0, 1.0], [0.0, 0.06, 0.03], [0.0; 3], root, "thumb_jaw", None);
    b.joint("jaw_swing", JointKind::Revolute, [1.0, 0.0, 0.0], [0.0, -0.06, 0.03], [-0.85, 0.0, 0.0], root, "finger_jaw", Some([0.0, 0.85]));
    let heights = [0.03, 0.05, 0.075, 0.1];
    let xs = [0.004, -0.004, 0.004, 0.0];
    let thumb: [(&str, [f64; 3]); 4] = std::array::from_fn(|k| ("thumb_jaw", [xs[k], -0.005, heights[k]]));
    let finger: [(&str, [f64; 3]); 4] = std::array::from_fn(|k| ("finger_jaw", [xs[k], 0.005, heights[k]]));
    b.finger_anchors(Finger::Thumb, &thumb);
    for f in [Finger::Index, Finger::Middle, Finger::Ring, Finger::Pinky] {
        b.finger_anchors(f, &finger);
    }
    let (x, y) = gripper_frame();
    b.build(root, [[0.0, 0.02, 0.0], [0.0, -0.02, 0.0]], x, y)
}

/// 2-DoF gripper with two independently hinged fingers.
pub fn two_finger() -> Manifest {
    let root = "base";
    let mut b = Builder::new("two_finger", root);
    b.joint("thumb_hinge", JointKind::Revolute, [1.0, 0.0, 0.0], [0.0, 0.03, 0.02], [0.0; 3], root, "thumb_link", Some([-0.2, 0.4]));
    b.joint("finger_hinge", JointKind::Revolute, [-1.0, 0.0, 0.0], [0.0, -0.03, 0.02], [0.0; 3], root, "finger_link", Some([-0.2, 0.4]));
    let heights = [0.02, 0.035, 0.05, 0.07];
    let xs = [0.0015, -0.0015, 0.0015, 0.0];
    let thumb: [(&str, [f64; 3]); 4] = std::array::from_fn(|k| ("thumb_link", [xs[k], -0.005, heights[k]]));
    let finger: [(&str, [f64; 3]); 4] = std::array::from_fn(|k| ("finger_link", [xs[k], 0.005, heights[k]]));
    b.finger_anchors(Finger::Thumb, &thumb);
    for f in [Finger::Index, Finger::Middle, Finger::Ring, Finger::Pinky] {
        b.finger_anchors(f, &finger);
    }
    let (x, y) = gripper_frame();
    b.build(root, [[0.0, 0.015, 0.0], [0.0, -0.015, 0.0]], x, y)
}

/// Two-joint gripper finger hinged about ±x; `side` is +1 for a finger
/// closing towards -y. Fully closed tips stop near the midline.
fn gripper_finger(b: &mut Builder, prefix: &str, xyz: [f64; 3], side: f64, lengths: [f64; 2]) -> [(String, [f64; 3]); 4] {
    let prox = format!("{prefix}_proximal");
    let dist = format!("{prefix}_distal");
    b.joint(&format!("{prefix}_j1"), JointKind::Revolute, [side, 0.0, 0.0], xyz, [0.0; 3], "base", &prox, Some([-0.3, 0.3]));
    b.joint(&format!("{prefix}_j2"), JointKind::Revolute, [side, 0.0, 0.0], [0.0, 0.0, lengths[0]], [0.0; 3], &prox, &dist, Some([-0.3, 0.25]));
    let pad = -side * PAD;
    [
        (prox.clone(), [0.0, pad, 0.4 * lengths[0]]),
        (prox, [0.0, pad, 0.85 * lengths[0]]),
        (dist.clone(), [0.0, pad, 0.4 * lengths[1]]),
        (dist, [0.0, 0.5 * pad, lengths[1]]),
    ]
}

fn as_attach(a: &[(String, [f64; 3]); 4]) -> [(&str, [f64; 3]); 4] {
    std::array::from_fn(|k| (a[k].0.as_str(), a[k].1))
}

/// 6-DoF three-finger gripper: one thumb opposing two fingers; index and
/// middle merge on one finger, ring and pinky on the other.
pub fn three_finger() -> Manifest {
    let root = "base";
    let mut b = Builder::new("three_finger", root);
    let lengths = [0.045, 0.04];
    let thumb = gripper_finger(&mut b, "thumb", [0.0, 0.035, 0.04], 1.0, lengths);
    let left = gripper_finger(&mut b, "finger_a", [0.025, -0.035, 0.04], -1.0, lengths);
    let right = gripper_finger(&mut b, "finger_b", [-0.025, -0.035, 0.04], -1.0, lengths);
    b.finger_anchors(Finger::Thumb, &as_attach(&thumb));
    b.finger_anchors(Finger::Index, &as_attach(&left));
    b.finger_anchors(Finger::Middle, &as_attach(&left));
    b.finger_anchors(Finger::Ring, &as_attach(&right));
    b.finger_anchors(Finger::Pinky, &as_attach(&right));
    let (x, y) = gripper_frame();
    b.build(root, [[0.0, 0.015, 0.0], [0.0, -0.015, 0.0]], x, y)
}

/// 12-DoF four-finger hand; the pinky anchors merge onto the ring finger.
pub fn four_finger() -> Manifest {
    let root = "palm";
    let mut b = Builder::new("four_finger", root);
    hand_thumb(&mut b, root, [0.005, 0.05, 0.02], [0.05, 0.04, 0.045], [[0.0, 1.4], [0.0, 1.0], [0.0, 1.3]]);
    let lengths = [0.054, 0.038, 0.04];
    let limits = [[0.0, 1.4], [0.0, 1.4], [0.0, 1.2]];
    for (finger, y) in [(Finger::Index, 0.045), (Finger::Middle, 0.0), (Finger::Ring, -0.045)] {
        let names = hand_finger(&mut b, finger.name(), root, [0.0, y, 0.095], [0.0; 3], lengths, limits);
        let attach = hand_finger_attach(&names, lengths);
        b.finger_anchors(finger, &attach);
        if finger == Finger::Ring {
            b.finger_anchors(Finger::Pinky, &attach);
        }
    }
    let (x, y) = hand_frame();
    b.build(root, [[0.005, 0.0, 0.03], [0.005, 0.0, 0.08]], x, y)
}

/// 15-DoF anthropomorphic hand with three joints per digit.
pub fn five_finger() -> Manifest {
    let root = "palm";
    let mut b = Builder::new("five_finger", root);
    hand_thumb(&mut b, root, [0.01, 0.035, 0.025], [0.04, 0.032, 0.026], [[0.0, 1.3], [0.0, 0.9], [0.0, 1.2]]);
    let limits = [[0.0, 1.3], [0.0, 1.4], [0.0, 1.0]];
    let digits = [
        (Finger::Index, 0.027, [0.045, 0.026, 0.020]),
        (Finger::Middle, 0.009, [0.050, 0.030, 0.022]),
        (Finger::Ring, -0.009, [0.046, 0.028, 0.021]),
        (Finger::Pinky, -0.027, [0.036, 0.021, 0.018]),
    ];
    for (finger, y, lengths) in digits {
        let names = hand_finger(&mut b, finger.name(), root, [0.0, y, 0.095], [0.0; 3], lengths, limits);
        b.finger_anchors(finger, &hand_finger_attach(&names, lengths));
    }
    let (x, y) = hand_frame();
    b.build(root, [[0.005, 0.0, 0.03], [0.005, 0.0, 0.075]], x, y)
}

/// All built-in manifests in registry order.
pub fn builtin() -> Vec<Manifest> {
    vec![
        gripper_parallel(),
        gripper_wide(),
        two_finger(),
        three_finger(),
        four_finger(),
        five_finger(),
    ]
}

pub fn builtin_models() -> Vec<ManipulatorModel> {
    builtin()
        .into_iter()
        .map(|m| ManipulatorModel::load(m).expect("built-in manifests are valid"))
        .collect()
}

/// Writes one `<name>.json` per built-in manipulator into `dir`.
pub fn write_zoo(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    builtin()
        .into_iter()
        .map(|m| {
            let path = dir.join(format!("{}.json", m.name));
            std::fs::write(&path, m.to_json_pretty() + "\n")?;
            Ok(path)
        })
        .collect()
}

/// Loads every `*.json` manifest in `dir`, ordered by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<ManipulatorModel>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(ManipulatorModel::from_path).collect()
}
