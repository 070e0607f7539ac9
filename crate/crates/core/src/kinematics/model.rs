use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::anchor::{Region, ANCHOR_COUNT};
use super::manifest::{JointKind, Manifest};
use crate::error::{Error, Result};
use crate::transform::{Pose, RigidTransform};

/// One value per actuated joint, in manifest order.
pub type JointVector = Vec<f64>;

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    pub origin: RigidTransform,
    pub parent: usize,
    pub child: usize,
    /// Index into the joint vector, `None` for fixed joints.
    pub dof: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct AnchorAttachment {
    pub link: usize,
    pub offset: Vector3<f64>,
    pub region: Region,
}

/// A validated manipulator. Immutable after [`ManipulatorModel::load`].
#[derive(Debug, Clone)]
pub struct ManipulatorModel {
    manifest: Manifest,
    links: Vec<String>,
    link_index: HashMap<String, usize>,
    /// Joints in parent-before-child order.
    joints: Vec<Joint>,
    limits: Vec<(f64, f64)>,
    dof_names: Vec<String>,
    /// Actuated dofs on the root-to-link path of each link.
    link_dofs: Vec<Vec<usize>>,
    /// For each dof, the position of its joint in `joints`.
    dof_joint: Vec<usize>,
    anchors: Vec<AnchorAttachment>,
    palm_anchors: [usize; 2],
    eef_root: RigidTransform,
}

/// Link poses in the root frame, plus the root-frame pose of every joint
/// frame before its motion is applied.
#[derive(Debug, Clone)]
pub struct FkResult {
    pub links: Vec<RigidTransform>,
    pub joint_frames: Vec<RigidTransform>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

impl ManipulatorModel {
    /// Parses and validates a manifest document.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::load(Manifest::from_json(text)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Validates a parsed manifest.
    pub fn load(manifest: Manifest) -> Result<Self> {
        let name = &manifest.name;
        if name.is_empty() {
            return Err(invalid("empty manipulator name"));
        }
        let mut link_index = HashMap::new();
        for (i, l) in manifest.links.iter().enumerate() {
            if link_index.insert(l.clone(), i).is_some() {
                return Err(invalid(format!("duplicate link `{l}`")));
            }
        }
        let lookup = |l: &str, what: &str| {
            link_index
                .get(l)
                .copied()
                .ok_or_else(|| invalid(format!("{what} refers to unknown link `{l}`")))
        };

        let mut parent_of: Vec<Option<usize>> = vec![None; manifest.links.len()];
        let mut raw_joints = Vec::with_capacity(manifest.joints.len());
        let mut joint_names = HashSet::new();
        let mut limits = Vec::new();
        let mut dof_names = Vec::new();
        for (ji, spec) in manifest.joints.iter().enumerate() {
            if !joint_names.insert(spec.name.as_str()) {
                return Err(invalid(format!("duplicate joint `{}`", spec.name)));
            }
            let parent = lookup(&spec.parent, &format!("joint `{}`", spec.name))?;
            let child = lookup(&spec.child, &format!("joint `{}`", spec.name))?;
            if parent == child {
                return Err(invalid(format!("cyclic tree: joint `{}` links `{}` to itself", spec.name, spec.parent)));
            }
            if parent_of[child].is_some() {
                return Err(invalid(format!(
                    "link `{}` has more than one parent joint",
                    spec.child
                )));
            }
            parent_of[child] = Some(ji);
            let axis = Vector3::from(spec.axis);
            let all = spec.axis.iter().chain(&spec.origin.xyz).chain(&spec.origin.rpy);
            if all.clone().any(|v| !v.is_finite()) {
                return Err(invalid(format!("joint `{}` has non-finite geometry", spec.name)));
            }
            let dof = if spec.kind == JointKind::Fixed {
                None
            } else {
                if axis.norm() < 1e-12 {
                    return Err(invalid(format!("joint `{}` has a zero axis", spec.name)));
                }
                let [lo, hi] = spec
                    .limits
                    .ok_or_else(|| invalid(format!("joint `{}` is missing limits", spec.name)))?;
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(invalid(format!("joint `{}` has non-finite limits", spec.name)));
                }
                if lo >= hi {
                    return Err(invalid(format!(
                        "empty joint range for `{}`: [{lo}, {hi}]",
                        spec.name
                    )));
                }
                limits.push((lo, hi));
                dof_names.push(spec.name.clone());
                Some(limits.len() - 1)
            };
            raw_joints.push(Joint {
                name: spec.name.clone(),
                kind: spec.kind,
                axis: if dof.is_some() { axis.normalize() } else { axis },
                origin: RigidTransform::from(&spec.origin),
                parent,
                child,
                dof,
            });
        }

        let roots: Vec<usize> = (0..manifest.links.len())
            .filter(|&l| parent_of[l].is_none())
            .collect();
        if roots.len() != 1 {
            return Err(invalid(format!(
                "tree must have a single root, found {} ({})",
                roots.len(),
                roots
                    .iter()
                    .map(|&r| manifest.links[r].as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        let root = roots[0];

        // Breadth-first from the root; anything unvisited sits on a cycle.
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); manifest.links.len()];
        for (ji, j) in raw_joints.iter().enumerate() {
            children[j.parent].push(ji);
        }
        let mut order = Vec::with_capacity(raw_joints.len());
        let mut link_dofs: Vec<Vec<usize>> = vec![Vec::new(); manifest.links.len()];
        let mut visited = vec![false; manifest.links.len()];
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(link) = queue.pop_front() {
            for &ji in &children[link] {
                let j = &raw_joints[ji];
                let mut path = link_dofs[link].clone();
                if let Some(d) = j.dof {
                    path.push(d);
                }
                link_dofs[j.child] = path;
                visited[j.child] = true;
                order.push(ji);
                queue.push_back(j.child);
            }
        }
        if let Some(l) = visited.iter().position(|v| !v) {
            return Err(invalid(format!(
                "cyclic tree: link `{}` is not reachable from root `{}`",
                manifest.links[l], manifest.links[root]
            )));
        }
        let joints: Vec<Joint> = order.iter().map(|&ji| raw_joints[ji].clone()).collect();
        let mut dof_joint = vec![0; limits.len()];
        for (pos, j) in joints.iter().enumerate() {
            if let Some(d) = j.dof {
                dof_joint[d] = pos;
            }
        }

        if manifest.anchors.len() != ANCHOR_COUNT {
            return Err(invalid(format!(
                "expected {ANCHOR_COUNT} anchors, found {}",
                manifest.anchors.len()
            )));
        }
        let mut slots: Vec<Option<AnchorAttachment>> = vec![None; ANCHOR_COUNT];
        for a in &manifest.anchors {
            if a.index >= ANCHOR_COUNT {
                return Err(invalid(format!("anchor index {} out of range 0..21", a.index)));
            }
            if slots[a.index].is_some() {
                return Err(invalid(format!("duplicate anchor index {}", a.index)));
            }
            let region: Region = a.region.parse().map_err(|e: String| invalid(e))?;
            let expected = Region::canonical(a.index).expect("index checked");
            if region != expected {
                return Err(invalid(format!(
                    "anchor {} has region `{region}`, expected `{expected}`",
                    a.index
                )));
            }
            if a.offset.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("anchor {} has a non-finite offset", a.index)));
            }
            slots[a.index] = Some(AnchorAttachment {
                link: lookup(&a.link, &format!("anchor {}", a.index))?,
                offset: Vector3::from(a.offset),
                region,
            });
        }
        // 22 entries, none duplicated, all in range: every slot is filled.
        let anchors: Vec<AnchorAttachment> = slots.into_iter().map(|s| s.unwrap()).collect();

        let palm_anchors = manifest.palm_anchors;
        for p in palm_anchors {
            if p >= ANCHOR_COUNT || anchors[p].region != Region::Palm {
                return Err(invalid(format!("palm anchor {p} does not carry the `palm` region")));
            }
        }
        if palm_anchors[0] == palm_anchors[1] {
            return Err(invalid("palm anchors must be distinct"));
        }

        let eef_parent = lookup(&manifest.eef.parent, "eef")?;
        if !link_dofs[eef_parent].is_empty() {
            return Err(invalid(format!(
                "eef parent `{}` must be rigidly attached to the root",
                manifest.eef.parent
            )));
        }
        let eef_local = RigidTransform::from(&Pose {
            xyz: manifest.eef.xyz,
            rpy: manifest.eef.rpy,
        });
        if !eef_local.is_finite() {
            return Err(invalid("eef frame is not finite"));
        }

        let mut model = Self {
            links: manifest.links.clone(),
            link_index,
            joints,
            limits,
            dof_names,
            link_dofs,
            dof_joint,
            anchors,
            palm_anchors,
            eef_root: eef_local,
            manifest,
        };
        let fk = model.fk(&model.mid_range())?;
        model.eef_root = fk.links[eef_parent].compose(&eef_local);
        Ok(model)
    }

    pub fn name(&self) -> &str {
        &self.manifest.name
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn dof(&self) -> usize {
        self.limits.len()
    }

    pub fn links(&self) -> &[String] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn dof_names(&self) -> &[String] {
        &self.dof_names
    }

    pub fn limits(&self) -> &[(f64, f64)] {
        &self.limits
    }

    pub fn anchors(&self) -> &[AnchorAttachment] {
        &self.anchors
    }

    pub fn palm_anchors(&self) -> [usize; 2] {
        self.palm_anchors
    }

    pub fn link_id(&self, name: &str) -> Result<usize> {
        self.link_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLink(name.to_string()))
    }

    /// Merge multiplicity of each anchor row: how many rows share its
    /// attachment (same link and offset).
    pub fn merge_multiplicity(&self) -> [usize; ANCHOR_COUNT] {
        let mut out = [0; ANCHOR_COUNT];
        for (i, a) in self.anchors.iter().enumerate() {
            out[i] = self
                .anchors
                .iter()
                .filter(|b| b.link == a.link && b.offset == a.offset)
                .count();
        }
        out
    }

    pub fn check_joints(&self, j: &[f64]) -> Result<()> {
        if j.len() != self.dof() {
            return Err(Error::JointCount {
                expected: self.dof(),
                got: j.len(),
            });
        }
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint vector"));
        }
        Ok(())
    }

    pub fn clamp(&self, j: &mut [f64]) {
        for (v, &(lo, hi)) in j.iter_mut().zip(&self.limits) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn within_limits(&self, j: &[f64]) -> bool {
        j.len() == self.dof()
            && j
                .iter()
                .zip(&self.limits)
                .all(|(v, &(lo, hi))| *v >= lo && *v <= hi)
    }

    pub fn mid_range(&self) -> JointVector {
        self.limits.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn lower_limits(&self) -> JointVector {
        self.limits.iter().map(|l| l.0).collect()
    }

    pub fn upper_limits(&self) -> JointVector {
        self.limits.iter().map(|l| l.1).collect()
    }

    /// One configuration drawn uniformly within the limits.
    pub fn sample_joints(&self, seed: u64) -> JointVector {
        self.sample_joints_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample_joints_with<R: Rng + ?Sized>(&self, rng: &mut R) -> JointVector {
        self.limits
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    /// Root-frame poses for every link.
    pub fn fk(&self, j: &[f64]) -> Result<FkResult> {
        self.check_joints(j)?;
        let mut links = vec![RigidTransform::identity(); self.links.len()];
        let mut joint_frames = Vec::with_capacity(self.joints.len());
        for joint in &self.joints {
            let frame = links[joint.parent].compose(&joint.origin);
            let motion = match (joint.kind, joint.dof) {
                (JointKind::Revolute, Some(d)) => RigidTransform::from_axis_angle(&joint.axis, j[d]),
                (JointKind::Prismatic, Some(d)) => RigidTransform::from_translation(joint.axis * j[d]),
                _ => RigidTransform::identity(),
            };
            links[joint.child] = frame.compose(&motion);
            joint_frames.push(frame);
        }
        Ok(FkResult {
            links,
            joint_frames,
        })
    }

    /// Root-frame pose of every link, keyed by link name.
    pub fn forward_kinematics(&self, j: &[f64]) -> Result<BTreeMap<String, RigidTransform>> {
        let fk = self.fk(j)?;
        Ok(self.links.iter().cloned().zip(fk.links).collect())
    }

    /// Preliminary end-effector frame in the root frame. Constant, since
    /// its parent link is rigidly attached to the root.
    pub fn preliminary_eef(&self) -> &RigidTransform {
        &self.eef_root
    }

    pub fn anchor_world(&self, fk: &FkResult, index: usize) -> Vector3<f64> {
        let a = &self.anchors[index];
        fk.links[a.link].transform_point(&a.offset)
    }

    /// Writes `∂p/∂q` for a root-frame point `p` rigidly attached to
    /// `link` into rows `row..row+3` of `out`.
    pub(crate) fn point_jacobian_into(
        &self,
        fk: &FkResult,
        link: usize,
        point: &Vector3<f64>,
        out: &mut DMatrix<f64>,
        row: usize,
    ) {
        for &d in &self.link_dofs[link] {
            let ji = self.dof_joint[d];
            let joint = &self.joints[ji];
            let frame = &fk.joint_frames[ji];
            let axis = frame.transform_vector(&joint.axis);
            let col = match joint.kind {
                JointKind::Revolute => axis.cross(&(point - frame.translation)),
                _ => axis,
            };
            for k in 0..3 {
                out[(row + k, d)] = col[k];
            }
        }
    }

    /// 3×dof Jacobian of a point fixed to `link` at `local_point`,
    /// expressed in the root frame. Columns of joints off the
    /// root-to-link path are zero.
    pub fn point_jacobian(
        &self,
        j: &[f64],
        link: &str,
        local_point: &Vector3<f64>,
    ) -> Result<DMatrix<f64>> {
        let link = self.link_id(link)?;
        let fk = self.fk(j)?;
        let p = fk.links[link].transform_point(local_point);
        let mut out = DMatrix::zeros(3, self.dof());
        self.point_jacobian_into(&fk, link, &p, &mut out, 0);
        Ok(out)
    }
}
