//! Anchor sets expressed in a manipulator's end-effector frame.

use std::ops::{Index, IndexMut};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kinematics::{ManipulatorModel, ANCHOR_COUNT, FINGERTIPS, PALM, THUMB_TIP};
use crate::transform::RigidTransform;

/// Correction applied on the right of a preliminary end-effector frame.
pub type FrameAdjustment = RigidTransform;

/// Per-anchor scalar weights, indexed like anchor rows.
pub type AnchorWeights = [f64; ANCHOR_COUNT];

/// 22 ordered anchor positions in metres (or normalized units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSet {
    rows: [Vector3<f64>; ANCHOR_COUNT],
}

impl Default for AnchorSet {
    fn default() -> Self {
        Self {
            rows: [Vector3::zeros(); ANCHOR_COUNT],
        }
    }
}

impl AnchorSet {
    pub fn new(rows: [Vector3<f64>; ANCHOR_COUNT]) -> Self {
        Self { rows }
    }

    /// Builds from 66 row-major values.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != 3 * ANCHOR_COUNT {
            return Err(Error::Shape(format!(
                "anchor set needs {} values, got {}",
                3 * ANCHOR_COUNT,
                values.len()
            )));
        }
        let mut out = Self::default();
        for (row, chunk) in out.rows.iter_mut().zip(values.chunks_exact(3)) {
            *row = Vector3::new(chunk[0], chunk[1], chunk[2]);
        }
        Ok(out)
    }

    pub fn to_flat(&self) -> [f64; 3 * ANCHOR_COUNT] {
        let mut out = [0.0; 3 * ANCHOR_COUNT];
        self.write_flat(&mut out);
        out
    }

    pub fn write_flat(&self, out: &mut [f64]) {
        for (row, chunk) in self.rows.iter().zip(out.chunks_exact_mut(3)) {
            chunk.copy_from_slice(row.as_slice());
        }
    }

    pub fn rows(&self) -> &[Vector3<f64>; ANCHOR_COUNT] {
        &self.rows
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.rows.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|v| v.is_finite()))
    }

    /// Applies `t` to every row.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            rows: self.rows.map(|r| t.transform_point(&r)),
        }
    }

    /// Root-mean-square Euclidean distance between corresponding rows.
    pub fn rms_distance(&self, other: &AnchorSet) -> f64 {
        let sum: f64 = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        (sum / ANCHOR_COUNT as f64).sqrt()
    }

    /// Elementwise mean of several sets.
    pub fn mean<'a>(sets: impl IntoIterator<Item = &'a AnchorSet>) -> Option<AnchorSet> {
        let mut acc = AnchorSet::default();
        let mut n = 0usize;
        for s in sets {
            for (a, r) in acc.rows.iter_mut().zip(&s.rows) {
                *a += r;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        for a in acc.rows.iter_mut() {
            *a /= n as f64;
        }
        Some(acc)
    }
}

impl Index<usize> for AnchorSet {
    type Output = Vector3<f64>;
    fn index(&self, i: usize) -> &Vector3<f64> {
        &self.rows[i]
    }
}

impl IndexMut<usize> for AnchorSet {
    fn index_mut(&mut self, i: usize) -> &mut Vector3<f64> {
        &mut self.rows[i]
    }
}

/// Anchor-frame pose in the root frame: the preliminary end-effector
/// frame with `delta` composed on its right.
pub fn anchor_frame(model: &ManipulatorModel, delta: &FrameAdjustment) -> RigidTransform {
    model.preliminary_eef().compose(delta)
}

/// Anchors at configuration `j`, expressed in the refined end-effector
/// frame `T_eef ∘ delta`.
pub fn compute_anchors(
    model: &ManipulatorModel,
    j: &[f64],
    delta: &FrameAdjustment,
) -> Result<AnchorSet> {
    let fk = model.fk(j)?;
    let to_frame = anchor_frame(model, delta).inverse();
    let mut out = AnchorSet::default();
    for i in 0..ANCHOR_COUNT {
        out[i] = to_frame.transform_point(&model.anchor_world(&fk, i));
    }
    Ok(out)
}

/// Reconstruction weights from anchor merging: the inverse of each
/// anchor's mean merge multiplicity across `models`, scaled to sum to 22.
/// Palm anchors count as unmerged.
pub fn anchor_weights<'a>(
    models: impl IntoIterator<Item = &'a ManipulatorModel>,
) -> AnchorWeights {
    let mut sum = [0.0; ANCHOR_COUNT];
    let mut count = 0usize;
    for m in models {
        for (s, mult) in sum.iter_mut().zip(m.merge_multiplicity()) {
            *s += mult as f64;
        }
        count += 1;
    }
    if count == 0 {
        return [1.0; ANCHOR_COUNT];
    }
    let mut w = [0.0; ANCHOR_COUNT];
    for (i, wi) in w.iter_mut().enumerate() {
        let mean = if PALM.contains(&i) {
            1.0
        } else {
            sum[i] / count as f64
        };
        *wi = 1.0 / mean;
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v * ANCHOR_COUNT as f64 / total)
}

/// Mean distance from the four non-thumb fingertips to the thumb tip.
pub fn aperture(anchors: &AnchorSet) -> f64 {
    FINGERTIPS
        .iter()
        .map(|&i| (anchors[i] - anchors[THUMB_TIP]).norm())
        .sum::<f64>()
        / FINGERTIPS.len() as f64
}
