//! Seeded joint-space training corpus, its JSON-lines file format and
//! the global unit-Gaussian anchor normalizer.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adf::{compute_anchors, AnchorSet, FrameAdjustment};
use crate::error::{Error, Result};
use crate::kinematics::{JointVector, ManipulatorModel};

pub const DATASET_VERSION: u32 = 1;

/// Joint samples of one manipulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipSamples {
    pub manip: String,
    pub seed: u64,
    pub joints: Vec<JointVector>,
}

/// Joint configurations per manipulator. Anchors are derived on demand
/// because they depend on the current frame adjustments.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDataset {
    pub seed: u64,
    pub n: usize,
    pub entries: Vec<ManipSamples>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    seed: u64,
    n: usize,
    manipulators: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    manip: String,
    idx: usize,
    joints: Vec<f64>,
}

/// Stream seed of one manipulator: the run seed mixed with an FNV-1a hash
/// of the name, so samples do not depend on registry position.
pub fn manip_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix64 finalizer
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws `n` uniform configurations per manipulator.
pub fn build_dataset(models: &[ManipulatorModel], n: usize, seed: u64) -> Result<JointDataset> {
    if n == 0 {
        return Err(Error::Config("dataset size n must be at least 1".into()));
    }
    let entries = models
        .iter()
        .map(|m| {
            let s = manip_seed(seed, m.name());
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            ManipSamples {
                manip: m.name().to_string(),
                seed: s,
                joints: (0..n).map(|_| m.sample_joints_with(&mut rng)).collect(),
            }
        })
        .collect();
    Ok(JointDataset { seed, n, entries })
}

impl JointDataset {
    pub fn manipulators(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.manip.as_str()).collect()
    }

    /// Checks that `models` match the dataset entry for entry.
    pub fn check_models(&self, models: &[ManipulatorModel]) -> Result<()> {
        if models.len() != self.entries.len() {
            return Err(Error::Validation(format!(
                "dataset covers {} manipulators, {} models given",
                self.entries.len(),
                models.len()
            )));
        }
        for (m, e) in models.iter().zip(&self.entries) {
            if m.name() != e.manip {
                return Err(Error::Validation(format!(
                    "dataset manipulator `{}` does not match model `{}`",
                    e.manip,
                    m.name()
                )));
            }
            for j in &e.joints {
                m.check_joints(j)?;
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            version: DATASET_VERSION,
            seed: self.seed,
            n: self.n,
            manipulators: self.entries.iter().map(|e| e.manip.clone()).collect(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for e in &self.entries {
            for (idx, j) in e.joints.iter().enumerate() {
                let rec = Record {
                    manip: e.manip.clone(),
                    idx,
                    joints: j.clone(),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Parse("dataset file is empty".into()))?;
        let header: Header = serde_json::from_str(&first?)
            .map_err(|e| Error::Parse(format!("dataset header (line 1): {e}")))?;
        if header.version != DATASET_VERSION {
            return Err(Error::Parse(format!(
                "unsupported dataset version {}",
                header.version
            )));
        }
        let mut entries: Vec<ManipSamples> = header
            .manipulators
            .iter()
            .map(|m| ManipSamples {
                manip: m.clone(),
                seed: manip_seed(header.seed, m),
                joints: Vec::with_capacity(header.n),
            })
            .collect();
        for (lineno, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("dataset line {}: {e}", lineno + 1)))?;
            let entry = entries
                .iter_mut()
                .find(|e| e.manip == rec.manip)
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "dataset line {}: manipulator `{}` missing from header",
                        lineno + 1,
                        rec.manip
                    ))
                })?;
            if rec.idx != entry.joints.len() {
                return Err(Error::Parse(format!(
                    "dataset line {}: expected idx {}, found {}",
                    lineno + 1,
                    entry.joints.len(),
                    rec.idx
                )));
            }
            entry.joints.push(rec.joints);
        }
        for e in &entries {
            if e.joints.len() != header.n {
                return Err(Error::Parse(format!(
                    "manipulator `{}` has {} samples, header says {}",
                    e.manip,
                    e.joints.len(),
                    header.n
                )));
            }
        }
        Ok(JointDataset {
            seed: header.seed,
            n: header.n,
            entries,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

/// Anchor sets of every sample, per manipulator, under `deltas`.
pub fn anchor_views(
    models: &[ManipulatorModel],
    dataset: &JointDataset,
    deltas: &[FrameAdjustment],
) -> Result<Vec<Vec<AnchorSet>>> {
    dataset.check_models(models)?;
    models
        .iter()
        .zip(&dataset.entries)
        .zip(deltas)
        .map(|((m, e), d)| e.joints.iter().map(|j| compute_anchors(m, j, d)).collect())
        .collect()
}

/// Per-axis mean and standard deviation pooled over every anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Normalizer {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }
}

const AXES: [char; 3] = ['x', 'y', 'z'];

impl Normalizer {
    /// Population statistics over all rows of all sets.
    pub fn fit<'a>(sets: impl IntoIterator<Item = &'a AnchorSet> + Clone) -> Result<Self> {
        let mut sum = [0.0; 3];
        let mut count = 0usize;
        for s in sets.clone() {
            for r in s.iter() {
                for k in 0..3 {
                    sum[k] += r[k];
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Config("cannot fit a normalizer on an empty dataset".into()));
        }
        let mean = sum.map(|v| v / count as f64);
        let mut sq = [0.0; 3];
        for s in sets {
            for r in s.iter() {
                for k in 0..3 {
                    sq[k] += (r[k] - mean[k]).powi(2);
                }
            }
        }
        let std = sq.map(|v| (v / count as f64).sqrt());
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("normalizer statistics"));
        }
        for k in 0..3 {
            if std[k] < 1e-9 {
                return Err(Error::DegenerateAxis {
                    axis: AXES[k],
                    std: std[k],
                });
            }
        }
        let norm = Self { mean, std };
        if norm.anisotropy() < 0.1 {
            log::warn!(
                "near-degenerate anchor distribution: std = [{:.4}, {:.4}, {:.4}]",
                std[0],
                std[1],
                std[2]
            );
        }
        Ok(norm)
    }

    /// Smallest over largest per-axis std.
    pub fn anisotropy(&self) -> f64 {
        let max = self.std.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.std.iter().cloned().fold(f64::MAX, f64::min);
        min / max
    }

    pub fn normalize(&self, a: &AnchorSet) -> AnchorSet {
        let mut out = *a;
        for i in 0..crate::ANCHOR_COUNT {
            for k in 0..3 {
                out[i][k] = (a[i][k] - self.mean[k]) / self.std[k];
            }
        }
        out
    }

    pub fn denormalize(&self, a: &AnchorSet) -> AnchorSet {
        let mut out = *a;
        for i in 0..crate::ANCHOR_COUNT {
            for k in 0..3 {
                out[i][k] = a[i][k] * self.std[k] + self.mean[k];
            }
        }
        out
    }
}

/// Fits the global normalizer on the dataset's anchors under `deltas`.
pub fn fit_normalizer(
    models: &[ManipulatorModel],
    dataset: &JointDataset,
    deltas: &[FrameAdjustment],
) -> Result<Normalizer> {
    let views = anchor_views(models, dataset, deltas)?;
    Normalizer::fit(views.iter().flatten())
}
