//! Checkpoint evaluation: same-manipulator round trips, first-component
//! aperture sweeps and the recorded refinement trajectory.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adf::{aperture, compute_anchors};
use crate::cvae::LATENT_DIM;
use crate::error::Result;
use crate::retarget::{decode_anchors, decode_pass, encode_pass};
use crate::synergy::SynergyModel;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Random configurations per manipulator for round trips.
    pub samples: usize,
    pub seed: u64,
    /// First-component coefficients of the aperture sweep.
    pub coefficients: Vec<f64>,
    /// Relative slack when checking that errors do not grow with N.
    pub tolerance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            coefficients: vec![-3.0, -1.5, 0.0, 1.5, 3.0],
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub manip: String,
    /// Mean anchor RMS error in metres for N = 1..=10.
    pub rms_by_n: Vec<f64>,
    pub non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApertureSweep {
    pub manip: String,
    pub apertures: Vec<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub iteration: usize,
    pub mean_residual_before: f64,
    pub mean_residual_after: f64,
    pub increments: BTreeMap<String, f64>,
    pub held_out_recon: BTreeMap<String, f64>,
    pub mean_predictor: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub registry: Vec<String>,
    pub config: EvalConfig,
    pub round_trip: Vec<RoundTrip>,
    pub aperture: Vec<ApertureSweep>,
    pub refinement: Vec<RefinementSummary>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max_rms_n10: f64,
    pub max_rms_n2: f64,
    pub round_trip_non_increasing: bool,
    pub apertures_monotone: bool,
    /// Largest last-over-first δ increment ratio across manipulators.
    pub max_increment_ratio: Option<f64>,
}

/// Mean anchor RMS of encode→decode round trips for N = 1..=10 over
/// `samples` random configurations, warm-starting IK at mid-range.
pub fn round_trip_errors(psi: &SynergyModel, id: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let model = &psi.models[id];
    let delta = &psi.deltas[id];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = [0.0; LATENT_DIM];
    for _ in 0..samples {
        let j = model.sample_joints_with(&mut rng);
        let truth = compute_anchors(model, &j, delta)?;
        for (n, sum) in (1..=LATENT_DIM).zip(sums.iter_mut()) {
            let coeffs = encode_pass(psi, model.name(), &j, n)?;
            let out = decode_pass(psi, model.name(), &coeffs, &model.mid_range())?;
            *sum += compute_anchors(model, &out.joints, delta)?.rms_distance(&truth);
        }
    }
    Ok(sums.iter().map(|s| s / samples.max(1) as f64).collect())
}

/// Apertures of decoded anchors at each first-component coefficient.
pub fn aperture_sweep(psi: &SynergyModel, manip: &str, coefficients: &[f64]) -> Result<Vec<f64>> {
    coefficients
        .iter()
        .map(|&c| Ok(aperture(&decode_anchors(psi, manip, &[c])?)))
        .collect()
}

pub fn is_monotone_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0])
}

pub fn is_non_increasing(values: &[f64], tolerance: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + tolerance))
}

pub fn evaluate(psi: &SynergyModel, config: &EvalConfig) -> Result<EvalReport> {
    let registry: Vec<String> = psi.registry().iter().map(|s| s.to_string()).collect();
    let mut round_trip = Vec::new();
    let mut apertures = Vec::new();
    for (id, name) in registry.iter().enumerate() {
        let rms_by_n = round_trip_errors(psi, id, config.samples, config.seed.wrapping_add(id as u64))?;
        round_trip.push(RoundTrip {
            manip: name.clone(),
            non_increasing: is_non_increasing(&rms_by_n, config.tolerance),
            rms_by_n,
        });
        let sweep = aperture_sweep(psi, name, &config.coefficients)?;
        apertures.push(ApertureSweep {
            manip: name.clone(),
            monotone: is_monotone_increasing(&sweep),
            apertures: sweep,
        });
    }
    let by_name = |values: &[f64]| -> BTreeMap<String, f64> {
        registry.iter().cloned().zip(values.iter().copied()).collect()
    };
    let refinement: Vec<RefinementSummary> = psi
        .refinement
        .iter()
        .map(|it| RefinementSummary {
            iteration: it.iteration,
            mean_residual_before: it.mean_residual_before,
            mean_residual_after: it.mean_residual_after,
            increments: it.frames.iter().map(|f| (f.manip.clone(), f.increment)).collect(),
            held_out_recon: by_name(&it.held_out_recon),
            mean_predictor: by_name(&it.mean_predictor),
        })
        .collect();
    let max_increment_ratio = match (psi.refinement.first(), psi.refinement.last()) {
        (Some(first), Some(last)) if psi.refinement.len() > 1 => Some(
            first
                .frames
                .iter()
                .zip(&last.frames)
                .map(|(a, b)| b.increment / a.increment)
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let max_at = |n: usize| round_trip.iter().map(|r| r.rms_by_n[n - 1]).fold(0.0, f64::max);
    let summary = Summary {
        max_rms_n10: max_at(10),
        max_rms_n2: max_at(2),
        round_trip_non_increasing: round_trip.iter().all(|r| r.non_increasing),
        apertures_monotone: apertures.iter().all(|a| a.monotone),
        max_increment_ratio,
    };
    Ok(EvalReport {
        version: REPORT_VERSION,
        registry,
        config: config.clone(),
        round_trip,
        aperture: apertures,
        refinement,
        summary,
    })
}
