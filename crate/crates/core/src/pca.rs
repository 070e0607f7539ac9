//! Linear PCA over CVAE latents.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cvae::{LatentVector, LATENT_DIM};
use crate::error::{Error, Result};

/// Principal directions of the latent distribution, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub mean: LatentVector,
    /// Row `k` is the `k`-th principal direction (unit norm).
    pub components: [LatentVector; LATENT_DIM],
    /// Sample variance (1/(n−1)) along each direction, non-increasing.
    pub variances: LatentVector,
    /// Whether the first direction's sign was set by the aperture
    /// convention rather than the default largest-entry-positive rule.
    pub aperture_oriented: bool,
}

impl PcaBasis {
    /// Fits on `n > 10` latent rows via SVD of the centered data. Each
    /// direction's sign makes its largest-magnitude entry positive.
    pub fn fit(latents: &[LatentVector]) -> Result<Self> {
        let n = latents.len();
        if n <= LATENT_DIM {
            return Err(Error::Config(format!(
                "PCA needs more than {LATENT_DIM} samples, got {n}"
            )));
        }
        if latents.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PCA input"));
        }
        let mut mean = [0.0; LATENT_DIM];
        for z in latents {
            for k in 0..LATENT_DIM {
                mean[k] += z[k];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, LATENT_DIM, |r, c| latents[r][c] - mean[c]);
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.ok_or(Error::NonFinite("PCA decomposition"))?;
        let mut order: Vec<usize> = (0..LATENT_DIM).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let mut components = [[0.0; LATENT_DIM]; LATENT_DIM];
        let mut variances = [0.0; LATENT_DIM];
        for (row, &k) in order.iter().enumerate() {
            let mut dir: LatentVector = std::array::from_fn(|c| v_t[(k, c)]);
            let pivot = dir
                .iter()
                .cloned()
                .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if pivot < 0.0 {
                dir.iter_mut().for_each(|v| *v = -*v);
            }
            components[row] = dir;
            let s = svd.singular_values[k];
            variances[row] = s * s / (n - 1) as f64;
        }
        Ok(Self {
            mean,
            components,
            variances,
            aperture_oriented: false,
        })
    }

    /// Reverses the direction of component `k`.
    pub fn flip(&mut self, k: usize) {
        self.components[k].iter_mut().for_each(|v| *v = -*v);
    }

    /// First `n` coefficients `components[..n] · (z − mean)`.
    pub fn forward(&self, z: &LatentVector, n: usize) -> Result<Vec<f64>> {
        if !(1..=LATENT_DIM).contains(&n) {
            return Err(Error::ComponentCount(n));
        }
        Ok(self.components[..n]
            .iter()
            .map(|c| c.iter().zip(z).zip(&self.mean).map(|((ck, zk), mk)| ck * (zk - mk)).sum())
            .collect())
    }

    /// `mean + componentsᵀ · pad(coeffs)`; missing coefficients are zero.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<LatentVector> {
        if coeffs.len() > LATENT_DIM {
            return Err(Error::ComponentCount(coeffs.len()));
        }
        let mut z = self.mean;
        for (c, comp) in coeffs.iter().zip(&self.components) {
            for k in 0..LATENT_DIM {
                z[k] += c * comp[k];
            }
        }
        Ok(z)
    }

    /// Fraction of total variance captured by each component.
    pub fn explained_ratio(&self) -> LatentVector {
        let total: f64 = self.variances.iter().sum();
        if total > 0.0 {
            self.variances.map(|v| v / total)
        } else {
            [0.0; LATENT_DIM]
        }
    }
}
