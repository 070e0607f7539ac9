//! Conditional variational autoencoder over normalized anchor sets,
//! conditioned on a one-hot manipulator identifier.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adf::{AnchorSet, AnchorWeights};
use crate::error::{Error, Result};
use crate::kinematics::ANCHOR_COUNT;
use crate::nn::{hstack, Adam, Mlp};

pub const LATENT_DIM: usize = 10;
pub const ANCHOR_DIM: usize = 3 * ANCHOR_COUNT;

pub type LatentVector = [f64; LATENT_DIM];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial Adam step size.
    pub learning_rate: f64,
    /// Learning rate at the last epoch relative to the initial one; the
    /// schedule between them is a half cosine. 1.0 keeps it constant.
    #[serde(default = "default_final_lr")]
    pub final_lr_fraction: f64,
    /// Weight λ of the KL term.
    pub kl_weight: f64,
    /// Fraction of epochs over which λ ramps up linearly.
    pub kl_warmup: f64,
    pub seed: u64,
    pub held_out_fraction: f64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 256,
            learning_rate: 1e-3,
            final_lr_fraction: default_final_lr(),
            kl_weight: 1e-3,
            kl_warmup: 0.1,
            seed: 0,
            held_out_fraction: 0.1,
            hidden: 256,
        }
    }
}

fn default_final_lr() -> f64 {
    0.01
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return bad("final learning-rate fraction must be in (0, 1]");
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return bad("KL weight must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.kl_warmup) {
            return bad("KL warm-up fraction must lie in [0, 1]");
        }
        if !(self.held_out_fraction > 0.0 && self.held_out_fraction < 1.0) {
            return bad("held-out fraction must lie in (0, 1)");
        }
        if self.hidden == 0 {
            return bad("hidden width must be at least 1");
        }
        Ok(())
    }

    /// KL weight in effect during `epoch` (zero-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let progress = if self.epochs > 1 {
            epoch as f64 / (self.epochs - 1) as f64
        } else {
            1.0
        };
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        self.learning_rate * (self.final_lr_fraction + (1.0 - self.final_lr_fraction) * cos)
    }

    pub fn kl_weight_at(&self, epoch: usize) -> f64 {
        let ramp = (self.kl_warmup * self.epochs as f64).ceil().max(1.0);
        self.kl_weight * ((epoch + 1) as f64 / ramp).min(1.0)
    }
}

/// Encoder `[anchors | onehot] → [μ | log σ²]` and decoder
/// `[z | onehot] → anchors`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cvae {
    pub manipulators: usize,
    pub encoder: Mlp,
    pub decoder: Mlp,
}

fn onehot_rows(ids: &[usize], m: usize) -> Array2<f64> {
    let mut out = Array2::zeros((ids.len(), m));
    for (r, &id) in ids.iter().enumerate() {
        out[(r, id)] = 1.0;
    }
    out
}

/// Index of the single 1 in a one-hot vector.
pub fn onehot_index(onehot: &[f64], m: usize) -> Result<usize> {
    if onehot.len() != m {
        return Err(Error::Shape(format!(
            "one-hot has length {}, expected {m}",
            onehot.len()
        )));
    }
    let ones: Vec<usize> = (0..m).filter(|&i| onehot[i] == 1.0).collect();
    let zeros = onehot.iter().filter(|&&v| v == 0.0).count();
    match ones.as_slice() {
        [i] if zeros == m - 1 => Ok(*i),
        _ => Err(Error::Shape("one-hot must contain exactly one 1 and zeros elsewhere".into())),
    }
}

pub fn onehot(index: usize, m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[index] = 1.0;
    v
}

impl Cvae {
    pub fn new(manipulators: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Mlp::new(
            &[ANCHOR_DIM + manipulators, hidden, hidden, 2 * LATENT_DIM],
            &mut rng,
        );
        let decoder = Mlp::new(&[LATENT_DIM + manipulators, hidden, hidden, ANCHOR_DIM], &mut rng);
        Self {
            manipulators,
            encoder,
            decoder,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            manipulators: self.manipulators,
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&i| i >= self.manipulators) {
            Some(i) => Err(Error::Shape(format!(
                "manipulator id {i} out of range for {} manipulators",
                self.manipulators
            ))),
            None => Ok(()),
        }
    }

    /// Rows of μ and log σ² for a batch of flattened normalized anchors.
    pub fn encode_batch(&self, x: ArrayView2<f64>, ids: &[usize]) -> Result<(Array2<f64>, Array2<f64>)> {
        if x.ncols() != ANCHOR_DIM || x.nrows() != ids.len() {
            return Err(Error::Shape(format!(
                "encoder batch is {}×{} with {} ids",
                x.nrows(),
                x.ncols(),
                ids.len()
            )));
        }
        self.check_ids(ids)?;
        let input = hstack(x, onehot_rows(ids, self.manipulators).view());
        let out = self.encoder.forward(input.view());
        let mu = out.slice(s![.., ..LATENT_DIM]).to_owned();
        let logvar = out.slice(s![.., LATENT_DIM..]).to_owned();
        Ok((mu, logvar))
    }

    pub fn decode_batch(&self, z: ArrayView2<f64>, ids: &[usize]) -> Result<Array2<f64>> {
        if z.ncols() != LATENT_DIM || z.nrows() != ids.len() {
            return Err(Error::Shape(format!(
                "decoder batch is {}×{} with {} ids",
                z.nrows(),
                z.ncols(),
                ids.len()
            )));
        }
        self.check_ids(ids)?;
        let input = hstack(z, onehot_rows(ids, self.manipulators).view());
        Ok(self.decoder.forward(input.view()))
    }

    pub fn encode_id(&self, anchors: &AnchorSet, id: usize) -> Result<(LatentVector, LatentVector)> {
        let x = Array2::from_shape_vec((1, ANCHOR_DIM), anchors.to_flat().to_vec()).unwrap();
        let (mu, lv) = self.encode_batch(x.view(), &[id])?;
        let mut m = [0.0; LATENT_DIM];
        let mut l = [0.0; LATENT_DIM];
        for k in 0..LATENT_DIM {
            m[k] = mu[(0, k)];
            l[k] = lv[(0, k)];
        }
        if m.iter().chain(&l).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder output"));
        }
        Ok((m, l))
    }

    pub fn decode_id(&self, z: &LatentVector, id: usize) -> Result<AnchorSet> {
        let zrow = Array2::from_shape_vec((1, LATENT_DIM), z.to_vec()).unwrap();
        let out = self.decode_batch(zrow.view(), &[id])?;
        let a = AnchorSet::from_flat(out.row(0).as_slice().unwrap())?;
        if !a.is_finite() {
            return Err(Error::NonFinite("decoder output"));
        }
        Ok(a)
    }

    /// `(μ, log σ²)` of normalized `anchors` conditioned on `onehot`.
    pub fn encode(&self, anchors: &AnchorSet, onehot: &[f64]) -> Result<(LatentVector, LatentVector)> {
        self.encode_id(anchors, onehot_index(onehot, self.manipulators)?)
    }

    /// Normalized anchors decoded from `z` conditioned on `onehot`.
    pub fn decode(&self, z: &LatentVector, onehot: &[f64]) -> Result<AnchorSet> {
        self.decode_id(z, onehot_index(onehot, self.manipulators)?)
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend(self.decoder.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.decoder.tensors_mut());
        t
    }
}

/// `z = μ + exp(log σ² / 2) ⊙ ε` with `ε ~ N(0, I)` from a seeded stream.
pub fn reparameterize(mu: &LatentVector, logvar: &LatentVector, seed: u64) -> LatentVector {
    reparameterize_with(mu, logvar, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn reparameterize_with<R: Rng + ?Sized>(
    mu: &LatentVector,
    logvar: &LatentVector,
    rng: &mut R,
) -> LatentVector {
    std::array::from_fn(|k| {
        let eps: f64 = rng.sample(StandardNormal);
        mu[k] + (0.5 * logvar[k]).exp() * eps
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Weighted L1 distance `Σᵢ Σ_axis |wᵢ (xᵢ − x̂ᵢ)|` of one flattened sample.
pub fn weighted_l1(x: &[f64], xhat: &[f64], weights: &AnchorWeights) -> f64 {
    x.chunks_exact(3)
        .zip(xhat.chunks_exact(3))
        .zip(weights)
        .map(|((a, b), w)| a.iter().zip(b).map(|(p, q)| (w * (p - q)).abs()).sum::<f64>())
        .sum()
}

/// Loss from explicit reconstructions and posterior parameters, each a
/// batch of rows.
pub fn loss_terms(
    x: ArrayView2<f64>,
    xhat: ArrayView2<f64>,
    mu: ArrayView2<f64>,
    logvar: ArrayView2<f64>,
    weights: &AnchorWeights,
    kl_weight: f64,
) -> Result<LossParts> {
    let b = x.nrows();
    if b == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let recon = x
        .outer_iter()
        .zip(xhat.outer_iter())
        .map(|(a, r)| weighted_l1(a.as_slice().unwrap(), r.as_slice().unwrap(), weights))
        .sum::<f64>()
        / b as f64;
    let kl = mu
        .iter()
        .zip(logvar.iter())
        .map(|(m, l)| 0.5 * (l.exp() + m * m - 1.0 - l))
        .sum::<f64>()
        / b as f64;
    let total = recon + kl_weight * kl;
    if !total.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok(LossParts { total, recon, kl })
}

/// A minibatch with its reparameterization noise fixed.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: ArrayView2<'a, f64>,
    pub ids: &'a [usize],
    pub noise: ArrayView2<'a, f64>,
}

/// Loss of a batch under the given noise draw.
pub fn loss(params: &Cvae, batch: &Batch<'_>, weights: &AnchorWeights, kl_weight: f64) -> Result<LossParts> {
    let (mu, logvar) = params.encode_batch(batch.x, batch.ids)?;
    let z = &mu + &(logvar.mapv(|l| (0.5 * l).exp()) * batch.noise);
    let xhat = params.decode_batch(z.view(), batch.ids)?;
    loss_terms(batch.x, xhat.view(), mu.view(), logvar.view(), weights, kl_weight)
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_and_grad(
    params: &Cvae,
    batch: &Batch<'_>,
    weights: &AnchorWeights,
    kl_weight: f64,
) -> Result<(LossParts, Cvae)> {
    let b = batch.x.nrows();
    if batch.noise.dim() != (b, LATENT_DIM) {
        return Err(Error::Shape("noise must be batch × latent".into()));
    }
    if batch.x.ncols() != ANCHOR_DIM || batch.ids.len() != b {
        return Err(Error::Shape("batch rows, anchors and ids disagree".into()));
    }
    params.check_ids(batch.ids)?;
    let cond = onehot_rows(batch.ids, params.manipulators);
    let enc_in = hstack(batch.x, cond.view());
    let (enc_out, enc_cache) = params.encoder.forward_cached(enc_in.view());
    let mu = enc_out.slice(s![.., ..LATENT_DIM]);
    let logvar = enc_out.slice(s![.., LATENT_DIM..]);
    let sigma = logvar.mapv(|l| (0.5 * l).exp());
    let z = &mu + &(&sigma * &batch.noise);
    let dec_in = hstack(z.view(), cond.view());
    let (xhat, dec_cache) = params.decoder.forward_cached(dec_in.view());
    let parts = loss_terms(batch.x, xhat.view(), mu, logvar, weights, kl_weight)?;

    let inv_b = 1.0 / b as f64;
    let mut d_xhat = Array2::zeros(xhat.raw_dim());
    for ((mut d, x), r) in d_xhat.outer_iter_mut().zip(batch.x.outer_iter()).zip(xhat.outer_iter()) {
        for k in 0..ANCHOR_DIM {
            let w = weights[k / 3];
            let diff = r[k] - x[k];
            d[k] = if diff > 0.0 {
                w * inv_b
            } else if diff < 0.0 {
                -w * inv_b
            } else {
                0.0
            };
        }
    }
    let mut grad = params.zeros_like();
    let d_dec_in = params.decoder.backward(&dec_cache, &d_xhat, &mut grad.decoder);
    let d_z = d_dec_in.slice(s![.., ..LATENT_DIM]);

    let mut d_enc_out = Array2::zeros(enc_out.raw_dim());
    for r in 0..b {
        for k in 0..LATENT_DIM {
            let m = mu[(r, k)];
            let l = logvar[(r, k)];
            let dz = d_z[(r, k)];
            d_enc_out[(r, k)] = dz + kl_weight * m * inv_b;
            d_enc_out[(r, LATENT_DIM + k)] = dz * batch.noise[(r, k)] * 0.5 * sigma[(r, k)]
                + kl_weight * 0.5 * (l.exp() - 1.0) * inv_b;
        }
    }
    params.encoder.backward(&enc_cache, &d_enc_out, &mut grad.encoder);
    Ok((parts, grad))
}

/// Flattened normalized anchors with their manipulator ids.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub x: Array2<f64>,
    pub ids: Vec<usize>,
}

impl TrainingSet {
    pub fn from_sets<'a>(rows: impl IntoIterator<Item = (&'a AnchorSet, usize)>) -> Self {
        let mut flat = Vec::new();
        let mut ids = Vec::new();
        for (a, id) in rows {
            flat.extend_from_slice(&a.to_flat());
            ids.push(id);
        }
        let x = Array2::from_shape_vec((ids.len(), ANCHOR_DIM), flat).expect("row-major anchors");
        Self { x, ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Sample-weighted mean losses per epoch.
    pub epochs: Vec<LossParts>,
}

/// Minibatch Adam on weighted L1 plus λ·KL from a fresh initialization.
/// Deterministic given the seed.
pub fn train(
    set: &TrainingSet,
    manipulators: usize,
    weights: &AnchorWeights,
    config: &TrainConfig,
) -> Result<(Cvae, TrainReport)> {
    train_from(Cvae::new(manipulators, config.hidden, config.seed), set, weights, config)
}

/// [`train`] continuing from existing parameters. Optimizer moments start
/// at zero.
pub fn train_from(
    mut model: Cvae,
    set: &TrainingSet,
    weights: &AnchorWeights,
    config: &TrainConfig,
) -> Result<(Cvae, TrainReport)> {
    config.validate()?;
    if set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if set.ids.iter().any(|&id| id >= model.manipulators) {
        return Err(Error::Shape("training ids exceed the one-hot length".into()));
    }
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut opt = Adam::new(config.learning_rate, &shapes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_da7a);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..config.epochs {
        let lambda = config.kl_weight_at(epoch);
        opt.learning_rate = config.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut acc = LossParts::default();
        for chunk in order.chunks(config.batch_size) {
            let x = set.x.select(Axis(0), chunk);
            let ids: Vec<usize> = chunk.iter().map(|&i| set.ids[i]).collect();
            let noise = Array2::from_shape_simple_fn((chunk.len(), LATENT_DIM), || {
                rng.sample::<f64, _>(StandardNormal)
            });
            let batch = Batch {
                x: x.view(),
                ids: &ids,
                noise: noise.view(),
            };
            let (parts, grad) = loss_and_grad(&model, &batch, weights, lambda)
                .map_err(|_| Error::Diverged { epoch })?;
            opt.step(model.tensors_mut(), grad.tensors());
            let n = chunk.len() as f64;
            acc.total += parts.total * n;
            acc.recon += parts.recon * n;
            acc.kl += parts.kl * n;
        }
        let n = set.len() as f64;
        let mean = LossParts {
            total: acc.total / n,
            recon: acc.recon / n,
            kl: acc.kl / n,
        };
        if !mean.total.is_finite() || !model.encoder.is_finite() || !model.decoder.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        log::debug!(
            "epoch {epoch}: total {:.5} recon {:.5} kl {:.4}",
            mean.total,
            mean.recon,
            mean.kl
        );
        report.epochs.push(mean);
    }
    Ok((model, report))
}

/// Mean weighted L1 reconstruction error of `set` through the posterior
/// means, per manipulator id.
pub fn reconstruction_error(
    model: &Cvae,
    set: &TrainingSet,
    weights: &AnchorWeights,
) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; model.manipulators];
    let mut count = vec![0usize; model.manipulators];
    if set.is_empty() {
        return Ok(sum);
    }
    let (mu, _) = model.encode_batch(set.x.view(), &set.ids)?;
    let xhat = model.decode_batch(mu.view(), &set.ids)?;
    for ((x, r), &id) in set.x.outer_iter().zip(xhat.outer_iter()).zip(&set.ids) {
        sum[id] += weighted_l1(x.as_slice().unwrap(), r.as_slice().unwrap(), weights);
        count[id] += 1;
    }
    Ok(sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect())
}
