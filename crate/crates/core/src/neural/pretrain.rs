use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::adam::{Adam, AdamConfig};
use super::mlp::Mlp;
use super::model::{broadcast, histogram_matrix, settings_matrix, vstack, OsfmModel, RecordBatch};
use crate::error::{Error, Result};
use crate::homodyne::{sample_measurement_plan, HomodyneRecord, PlanStage};
use crate::seeds::derive_seed;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_states: usize,
    pub subsets_per_state: usize,
    pub margin: f64,
    /// Final value of the linear triplet-weight schedule.
    pub triplet_weight: f64,
    pub kl_weight: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub seed: u64,
    /// Query settings scored per context subset; `None` scores all.
    pub max_queries: Option<usize>,
    /// Draw the latent from the posterior during training; otherwise use its mean.
    pub sample_latent: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_states: 16,
            subsets_per_state: 2,
            margin: 1.0,
            triplet_weight: 0.2,
            kl_weight: 0.01,
            adam: AdamConfig::default(),
            epochs: 200,
            seed: 0,
            max_queries: Some(48),
            sample_latent: true,
        }
    }
}

/// A state's full table of 100 phases per mode, ordered as the plan's
/// `all_settings`.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainState {
    pub num_modes: usize,
    pub table: Vec<HomodyneRecord>,
}

/// One context subset with its scored queries.
#[derive(Clone, Debug)]
pub struct SubsetExample {
    pub context: RecordBatch,
    pub queries: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    /// Standard-normal draws for the reparameterized latent, `latent_dim x queries`.
    pub noise: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub recon: f64,
    pub kl: f64,
    pub triplet: f64,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub triplet: f64,
    pub lambda: f64,
}

/// `max(0, |a - p|^2 - |a - n|^2 + margin)`.
pub fn triplet_loss(a: &DVector<f64>, p: &DVector<f64>, n: &DVector<f64>, margin: f64) -> f64 {
    ((a - p).norm_squared() - (a - n).norm_squared() + margin).max(0.0)
}

/// For every anchor: the farthest encoding of the same state and the
/// closest encoding of another state, ties going to the lowest index.
/// Empty unless there are at least two states with two encodings each.
pub fn mine_hard_triplets(encodings: &[DVector<f64>], labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let has_pair = distinct.iter().filter(|&&l| labels.iter().filter(|&&x| x == l).count() >= 2).count();
    if distinct.len() < 2 || has_pair < 2 {
        return Vec::new();
    }
    let n = encodings.len();
    let mut out = Vec::new();
    for a in 0..n {
        let mut pos: Option<(usize, f64)> = None;
        let mut neg: Option<(usize, f64)> = None;
        for j in 0..n {
            if j == a {
                continue;
            }
            let d = (&encodings[a] - &encodings[j]).norm_squared();
            if labels[j] == labels[a] {
                if pos.is_none_or(|(_, best)| d > best) {
                    pos = Some((j, d));
                }
            } else if neg.is_none_or(|(_, best)| d < best) {
                neg = Some((j, d));
            }
        }
        if let (Some((p, _)), Some((ng, _))) = (pos, neg) {
            out.push((a, p, ng));
        }
    }
    out
}

fn log_softmax_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let max = col.max();
        let lse = max + col.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        col.apply(|v| *v -= lse);
    }
    out
}

fn row_sum_head(m: &DMatrix<f64>, rows: usize) -> DVector<f64> {
    m.rows(0, rows).column_sum()
}

/// Reconstruction and KL terms of one subset; accumulates parameter
/// gradients (scaled by `scale_recon` and `scale_kl`) and returns them with
/// the gradient with respect to the representation.
fn generation_terms(
    model: &OsfmModel,
    z: &DVector<f64>,
    ex: &SubsetExample,
    scale_recon: f64,
    scale_kl: f64,
    grads: &mut [Mlp],
) -> (f64, f64, DVector<f64>) {
    let zd = model.dims.z_dim;
    let h = model.dims.latent_dim;
    let q = ex.queries.ncols();
    let zb = broadcast(z, q);
    let (ps, pc) = model.prior.forward_cached(&vstack(&[&zb, &ex.queries]));
    let (qs, qc) = model.posterior.forward_cached(&vstack(&[&zb, &ex.queries, &ex.targets]));
    let (mu_p, lv_p) = (ps.rows(0, h).into_owned(), ps.rows(h, h).into_owned());
    let (mu_q, lv_q) = (qs.rows(0, h).into_owned(), qs.rows(h, h).into_owned());
    let std_q = lv_q.map(|v| (0.5 * v).exp());
    let lat = &mu_q + std_q.component_mul(&ex.noise);
    let (logits, dc) = model.decoder.forward_cached(&vstack(&[&zb, &ex.queries, &lat]));
    let logp = log_softmax_columns(&logits);
    let ce = -ex.targets.component_mul(&logp).sum() / q as f64;

    let mut kl = 0.0;
    let mut d_mu_q = DMatrix::zeros(h, q);
    let mut d_lv_q = DMatrix::zeros(h, q);
    let mut d_mu_p = DMatrix::zeros(h, q);
    let mut d_lv_p = DMatrix::zeros(h, q);
    for j in 0..q {
        for i in 0..h {
            let (mq, mp, lq, lp) = (mu_q[(i, j)], mu_p[(i, j)], lv_q[(i, j)], lv_p[(i, j)]);
            let inv_vp = (-lp).exp();
            let diff = mq - mp;
            kl += 0.5 * (lp - lq + (lq.exp() + diff * diff) * inv_vp - 1.0);
            d_mu_q[(i, j)] = scale_kl * diff * inv_vp;
            d_mu_p[(i, j)] = -scale_kl * diff * inv_vp;
            d_lv_q[(i, j)] = scale_kl * 0.5 * ((lq - lp).exp() - 1.0);
            d_lv_p[(i, j)] = scale_kl * 0.5 * (1.0 - (lq.exp() + diff * diff) * inv_vp);
        }
    }
    kl /= q as f64;

    // softmax cross-entropy with unit-mass targets
    let probs = logp.map(f64::exp);
    let dlogits = (&probs - &ex.targets) * scale_recon;
    let ddec = model.decoder.backward(&dc, &dlogits, &mut grads[5]);
    let mut dz = row_sum_head(&ddec, zd);
    let dlat = ddec.rows(zd + 2, h).into_owned();
    d_mu_q += &dlat;
    d_lv_q += dlat.component_mul(&std_q).component_mul(&ex.noise) * 0.5;
    let dpost = model.posterior.backward(&qc, &vstack(&[&d_mu_q, &d_lv_q]), &mut grads[4]);
    dz += row_sum_head(&dpost, zd);
    let dprior = model.prior.backward(&pc, &vstack(&[&d_mu_p, &d_lv_p]), &mut grads[3]);
    dz += row_sum_head(&dprior, zd);
    (ce, kl, dz)
}

fn zero_grads(model: &OsfmModel) -> Vec<Mlp> {
    model.networks().iter().map(|(_, n)| n.zeros_like()).collect()
}

/// Composite loss of a batch (outer index: state, inner: context subset)
/// and its gradient for the six networks, in `OsfmModel::networks` order.
pub fn batch_loss_and_grads(
    model: &OsfmModel,
    batch: &[Vec<SubsetExample>],
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<Mlp>)> {
    let flat: Vec<(usize, &SubsetExample)> =
        batch.iter().enumerate().flat_map(|(s, subs)| subs.iter().map(move |e| (s, e))).collect();
    if flat.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    let count = flat.len() as f64;
    let zs: Vec<DVector<f64>> = flat.par_iter().map(|(_, e)| model.encode_batch(&e.context)).collect::<Result<_>>()?;
    let labels: Vec<usize> = flat.iter().map(|(s, _)| *s).collect();

    let triplets = mine_hard_triplets(&zs, &labels);
    let mut tri_loss = 0.0;
    let mut dz_tri: Vec<DVector<f64>> = vec![DVector::zeros(model.dims.z_dim); zs.len()];
    if !triplets.is_empty() {
        let scale = weights.triplet / triplets.len() as f64;
        for &(a, p, n) in &triplets {
            let l = triplet_loss(&zs[a], &zs[p], &zs[n], weights.margin);
            tri_loss += l;
            if l > 0.0 {
                let (za, zp, zn) = (zs[a].clone(), zs[p].clone(), zs[n].clone());
                dz_tri[a] += (&zn - &zp) * (2.0 * scale);
                dz_tri[p] -= (&za - &zp) * (2.0 * scale);
                dz_tri[n] += (&za - &zn) * (2.0 * scale);
            }
        }
        tri_loss /= triplets.len() as f64;
    }

    let per_subset: Vec<(f64, f64, Vec<Mlp>)> = flat
        .par_iter()
        .zip(dz_tri.par_iter())
        .map(|((_, ex), dzt)| -> Result<(f64, f64, Vec<Mlp>)> {
            let mut grads = zero_grads(model);
            let (z, cache) = model.encode_cached(&ex.context)?;
            let q = ex.queries.ncols() as f64;
            let (ce, kl, dz) = generation_terms(model, &z, ex, weights.recon / (count * q), weights.kl / (count * q), &mut grads);
            model.encoder_backward(&cache, &(dz + dzt), &mut grads);
            Ok((ce, kl, grads))
        })
        .collect::<Result<_>>()?;

    let mut grads = zero_grads(model);
    let (mut recon, mut kl) = (0.0, 0.0);
    for (ce, k, g) in &per_subset {
        recon += ce;
        kl += k;
        for (acc, part) in grads.iter_mut().zip(g) {
            acc.add_assign(part);
        }
    }
    recon /= count;
    kl /= count;
    let total = weights.recon * recon + weights.kl * kl + weights.triplet * tri_loss;
    let out = LossBreakdown { total, recon, kl, triplet: tri_loss, lambda: weights.triplet };
    if !total.is_finite() {
        return Err(Error::Numerical(format!("non-finite training loss: {out:?}")));
    }
    Ok((out, grads))
}

/// Linear triplet-weight schedule: 0 at the first step, `max` at the last.
pub fn triplet_schedule(step: u64, total_steps: u64, max: f64) -> f64 {
    if total_steps <= 1 {
        return max;
    }
    max * step as f64 / (total_steps - 1) as f64
}

/// Draws `config.subsets_per_state` context subsets for one state.
pub fn sample_subsets(state: &PretrainState, config: &TrainConfig, latent_dim: usize, bins: usize, seed: u64) -> Result<Vec<SubsetExample>> {
    (0..config.subsets_per_state)
        .map(|k| {
            let sub_seed = derive_seed(seed, &[k as u64]);
            let plan = sample_measurement_plan(state.num_modes, PlanStage::Pretrain, sub_seed)?;
            if state.table.len() != plan.all_settings.len() {
                return Err(Error::DimensionMismatch { expected: plan.all_settings.len(), actual: state.table.len() });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sub_seed, &[u64::MAX]));
            let mut query = plan.query.clone();
            if let Some(limit) = config.max_queries {
                query.shuffle(&mut rng);
                query.truncate(limit);
                query.sort_unstable();
            }
            let context: Vec<HomodyneRecord> = plan.context.iter().map(|&i| state.table[i].clone()).collect();
            let qs: Vec<_> = query.iter().map(|&i| state.table[i].setting).collect();
            let noise = if config.sample_latent {
                DMatrix::from_fn(latent_dim, qs.len(), |_, _| rng.sample(StandardNormal))
            } else {
                DMatrix::zeros(latent_dim, qs.len())
            };
            Ok(SubsetExample {
                context: RecordBatch::from_records(&context, state.num_modes, bins),
                queries: settings_matrix(&qs, state.num_modes),
                targets: histogram_matrix(query.iter().map(|&i| &state.table[i].histogram), bins),
                noise,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub recon: f64,
    pub kl: f64,
    pub triplet: f64,
    /// Triplet weight at the epoch's last step.
    pub lambda: f64,
    pub total: f64,
}

/// Model plus optimizer and progress, enough to resume training exactly.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Trainer {
    pub model: OsfmModel,
    pub adam: Adam,
    pub config: TrainConfig,
    pub epochs_done: usize,
    pub step: u64,
}

impl Trainer {
    pub fn new(model: OsfmModel, config: TrainConfig) -> Self {
        Self { adam: Adam::new(config.adam), model, config, epochs_done: 0, step: 0 }
    }

    pub fn steps_per_epoch(&self, num_states: usize) -> u64 {
        num_states.div_ceil(self.config.batch_states.max(1)) as u64
    }

    fn apply(&mut self, grads: &[Mlp]) -> Result<()> {
        let entries: Vec<(&str, &mut Mlp, &Mlp)> =
            self.model.networks_mut().into_iter().zip(grads).map(|((name, net), g)| (name, net, g)).collect();
        self.adam.step(entries)
    }

    /// One optimizer step over the given states.
    pub fn step_on(&mut self, data: &[PretrainState], indices: &[usize], lambda: f64) -> Result<LossBreakdown> {
        let cfg = &self.config;
        let (h, bins) = (self.model.dims.latent_dim, self.model.dims.bins);
        let batch: Vec<Vec<SubsetExample>> = indices
            .par_iter()
            .map(|&i| sample_subsets(&data[i], cfg, h, bins, derive_seed(cfg.seed, &[1, self.step, i as u64])))
            .collect::<Result<_>>()?;
        let weights = LossWeights { recon: 1.0, kl: cfg.kl_weight, triplet: lambda, margin: cfg.margin };
        let (loss, grads) = batch_loss_and_grads(&self.model, &batch, &weights)?;
        self.apply(&grads)?;
        self.step += 1;
        Ok(loss)
    }

    /// Runs the remaining epochs of `config.epochs`, calling `on_epoch` after each.
    pub fn train(&mut self, data: &[PretrainState], on_epoch: impl FnMut(&EpochLog)) -> Result<Vec<EpochLog>> {
        self.train_until(data, self.config.epochs, on_epoch)
    }

    /// Like `train` but stops after epoch `stop` (capped at `config.epochs`).
    /// The schedule still spans `config.epochs`, so training in pieces is
    /// identical to one uninterrupted run.
    pub fn train_until(&mut self, data: &[PretrainState], stop: usize, mut on_epoch: impl FnMut(&EpochLog)) -> Result<Vec<EpochLog>> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("no pretraining states".into()));
        }
        let per_epoch = self.steps_per_epoch(data.len());
        let total = per_epoch * self.config.epochs as u64;
        let mut logs = Vec::new();
        while self.epochs_done < stop.min(self.config.epochs) {
            let epoch = self.epochs_done;
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &[0, epoch as u64])));
            let mut acc = EpochLog { epoch, ..EpochLog::default() };
            let mut n = 0.0;
            for chunk in order.chunks(self.config.batch_states.max(1)) {
                let lambda = triplet_schedule(self.step, total, self.config.triplet_weight);
                let loss = self.step_on(data, chunk, lambda)?;
                acc.recon += loss.recon;
                acc.kl += loss.kl;
                acc.triplet += loss.triplet;
                acc.total += loss.total;
                acc.lambda = lambda;
                n += 1.0;
            }
            acc.recon /= n;
            acc.kl /= n;
            acc.triplet /= n;
            acc.total /= n;
            self.epochs_done += 1;
            log::info!(
                "epoch {epoch}: recon {:.5} kl {:.5} triplet {:.5} lambda {:.4}",
                acc.recon,
                acc.kl,
                acc.triplet,
                acc.lambda
            );
            on_epoch(&acc);
            logs.push(acc);
        }
        Ok(logs)
    }
}
