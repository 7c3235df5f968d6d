use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::heads::Head;
use super::mlp::{softmax_columns, Activation, Mlp, MlpCache};
use crate::error::{Error, Result};
use crate::homodyne::{HomodyneRecord, HomodyneSetting, Histogram, NUM_BINS};

/// Layer widths of the representation and generation networks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelDims {
    pub bins: usize,
    pub setting_embed: usize,
    pub hist_embed: usize,
    pub trunk_hidden: usize,
    pub z_dim: usize,
    pub latent_dim: usize,
    pub latent_hidden: usize,
    pub decoder_hidden: Vec<usize>,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            bins: NUM_BINS,
            setting_embed: 32,
            hist_embed: 32,
            trunk_hidden: 32,
            z_dim: 32,
            latent_dim: 8,
            latent_hidden: 64,
            decoder_hidden: vec![128, 128],
        }
    }
}

impl ModelDims {
    /// Small widths for gradient checks and fast tests.
    pub fn tiny(bins: usize) -> Self {
        Self {
            bins,
            setting_embed: 3,
            hist_embed: 3,
            trunk_hidden: 3,
            z_dim: 2,
            latent_dim: 2,
            latent_hidden: 3,
            decoder_hidden: vec![3],
        }
    }
}

/// Representation network, latent prior and posterior, and decoder, plus
/// any fine-tuned task heads.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OsfmModel {
    pub dims: ModelDims,
    pub enc_setting: Mlp,
    pub enc_hist: Mlp,
    pub trunk: Mlp,
    pub prior: Mlp,
    pub posterior: Mlp,
    pub decoder: Mlp,
    pub heads: BTreeMap<String, Head>,
}

/// Setting encoding `(mode / m, theta / pi)`.
pub fn encode_setting(setting: &HomodyneSetting, num_modes: usize) -> [f64; 2] {
    [setting.mode as f64 / num_modes as f64, setting.phase / PI]
}

pub fn settings_matrix(settings: &[HomodyneSetting], num_modes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2, settings.len(), |i, j| encode_setting(&settings[j], num_modes)[i])
}

pub fn histogram_matrix<'a>(hists: impl ExactSizeIterator<Item = &'a Histogram>, bins: usize) -> DMatrix<f64> {
    let n = hists.len();
    let mut m = DMatrix::zeros(bins, n);
    for (j, h) in hists.enumerate() {
        for (i, v) in h.bins.iter().enumerate().take(bins) {
            m[(i, j)] = *v;
        }
    }
    m
}

/// Stacks matrices with equal column counts vertically.
pub(crate) fn vstack(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = parts[0].ncols();
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        out.view_mut((r, 0), (p.nrows(), cols)).copy_from(p);
        r += p.nrows();
    }
    out
}

pub(crate) fn broadcast(v: &DVector<f64>, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(v.len(), cols, |i, _| v[i])
}

/// Forward state of the representation network, for backpropagation.
pub struct EncoderCache {
    setting: MlpCache,
    hist: MlpCache,
    trunk: MlpCache,
    count: usize,
}

/// Context records in matrix form.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordBatch {
    pub settings: DMatrix<f64>,
    pub histograms: DMatrix<f64>,
}

impl RecordBatch {
    pub fn from_records(records: &[HomodyneRecord], num_modes: usize, bins: usize) -> Self {
        let settings: Vec<HomodyneSetting> = records.iter().map(|r| r.setting).collect();
        Self {
            settings: settings_matrix(&settings, num_modes),
            histograms: histogram_matrix(records.iter().map(|r| &r.histogram), bins),
        }
    }

    pub fn len(&self) -> usize {
        self.settings.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentMode {
    /// Use the prior mean.
    Mean,
    /// Draw from the prior with this seed.
    Sample(u64),
}

impl OsfmModel {
    pub fn new(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = &dims;
        let enc_setting = Mlp::new(&[2, d.setting_embed], Activation::Relu, &mut rng);
        let enc_hist = Mlp::new(&[d.bins, d.hist_embed], Activation::Relu, &mut rng);
        let trunk = Mlp::new(&[d.setting_embed + d.hist_embed, d.trunk_hidden, d.z_dim], Activation::Relu, &mut rng);
        let prior = Mlp::new(&[d.z_dim + 2, d.latent_hidden, 2 * d.latent_dim], Activation::Linear, &mut rng);
        let posterior = Mlp::new(&[d.z_dim + 2 + d.bins, d.latent_hidden, 2 * d.latent_dim], Activation::Linear, &mut rng);
        let mut dec_dims = vec![d.z_dim + 2 + d.latent_dim];
        dec_dims.extend(&d.decoder_hidden);
        dec_dims.push(d.bins);
        // the decoder emits logits; generation normalizes them with a softmax
        let decoder = Mlp::new(&dec_dims, Activation::Linear, &mut rng);
        Self { dims, enc_setting, enc_hist, trunk, prior, posterior, decoder, heads: BTreeMap::new() }
    }

    /// The representation and generation networks by name, in a fixed order.
    pub fn networks(&self) -> [(&'static str, &Mlp); 6] {
        [
            ("enc_setting", &self.enc_setting),
            ("enc_hist", &self.enc_hist),
            ("trunk", &self.trunk),
            ("prior", &self.prior),
            ("posterior", &self.posterior),
            ("decoder", &self.decoder),
        ]
    }

    pub fn networks_mut(&mut self) -> [(&'static str, &mut Mlp); 6] {
        [
            ("enc_setting", &mut self.enc_setting),
            ("enc_hist", &mut self.enc_hist),
            ("trunk", &mut self.trunk),
            ("prior", &mut self.prior),
            ("posterior", &mut self.posterior),
            ("decoder", &mut self.decoder),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (_, net) in self.networks() {
            net.validate()?;
        }
        for head in self.heads.values() {
            head.mlp.validate()?;
        }
        Ok(())
    }

    pub fn encode_batch(&self, batch: &RecordBatch) -> Result<DVector<f64>> {
        Ok(self.encode_cached(batch)?.0)
    }

    pub(crate) fn encode_cached(&self, batch: &RecordBatch) -> Result<(DVector<f64>, EncoderCache)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("no measurement records to encode".into()));
        }
        let (es, setting) = self.enc_setting.forward_cached(&batch.settings);
        let (eh, hist) = self.enc_hist.forward_cached(&batch.histograms);
        let (t, trunk) = self.trunk.forward_cached(&vstack(&[&es, &eh]));
        let z = t.column_mean();
        Ok((z, EncoderCache { setting, hist, trunk, count: batch.len() }))
    }

    /// Backpropagates `dz` into the three representation networks, whose
    /// gradients are in `grads` at positions 0, 1 and 2.
    pub(crate) fn encoder_backward(&self, cache: &EncoderCache, dz: &DVector<f64>, grads: &mut [Mlp]) {
        let dt = broadcast(&(dz / cache.count as f64), cache.count);
        let dx = self.trunk.backward(&cache.trunk, &dt, &mut grads[2]);
        let se = self.dims.setting_embed;
        let des = dx.rows(0, se).into_owned();
        let deh = dx.rows(se, dx.nrows() - se).into_owned();
        self.enc_setting.backward(&cache.setting, &des, &mut grads[0]);
        self.enc_hist.backward(&cache.hist, &deh, &mut grads[1]);
    }

    /// Mean of the per-record encodings.
    pub fn encode_representation(&self, records: &[HomodyneRecord], num_modes: usize) -> Result<DVector<f64>> {
        self.encode_batch(&RecordBatch::from_records(records, num_modes, self.dims.bins))
    }

    /// Predicted outcome distributions for query settings (one per column).
    pub fn generate_batch(&self, z: &DVector<f64>, queries: &DMatrix<f64>, latent: LatentMode) -> DMatrix<f64> {
        let q = queries.ncols();
        let zb = broadcast(z, q);
        let prior_in = vstack(&[&zb, queries]);
        let stats = self.prior.forward(&prior_in);
        let h = self.dims.latent_dim;
        let mut lat = stats.rows(0, h).into_owned();
        if let LatentMode::Sample(seed) = latent {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for j in 0..q {
                for i in 0..h {
                    let eps: f64 = rng.sample(StandardNormal);
                    lat[(i, j)] += (0.5 * stats[(h + i, j)]).exp() * eps;
                }
            }
        }
        softmax_columns(&self.decoder.forward(&vstack(&[&zb, queries, &lat])))
    }

    pub fn generate_marginal(&self, z: &DVector<f64>, setting: &HomodyneSetting, num_modes: usize, latent: LatentMode) -> Histogram {
        let q = settings_matrix(std::slice::from_ref(setting), num_modes);
        let out = self.generate_batch(z, &q, latent);
        let bins: Vec<f64> = out.column(0).iter().copied().collect();
        Histogram { bins }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::NUM_BINS;

    fn records(n: usize, seed: u64) -> Vec<HomodyneRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|k| {
                let raw: Vec<f64> = (0..NUM_BINS).map(|_| rng.random::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                HomodyneRecord {
                    setting: HomodyneSetting { mode: k % 2, phase: rng.random_range(0.0..PI) },
                    histogram: Histogram { bins: raw.into_iter().map(|v| v / s).collect() },
                }
            })
            .collect()
    }

    #[test]
    fn representation_is_mean_aggregated() {
        let model = OsfmModel::new(ModelDims::default(), 4);
        let recs = records(6, 1);
        let z = model.encode_representation(&recs, 2).unwrap();
        assert_eq!(z.len(), 32);
        let single = model.encode_representation(&recs[..1], 2).unwrap();
        let per_one = model.encode_representation(&recs[..1], 2).unwrap();
        assert_eq!(single, per_one);
        let mut doubled = recs.clone();
        doubled.extend(recs.clone());
        assert!((model.encode_representation(&doubled, 2).unwrap() - &z).amax() < 1e-12);
        let mut perm = recs.clone();
        perm.reverse();
        perm.swap(0, 3);
        assert!((model.encode_representation(&perm, 2).unwrap() - &z).amax() < 1e-12);
        assert!(model.encode_representation(&[], 2).is_err());
    }

    #[test]
    fn generated_marginals_are_distributions() {
        let model = OsfmModel::new(ModelDims::default(), 9);
        let z = model.encode_representation(&records(4, 2), 2).unwrap();
        let s = HomodyneSetting { mode: 1, phase: 0.7 };
        for latent in [LatentMode::Mean, LatentMode::Sample(3)] {
            let h = model.generate_marginal(&z, &s, 2, latent);
            assert!((h.bins.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(h, model.generate_marginal(&z, &s, 2, latent));
        }
    }
}
