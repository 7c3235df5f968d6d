//! Exact t-SNE with perplexity-calibrated affinities, early exaggeration,
//! momentum and per-coordinate gains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self { perplexity: 30.0, iterations: 1000, exaggeration: 12.0, exaggeration_iters: 250, learning_rate: 200.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsneResult {
    pub points: Vec<[f64; 2]>,
    pub kl_initial: f64,
    pub kl_final: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Row `i` of the conditional affinities, bisecting the precision until
/// the row entropy matches `ln(perplexity)`.
fn conditional_row(d: &[f64], i: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut beta = 1.0;
    let mut row = vec![0.0; d.len()];
    for _ in 0..200 {
        let dmin = d.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
        let mut sum = 0.0;
        for (j, &dj) in d.iter().enumerate() {
            row[j] = if j == i { 0.0 } else { (-(dj - dmin) * beta).exp() };
            sum += row[j];
        }
        let mut h = 0.0;
        for (j, r) in row.iter_mut().enumerate() {
            *r /= sum;
            if j != i && *r > 0.0 {
                h -= *r * r.ln();
            }
        }
        if (h - target).abs() < 1e-10 {
            break;
        }
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    row
}

fn kl_divergence(p: &[Vec<f64>], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let num: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 / (1.0 + sq_dist(&y[i], &y[j])) }).collect())
        .collect();
    let z: f64 = num.iter().map(|r| r.iter().sum::<f64>()).sum();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && p[i][j] > 0.0 {
                kl += p[i][j] * (p[i][j] / (num[i][j] / z).max(1e-300)).ln();
            }
        }
    }
    kl
}

/// Two-dimensional embedding of `vectors`.
pub fn tsne_embed(vectors: &[Vec<f64>], config: &TsneConfig) -> Result<TsneResult> {
    let n = vectors.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if n > 5000 {
        return Err(Error::InvalidArgument(format!("exact t-SNE is limited to 5000 points, got {n}")));
    }
    if !(config.perplexity > 1.0 && config.perplexity < n as f64 / 3.0) {
        return Err(Error::InvalidArgument(format!("perplexity {} must lie in (1, N/3) for N = {n}", config.perplexity)));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidArgument("t-SNE inputs must be finite and of equal length".into()));
    }
    if vectors.iter().all(|v| v == &vectors[0]) {
        return Err(Error::InvalidArgument("t-SNE inputs are all identical".into()));
    }

    let cond: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = vectors.iter().map(|v| sq_dist(&vectors[i], v)).collect();
            conditional_row(&d, i, config.perplexity)
        })
        .collect();
    let p: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12) }).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [1e-2 * rng.sample::<f64, _>(StandardNormal), 1e-2 * rng.sample::<f64, _>(StandardNormal)]).collect();
    let kl_initial = kl_divergence(&p, &y);
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0_f64; 2]; n];

    for iter in 0..config.iterations {
        let exag = if iter < config.exaggeration_iters { config.exaggeration } else { 1.0 };
        let momentum = if iter < config.exaggeration_iters { 0.5 } else { 0.8 };
        let rows: Vec<(f64, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let num: Vec<f64> = (0..n).map(|j| if i == j { 0.0 } else { 1.0 / (1.0 + sq_dist(&y[i], &y[j])) }).collect();
                (num.iter().sum(), num)
            })
            .collect();
        let z: f64 = rows.iter().map(|(s, _)| s).sum();
        let grads: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let num = &rows[i].1;
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i != j {
                        let w = (exag * p[i][j] - num[j] / z) * num[j];
                        g[0] += 4.0 * w * (y[i][0] - y[j][0]);
                        g[1] += 4.0 * w * (y[i][1] - y[j][1]);
                    }
                }
                g
            })
            .collect();
        for i in 0..n {
            for k in 0..2 {
                let same_sign = (grads[i][k] > 0.0) == (velocity[i][k] > 0.0);
                gains[i][k] = if same_sign { (gains[i][k] * 0.8).max(0.01) } else { gains[i][k] + 0.2 };
                velocity[i][k] = momentum * velocity[i][k] - config.learning_rate * gains[i][k] * grads[i][k];
                y[i][k] += velocity[i][k];
            }
        }
        let mean = y.iter().fold([0.0; 2], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
        for v in &mut y {
            v[0] -= mean[0] / n as f64;
            v[1] -= mean[1] / n as f64;
        }
    }
    if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::Numerical("t-SNE diverged".into()));
    }
    let kl_final = kl_divergence(&p, &y);
    Ok(TsneResult { points: y, kl_initial, kl_final })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::metrics::silhouette;

    fn clusters(n_per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for _ in 0..n_per {
                pts.push((0..32).map(|k| if k == 0 { 10.0 * c as f64 } else { 0.0 } + rng.sample::<f64, _>(StandardNormal)).collect());
                labels.push(c);
            }
        }
        (pts, labels)
    }

    #[test]
    fn conditional_rows_hit_the_perplexity() {
        let (pts, _) = clusters(20, 1);
        let d: Vec<f64> = pts.iter().map(|v| sq_dist(&pts[3], v)).collect();
        let row = conditional_row(&d, 3, 10.0);
        let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
        assert!((h.exp() - 10.0).abs() < 1e-6);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_clusters_stay_separated() {
        let (pts, labels) = clusters(100, 2);
        let cfg = TsneConfig { seed: 5, ..TsneConfig::default() };
        let out = tsne_embed(&pts, &cfg).unwrap();
        assert!(out.kl_final < out.kl_initial);
        let emb: Vec<Vec<f64>> = out.points.iter().map(|p| p.to_vec()).collect();
        assert!(silhouette(&emb, &labels).unwrap() > 0.8);
    }

    #[test]
    fn deterministic_and_guarded() {
        let (pts, _) = clusters(10, 3);
        let cfg = TsneConfig { perplexity: 5.0, iterations: 100, seed: 1, ..TsneConfig::default() };
        assert_eq!(tsne_embed(&pts, &cfg).unwrap(), tsne_embed(&pts, &cfg).unwrap());
        assert!(tsne_embed(&vec![vec![1.0; 3]; 30], &cfg).is_err());
        assert!(tsne_embed(&pts, &TsneConfig { perplexity: 10.0, ..cfg }).is_err());
    }
}
