use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fock::{FockSpec, PureState};

/// Superposition with bounded multimode Fock support.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoreState {
    pub num_modes: usize,
    pub terms: Vec<(Vec<usize>, C64)>,
    pub stellar_rank: usize,
}

impl CoreState {
    /// Normalizes the coefficients and derives the stellar rank.
    pub fn new(num_modes: usize, terms: Vec<(Vec<usize>, C64)>) -> Result<Self> {
        if terms.iter().any(|(n, _)| n.len() != num_modes) {
            return Err(Error::InvalidArgument("multi-index length differs from mode count".into()));
        }
        let norm = terms.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numerical("core state has zero norm".into()));
        }
        let terms: Vec<_> = terms.into_iter().map(|(n, c)| (n, c / norm)).collect();
        let stellar_rank = terms
            .iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(n, _)| n.iter().sum::<usize>())
            .max()
            .unwrap_or(0);
        Ok(Self { num_modes, terms, stellar_rank })
    }

    pub fn vacuum(num_modes: usize) -> Self {
        Self { num_modes, terms: vec![(vec![0; num_modes], C64::new(1.0, 0.0))], stellar_rank: 0 }
    }

    pub fn fock(occupation: &[usize]) -> Self {
        Self::new(occupation.len(), vec![(occupation.to_vec(), C64::new(1.0, 0.0))]).expect("unit coefficient")
    }

    /// Largest coefficient magnitude among terms of maximal total photon number.
    pub fn top_rank_weight(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(n, _)| n.iter().sum::<usize>() == self.stellar_rank)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn to_pure(&self, spec: FockSpec) -> Result<PureState> {
        if spec.num_modes() != self.num_modes {
            return Err(Error::DimensionMismatch { expected: self.num_modes, actual: spec.num_modes() });
        }
        let mut amps = DVector::zeros(spec.total_dim());
        for (n, c) in &self.terms {
            amps[spec.index_of(n)?] += c;
        }
        PureState::from_amplitudes(spec, amps)
    }

    /// Stellar function `sum_n c_n prod_i alpha_i^{n_i} / sqrt(n_i!)`.
    pub fn stellar_function(&self, alpha: &[C64]) -> Result<C64> {
        if alpha.len() != self.num_modes {
            return Err(Error::DimensionMismatch { expected: self.num_modes, actual: alpha.len() });
        }
        let mut total = C64::new(0.0, 0.0);
        for (n, c) in &self.terms {
            let mut term = *c;
            for (&k, &a) in n.iter().zip(alpha) {
                term *= a.powu(k as u32) / factorial(k).sqrt();
            }
            total += term;
        }
        Ok(total)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn multi_indices(m: usize, cap: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; m];
    fn rec(i: usize, left: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left.min(cap) {
            cur[i] = k;
            rec(i + 1, left - k, cap, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, max_total, cap, &mut cur, &mut out);
    out
}

/// Random core state of stellar rank `r`: between one and four support
/// multi-indices with total photon number at most `r`, one of which has
/// total exactly `r`, and complex Gaussian coefficients.
pub fn random_core_state(spec: FockSpec, r: usize, seed: u64) -> Result<CoreState> {
    let m = spec.num_modes();
    let cap = spec.cutoff() - 1;
    if r > m * cap {
        return Err(Error::RankTooLarge { rank: r, modes: m, cutoff: spec.cutoff() });
    }
    if r == 0 {
        return Ok(CoreState::vacuum(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = multi_indices(m, cap, r);
    let top: Vec<_> = all.iter().filter(|n| n.iter().sum::<usize>() == r).cloned().collect();
    let k = rng.random_range(1..=4usize).min(all.len());
    let mut support = vec![top[rng.random_range(0..top.len())].clone()];
    while support.len() < k {
        let cand = &all[rng.random_range(0..all.len())];
        if !support.contains(cand) {
            support.push(cand.clone());
        }
    }
    let terms = support
        .into_iter()
        .map(|n| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            (n, C64::new(re, im))
        })
        .collect();
    CoreState::new(m, terms)
}

/// Number of zeros of a single-mode stellar function `sum_n psi_n z^n / sqrt(n!)`
/// inside the disk `|z| < radius`, by the argument principle.
pub fn count_stellar_zeros(amplitudes: &[C64], radius: f64, samples: usize) -> i64 {
    let coeffs: Vec<C64> = amplitudes.iter().enumerate().map(|(n, a)| a / factorial(n).sqrt()).collect();
    let eval = |z: C64| coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c);
    let mut winding = 0.0;
    let mut prev = eval(C64::new(radius, 0.0)).arg();
    for k in 1..=samples {
        let t = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let cur = eval(C64::from_polar(radius, t)).arg();
        let mut delta = cur - prev;
        while delta > std::f64::consts::PI {
            delta -= 2.0 * std::f64::consts::PI;
        }
        while delta < -std::f64::consts::PI {
            delta += 2.0 * std::f64::consts::PI;
        }
        winding += delta;
        prev = cur;
    }
    (winding / (2.0 * std::f64::consts::PI)).round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_zero_is_vacuum() {
        let spec = FockSpec::new(3, 6).unwrap();
        let core = random_core_state(spec, 0, 9).unwrap();
        assert_eq!(core, CoreState::vacuum(3));
    }

    #[test]
    fn three_mode_fock_core_rank_and_stellar_function() {
        let core = CoreState::fock(&[0, 1, 2]);
        assert_eq!(core.stellar_rank, 3);
        let (z2, z3) = (C64::new(0.3, -1.1), C64::new(-0.7, 0.4));
        let f = core.stellar_function(&[C64::new(1.0, 0.0), z2, z3]).unwrap();
        let expected = z2 * z3 * z3 / 2f64.sqrt();
        assert!((f - expected).norm() < 1e-14);
    }

    #[test]
    fn single_mode_rank_two_has_top_term() {
        let spec = FockSpec::new(1, 8).unwrap();
        for seed in 0..20 {
            let core = random_core_state(spec, 2, seed).unwrap();
            assert_eq!(core.stellar_rank, 2);
            let norm: f64 = core.terms.iter().map(|(_, c)| c.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(core.terms.iter().any(|(n, c)| n[0] == 2 && c.norm() > 0.0));
            assert!(core.terms.iter().all(|(n, _)| n[0] <= 2));
        }
    }

    #[test]
    fn vacuum_stellar_function_is_constant() {
        let core = CoreState::vacuum(2);
        for z in [C64::new(0.0, 0.0), C64::new(3.0, -2.0)] {
            assert_eq!(core.stellar_function(&[z, z]).unwrap(), C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn fock_stellar_function_is_monomial() {
        let alpha = C64::new(0.8, 0.6);
        for n in 0..6 {
            let f = CoreState::fock(&[n]).stellar_function(&[alpha]).unwrap();
            assert!((f - alpha.powu(n as u32) / factorial(n).sqrt()).norm() < 1e-13);
        }
    }

    #[test]
    fn rank_beyond_capacity_fails() {
        let spec = FockSpec::new(1, 4).unwrap();
        assert!(matches!(random_core_state(spec, 4, 0), Err(Error::RankTooLarge { .. })));
    }

    #[test]
    fn zero_counting_on_polynomials() {
        // |2>: double zero at the origin
        let amps = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        assert_eq!(count_stellar_zeros(&amps, 1.0, 512), 2);
        // |0> + |1>: zero at z = -1
        let amps = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        assert_eq!(count_stellar_zeros(&amps, 0.5, 512), 0);
        assert_eq!(count_stellar_zeros(&amps, 2.0, 512), 1);
    }
}
