use num_complex::Complex64 as C64;
use rand::Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Beam splitter `exp[theta (e^{i phi} a b^dag - e^{-i phi} a^dag b)]` on the
/// ordered mode pair `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BeamSplitter {
    pub modes: (usize, usize),
    pub theta: f64,
    pub phi: f64,
}

impl BeamSplitter {
    pub fn coupling(&self) -> C64 {
        C64::from_polar(self.theta, self.phi)
    }

    /// Heisenberg-picture mode transform: `B^dag (a, b) B = U (a, b)`.
    pub fn mode_matrix(&self) -> [[C64; 2]; 2] {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let e = C64::from_polar(1.0, self.phi);
        [[C64::new(c, 0.0), -e.conj() * s], [e * s, C64::new(c, 0.0)]]
    }
}

/// Gaussian unitary in Bloch-Messiah form `U (prod_i S_i D_i) V`: the
/// interferometer `pre` acts first, then each mode is displaced and
/// squeezed, then `post` acts.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianCircuit {
    pub num_modes: usize,
    pub pre: Vec<BeamSplitter>,
    pub squeezing: Vec<C64>,
    pub displacement: Vec<C64>,
    pub post: Vec<BeamSplitter>,
}

/// Sampling ranges for random circuits.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CircuitRanges {
    /// Per-mode squeezing magnitude is drawn from `[xi_min, xi_max)`.
    pub xi_min: f64,
    pub xi_max: f64,
    pub max_displacement: f64,
    /// Real squeezing only (phase 0), used for the squeezed-vacuum style families.
    pub real_squeezing: bool,
}

impl GaussianCircuit {
    fn chain(m: usize) -> Vec<BeamSplitter> {
        (0..m.saturating_sub(1)).map(|i| BeamSplitter { modes: (i, i + 1), theta: 0.0, phi: 0.0 }).collect()
    }

    pub fn identity(num_modes: usize) -> Self {
        Self {
            num_modes,
            pre: Self::chain(num_modes),
            squeezing: vec![C64::new(0.0, 0.0); num_modes],
            displacement: vec![C64::new(0.0, 0.0); num_modes],
            post: Self::chain(num_modes),
        }
    }

    pub fn max_squeezing(&self) -> f64 {
        self.squeezing.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_modes;
        if m == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one mode".into()));
        }
        if self.squeezing.len() != m || self.displacement.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: self.squeezing.len().min(self.displacement.len()) });
        }
        for bs in self.pre.iter().chain(&self.post) {
            let (a, b) = bs.modes;
            if a >= m || b >= m || a == b {
                return Err(Error::InvalidArgument(format!("beam splitter on invalid pair ({a}, {b})")));
            }
        }
        if self.pre.len() != m - 1 || self.post.len() != m - 1 {
            return Err(Error::InvalidArgument(format!("each interferometer needs exactly {} beam splitters", m - 1)));
        }
        Ok(())
    }

    pub fn validate_with_limit(&self, xi_max: f64) -> Result<()> {
        self.validate()?;
        let xi = self.max_squeezing();
        if xi > xi_max + 1e-12 {
            return Err(Error::InvalidArgument(format!("squeezing {xi} exceeds limit {xi_max}")));
        }
        Ok(())
    }

    /// Random chain-interferometer circuit. Beam-splitter angles follow the
    /// two-mode Haar measure (`cos^2 theta` uniform).
    pub fn random<R: Rng + ?Sized>(num_modes: usize, ranges: &CircuitRanges, rng: &mut R) -> Self {
        let bs = |rng: &mut R| -> Vec<BeamSplitter> {
            (0..num_modes.saturating_sub(1))
                .map(|i| {
                    let u: f64 = rng.random();
                    BeamSplitter { modes: (i, i + 1), theta: u.sqrt().acos(), phi: rng.random_range(0.0..2.0 * PI) }
                })
                .collect()
        };
        let pre = bs(rng);
        let squeezing = (0..num_modes)
            .map(|_| {
                let r = if ranges.xi_max > ranges.xi_min {
                    rng.random_range(ranges.xi_min..ranges.xi_max)
                } else {
                    ranges.xi_min
                };
                let phase = if ranges.real_squeezing { 0.0 } else { rng.random_range(0.0..2.0 * PI) };
                C64::from_polar(r, phase)
            })
            .collect();
        let displacement = (0..num_modes)
            .map(|_| {
                if ranges.max_displacement > 0.0 {
                    let r = ranges.max_displacement * rng.random::<f64>().sqrt();
                    C64::from_polar(r, rng.random_range(0.0..2.0 * PI))
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let post = bs(rng);
        Self { num_modes, pre, squeezing, displacement, post }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identity_is_valid_chain() {
        let c = GaussianCircuit::identity(3);
        c.validate().unwrap();
        assert_eq!(c.pre.len(), 2);
        assert_eq!(c.pre[1].modes, (1, 2));
    }

    #[test]
    fn wrong_interferometer_length_rejected() {
        let mut c = GaussianCircuit::identity(3);
        c.post.pop();
        assert!(c.validate().is_err());
    }

    #[test]
    fn random_respects_ranges() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let ranges = CircuitRanges { xi_min: 0.1, xi_max: 0.2, max_displacement: 0.5, real_squeezing: false };
        for _ in 0..50 {
            let c = GaussianCircuit::random(3, &ranges, &mut rng);
            c.validate_with_limit(0.2).unwrap();
            assert!(c.squeezing.iter().all(|z| z.norm() >= 0.1 && z.norm() < 0.2));
            assert!(c.displacement.iter().all(|z| z.norm() <= 0.5));
        }
    }

    #[test]
    fn mode_matrix_is_unitary() {
        let bs = BeamSplitter { modes: (0, 1), theta: 0.4, phi: 1.3 };
        let u = bs.mode_matrix();
        for i in 0..2 {
            for j in 0..2 {
                let dot: C64 = (0..2).map(|k| u[i][k] * u[j][k].conj()).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).norm() < 1e-14);
            }
        }
    }
}
