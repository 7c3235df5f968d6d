use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{conjugate_single_mode, DensityMatrix, FockSpec, PureState};

pub const DEFAULT_KRAUS_TRUNCATION: usize = 10;

/// Per-mode pure-loss channel efficiencies.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossSpec {
    pub efficiencies: Vec<f64>,
    /// Highest photon-loss order kept in the Kraus sum.
    pub kraus_truncation: usize,
}

impl LossSpec {
    pub fn new(efficiencies: Vec<f64>) -> Result<Self> {
        Self::with_truncation(efficiencies, DEFAULT_KRAUS_TRUNCATION)
    }

    pub fn with_truncation(efficiencies: Vec<f64>, kraus_truncation: usize) -> Result<Self> {
        if let Some(&bad) = efficiencies.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::InvalidEfficiency(bad));
        }
        if kraus_truncation < 1 {
            return Err(Error::InvalidArgument("Kraus truncation must be at least 1".into()));
        }
        Ok(Self { efficiencies, kraus_truncation })
    }

    /// Kraus sum kept up to `cutoff - 1`, i.e. exact on the truncated space.
    pub fn exact(efficiencies: Vec<f64>, cutoff: usize) -> Result<Self> {
        Self::with_truncation(efficiencies, cutoff.saturating_sub(1).max(1))
    }

    pub fn lossless(num_modes: usize) -> Self {
        Self { efficiencies: vec![1.0; num_modes], kraus_truncation: DEFAULT_KRAUS_TRUNCATION }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Kraus operators `L_n = sqrt((1-eta)^n / (n! eta^n)) a^n eta^{N/2}` for
/// `n = 0..=truncation`, as d x d matrices.
///
/// Element form: `<k| L_n |k+n> = sqrt(C(k+n, n) (1-eta)^n eta^k)`.
pub fn kraus_operators(eta: f64, d: usize, truncation: usize) -> Result<Vec<DMatrix<C64>>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidEfficiency(eta));
    }
    let orders = truncation.min(d - 1);
    Ok((0..=orders)
        .map(|n| {
            let mut l = DMatrix::zeros(d, d);
            for k in 0..d - n {
                let v = binomial(k + n, n) * (1.0 - eta).powi(n as i32) * eta.powi(k as i32);
                l[(k, k + n)] = C64::new(v.sqrt(), 0.0);
            }
            l
        })
        .collect())
}

/// Applies the single-mode loss channel on every mode.
pub fn apply_loss_channel(rho: &DensityMatrix, loss: &LossSpec) -> Result<DensityMatrix> {
    let spec = rho.spec;
    if loss.efficiencies.len() != spec.num_modes() {
        return Err(Error::DimensionMismatch { expected: spec.num_modes(), actual: loss.efficiencies.len() });
    }
    let mut cur = rho.elements.clone();
    for (mode, &eta) in loss.efficiencies.iter().enumerate() {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidEfficiency(eta));
        }
        if eta == 1.0 {
            continue;
        }
        let mut next = DMatrix::zeros(cur.nrows(), cur.ncols());
        for l in kraus_operators(eta, spec.cutoff(), loss.kraus_truncation)? {
            next += conjugate_single_mode(&cur, &l, mode, spec);
        }
        cur = next;
    }
    Ok(DensityMatrix { spec, elements: cur })
}

pub fn apply_loss_to_pure(psi: &PureState, loss: &LossSpec) -> Result<DensityMatrix> {
    apply_loss_channel(&psi.to_density(), loss)
}

/// Loss on a single-mode density matrix.
pub fn apply_single_mode_loss(rho: &DensityMatrix, eta: f64, truncation: usize) -> Result<DensityMatrix> {
    let spec = FockSpec::new(1, rho.spec.cutoff())?;
    let single = DensityMatrix { spec, elements: rho.elements.clone() };
    apply_loss_channel(&single, &LossSpec::with_truncation(vec![eta], truncation)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::PureState;
    use crate::states::families::coherent_state;

    #[test]
    fn lossless_channel_is_identity() {
        let spec = FockSpec::new(2, 4).unwrap();
        let psi = PureState::from_amplitudes(
            spec,
            nalgebra::DVector::from_fn(16, |i, _| C64::new(i as f64, 1.0 - i as f64 * 0.1)),
        )
        .unwrap();
        let rho = psi.to_density();
        let out = apply_loss_channel(&rho, &LossSpec::lossless(2)).unwrap();
        assert!((out.elements - rho.elements).norm() < 1e-12);
    }

    #[test]
    fn single_photon_decays_to_vacuum_mixture() {
        let spec = FockSpec::new(1, 3).unwrap();
        let one = PureState::basis(spec, &[1]).unwrap().to_density();
        for eta in [0.2, 0.5, 0.9] {
            let out = apply_loss_channel(&one, &LossSpec::new(vec![eta]).unwrap()).unwrap();
            // hand-summed Kraus terms: L0 keeps |1> with weight eta, L1 maps to |0>
            let mut expected = DMatrix::<C64>::zeros(3, 3);
            expected[(1, 1)] = C64::new(eta, 0.0);
            expected[(0, 0)] = C64::new(1.0 - eta, 0.0);
            assert!((out.elements - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn coherent_state_shrinks_amplitude() {
        let d = 30;
        let alpha = C64::new(1.2, -0.5);
        let eta = 0.6;
        let rho = coherent_state(alpha, d).unwrap().to_density();
        let out = apply_loss_channel(&rho, &LossSpec::exact(vec![eta], d).unwrap()).unwrap();
        let target = coherent_state(alpha * eta.sqrt(), d).unwrap();
        let fid = (target.amplitudes.adjoint() * &out.elements * &target.amplitudes)[(0, 0)].re;
        assert!(fid >= 1.0 - 1e-6, "fidelity {fid}");
    }

    #[test]
    fn invalid_efficiency_rejected() {
        assert!(matches!(LossSpec::new(vec![0.0]), Err(Error::InvalidEfficiency(_))));
        assert!(matches!(LossSpec::new(vec![1.2]), Err(Error::InvalidEfficiency(_))));
        assert!(kraus_operators(-0.1, 4, 3).is_err());
    }

    #[test]
    fn losses_on_distinct_modes_commute() {
        let spec = FockSpec::new(2, 4).unwrap();
        let psi = PureState::from_amplitudes(
            spec,
            nalgebra::DVector::from_fn(16, |i, _| C64::from_polar(1.0 / (1.0 + i as f64), i as f64)),
        )
        .unwrap();
        let rho = psi.to_density();
        let a = apply_loss_channel(&apply_loss_channel(&rho, &LossSpec::new(vec![0.7, 1.0]).unwrap()).unwrap(), &LossSpec::new(vec![1.0, 0.4]).unwrap()).unwrap();
        let b = apply_loss_channel(&apply_loss_channel(&rho, &LossSpec::new(vec![1.0, 0.4]).unwrap()).unwrap(), &LossSpec::new(vec![0.7, 1.0]).unwrap()).unwrap();
        assert!((&a.elements - &b.elements).norm() < 1e-9);
        assert!((a.trace() - 1.0).abs() < 1e-6);
    }
}
