use nalgebra::DVector;
use num_complex::Complex64 as C64;

use super::core_state::factorial;
use super::loss::{apply_loss_channel, LossSpec};
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockSpec, PureState};

/// Photon-number cutoff for cat states.
pub const CAT_CUTOFF: usize = 24;

/// Largest squeezing accepted by `make_squeezed_vacuum`.
pub const MAX_SQUEEZED_VACUUM_XI: f64 = 1.2;

/// Truncated coherent state, renormalized on `d` levels.
pub fn coherent_state(alpha: C64, d: usize) -> Result<PureState> {
    let spec = FockSpec::new(1, d)?;
    let pref = (-alpha.norm_sqr() / 2.0).exp();
    let amps = DVector::from_fn(d, |n, _| pref * alpha.powu(n as u32) / factorial(n).sqrt());
    PureState::from_amplitudes(spec, amps)
}

/// `(|N,0> + e^{i N phi} |0,N>)/sqrt 2` on two modes with `cutoff` levels each.
pub fn noon_ideal(n: usize, phase: f64, cutoff: usize) -> Result<PureState> {
    if n == 0 {
        return Err(Error::InvalidArgument("N00N state needs N >= 1".into()));
    }
    if n + 1 > cutoff {
        return Err(Error::RankTooLarge { rank: n, modes: 2, cutoff });
    }
    let spec = FockSpec::new(2, cutoff)?;
    let mut amps = DVector::zeros(spec.total_dim());
    amps[spec.index_of(&[n, 0])?] = C64::new(1.0, 0.0);
    amps[spec.index_of(&[0, n])?] = C64::from_polar(1.0, n as f64 * phase);
    PureState::from_amplitudes(spec, amps)
}

/// Lossy N00N state; the channel keeps every loss order inside the cutoff.
pub fn make_noon(n: usize, phase: f64, eta: [f64; 2], cutoff: usize) -> Result<DensityMatrix> {
    let psi = noon_ideal(n, phase, cutoff)?;
    apply_loss_channel(&psi.to_density(), &LossSpec::exact(eta.to_vec(), cutoff)?)
}

/// Analytic normalization `[2 + 2 cos(phi) e^{-2|alpha|^2}]^{-1/2}`, or
/// `None` where the denominator vanishes (odd cat at `alpha -> 0`).
pub fn cat_normalization(alpha: C64, phase: f64) -> Option<f64> {
    let den = 2.0 + 2.0 * phase.cos() * (-2.0 * alpha.norm_sqr()).exp();
    (den >= 1e-12).then(|| 1.0 / den.sqrt())
}

/// `N (|alpha> + e^{i phi} |-alpha>)` truncated to `cutoff` levels.
pub fn cat_ideal(alpha: C64, phase: f64, cutoff: usize) -> Result<PureState> {
    let spec = FockSpec::new(1, cutoff)?;
    let rel = C64::from_polar(1.0, phase);
    let pref = (-alpha.norm_sqr() / 2.0).exp();
    let amps = DVector::from_fn(cutoff, |n, _| {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        pref * alpha.powu(n as u32) / factorial(n).sqrt() * (C64::new(1.0, 0.0) + rel * sign)
    });
    if cat_normalization(alpha, phase).is_none() || amps.norm() < 1e-150 {
        // odd-cat limit: the superposition tends to |1>
        return PureState::basis(spec, &[1]);
    }
    PureState::from_amplitudes(spec, amps)
}

/// Lossy cat state.
pub fn make_cat(alpha: C64, phase: f64, eta: f64, cutoff: usize) -> Result<DensityMatrix> {
    let psi = cat_ideal(alpha, phase, cutoff)?;
    let rho = apply_loss_channel(&psi.to_density(), &LossSpec::exact(vec![eta], cutoff)?)?;
    Ok(rho.renormalized())
}

/// Cutoff holding all but `1e-10` of the squeezed-vacuum population, at least 8.
pub fn squeezed_cutoff(xi: f64) -> usize {
    let t = xi.tanh().powi(2);
    let mut p = 1.0 / xi.cosh();
    let mut tail = 1.0 - p;
    let mut n = 0usize;
    while tail > 1e-10 && n < 2000 {
        // P(2n+2)/P(2n) = t (2n+1)/(2n+2)
        p *= t * (2 * n + 1) as f64 / (2 * n + 2) as f64;
        tail -= p;
        n += 1;
    }
    (2 * n + 2).max(8)
}

/// Squeezed vacuum `S(xi)|0>` from its closed-form Fock amplitudes,
/// `c_{2n} = (-e^{i arg xi} tanh r)^n sqrt((2n)!) / (2^n n! sqrt(cosh r))`.
pub fn squeezed_vacuum_ideal(xi: C64, cutoff: usize) -> Result<PureState> {
    let spec = FockSpec::new(1, cutoff)?;
    let r = xi.norm();
    let ratio = -C64::from_polar(r.tanh(), xi.arg());
    let mut amps = DVector::zeros(cutoff);
    let mut c = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    for n in 0..cutoff.div_ceil(2) {
        if 2 * n < cutoff {
            amps[2 * n] = c;
        }
        // c_{2n+2} / c_{2n} = ratio sqrt((2n+1)(2n+2)) / (2 (n+1))
        c *= ratio * (((2 * n + 1) * (2 * n + 2)) as f64).sqrt() / (2.0 * (n + 1) as f64);
    }
    PureState::from_amplitudes(spec, amps)
}

/// Lossy squeezed vacuum with real squeezing `xi` in [0, 1.2].
pub fn make_squeezed_vacuum(xi: f64, eta: f64) -> Result<DensityMatrix> {
    if !(0.0..=MAX_SQUEEZED_VACUUM_XI + 1e-12).contains(&xi) {
        return Err(Error::InvalidArgument(format!("squeezing {xi} outside [0, {MAX_SQUEEZED_VACUUM_XI}]")));
    }
    let d = squeezed_cutoff(xi);
    let psi = squeezed_vacuum_ideal(C64::new(xi, 0.0), d)?;
    psi.check_truncation(super::fock_ops::TAIL_TOLERANCE)?;
    let rho = apply_loss_channel(&psi.to_density(), &LossSpec::exact(vec![eta], d)?)?;
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, quadrature_matrix};
    use crate::states::circuit::GaussianCircuit;
    use crate::states::core_state::CoreState;
    use crate::states::fock_ops::apply_gaussian_circuit;

    #[test]
    fn noon_one_is_pure_bell_like() {
        let rho = make_noon(1, 0.0, [1.0, 1.0], 2).unwrap();
        let purity = (&rho.elements * &rho.elements).trace().re;
        assert!((purity - 1.0).abs() < 1e-12);
        assert!((rho.elements[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!((rho.elements[(1, 2)].re - 0.5).abs() < 1e-12);
        assert!(make_noon(0, 0.0, [1.0, 1.0], 3).is_err());
        assert!(make_noon(3, 0.0, [1.0, 1.0], 3).is_err());
    }

    #[test]
    fn cat_normalization_matches_vector_norm() {
        for (a, phi) in [(0.5, 0.0), (1.0, 1.3), (1.7, 3.0)] {
            let alpha = C64::new(a, 0.2);
            let n = cat_normalization(alpha, phi).unwrap();
            let rel = C64::from_polar(1.0, phi);
            let raw = coherent_state(alpha, 60).unwrap().amplitudes
                + coherent_state(-alpha, 60).unwrap().amplitudes.map(|z| z * rel);
            assert!((raw.norm() * n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vanishing_cat_is_vacuum() {
        let psi = cat_ideal(C64::new(1e-9, 0.0), 0.0, CAT_CUTOFF).unwrap();
        assert!((psi.amplitudes[0].norm() - 1.0).abs() < 1e-12);
        let odd = cat_ideal(C64::new(0.0, 0.0), std::f64::consts::PI, CAT_CUTOFF).unwrap();
        assert!((odd.amplitudes[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cat_parity() {
        let odd = make_cat(C64::new(1.0, 0.0), std::f64::consts::PI, 1.0, CAT_CUTOFF).unwrap();
        let even = make_cat(C64::new(1.0, 0.0), 0.0, 1.0, CAT_CUTOFF).unwrap();
        for n in 0..CAT_CUTOFF {
            let (o, e) = (odd.elements[(n, n)].re, even.elements[(n, n)].re);
            if n % 2 == 0 {
                assert!(o.abs() < 1e-9);
            } else {
                assert!(e.abs() < 1e-9);
            }
        }
        let norm = cat_ideal(C64::new(2.0, 0.0), 0.7, CAT_CUTOFF).unwrap();
        assert!((norm.norm_sqr() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn overlap_of_opposite_coherent_states() {
        let alpha = C64::new(0.9, 0.3);
        let a = coherent_state(alpha, 60).unwrap().amplitudes;
        let b = coherent_state(-alpha, 60).unwrap().amplitudes;
        let ov = a.dotc(&b).norm_sqr();
        assert!((ov - (-4.0 * alpha.norm_sqr()).exp()).abs() < 1e-12);
    }

    #[test]
    fn squeezed_vacuum_matches_circuit_path() {
        let d = 16;
        let mut c = GaussianCircuit::identity(1);
        c.squeezing[0] = C64::new(0.1, 0.0);
        let via_circuit = apply_gaussian_circuit(&CoreState::vacuum(1), &c, FockSpec::new(1, d).unwrap()).unwrap();
        let closed = squeezed_vacuum_ideal(C64::new(0.1, 0.0), d).unwrap();
        assert!((via_circuit.amplitudes - closed.amplitudes).norm() < 1e-9);
    }

    #[test]
    fn squeezed_variance_lossless() {
        for xi in [0.0, 0.3, 1.2] {
            let rho = make_squeezed_vacuum(xi, 1.0).unwrap();
            let x = quadrature_matrix(rho.dim(), 0.0).unwrap();
            let var = expectation(&rho.elements, &(&x * &x)).re - expectation(&rho.elements, &x).re.powi(2);
            assert!((var - (-2.0 * xi).exp() / 2.0).abs() < 1e-8, "xi = {xi}: {var}");
        }
        assert!(make_squeezed_vacuum(1.5, 1.0).is_err());
        let vac = make_squeezed_vacuum(0.0, 1.0).unwrap();
        assert!((vac.elements[(0, 0)].re - 1.0).abs() < 1e-14);
    }
}
