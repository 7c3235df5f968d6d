//! Gaussian unitaries realized in the truncated Fock basis.
//!
//! Each operator is the exponential of its generator truncated at
//! `d + HEADROOM` levels per mode, projected back onto the first `d` levels.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::circuit::{BeamSplitter, GaussianCircuit};
use super::core_state::CoreState;
use crate::error::{Error, Result};
use crate::fock::{self, annihilation_matrix, apply_single_mode, apply_two_mode, FockSpec, PureState};

pub const HEADROOM: usize = 2;

/// Largest population tolerated on any mode's top Fock level.
pub const TAIL_TOLERANCE: f64 = 1e-3;

fn project(op: &DMatrix<C64>, d: usize) -> DMatrix<C64> {
    op.view((0, 0), (d, d)).into_owned()
}

/// Squeezer `exp[(xi^* a^2 - xi a^dag^2) / 2]` on `d` levels.
pub fn squeeze_operator(xi: C64, d: usize) -> Result<DMatrix<C64>> {
    let a = annihilation_matrix(d + HEADROOM)?;
    let ad = a.adjoint();
    let k = (&a * &a).map(|z| z * xi.conj() * 0.5) - (&ad * &ad).map(|z| z * xi * 0.5);
    Ok(project(&fock::expm_anti_hermitian(&k)?, d))
}

/// Displacement `exp(alpha a^dag - alpha^* a)` on `d` levels.
pub fn displacement_operator(alpha: C64, d: usize) -> Result<DMatrix<C64>> {
    let a = annihilation_matrix(d + HEADROOM)?;
    let k = a.adjoint().map(|z| z * alpha) - a.map(|z| z * alpha.conj());
    Ok(project(&fock::expm_anti_hermitian(&k)?, d))
}

/// Two-mode beam splitter on `d^2` levels, indexed `n_a * d + n_b`.
///
/// The generator conserves total photon number, so it is exponentiated one
/// photon-number block at a time; this equals the exponential of the full
/// truncated generator.
pub fn beam_splitter_operator(theta: f64, phi: f64, d: usize) -> Result<DMatrix<C64>> {
    if d < 2 {
        return Err(Error::InvalidCutoff(d));
    }
    let dp = d + HEADROOM;
    let e = C64::from_polar(1.0, phi);
    let mut out = DMatrix::<C64>::zeros(d * d, d * d);
    for total in 0..=2 * (dp - 1) {
        let states: Vec<(usize, usize)> =
            (0..dp).filter_map(|n1| total.checked_sub(n1).filter(|&n2| n2 < dp).map(|n2| (n1, n2))).collect();
        let len = states.len();
        let pos = |n1: usize| states.iter().position(|s| s.0 == n1);
        let mut k = DMatrix::<C64>::zeros(len, len);
        for (col, &(n1, n2)) in states.iter().enumerate() {
            // a b^dag |n1, n2> = sqrt(n1 (n2 + 1)) |n1 - 1, n2 + 1>
            if n1 > 0 {
                if let Some(row) = pos(n1 - 1) {
                    k[(row, col)] += e * theta * ((n1 * (n2 + 1)) as f64).sqrt();
                }
            }
            // a^dag b |n1, n2> = sqrt((n1 + 1) n2) |n1 + 1, n2 - 1>
            if n2 > 0 {
                if let Some(row) = pos(n1 + 1) {
                    k[(row, col)] -= e.conj() * theta * (((n1 + 1) * n2) as f64).sqrt();
                }
            }
        }
        let u = fock::expm_anti_hermitian(&k)?;
        for (col, &(c1, c2)) in states.iter().enumerate() {
            if c1 >= d || c2 >= d {
                continue;
            }
            for (row, &(r1, r2)) in states.iter().enumerate() {
                if r1 < d && r2 < d {
                    out[(r1 * d + r2, c1 * d + c2)] = u[(row, col)];
                }
            }
        }
    }
    Ok(out)
}

fn apply_interferometer(psi: &mut PureState, list: &[BeamSplitter]) -> Result<()> {
    let d = psi.spec.cutoff();
    for bs in list {
        if bs.theta == 0.0 {
            continue;
        }
        let op = beam_splitter_operator(bs.theta, bs.phi, d)?;
        apply_two_mode(&mut psi.amplitudes, &op, bs.modes.0, bs.modes.1, psi.spec)?;
    }
    Ok(())
}

/// Applies `circuit` to an arbitrary pure state without the truncation check.
pub fn apply_circuit_to_state(psi: &PureState, circuit: &GaussianCircuit) -> Result<PureState> {
    circuit.validate()?;
    if circuit.num_modes != psi.spec.num_modes() {
        return Err(Error::DimensionMismatch { expected: psi.spec.num_modes(), actual: circuit.num_modes });
    }
    let d = psi.spec.cutoff();
    let mut out = psi.clone();
    apply_interferometer(&mut out, &circuit.pre)?;
    for mode in 0..circuit.num_modes {
        let alpha = circuit.displacement[mode];
        if alpha.norm() > 0.0 {
            apply_single_mode(&mut out.amplitudes, &displacement_operator(alpha, d)?, mode, out.spec)?;
        }
        let xi = circuit.squeezing[mode];
        if xi.norm() > 0.0 {
            apply_single_mode(&mut out.amplitudes, &squeeze_operator(xi, d)?, mode, out.spec)?;
        }
    }
    apply_interferometer(&mut out, &circuit.post)?;
    PureState::from_amplitudes(out.spec, out.amplitudes)
}

/// `G |C>` for a Bloch-Messiah circuit `G`; fails when any mode's top Fock
/// level ends up holding `TAIL_TOLERANCE` or more population.
pub fn apply_gaussian_circuit(core: &CoreState, circuit: &GaussianCircuit, spec: FockSpec) -> Result<PureState> {
    if circuit.num_modes != spec.num_modes() {
        return Err(Error::DimensionMismatch { expected: spec.num_modes(), actual: circuit.num_modes });
    }
    let psi = apply_circuit_to_state(&core.to_pure(spec)?, circuit)?;
    psi.check_truncation(TAIL_TOLERANCE)?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{embed_single_mode_op, number_matrix};

    #[test]
    fn identity_circuit_leaves_core_unchanged() {
        let spec = FockSpec::new(2, 6).unwrap();
        let core = CoreState::new(
            2,
            vec![(vec![1, 0], C64::new(0.6, 0.0)), (vec![0, 2], C64::new(0.0, 0.8))],
        )
        .unwrap();
        let out = apply_gaussian_circuit(&core, &GaussianCircuit::identity(2), spec).unwrap();
        assert!((out.amplitudes - core.to_pure(spec).unwrap().amplitudes).norm() < 1e-14);
    }

    #[test]
    fn squeezed_vacuum_has_even_parity() {
        let spec = FockSpec::new(1, 12).unwrap();
        let mut c = GaussianCircuit::identity(1);
        c.squeezing[0] = C64::new(0.1, 0.0);
        let psi = apply_gaussian_circuit(&CoreState::vacuum(1), &c, spec).unwrap();
        for n in (1..12).step_by(2) {
            assert!(psi.amplitudes[n].norm() < 1e-14);
        }
        assert!((psi.amplitudes.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_is_poissonian() {
        let spec = FockSpec::new(1, 20).unwrap();
        let mut c = GaussianCircuit::identity(1);
        c.displacement[0] = C64::new(1.0, 0.0);
        let psi = apply_gaussian_circuit(&CoreState::vacuum(1), &c, spec).unwrap();
        let mut poisson = (-1.0f64).exp();
        for n in 0..20 {
            if n > 0 {
                poisson /= n as f64;
            }
            assert!((psi.amplitudes[n].norm_sqr() - poisson).abs() < 1e-6, "n = {n}");
        }
    }

    #[test]
    fn beam_splitter_conserves_photons_and_is_unitary_on_low_block() {
        let d = 5;
        let u = beam_splitter_operator(0.7, 0.4, d).unwrap();
        let n1 = embed_single_mode_op(&number_matrix(d), 0, FockSpec::new(2, d).unwrap()).unwrap();
        let n2 = embed_single_mode_op(&number_matrix(d), 1, FockSpec::new(2, d).unwrap()).unwrap();
        let ntot = n1 + n2;
        // on the total-photon <= d-1 subspace the operator commutes with N
        let comm = &u * &ntot - &ntot * &u;
        for i in 0..d * d {
            let (a, b) = (i / d, i % d);
            if a + b < d {
                assert!(comm.column(i).norm() < 1e-12);
                assert!((u.column(i).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_photon_splits_per_mode_matrix() {
        // B|1,0> = cos(theta)|1,0> + e^{i phi} sin(theta)|0,1>, consistent with
        // the Heisenberg transform in `BeamSplitter::mode_matrix`
        let (theta, phi, d) = (0.3, 0.9, 4);
        let u = beam_splitter_operator(theta, phi, d).unwrap();
        let col = u.column(d); // |1,0>
        assert!((col[d] - C64::new(theta.cos(), 0.0)).norm() < 1e-12);
        assert!((col[1] - C64::from_polar(theta.sin(), phi)).norm() < 1e-12);
    }

    #[test]
    fn truncation_violation_is_reported() {
        let spec = FockSpec::new(1, 4).unwrap();
        let mut c = GaussianCircuit::identity(1);
        c.displacement[0] = C64::new(1.5, 0.0);
        assert!(matches!(
            apply_gaussian_circuit(&CoreState::vacuum(1), &c, spec),
            Err(Error::Truncation { .. })
        ));
    }
}
