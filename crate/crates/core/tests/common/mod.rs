//! Helpers shared by the integration tests: random lossy Gaussian states
//! built along both the Fock and the phase-space path, and brute-force
//! Wigner minimizers used as independent oracles.
#![allow(dead_code)]

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statelab::fock::{annihilation_matrix, conjugate_single_mode, DensityMatrix, FockSpec};
use statelab::phase_space::{circuit_to_gaussian, loss_on_gaussian, DegaussKind, DegaussifiedState, GaussianState};
use statelab::properties::wigner_point;
use statelab::states::{apply_gaussian_circuit, apply_loss_to_pure, CircuitRanges, CoreState, GaussianCircuit, LossSpec};

pub struct LossyGaussian {
    pub circuit: GaussianCircuit,
    pub eta: Vec<f64>,
}

pub fn random_lossy_gaussian(m: usize, xi_max: f64, max_displacement: f64, rng: &mut ChaCha8Rng) -> LossyGaussian {
    let ranges = CircuitRanges { xi_min: 0.0, xi_max, max_displacement, real_squeezing: false };
    let circuit = GaussianCircuit::random(m, &ranges, rng);
    let eta = (0..m).map(|_| rng.random_range(0.5..=1.0)).collect();
    LossyGaussian { circuit, eta }
}

impl LossyGaussian {
    pub fn phase_space(&self) -> GaussianState {
        loss_on_gaussian(&circuit_to_gaussian(&self.circuit).unwrap(), &self.eta).unwrap()
    }

    /// Density matrix from the Fock path, with the loss channel kept exact.
    pub fn fock(&self, cutoff: usize) -> DensityMatrix {
        let spec = FockSpec::new(self.circuit.num_modes, cutoff).unwrap();
        let psi = apply_gaussian_circuit(&CoreState::vacuum(self.circuit.num_modes), &self.circuit, spec).unwrap();
        apply_loss_to_pure(&psi, &LossSpec::exact(self.eta.clone(), cutoff).unwrap()).unwrap()
    }
}

/// `a rho a^dag` or `a^dag rho a` on one mode, renormalized, in Fock space.
pub fn fock_degaussify(rho: &DensityMatrix, kind: DegaussKind, mode: usize) -> DensityMatrix {
    let a = annihilation_matrix(rho.spec.cutoff()).unwrap();
    let op = match kind {
        DegaussKind::Subtracted => a,
        DegaussKind::Added => a.adjoint(),
        DegaussKind::None => return rho.clone(),
    };
    let out = conjugate_single_mode(&rho.elements, &op, mode, rho.spec);
    let trace = out.trace().re;
    DensityMatrix::new(rho.spec, out / nalgebra::Complex::new(trace, 0.0)).unwrap()
}

/// Minimum of `f` over a box by a uniform grid, then two rounds of zooming
/// into a finer grid around the best point.
pub fn zoom_grid_min(dim: usize, half_width: f64, points: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let mut center = vec![0.0; dim];
    let mut half = half_width;
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let step = 2.0 * half / (points - 1) as f64;
        let total = points.pow(dim as u32);
        let mut best_at = center.clone();
        for flat in 0..total {
            let mut k = flat;
            let x: Vec<f64> = (0..dim)
                .map(|d| {
                    let i = k % points;
                    k /= points;
                    center[d] - half + step * i as f64
                })
                .collect();
            let v = f(&x);
            if v < best {
                best = v;
                best_at = x;
            }
        }
        center = best_at;
        half = 2.0 * step;
    }
    best
}

/// Grid minimum of the single-mode Wigner function computed from Fock amplitudes.
pub fn fock_wigner_min(rho: &DensityMatrix) -> f64 {
    zoom_grid_min(2, 5.0, 201, &|x| wigner_point(&rho.elements, x[0], x[1]))
}

/// Grid minimum of the analytic phase-space Wigner function.
pub fn phase_space_wigner_min(state: &DegaussifiedState, half_width: f64, points: usize) -> f64 {
    let center = state.base.mean.clone();
    zoom_grid_min(2 * state.num_modes(), half_width, points, &|x| {
        state.wigner(&(&center + DVector::from_column_slice(x))).unwrap()
    })
}
