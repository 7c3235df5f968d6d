//! Builds finite-rank states in the truncated Fock space: a random core
//! state pushed through a Gaussian circuit and a loss channel, plus the
//! cat, N00N and squeezed families with their fidelity to the ideal state.
//!
//! Run with `cargo run --release --example fock_states`.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statelab::fock::{expectation, number_matrix, FockSpec};
use statelab::properties::{purity, state_fidelity};
use statelab::states::{
    apply_gaussian_circuit, apply_loss_to_pure, cat_ideal, count_stellar_zeros, make_cat, make_noon, make_squeezed_vacuum,
    noon_ideal, random_core_state, squeezed_vacuum_ideal, CircuitRanges, GaussianCircuit, LossSpec, CAT_CUTOFF,
};

fn main() -> statelab::Result<()> {
    // rank-3 single-mode state: the stellar function keeps three zeros
    // after any Gaussian unitary
    let spec = FockSpec::new(1, 40)?;
    let rank = 3;
    let core = random_core_state(spec, rank, 7)?;
    let ranges = CircuitRanges { xi_min: 0.1, xi_max: 0.2, max_displacement: 0.5, real_squeezing: false };
    let circuit = GaussianCircuit::random(1, &ranges, &mut ChaCha8Rng::seed_from_u64(8));
    let psi = apply_gaussian_circuit(&core, &circuit, spec)?;
    let amps: Vec<C64> = psi.amplitudes.iter().copied().collect();
    println!("core rank {rank}, stellar zeros within |z| < 6: {}", count_stellar_zeros(&amps, 6.0, 4096));
    println!("top Fock level population {:.2e}", psi.top_level_population(0));

    let rho = apply_loss_to_pure(&psi, &LossSpec::new(vec![0.8])?)?;
    let n = expectation(&rho.elements, &number_matrix(rho.dim())).re;
    println!("after 20% loss: purity {:.4}, mean photons {n:.4}", purity(&rho));

    let alpha = C64::new(1.5, 0.0);
    for eta in [1.0, 0.9, 0.7] {
        let cat = make_cat(alpha, 0.0, eta, CAT_CUTOFF)?;
        let noon = make_noon(3, 0.0, [eta, eta], 8)?;
        let sq = make_squeezed_vacuum(0.6, eta)?;
        println!(
            "eta {eta:.1}: cat fidelity {:.4}, N00N(3) fidelity {:.4} purity {:.4}, squeezed fidelity {:.4}",
            state_fidelity(&cat, &cat_ideal(alpha, 0.0, CAT_CUTOFF)?)?,
            state_fidelity(&noon, &noon_ideal(3, 0.0, 8)?)?,
            purity(&noon),
            state_fidelity(&sq, &squeezed_vacuum_ideal(C64::new(0.6, 0.0), sq.spec.cutoff())?)?,
        );
    }
    Ok(())
}
