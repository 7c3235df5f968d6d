//! Phase-space route for multimode states: a lossy Gaussian state from a
//! random circuit, photon subtraction or addition on one mode, and the
//! exact minimum of the resulting Wigner function.
//!
//! Run with `cargo run --release --example gaussian_negativity`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statelab::phase_space::{circuit_to_gaussian, degaussify, loss_on_gaussian, wigner_min, DegaussKind, GaussianState};
use statelab::states::{CircuitRanges, GaussianCircuit};

fn main() -> statelab::Result<()> {
    let added = degaussify(&GaussianState::vacuum(1), DegaussKind::Added, 0)?;
    println!("photon-added vacuum: min W = {:.6} (-1/pi = {:.6})", wigner_min(&added)?.value, -1.0 / std::f64::consts::PI);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ranges = CircuitRanges { xi_min: 0.0, xi_max: 0.8, max_displacement: 0.0, real_squeezing: false };
    for modes in [2, 3, 5] {
        let circuit = GaussianCircuit::random(modes, &ranges, &mut rng);
        for eta in [1.0, 0.8, 0.6] {
            let g = loss_on_gaussian(&circuit_to_gaussian(&circuit)?, &vec![eta; modes])?;
            let nu = g.symplectic_eigenvalues();
            let sub = degaussify(&g, DegaussKind::Subtracted, 0).and_then(|s| wigner_min(&s));
            let add = wigner_min(&degaussify(&g, DegaussKind::Added, 0)?)?;
            let sub = sub.map_or("undefined".to_string(), |w| format!("{:+.5}", w.value));
            println!(
                "m={modes} eta={eta:.1}: smallest symplectic eigenvalue {:.4}, min W subtracted {sub}, added {:+.5}",
                nu.iter().copied().fold(f64::INFINITY, f64::min),
                add.value
            );
        }
    }
    Ok(())
}
