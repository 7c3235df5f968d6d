//! Two-mode negativity labels checked against an independent oracle: the
//! class is the Wigner minimum below the median threshold, and the
//! analytic minimum classifies fresh states the same way a brute-force
//! four-dimensional grid search does.

mod common;

use common::phase_space_wigner_min;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statelab::datasets::{generate, Family, GenConfig};
use statelab::phase_space::{circuit_to_gaussian, degaussify, loss_on_gaussian, wigner_min, DegaussKind};
use statelab::properties::{xi_from_db, LabelKind};
use statelab::states::{CircuitRanges, GaussianCircuit};

fn two_mode_config() -> GenConfig {
    GenConfig { count: 40, train_count: 30, seed: 21, modes: vec![2], ..GenConfig::for_family(Family::Negativity) }
}

fn sorted_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

#[test]
fn classes_follow_the_median_threshold() {
    let ds = generate(&two_mode_config()).unwrap();
    let mins: Vec<f64> = ds.entries.iter().map(|e| e.label(LabelKind::WignerMin).unwrap()).collect();
    let tau = sorted_median(mins.clone());
    assert_eq!(ds.manifest.negativity_threshold, Some(tau));
    for (e, &wm) in ds.entries.iter().zip(&mins) {
        let class = e.label(LabelKind::NegativityClass).unwrap();
        assert_eq!(class, f64::from(u8::from(wm < tau)), "entry {}", e.id);
        assert!(wm <= 0.0);
        if e.meta.param("degauss").unwrap() == 0.0 {
            assert_eq!(wm, 0.0, "Gaussian entry {} has a negative minimum", e.id);
        }
        assert_eq!(e.records.len(), 2 * 3);
    }
    let positives = mins.iter().filter(|&&w| w < tau).count();
    assert!((15..=25).contains(&positives), "{positives} of 40 positive");
}

#[test]
fn analytic_and_grid_minima_classify_alike() {
    let tau = generate(&two_mode_config()).unwrap().manifest.negativity_threshold.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ranges = CircuitRanges { xi_min: 0.0, xi_max: xi_from_db(8.0), max_displacement: 0.0, real_squeezing: false };
    let mut compared = 0;
    while compared < 8 {
        let circuit = GaussianCircuit::random(2, &ranges, &mut rng);
        let eta: Vec<f64> = (0..2).map(|_| rng.random_range(0.6..=1.0)).collect();
        let base = loss_on_gaussian(&circuit_to_gaussian(&circuit).unwrap(), &eta).unwrap();
        let kind = if rng.random::<bool>() { DegaussKind::Subtracted } else { DegaussKind::Added };
        let Ok(state) = degaussify(&base, kind, rng.random_range(0..2)) else { continue };
        let analytic = wigner_min(&state).unwrap().value;
        let grid = phase_space_wigner_min(&state, 4.0, 17).min(0.0);
        assert!((analytic - grid).abs() < 1e-3, "{analytic} vs {grid}");
        if (grid - tau).abs() > 1e-3 {
            assert_eq!(analytic < tau, grid < tau);
        }
        compared += 1;
    }
}
