//! Binned homodyne histograms against closed-form Gaussian bin masses.

use statelab::fock::{FockSpec, PureState};
use statelab::homodyne::{bin_histogram, fock_marginal, standard_grid, Histogram, HomodyneSetting, NUM_BINS, X_HI, X_LO};
use statelab::states::make_squeezed_vacuum;
use statrs::function::erf::erf;

/// Mass of N(0, var) in each of the standard bins, renormalized to the window.
fn erf_bins(var: f64) -> Vec<f64> {
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / (2.0 * var).sqrt()));
    let w = (X_HI - X_LO) / NUM_BINS as f64;
    let raw: Vec<f64> = (0..NUM_BINS).map(|k| cdf(X_LO + w * (k + 1) as f64) - cdf(X_LO + w * k as f64)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|b| b / total).collect()
}

fn assert_close(h: &Histogram, expected: &[f64], tol: f64) {
    let worst = h.bins.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < tol, "largest bin error {worst:e}");
}

#[test]
fn vacuum_bins_match_erf() {
    let rho = PureState::vacuum(FockSpec::new(1, 4).unwrap()).to_density();
    let grid = standard_grid();
    for phase in [0.0, 1.1, 2.5] {
        let (h, folded) = bin_histogram(&fock_marginal(&rho, HomodyneSetting { mode: 0, phase }, &grid).unwrap(), &grid).unwrap();
        assert_eq!(folded, 0.0);
        assert_close(&h, &erf_bins(0.5), 2e-4);
    }
}

#[test]
fn squeezed_bins_match_erf() {
    let grid = standard_grid();
    for xi in [0.1, 0.5, 1.0] {
        let rho = make_squeezed_vacuum(xi, 1.0).unwrap();
        let setting = HomodyneSetting { mode: 0, phase: 0.0 };
        let (h, _) = bin_histogram(&fock_marginal(&rho, setting, &grid).unwrap(), &grid).unwrap();
        assert_close(&h, &erf_bins((-2.0 * xi).exp() / 2.0), 2e-3);
        let anti = HomodyneSetting { mode: 0, phase: std::f64::consts::FRAC_PI_2 };
        let (h, _) = bin_histogram(&fock_marginal(&rho, anti, &grid).unwrap(), &grid).unwrap();
        assert_close(&h, &erf_bins((2.0 * xi).exp() / 2.0), 2e-4);
    }
}
