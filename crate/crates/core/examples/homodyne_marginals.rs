//! Homodyne marginals from Fock amplitudes, binned into the 50-bin
//! histograms the models consume, for a squeezed vacuum and a cat state.
//!
//! Run with `cargo run --release --example homodyne_marginals`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use statelab::homodyne::{bin_histogram, fock_marginal, standard_grid, Histogram, HomodyneSetting};
use statelab::states::{make_cat, make_squeezed_vacuum, CAT_CUTOFF};

fn show(name: &str, hist: &Histogram) {
    println!("{name}");
    let centers = Histogram::bin_centers();
    let peak = hist.bins.iter().copied().fold(0.0, f64::max);
    for (x, p) in centers.iter().zip(&hist.bins).filter(|(x, _)| x.abs() < 4.0) {
        println!("{x:>6.2} {:<50} {p:.4}", "#".repeat((50.0 * p / peak).round() as usize));
    }
}

fn main() -> statelab::Result<()> {
    let grid = standard_grid();
    let squeezed = make_squeezed_vacuum(0.5, 0.95)?;
    let cat = make_cat(C64::new(2.0, 0.0), 0.0, 1.0, CAT_CUTOFF)?;
    for (name, rho) in [("squeezed vacuum, xi = 0.5", &squeezed), ("even cat, alpha = 2", &cat)] {
        for theta in [0.0, PI / 2.0] {
            let density = fock_marginal(rho, HomodyneSetting { mode: 0, phase: theta }, &grid)?;
            let (hist, folded) = bin_histogram(&density, &grid)?;
            show(&format!("{name}, theta = {theta:.3} (folded mass {folded:.1e})"), &hist);
        }
    }
    Ok(())
}
