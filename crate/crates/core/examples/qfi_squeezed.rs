//! Quantum Fisher information of squeezed vacua for quadrature
//! generators, maximized over the quadrature angle, with and without loss.
//!
//! Run with `cargo run --release --example qfi_squeezed`.

use statelab::properties::{qfi_optimal_quadrature, squeezing_db};
use statelab::states::make_squeezed_vacuum;

fn main() -> statelab::Result<()> {
    println!("{:>5} {:>7} {:>6} {:>10} {:>10} {:>7}", "xi", "dB", "eta", "QFI", "2e^(2xi)", "angle");
    for xi in [0.2, 0.5, 0.8, 1.2] {
        for eta in [1.0, 0.9, 0.7] {
            let (f, phi) = qfi_optimal_quadrature(&make_squeezed_vacuum(xi, eta)?)?;
            println!("{xi:>5.2} {:>7.2} {eta:>6.2} {f:>10.4} {:>10.4} {phi:>7.4}", squeezing_db(xi), 2.0 * (2.0 * xi).exp());
        }
    }
    Ok(())
}
