//! Random non-Gaussian states, downstream state families and photon loss.

pub mod circuit;
pub mod core_state;
pub mod families;
pub mod fock_ops;
pub mod loss;

pub use circuit::{BeamSplitter, CircuitRanges, GaussianCircuit};
pub use core_state::{count_stellar_zeros, random_core_state, CoreState};
pub use families::{
    cat_ideal, cat_normalization, coherent_state, make_cat, make_noon, make_squeezed_vacuum, noon_ideal,
    squeezed_cutoff, squeezed_vacuum_ideal, CAT_CUTOFF,
};
pub use fock_ops::{apply_circuit_to_state, apply_gaussian_circuit, beam_splitter_operator, displacement_operator, squeeze_operator};
pub use loss::{apply_loss_channel, apply_loss_to_pure, apply_single_mode_loss, kraus_operators, LossSpec, DEFAULT_KRAUS_TRUNCATION};
