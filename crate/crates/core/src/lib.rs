pub mod analysis;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod fock;
pub mod homodyne;
pub mod neural;
pub mod phase_space;
pub mod properties;
pub mod seeds;
pub mod states;

pub use error::{Error, Result};
