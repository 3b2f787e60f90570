//! Simulation and Hamiltonian reconstruction for synthetic lattices of
//! parametrically coupled cavity modes, with analysis tools for the bosonic
//! Creutz ladder.
//!
//! * [`lattice`]: modes, links and the coupling matrix of the steady-state
//!   equations of motion.
//! * [`scattering`]: scattering matrices, sweeps and eigenmode analysis.
//! * [`creutz`]: Bloch bands, discrete symmetries, Wannier centers, Zak
//!   phase and single-plaquette dynamics.
//! * [`traces`]: measured-trace data model, preprocessing, synthesis and I/O.
//! * [`fit`]: the global least-squares reconstruction of lattice parameters.

pub mod creutz;
pub mod error;
pub mod fit;
pub mod lattice;
pub mod numfmt;
pub mod presets;
pub mod scattering;
pub mod traces;

pub use error::{Error, Result};
