//! Spectral and scattering toolkit for Schrodinger operators on perturbed
//! topological crystals.
//!
//! * [`crystal`]: quotient graphs, builtin lattices, perturbations.
//! * [`floquet`]: fiber matrices `h0(xi)` and their derivatives.
//! * [`bands`]: band sampling, projections, thresholds, Mourre constants.
//! * [`realspace`]: `H0`, `H` and `J H J*` on finite windows.
//! * [`symbols`]: toroidal symbols of the perturbation and decay checks.
//! * [`scatter`]: time evolution and wave-operator probes.
//! * [`cli`]: the command-line front end.

pub mod bands;
pub mod cli;
pub mod crystal;
pub mod error;
pub mod floquet;
pub mod linalg;
pub mod realspace;
pub mod scatter;
pub mod symbols;

pub use error::{Error, Result};
