//! Resonances generated by a non-degenerate maximum of the potential in
//! semiclassical Schrödinger operators `-h²Δ + V`.
//!
//! The crate is organised by role:
//!
//! - [`model`]: potentials, barrier data and the Hamiltonian vector field.
//! - [`lattice`]: the pseudo-resonance lattice and the sequence of
//!   combinations of Lyapunov exponents.
//! - [`operator`]: grids, complex scaling, resonance search, resolvent norms,
//!   Riesz projectors and functional calculus.
//! - [`geometry`]: eikonal phases, Hamiltonian trajectories, expansion fits
//!   and the scattering geometry of connecting curves.
//! - [`curves`]: formal expandible curves on the stable manifold and their
//!   Picard refinement.
//! - [`projection`]: rank-one structure of the spectral projector.
//! - [`dynamics`]: propagation versus truncated resonance expansions.
//! - [`scattering`]: one-dimensional scattering amplitudes and their residues.
//! - [`cli`]: config-driven runs with checksummed artifacts.

pub mod cli;
pub mod curves;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod lattice;
pub mod model;
pub mod numerics;
pub mod operator;
pub mod projection;
pub mod scattering;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
