//! Guess-seeded ("sombrero") and conventional adiabatic quantum computation
//! on random 3-SAT: instance generation, Hamiltonian assembly, spectral gap
//! scans, Schrödinger propagation and the sweep statistics built on them.

pub mod dimacs;
pub mod error;
pub mod hamiltonian;
pub mod sat;
pub mod search;
pub mod seed;
pub mod spectral;
mod tridiagonal;
pub mod dynamics;
pub mod experiments;

pub use error::{Error, Result};
pub use hamiltonian::{HatFunction, Mode, ScheduleSpec};
pub use sat::{Assignment, Clause, CnfInstance, Literal};
pub use seed::SeedStreams;
