//! Simulation and refocusing design for a coupler-mediated three-qubit phase gate.

pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod hilbert;
pub mod metrics;
pub mod pipeline;
pub mod pulses;
pub mod refocus;
pub mod shifts;

pub use error::{Error, Result};
pub use evolution::*;
pub use hamiltonian::*;
pub use hilbert::*;
pub use metrics::*;
pub use pipeline::*;
pub use pulses::*;
pub use refocus::*;
pub use shifts::*;
