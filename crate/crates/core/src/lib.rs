//! Open-system simulator for qubit chains held between two thermal baths.
//!
//! A chain of `n` qubits with uniform splitting `epsilon` and XX exchange `K`
//! has a bosonic reservoir attached to each end. Tracing out the reservoirs in
//! the Born-Markov and secular approximations gives a Lindblad generator whose
//! jump operators are the eigen-components of the end-site lowering operators.
//! This crate builds that generator, integrates it, extracts its unique
//! stationary state and measures the entanglement between the end qubits.
//!
//! ```
//! use qchain::{analysis, dynamics::Liouvillian, model::ChainSpec};
//!
//! // two qubits, baths at beta = 5 and beta = 3
//! let spec = ChainSpec::two_bath(2, 1.5, 1.0, (0.02, 5.0), (0.02, 3.0))?;
//! let numeric = qchain::dynamics::steady_state(&Liouvillian::from_spec(&spec)?)?;
//! let closed = analysis::analytic_steady_state_2q(&spec)?;
//! assert!(qchain::linalg::trace_distance(&numeric.state, &closed)? < 1e-10);
//! # Ok::<(), qchain::Error>(())
//! ```

pub mod analysis;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
