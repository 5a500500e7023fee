//! Bures-distance quantification of quantum resources in mixed qubit states.
//!
//! A target state `ρ` is purified once, classically, and a parameterized
//! purification of a free state (separable, biseparable, quantum-classical,
//! incoherent or product) is trained to maximize the overlap between the two.
//! By Uhlmann's theorem the best overlap is the fidelity to the closest free
//! state reachable by the ansatz, so `1 − √F` upper-bounds half the Bures
//! resource `R(ρ) = min_σ 2(1 − √F(ρ, σ))`.
//!
//! Modules, bottom-up:
//! - [`simulator`]: dense statevector engine and density matrices.
//! - [`ansatz`]: parameterized circuit families and binding.
//! - [`states`]: benchmark states and Kraus channels.
//! - [`purify`]: fixed and variational purifications per free family.
//! - [`objective`]: overlap fidelity, SWAP test and Bures cost.
//! - [`train`]: gradients, Adam and the restart loop.
//! - [`oracle`]: classical references (fidelity, concurrence, negativity).
//! - [`reconstruct`]: closest separable state from trained parameters.

pub mod ansatz;
pub mod error;
pub mod linalg;
pub mod objective;
pub mod oracle;
pub mod purify;
pub mod random;
pub mod reconstruct;
pub mod simulator;
pub mod states;
pub mod train;

pub use error::{Error, Result};
