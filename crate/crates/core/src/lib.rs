//! Quantum Fisher information and loss-optimal probe states for two-mode
//! optical interferometry with a definite photon number.
//!
//! * [`fock`]: probe states, the beam-splitter loss model and the
//!   conditional decomposition of the lossy output;
//! * [`qfi`]: pure-state, closed-form, bound and exact (SLD) Fisher
//!   information, with gradient and Hessian of the concave bound;
//! * [`optimizer`]: certified maximization over the probability simplex and
//!   the N00N-breakdown thresholds;
//! * [`strategies`]: reference precisions (SIL, Heisenberg, N00N, chopping,
//!   sine state);
//! * [`measurement`]: optimal POVMs, classical Fisher information and
//!   maximum-likelihood Monte Carlo;
//! * [`qubits`]: the distinguishable-photon picture and permutation
//!   symmetrization.

pub mod error;
pub mod fock;
pub mod linalg;
pub mod measurement;
pub mod optimizer;
pub mod qfi;
pub mod qubits;
pub mod strategies;

pub use error::{Error, Result};
pub use fock::{ConditionalBranch, LossModel, ProbeState};
pub use optimizer::{OptimizationResult, OptimizerOptions, ThresholdResult};
pub use qfi::{Metric, QfiReport};
