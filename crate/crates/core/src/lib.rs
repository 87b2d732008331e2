//! Online distributed learning over directed peer-to-peer networks.
//!
//! Agents take local (possibly stochastic) gradient steps on time-varying
//! logistic regression costs and aggregate them with a finite-time quantized
//! coordination protocol that exchanges only integers. Quantized Near-DGD and
//! gradient tracking baselines run on the same simulated network with a
//! matched communication budget.
//!
//! Module map:
//! - [`digraph`]: topology, diameter, Metropolis mixing weights.
//! - [`simnet`]: synchronous round-based message delivery and accounting.
//! - [`ftqc`]: the token/vote coordination protocol.
//! - [`problems`]: logistic costs, gradients, curvature and the centralized oracle.
//! - [`optimizers`]: FTQC-DGD, Near-DGD, DGT and the run harness.
//! - [`theory`]: contraction factor, coordination bound, error bounds.

pub mod digraph;
pub mod error;
pub mod ftqc;
pub mod optimizers;
pub mod problems;
pub mod simnet;
pub mod theory;

pub use digraph::{Digraph, MixMatrix};
pub use error::{Error, Result};
pub use ftqc::{FtqcConfig, FtqcNodeState, FtqcOutcome};
pub use optimizers::{Algorithm, QuantizerKind, RunConfig, RunOutput, StepRecord, Trace};
pub use problems::{Curvature, DataPoint, OracleSolution, Problem, ProblemConfig};
pub use simnet::{CommStats, Message, Network, Payload};
pub use theory::BoundParams;
