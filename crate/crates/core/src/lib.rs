//! Genealogies of multitype continuous-state branching processes.
//!
//! Laplace exponents with all mixed partials via Taylor jets, labelled
//! ancestral forest laws, Poissonization mixture identities, local merger
//! rates of the associated multitype Λ-coalescents, and independent oracles
//! (exact discrete enumeration, particle Monte Carlo) to check them against.

// `!(x > 0.0)` is used on purpose so that NaN fails domain checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod coalescent;
pub mod discrete;
pub mod error;
pub mod experiments;
pub mod forests;
pub mod jet;
pub mod laplace;
pub mod mechanism;
pub mod montecarlo;
pub mod particle;
pub mod multi_index;
pub mod ode;
pub mod poissonize;
pub mod quadrature;

pub use error::{Error, Result};
pub use mechanism::BranchingMechanism;
pub use multi_index::MultiIndex;
