//! Maximum-entropy completion of partially specified stationary Markov chains.
//!
//! A chain on `I ⊔ E` is known only through its visible rows (`P_II`, `P_IE`),
//! the exits from the hidden set `E` (`P_EI`) and the stationary weights `π_I`
//! of the visible states. The hidden block `P_EE` (the *labyrinth*) is filled
//! in by maximizing the entropy rate of the chain:
//!
//! | Situation | Completion | Entry point |
//! |-----------|------------|-------------|
//! | no communication constraints | Bernoulli, `P(d,e) = π(e)` | [`maxent::complete_bernoulli`] |
//! | 0-1 communication matrix `L` | product form `α(d)β(e)` on `L` | [`maxent::complete_constrained`] |
//! | `I = ∅`, with `L` | Parry measure of `L` | [`maxent::complete_parry`] |
//! | `I = ∅`, no `L` | uniform matrix | [`maxent::complete_uniform`] |
//! | several disjoint labyrinths | one problem per block | [`labyrinths`] |
//!
//! Feasibility of the support-constrained problem is decided exactly by a
//! phase-one simplex that returns either a witness or a Farkas certificate
//! ([`feasibility`]). The [`qsd`] module checks the quasi-stationarity
//! identities a valid completion must satisfy, and [`sim`] rebuilds the chain
//! by splicing killed hidden excursions into a visible skeleton and compares
//! it statistically with direct sampling.
//!
//! ```
//! use labyrinth::{model::PartialChainSpec, maxent};
//!
//! let spec = PartialChainSpec::from_json_str(include_str!("../fixtures/desk.json")).unwrap();
//! let chain = maxent::complete_bernoulli(&spec).unwrap();
//! let p_ee = chain.p_ee();
//! assert!((p_ee[[0, 0]] - 0.15).abs() < 1e-12);
//! assert!((p_ee[[1, 1]] - 0.25).abs() < 1e-12);
//! ```

pub mod cli;
pub mod entropy;
pub mod error;
pub mod feasibility;
pub mod labyrinths;
mod linalg;
mod lp;
pub mod maxent;
pub mod model;
pub mod qsd;
mod serde_matrix;
pub mod sim;
pub mod tol;

pub use error::{Error, Result};
pub use linalg::is_irreducible;
