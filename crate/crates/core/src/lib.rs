//! Gibbs mean-field particle systems on block graphs.
//!
//! Each of `r` blocks holds central nodes, which interact with their own block
//! only, and peripheral nodes, which also interact with every peripheral node
//! of the other blocks. Nodes carry one of `K` states and jump along a
//! symmetric edge set with Metropolis rates for the energy
//! `U_N = beta/(2N) * sum W(x_i, x_k)` over interacting pairs.
//!
//! The crate covers
//! - the exact `N`-particle chain ([`finite_system`]),
//! - its mean-field limit, an ODE on `2r` probability vectors ([`limit_system`]),
//! - the relative-entropy Lyapunov function of that ODE ([`lyapunov`]),
//! - fixed points and their stability ([`fixed_points`]),
//! - property suites and scaling experiments ([`verify`], [`experiments`]).

#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod experiments;
pub mod fixed_points;
pub mod io;
pub mod finite_system;
pub mod limit_system;
pub mod lyapunov;
pub mod model;
pub mod verify;

pub use error::{Error, ModelError, Result, ValidationErrors};
pub use model::{
    ClassId, Configuration, EmpiricalVector, ModelSpec, Role, TangentVector, Trajectory,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/finite-system.md")]
    mod finite_system {}
    #[doc = include_str!("../../../book/src/limit-system.md")]
    mod limit_system {}
    #[doc = include_str!("../../../book/src/lyapunov.md")]
    mod lyapunov {}
    #[doc = include_str!("../../../book/src/fixed-points.md")]
    mod fixed_points {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
