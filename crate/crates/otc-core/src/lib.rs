//! Solvers and simulators for over-the-counter markets with several
//! assets.
//!
//! The crate covers two classes of search-and-bargaining market models,
//! non-segmented and partially segmented, described by small quadratic
//! ODE systems for the cross-sectional distribution of investor types:
//!
//! - [`model`]: parameter sets, state spaces and reduced-coordinate
//!   distributions with structural constraint bookkeeping;
//! - [`dynamics`]: master-equation right-hand sides and RK4 integration;
//! - [`equilibrium`]: steady-state solvers (scalar bracketed root for the
//!   non-segmented class, curve intersection and damped fixed point for
//!   the segmented one);
//! - [`valuation`]: reservation-value linear systems, negotiated prices
//!   and intrinsic-value recovery, plus transient backward value flows;
//! - [`stability`]: Jacobians, characteristic polynomials, eigenvalue
//!   real parts and the Routh-Hurwitz quartic criterion;
//! - [`mcsim`]: finite-population continuous-time Markov-chain simulation
//!   validating the mean-field limit;
//! - [`linalg`]: the small dense LU / eigenvalue kernel behind the above.

pub mod dynamics;
pub mod equilibrium;
pub mod linalg;
pub mod mcsim;
pub mod model;
pub mod stability;
pub mod valuation;

pub use model::{
    make_params, make_params_unchecked, FullDistribution, MarketParams, ModelError, ModelKind,
    ParamSpec, StateDistribution, SteadyMethod, SteadyState,
};
