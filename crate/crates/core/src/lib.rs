//! Numerical toolkit for explicitly solvable mean field games.
//!
//! The crate is organised by model family:
//!
//! * [`numerics`]: RK4, damped fixed points, seeded Euler–Maruyama paths and a
//!   bounded Nelder–Mead search shared by every model.
//! * [`lq_systemic`]: the linear-quadratic inter-bank lending game.
//! * [`growth`]: Pareto growth calculus and the Aiyagari diffusion game.
//! * [`macro_finance`]: one- and two-population money/capital economies.
//! * [`contract_mfg`]: finite-state principal-agent games and the epidemic
//!   containment model.
//! * [`mining`]: the stationary master equation for hash-rate value.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with the range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contract_mfg;
pub mod error;
pub mod growth;
pub mod lq_systemic;
pub mod macro_finance;
pub mod mining;
pub mod numerics;

pub use error::{Error, Infeasibility, Result};
