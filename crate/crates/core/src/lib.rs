//! Composite-wave laboratory for the multi-dimensional viscous conservation
//! law `u_t + sum_i f_i(u)_{x_i} = sum_ij a_ij u_{x_i x_j}` on
//! `R x T^{n-1}` with a degenerate flux `f1`.
//!
//! Modules, bottom up: [`flux`] (fluxes and the viscosity matrix),
//! [`profiles`] (rarefaction, contact wave, interface curve), [`cell`]
//! (periodic cell problems), [`ansatz`] (background state and source),
//! [`channel`] (the full PDE on a truncated channel), [`decay`] (modes,
//! norms, fits) and [`pipeline`] (configuration, stages, reports).

pub mod ansatz;
pub mod cell;
pub mod channel;
pub mod config;
pub mod decay;
pub mod error;
pub mod flux;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod par;
pub mod pipeline;
pub mod profiles;
pub mod quadrature;
pub mod roots;
pub mod verify;

pub use error::{Error, Result};
