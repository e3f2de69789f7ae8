//! Near-critical Galton–Watson processes with dependent immigration.
//!
//! The crate is organised bottom-up:
//!
//! * [`quadrature`] – adaptive Gauss–Kronrod integration used by the limit curves.
//! * [`regvar`] – regularly varying sequences and finite-n checks of the
//!   growth conditions on offspring and immigration moments.
//! * [`limits`] – the deterministic time changes (`mu`, `nu`, `lambda`, `phi`,
//!   `phi*`) and the normalised mean path `pi`.
//! * [`moments`] – exact finite-n mean/variance tables of the process and the
//!   deterministic scaled-sum limits they converge to.
//! * [`immigration`] – independent, m-dependent and Markov-modulated immigration
//!   with exact moments, covariances and mixing bounds.
//! * [`simulator`] – offspring laws, path simulation, scaled paths and the
//!   martingale decomposition diagnostics.
//! * [`verify`] – Monte Carlo checks of the mean-path and fluctuation limit
//!   theorems, producing [`verify::TestReport`]s.
//! * [`config`] – the experiment description shared with the command line runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod immigration;
pub mod limits;
pub mod moments;
pub mod quadrature;
pub mod regvar;
pub mod rng;
pub mod simulator;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
