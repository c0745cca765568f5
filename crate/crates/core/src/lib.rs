//! Window-based distribution systems.
//!
//! A stream observed through time windows yields, per window, a distribution
//! over a fixed partition `A₁,…,A_m` of the data space. This crate models the
//! finite version of that setting:
//!
//! * [`window`] atomizes interval windows into elementary time cells and
//!   checks the window-system axioms;
//! * [`wds`] holds the forward model from a distribution process `(P, D)` to
//!   window observations `R`, drift and compatibility checks, and the exact
//!   noiseless recovery of `P`;
//! * [`reconstruction`] recovers `(P, D)` from `(W, R)` by alternating
//!   non-negative least squares, with a Nelder–Mead baseline in
//!   [`baselines`];
//! * [`water`] applies the same machinery to sparse cumulative water-meter
//!   readings;
//! * [`benchmark`] runs the seeded rank-sweep reconstruction study.

pub mod baselines;
pub mod benchmark;
pub mod error;
pub mod io;
pub mod nnls;
pub mod reconstruction;
pub mod seeding;
pub mod report;
pub mod water;
pub mod wds;
pub mod window;

pub use error::{Error, Result};
