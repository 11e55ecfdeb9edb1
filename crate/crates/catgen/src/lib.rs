//! Simulation and verification toolkit for catalytic branching genealogies.
//!
//! A catalyst population branches critically at rate `b1`; a reactant
//! population branches critically at rate `b2` times the current catalyst
//! mass. The crate records the full family forests of both populations,
//! encodes them as contour excursions and level-wise point processes, simulates
//! the diffusion limits (the catalytic Feller pair, the limit contour, the
//! random-evolution contour) and checks the closed-form laws of the model by
//! Monte Carlo.
//!
//! Rate convention: `b` is the per-individual birth rate and also the
//! per-individual death rate, so an individual's lifetime ends at total rate
//! `2b` with a fair coin between 0 and 2 offspring. Under this convention the
//! total-mass limit is `dX = sqrt(2 b1 X) dW`, a single particle at unit rate
//! is extinct by time `t` with probability `t/(1+t)`, and the limit contour
//! has generator `(f'/(b2 X))'`.
//!
//! Module map:
//! - [`rtree`]: family forests, the genealogical metric, truncation, trimming,
//!   ancestor sets, Gromov–Hausdorff bounds, I²-length, forest files.
//! - [`contour`]: the forest ↔ excursion codec and excision above a level.
//! - [`points`]: level-t point processes, distance reconstruction and
//!   downward-excursion depths of paths.
//! - [`particle`]: exact event-driven simulation of catalyst and reactant.
//! - [`diffusion`]: Euler schemes for the Feller pair, scale functions, the
//!   limit contour, random evolutions, local time and quadratic variation.
//! - [`verify`]: closed-form oracles, statistical tests and the acceptance
//!   suites.
//! - [`cli`]: the `simulate` / `verify` / `convert` front end.

// Argument checks are written `!(x > 0.0)` so that NaN is rejected as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod contour;
pub mod diffusion;
pub mod error;
pub mod particle;
pub mod points;
pub mod rng;
pub mod rtree;
pub mod verify;

pub use error::{Error, Result};
