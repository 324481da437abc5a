//! Numerical toolkit for flows of rough vector fields.
//!
//! The crate provides, on periodic grids and small coordinate boxes:
//!
//! - dyadic frequency analysis: annulus-bump block operators, partial sums,
//!   and block-weighted smoothness norms ([`spectral`]);
//! - a calculus of continuity moduli with an Osgood-condition heuristic and
//!   the flow-modulus solver for propagated separation bounds ([`modulus`]);
//! - frequency-split products of rough functions and the decay experiment
//!   for partial products of annihilating pairs ([`paraproduct`]);
//! - certified ODE flows of rough fields with separation certificates,
//!   perturbation bounds, and pushforward estimates ([`flow`]);
//! - Lie brackets, smoothing sequences, commuting canonical bases, and
//!   flow-commutator defect measurements ([`involutivity`]);
//! - flow-composition charts with inverse maps and Holder-exponent
//!   regression, including the sharp loss-of-exponent example ([`chart`]);
//! - a characteristics solver for first-order systems `L_j f = 0` with rough
//!   coefficients ([`pde`]);
//! - a small expression parser, a field/modulus catalog, and a reproducible
//!   experiment runner backing the `rfrob` binary ([`expr`], [`catalog`],
//!   [`runner`]).
//!
//! All value types are immutable after construction and safe to share across
//! threads; computations are deterministic for a fixed seed.

pub mod catalog;
pub mod chart;
pub mod config;
pub mod error;
pub mod expr;
pub mod flow;
pub mod grid;
pub mod involutivity;
pub mod modulus;
pub mod paraproduct;
pub mod pde;
mod quad;
pub mod runner;
pub mod spectral;
mod stats;

pub use error::{Error, Result};
pub use grid::{GridSpec, ScalarField, VecField};
pub use modulus::Modulus;
pub use spectral::LPChar;
