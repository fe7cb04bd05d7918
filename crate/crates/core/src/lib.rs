//! Numerical library for a two-species competition-diffusion system in which
//! one species invades through a free boundary governed by a Stefan condition.
//!
//! The crate computes three related objects:
//!
//! - semi-wave profiles: monotone steady profiles `(phi, psi)` in a frame
//!   moving at speed `s`, where `psi` is cut off at the frame origin
//!   ([`semiwave`]);
//! - the minimal full-line traveling-wave speed `s0` and the selected
//!   free-boundary spreading speed `s_mu`, the unique root of
//!   `mu * psi'(0) = s` ([`speed`]);
//! - direct simulations of the radially symmetric free-boundary problem,
//!   whose front position `h(t)` grows asymptotically like `s_mu * t` in the
//!   spreading regime ([`fbsolver`]).
//!
//! [`harness`] orchestrates end-to-end experiments and regression checks, and
//! [`cli`] exposes everything as a command-line tool.

// Validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`,
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod fbsolver;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod semiwave;
pub mod speed;
