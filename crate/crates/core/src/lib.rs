//! Mean-field simulation of Casimir photon generation in a high-Q microwave
//! cavity and their superradiant amplification by a population-inverted
//! atomic beam.
//!
//! The crate is organised bottom-up:
//!
//! * [`physics`] holds the physical constants, species and cavity data and
//!   every closed-form estimate (parametric photon growth, Purcell-reduced
//!   lifetimes, superradiant timescales, delay statistics, detectability).
//! * [`ensemble`] dices the atomic beam into phase-space cells and evaluates
//!   the cavity mode profile and the Rabi coupling along each trajectory.
//! * [`dynamics`] integrates the full atom + field envelope equations.
//! * [`reduced`] integrates the atom-only equations obtained by eliminating
//!   the field with a Green's function, valid in the lossy-cavity regime.
//! * [`harness`] pairs seeded/unseeded runs, computes discrimination
//!   metrics, runs parameter sweeps and writes the output files.

// `!(x > 0.0)` style guards are used so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod physics;
pub mod reduced;
pub mod rk4;

pub use error::{Error, Result};
