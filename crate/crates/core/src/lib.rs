//! Numerical laboratory for the interior quadrupole packet mechanism of
//! axisymmetric Euler flow with swirl.
//!
//! The crate is organised bottom-up:
//!
//! * [`fields`]: meridional grids, scalar fields, packet frames, interpolation
//!   and derivative stencils;
//! * [`recovery`]: the lifted 5D elliptic recovery of the meridional velocity;
//! * [`initial_data`]: the explicit compactly supported quadrupole datum;
//! * [`diagnostics`]: scores, defects, projections and the master error;
//! * [`kernel_lab`]: static verifications of kernel constants and parity;
//! * [`evolution`]: semi-Lagrangian transport, frame tracking, mode hierarchy;
//! * [`comparison`]: the Riccati comparison system;
//! * [`config`], [`series`], [`checkpoint`]: run configuration and file formats.

pub mod bump;
pub mod checkpoint;
pub mod comparison;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod initial_data;
pub mod kernel_lab;
pub mod quadrature;
pub mod recovery;
pub mod series;

pub use error::{Error, Result};
