//! Wheel-flat detection and localization from axle box acceleration.
//!
//! The crate implements a complete, reproducible pipeline:
//!
//! 1. [`flatgen`]: wheel-flat geometry and surrogate four-channel
//!    acceleration records (rotation-periodic impacts ringing a damped
//!    mode bank, with cross-channel attenuation and delay).
//! 2. [`hilbert`]: the analytic amplitude (envelope) of a signal segment,
//!    which carries the impact energy while discarding carrier phase.
//! 3. [`wpd`]: wavelet packet decomposition of the envelope into `2^j`
//!    orthogonal subspaces on a balanced binary tree (Daubechies length-4
//!    filters), conserving energy exactly.
//! 4. [`features`]: per-revolution segmentation and the RMS energy
//!    distribution over subspaces, concatenated across the four channels.
//! 5. [`augment`]: dataset expansion from 125 segments per defect
//!    position to 15,000 (60,000 in total) by convex interpolation
//!    between adjacent flat heights with Cartesian pairing.
//! 6. [`fnn`]: a feedforward network (input -> 32 -> 16 -> 4, tanh hidden
//!    layers) trained full-batch by scaled conjugate gradient on mean
//!    squared error, with bit-reproducible reductions.
//! 7. [`eval`]: detection and localization accuracy plus the decomposition
//!    level sweep that ties the stages together.
//! 8. [`config`]: the single TOML run configuration shared by the CLI
//!    commands.
//!
//! Every stage is deterministic given its configuration and seed; file
//! artifacts rewrite byte-identically.

pub mod augment;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod flatgen;
pub mod fnn;
pub mod hilbert;
pub mod wpd;

pub use error::{Error, Result};
