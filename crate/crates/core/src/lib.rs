//! Core algorithms for information-theoretic measurement of discrete dynamical
//! systems.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the command line or text formats lives in the `infodyn`
//! companion crate.
//!
//! Modules:
//! - [`kernel`]: abstract, stochastic and causal systems as checkable objects
//!   (time base, trajectories, events, causal decompositions, information bonds).
//! - [`hodgepodge`]: the noisy hodgepodge machine used as a Belousov-Zhabotinsky
//!   stand-in.
//! - [`pdg`]: Rényi entropy, point divergence gain and the `I_α` / `P_α` spectra.
//! - [`clustering`]: k-means segmentation of spectrum series and comparisons.
//! - [`zstack`]: divergence transforms of z-stacks and the least-information-lost
//!   8-bit rescale.
//! - [`lcms`]: additive decomposition of LC-MS intensity grids.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod clustering;
pub mod frame;
pub mod hodgepodge;
pub mod kernel;
pub mod lcms;
pub mod pdg;
pub mod stats;
pub mod zstack;

pub use frame::{Frame, FrameError, FrameSeries};
