//! Keyframe sampling for long-video question answering.
//!
//! The crate works on precomputed per-frame inputs (question–frame
//! similarity scores and frame features at 1 fps) plus multi-scene
//! ground-truth annotations. It provides:
//!
//! - samplers: uniform, top-k, inverse transform sampling (ITS), clustering
//!   based sampling (ICF) and the adaptive similarity–clustering blend (ASCS)
//!   weighted by the question–video relevance score (QVRS);
//! - sampling-quality metrics (KFR, SHR, BSR, BDS) and their unified
//!   aggregate UKSS;
//! - a controlled frame-set generator with Dirichlet-distributed scene
//!   allocations;
//! - a synthetic corpus generator and a calibrated QA oracle for replaying
//!   metric-versus-accuracy correlation studies;
//! - file formats and the `kfs` command-line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clustering;
pub mod controlled;
pub mod error;
pub mod io;
pub mod metrics;
pub mod random;
pub mod samplers;
pub mod sweep;
pub mod synth;
pub mod timeline;

pub use error::{KfsError, Result};
