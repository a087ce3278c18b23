//! LiDAR-aided mmWave beam prediction and tracking.
//!
//! A base station with an `N`-element phased array serves a vehicle driving
//! past on a road. Instead of exhaustively sweeping all `M` codebook beams
//! every time step, a recurrent model predicts the current and future optimal
//! beam indices from a short history of LiDAR range scans (or, for the
//! baseline, from the previously used beam indices).
//!
//! The crate is organized along the pipeline:
//!
//! - [`beam`] — array responses, steering codebook, receive power, and the
//!   exhaustive optimal-beam oracle.
//! - [`scene`] — a synthetic 2-D vehicle-to-infrastructure scenario that
//!   produces co-registered LiDAR scans, beam-power vectors, and labels.
//! - [`nn`] — a minimal deterministic neural-network kernel (dense, embedding,
//!   GRU, softmax cross-entropy, Adam) with exact reverse-mode gradients and a
//!   finite-difference checker.
//! - [`tracker`] — the sequence models: zero-padded `W+V` unrolling, per-step
//!   classifiers on the last `V+1` steps, training loop, top-k inference.
//! - [`data`] — dataset persistence, leakage-free sequence splits, windowing,
//!   input normalization.
//! - [`eval`] — top-k accuracy tables, the operation-window experiment with
//!   recursive beam feedback, and beam-training-overhead accounting.
//!
//! All randomness flows from explicit seeds through named child streams
//! ([`rng`]); every pipeline stage is reproducible byte-for-byte.

pub mod beam;
pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod scene;
pub mod tracker;

pub use error::{Error, Result};
