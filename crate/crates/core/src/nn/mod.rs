//! Minimal deterministic neural-network kernel.
//!
//! Everything runs in 64-bit floats with hand-derived reverse-mode gradients;
//! [`gradcheck`] verifies each backward pass against central finite
//! differences. There is no autodiff graph: each layer exposes an explicit
//! `forward` and an accumulating `backward`.

pub mod adam;
pub mod dense;
pub mod embed;
pub mod gradcheck;
pub mod gru;
pub mod loss;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use dense::{dense_backward, dense_forward, DenseParams};
pub use embed::{embed_backward, embed_lookup, EmbeddingTable};
pub use gradcheck::{grad_check, GradCheckReport};
pub use gru::{gru_cell_backward, gru_cell_forward, GruCache, GruParams};
pub use loss::{cross_entropy_from_probs, softmax, softmax_cross_entropy};
pub use tensor::Tensor2;

use crate::error::{Error, Result};

/// Fixed-order traversal of a model's trainable parameters.
///
/// The group order defines the flat parameter layout used by the optimizer,
/// the gradient checker, and checkpoint serialization, so implementations
/// must keep it stable.
pub trait Parameters {
    /// Named parameter groups in their canonical order.
    fn groups(&self) -> Vec<(String, &[f64])>;

    /// Mutable view of the same groups, same order.
    fn groups_mut(&mut self) -> Vec<(String, &mut [f64])>;

    /// Total number of scalar parameters.
    fn param_count(&self) -> usize {
        self.groups().iter().map(|(_, s)| s.len()).sum()
    }

    /// Read the scalar at flat position `i`.
    fn get_flat(&self, mut i: usize) -> f64 {
        for (_, s) in self.groups() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Write the scalar at flat position `i`.
    fn set_flat(&mut self, mut i: usize, value: f64) {
        for (_, s) in self.groups_mut() {
            if i < s.len() {
                s[i] = value;
                return;
            }
            i -= s.len();
        }
        panic!("flat parameter index out of range");
    }

    /// `self += scale * other`, group by group.
    fn add_scaled(&mut self, other: &Self, scale: f64) -> Result<()>
    where
        Self: Sized,
    {
        let theirs = other.groups();
        let mut mine = self.groups_mut();
        if mine.len() != theirs.len() {
            return Err(Error::DimMismatch("parameter group count differs".into()));
        }
        for ((_, dst), (name, src)) in mine.iter_mut().zip(&theirs) {
            if dst.len() != src.len() {
                return Err(Error::DimMismatch(format!(
                    "parameter group {name} has {} vs {} entries",
                    dst.len(),
                    src.len()
                )));
            }
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += scale * s;
            }
        }
        Ok(())
    }

    /// `self *= scale`, every scalar.
    fn scale(&mut self, scale: f64) {
        for (_, s) in self.groups_mut() {
            for v in s {
                *v *= scale;
            }
        }
    }
}
