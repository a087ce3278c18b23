//! Trainable look-up table for token (beam-index) inputs.
//!
//! Row 0 is a reserved padding row: it is zero at construction and excluded
//! from gradient accumulation, so it stays exactly zero for the lifetime of
//! the table.

use rand::Rng;

use super::tensor::Tensor2;
use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    /// rows x dim table; row 0 is the frozen pad row.
    pub table: Tensor2,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self { table: Tensor2::zeros(rows, dim) }
    }

    /// Seeded uniform init over rows `1..rows`; row 0 stays zero.
    pub fn init<R: Rng>(rows: usize, dim: usize, rng: &mut R) -> Self {
        let mut table = Tensor2::init_uniform(rows, dim, dim, rng);
        table.row_mut(0).fill(0.0);
        Self { table }
    }

    pub fn rows(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }
}

impl Parameters for EmbeddingTable {
    fn groups(&self) -> Vec<(String, &[f64])> {
        vec![("table".into(), self.table.data())]
    }

    fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![("table".into(), self.table.data_mut())]
    }
}

/// Row `idx` of the table (row 0 is the zero pad row).
pub fn embed_lookup(t: &EmbeddingTable, idx: usize) -> Result<&[f64]> {
    if idx >= t.rows() {
        return Err(Error::OutOfRange(format!(
            "embedding index {idx} outside table with {} rows",
            t.rows()
        )));
    }
    Ok(t.table.row(idx))
}

/// Accumulate `dy` into gradient row `idx`. Lookups of the pad row carry no
/// gradient.
pub fn embed_backward(idx: usize, dy: &[f64], grad: &mut EmbeddingTable) -> Result<()> {
    if idx >= grad.rows() {
        return Err(Error::OutOfRange(format!(
            "embedding index {idx} outside table with {} rows",
            grad.rows()
        )));
    }
    if dy.len() != grad.dim() {
        return Err(Error::DimMismatch(format!(
            "embedding gradient has {} entries, table dim is {}",
            dy.len(),
            grad.dim()
        )));
    }
    if idx == 0 {
        return Ok(());
    }
    for (g, d) in grad.table.row_mut(idx).iter_mut().zip(dy) {
        *g += d;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_row_is_zero_after_init() {
        let t = EmbeddingTable::init(5, 4, &mut crate::rng::child_rng(1, &[]));
        assert!(embed_lookup(&t, 0).unwrap().iter().all(|&v| v == 0.0));
        assert!(embed_lookup(&t, 1).unwrap().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn lookup_returns_row_verbatim() {
        let mut t = EmbeddingTable::zeros(3, 2);
        t.table.set(2, 0, 1.5);
        t.table.set(2, 1, -0.5);
        assert_eq!(embed_lookup(&t, 2).unwrap(), &[1.5, -0.5]);
    }

    #[test]
    fn lookup_rejects_out_of_range() {
        let t = EmbeddingTable::zeros(3, 2);
        assert!(matches!(embed_lookup(&t, 3), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn repeated_lookup_gradients_sum() {
        // Two lookups of row 1 in one sample: the gradient row receives the
        // sum of both upstream vectors, matching the finite-difference view
        // of the summed loss.
        let mut grad = EmbeddingTable::zeros(3, 2);
        embed_backward(1, &[1.0, 2.0], &mut grad).unwrap();
        embed_backward(1, &[0.5, -1.0], &mut grad).unwrap();
        assert_eq!(grad.table.row(1), &[1.5, 1.0]);
    }

    #[test]
    fn pad_row_receives_no_gradient() {
        let mut grad = EmbeddingTable::zeros(3, 2);
        embed_backward(0, &[1.0, 1.0], &mut grad).unwrap();
        assert!(grad.table.data().iter().all(|&v| v == 0.0));
    }
}
