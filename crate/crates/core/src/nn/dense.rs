//! Affine layer `y = W x + b`.

use rand::Rng;

use super::tensor::Tensor2;
use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// out x in weight matrix.
    pub weight: Tensor2,
    /// Length-out bias.
    pub bias: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Tensor2::zeros(output, input), bias: vec![0.0; output] }
    }

    /// Seeded uniform init with `fan_in = input`.
    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let weight = Tensor2::init_uniform(output, input, input, rng);
        let bound = 1.0 / (input as f64).sqrt();
        let bias = (0..output).map(|_| rng.random_range(-bound..=bound)).collect();
        Self { weight, bias }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }
}

impl Parameters for DenseParams {
    fn groups(&self) -> Vec<(String, &[f64])> {
        vec![
            ("weight".into(), self.weight.data()),
            ("bias".into(), self.bias.as_slice()),
        ]
    }

    fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            ("weight".into(), self.weight.data_mut()),
            ("bias".into(), self.bias.as_mut_slice()),
        ]
    }
}

pub fn dense_forward(p: &DenseParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.input_dim() {
        return Err(Error::DimMismatch(format!(
            "dense layer expects {} inputs, got {}",
            p.input_dim(),
            x.len()
        )));
    }
    let mut y = p.weight.matvec(x);
    for (yi, bi) in y.iter_mut().zip(&p.bias) {
        *yi += bi;
    }
    Ok(y)
}

/// Backward pass for `y = W x + b` given upstream `dy`.
///
/// Accumulates `dW = dy x^T` and `db = dy` into `grad` and returns
/// `dx = W^T dy`.
pub fn dense_backward(
    p: &DenseParams,
    x: &[f64],
    dy: &[f64],
    grad: &mut DenseParams,
) -> Result<Vec<f64>> {
    if x.len() != p.input_dim() || dy.len() != p.output_dim() {
        return Err(Error::DimMismatch(format!(
            "dense backward: x has {}, dy has {}, layer is {}x{}",
            x.len(),
            dy.len(),
            p.output_dim(),
            p.input_dim()
        )));
    }
    grad.weight.add_outer(dy, x);
    for (g, d) in grad.bias.iter_mut().zip(dy) {
        *g += d;
    }
    let mut dx = vec![0.0; p.input_dim()];
    p.weight.matvec_transpose_into(dy, &mut dx);
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map() {
        let p = DenseParams {
            weight: Tensor2::from_data(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            bias: vec![0.0, 0.0],
        };
        assert_eq!(dense_forward(&p, &[1.5, -2.5]).unwrap(), vec![1.5, -2.5]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = DenseParams::init(3, 2, &mut crate::rng::child_rng(1, &[]));
        let mut grad = DenseParams::zeros(3, 2);
        let dx = dense_backward(&p, &[0.5, -1.0, 2.0], &[0.0, 0.0], &mut grad).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        assert!(grad.weight.data().iter().all(|&v| v == 0.0));
        assert!(grad.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let p = DenseParams::zeros(3, 2);
        assert!(dense_forward(&p, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        use super::super::grad_check;
        let mut rng = crate::rng::child_rng(2, &[]);
        let mut p = DenseParams::init(3, 5, &mut rng);
        let x: Vec<f64> = (0..3).map(|i| 0.3 * i as f64 - 0.2).collect();

        // Scalar loss: sum of squares of the outputs.
        let loss = |p: &DenseParams| {
            dense_forward(p, &x).unwrap().iter().map(|v| v * v).sum::<f64>()
        };
        let y = dense_forward(&p, &x).unwrap();
        let dy: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let mut analytic = DenseParams::zeros(3, 5);
        dense_backward(&p, &x, &dy, &mut analytic).unwrap();

        let report = grad_check(&mut p, &analytic, 1e-5, loss).unwrap();
        assert!(report.max_rel_error < 1e-6, "rel error {}", report.max_rel_error);
    }
}
