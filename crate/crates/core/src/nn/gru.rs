//! Gated recurrent unit cell.
//!
//! The variant with the reset gate applied to the hidden contribution of the
//! candidate state:
//!
//! ```text
//! z      = sigmoid(W_z x + U_z h + b_z)
//! r      = sigmoid(W_r x + U_r h + b_r)
//! n      = tanh(W_n x + b_in + r .* (U_n h + b_hn))
//! h_next = (1 - z) .* n + z .* h
//! ```
//!
//! `h_next` is a per-component convex combination of the candidate `n` and
//! the previous state `h`. With all parameters zero, `z = 1/2` and `n = 0`,
//! so `h_next = h / 2` exactly; that identity pins the variant.

use rand::Rng;

use super::tensor::Tensor2;
use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor2,
    pub u_z: Tensor2,
    pub b_z: Vec<f64>,
    pub w_r: Tensor2,
    pub u_r: Tensor2,
    pub b_r: Vec<f64>,
    pub w_n: Tensor2,
    pub u_n: Tensor2,
    pub b_in: Vec<f64>,
    pub b_hn: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Tensor2::zeros(hidden, input),
            u_z: Tensor2::zeros(hidden, hidden),
            b_z: vec![0.0; hidden],
            w_r: Tensor2::zeros(hidden, input),
            u_r: Tensor2::zeros(hidden, hidden),
            b_r: vec![0.0; hidden],
            w_n: Tensor2::zeros(hidden, input),
            u_n: Tensor2::zeros(hidden, hidden),
            b_in: vec![0.0; hidden],
            b_hn: vec![0.0; hidden],
        }
    }

    /// Seeded uniform init; input-side tensors use `fan_in = input`,
    /// hidden-side tensors and biases use `fan_in = hidden`.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let hb = 1.0 / (hidden as f64).sqrt();
        let bias = |n: usize, rng: &mut R| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-hb..=hb)).collect()
        };
        Self {
            w_z: Tensor2::init_uniform(hidden, input, input, rng),
            u_z: Tensor2::init_uniform(hidden, hidden, hidden, rng),
            b_z: bias(hidden, rng),
            w_r: Tensor2::init_uniform(hidden, input, input, rng),
            u_r: Tensor2::init_uniform(hidden, hidden, hidden, rng),
            b_r: bias(hidden, rng),
            w_n: Tensor2::init_uniform(hidden, input, input, rng),
            u_n: Tensor2::init_uniform(hidden, hidden, hidden, rng),
            b_in: bias(hidden, rng),
            b_hn: bias(hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }
}

impl Parameters for GruParams {
    fn groups(&self) -> Vec<(String, &[f64])> {
        vec![
            ("w_z".into(), self.w_z.data()),
            ("u_z".into(), self.u_z.data()),
            ("b_z".into(), self.b_z.as_slice()),
            ("w_r".into(), self.w_r.data()),
            ("u_r".into(), self.u_r.data()),
            ("b_r".into(), self.b_r.as_slice()),
            ("w_n".into(), self.w_n.data()),
            ("u_n".into(), self.u_n.data()),
            ("b_in".into(), self.b_in.as_slice()),
            ("b_hn".into(), self.b_hn.as_slice()),
        ]
    }

    fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            ("w_z".into(), self.w_z.data_mut()),
            ("u_z".into(), self.u_z.data_mut()),
            ("b_z".into(), self.b_z.as_mut_slice()),
            ("w_r".into(), self.w_r.data_mut()),
            ("u_r".into(), self.u_r.data_mut()),
            ("b_r".into(), self.b_r.as_mut_slice()),
            ("w_n".into(), self.w_n.data_mut()),
            ("u_n".into(), self.u_n.data_mut()),
            ("b_in".into(), self.b_in.as_mut_slice()),
            ("b_hn".into(), self.b_hn.as_mut_slice()),
        ]
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    /// `U_n h + b_hn`, the pre-reset hidden contribution of the candidate.
    pub u: Vec<f64>,
    pub h_next: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gate_preactivation(w: &Tensor2, u: &Tensor2, b: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut a = w.matvec(x);
    let uh = u.matvec(h);
    for ((ai, ui), bi) in a.iter_mut().zip(&uh).zip(b) {
        *ai += ui + bi;
    }
    a
}

pub fn gru_cell_forward(p: &GruParams, x: &[f64], h: &[f64]) -> Result<GruCache> {
    if x.len() != p.input_dim() || h.len() != p.hidden_dim() {
        return Err(Error::DimMismatch(format!(
            "gru expects input {} and hidden {}, got {} and {}",
            p.input_dim(),
            p.hidden_dim(),
            x.len(),
            h.len()
        )));
    }
    let z: Vec<f64> = gate_preactivation(&p.w_z, &p.u_z, &p.b_z, x, h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = gate_preactivation(&p.w_r, &p.u_r, &p.b_r, x, h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let mut u = p.u_n.matvec(h);
    for (ui, bi) in u.iter_mut().zip(&p.b_hn) {
        *ui += bi;
    }
    let mut a_n = p.w_n.matvec(x);
    for (((ai, bi), ri), ui) in a_n.iter_mut().zip(&p.b_in).zip(&r).zip(&u) {
        *ai += bi + ri * ui;
    }
    let n: Vec<f64> = a_n.into_iter().map(f64::tanh).collect();
    let h_next: Vec<f64> = z
        .iter()
        .zip(&n)
        .zip(h)
        .map(|((zi, ni), hi)| (1.0 - zi) * ni + zi * hi)
        .collect();
    Ok(GruCache {
        x: x.to_vec(),
        h_prev: h.to_vec(),
        z,
        r,
        n,
        u,
        h_next,
    })
}

/// Exact reverse-mode step. Accumulates parameter gradients into `grad` and
/// returns `(dx, dh_prev)`.
pub fn gru_cell_backward(
    p: &GruParams,
    cache: &GruCache,
    dh_next: &[f64],
    grad: &mut GruParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let hidden = p.hidden_dim();
    if dh_next.len() != hidden {
        return Err(Error::DimMismatch(format!(
            "gru backward expects dh of {hidden}, got {}",
            dh_next.len()
        )));
    }
    let GruCache { x, h_prev, z, r, n, u, .. } = cache;

    let mut dx = vec![0.0; p.input_dim()];
    let mut dh = vec![0.0; hidden];

    // h_next = (1 - z) n + z h
    let dz: Vec<f64> = dh_next
        .iter()
        .zip(h_prev)
        .zip(n)
        .map(|((d, hi), ni)| d * (hi - ni))
        .collect();
    let dn: Vec<f64> = dh_next.iter().zip(z).map(|(d, zi)| d * (1.0 - zi)).collect();
    for ((dhi, d), zi) in dh.iter_mut().zip(dh_next).zip(z) {
        *dhi += d * zi;
    }

    // n = tanh(a_n), a_n = W_n x + b_in + r .* u
    let da_n: Vec<f64> = dn.iter().zip(n).map(|(d, ni)| d * (1.0 - ni * ni)).collect();
    grad.w_n.add_outer(&da_n, x);
    for (g, d) in grad.b_in.iter_mut().zip(&da_n) {
        *g += d;
    }
    p.w_n.matvec_transpose_into(&da_n, &mut dx);
    let dr: Vec<f64> = da_n.iter().zip(u).map(|(d, ui)| d * ui).collect();
    let du: Vec<f64> = da_n.iter().zip(r).map(|(d, ri)| d * ri).collect();

    // u = U_n h + b_hn
    grad.u_n.add_outer(&du, h_prev);
    for (g, d) in grad.b_hn.iter_mut().zip(&du) {
        *g += d;
    }
    p.u_n.matvec_transpose_into(&du, &mut dh);

    // z = sigmoid(a_z)
    let da_z: Vec<f64> = dz.iter().zip(z).map(|(d, zi)| d * zi * (1.0 - zi)).collect();
    grad.w_z.add_outer(&da_z, x);
    grad.u_z.add_outer(&da_z, h_prev);
    for (g, d) in grad.b_z.iter_mut().zip(&da_z) {
        *g += d;
    }
    p.w_z.matvec_transpose_into(&da_z, &mut dx);
    p.u_z.matvec_transpose_into(&da_z, &mut dh);

    // r = sigmoid(a_r)
    let da_r: Vec<f64> = dr.iter().zip(r).map(|(d, ri)| d * ri * (1.0 - ri)).collect();
    grad.w_r.add_outer(&da_r, x);
    grad.u_r.add_outer(&da_r, h_prev);
    for (g, d) in grad.b_r.iter_mut().zip(&da_r) {
        *g += d;
    }
    p.w_r.matvec_transpose_into(&da_r, &mut dx);
    p.u_r.matvec_transpose_into(&da_r, &mut dh);

    Ok((dx, dh))
}
