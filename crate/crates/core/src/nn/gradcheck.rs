//! Central-finite-difference verification of analytic gradients.

use super::Parameters;
use crate::error::{Error, Result};

/// Per-group and overall worst relative error of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// `(group name, max relative error within the group)` in canonical order.
    pub groups: Vec<(String, f64)>,
    pub max_rel_error: f64,
}

/// Compare `analytic` against central differences of `loss` over every scalar
/// parameter of `params`.
///
/// Relative error per scalar: `|a - n| / max(|a|, |n|, 1e-8)`. `params` is
/// restored to its original values before returning.
pub fn grad_check<P: Parameters>(
    params: &mut P,
    analytic: &P,
    eps: f64,
    mut loss: impl FnMut(&P) -> f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must lie in [1e-7, 1e-3], got {eps}"
        )));
    }
    let group_sizes: Vec<(String, usize)> = params
        .groups()
        .into_iter()
        .map(|(name, s)| (name, s.len()))
        .collect();
    let analytic_flat: Vec<f64> = analytic
        .groups()
        .into_iter()
        .flat_map(|(_, s)| s.to_vec())
        .collect();
    let total: usize = group_sizes.iter().map(|(_, n)| n).sum();
    if analytic_flat.len() != total {
        return Err(Error::DimMismatch(format!(
            "analytic gradient has {} scalars, model has {total}",
            analytic_flat.len()
        )));
    }

    let mut groups = Vec::with_capacity(group_sizes.len());
    let mut max_rel_error: f64 = 0.0;
    let mut flat = 0;
    for (name, size) in group_sizes {
        let mut group_max: f64 = 0.0;
        for _ in 0..size {
            let original = params.get_flat(flat);
            params.set_flat(flat, original + eps);
            let plus = loss(params);
            params.set_flat(flat, original - eps);
            let minus = loss(params);
            params.set_flat(flat, original);
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic_flat[flat];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            group_max = group_max.max(rel);
            flat += 1;
        }
        max_rel_error = max_rel_error.max(group_max);
        groups.push((name, group_max));
    }
    Ok(GradCheckReport { groups, max_rel_error })
}
