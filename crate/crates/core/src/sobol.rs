//! Empirical Sobol indices of fitted meta-models.
//!
//! The variance of each additive part f_v is estimated by the unbiased
//! sample variance of K_v theta_v over the training points, and the index
//! of group v is that variance divided by the sum over the support. Groups
//! outside the support have index exactly 0, and the indices of a
//! non-degenerate fit sum to 1.

use crate::error::{Error, Result};
use crate::groups::GroupSet;
use crate::model::MetaModel;
use crate::select::{select_best, FitPath};
use ndarray::Array2;

/// Variances this far below the largest one (relative) are treated as the
/// noise floor and reported as exact zeros before normalization.
const VARIANCE_FLOOR_REL: f64 = 1e-15;

/// Per-group Sobol indices of one fitted model, plus per-variable totals.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolReport {
    /// One index per group in canonical order; zeros outside the support.
    pub indices: Vec<f64>,
    /// Totals per variable a: sum of indices over all groups containing a.
    pub total_by_var: Vec<f64>,
    /// Indices are computed from the support groups only.
    pub support_only: bool,
}

impl SobolReport {
    pub fn sum(&self) -> f64 {
        self.indices.iter().sum()
    }

    /// (name, cardinality, index) rows in canonical order.
    pub fn rows(&self, groups: &GroupSet) -> Vec<(String, usize, f64)> {
        groups
            .iter()
            .zip(&self.indices)
            .map(|(g, &s)| (g.name(), g.len(), s))
            .collect()
    }
}

/// Empirical Sobol indices of a fitted model.
///
/// An empty support produces the all-zero report rather than an error.
pub fn empirical_sobol(model: &MetaModel, groups: &GroupSet) -> Result<SobolReport> {
    if groups.len() != model.vmax() {
        return Err(Error::invalid(format!(
            "model has {} groups but the group set has {}",
            model.vmax(),
            groups.len()
        )));
    }
    let n = model.n();
    if n < 2 {
        return Err(Error::invalid("need at least two observations for a sample variance"));
    }
    let mut variances = vec![0.0f64; model.vmax()];
    for &v in &model.supp {
        let fv = &model.fit_v[v];
        let mean = fv.mean().unwrap_or(0.0);
        variances[v] = fv.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    }
    let max_var = variances.iter().cloned().fold(0.0f64, f64::max);
    if max_var > 0.0 {
        let floor = VARIANCE_FLOOR_REL * max_var;
        for v in variances.iter_mut() {
            if *v < floor {
                *v = 0.0;
            }
        }
    }
    let total: f64 = variances.iter().sum();
    let indices: Vec<f64> = if total > 0.0 {
        variances.iter().map(|v| v / total).collect()
    } else {
        variances
    };
    let total_by_var = totals_per_variable(&indices, groups);
    Ok(SobolReport { indices, total_by_var, support_only: true })
}

fn totals_per_variable(indices: &[f64], groups: &GroupSet) -> Vec<f64> {
    let mut totals = vec![0.0f64; groups.d()];
    for (g, &s) in groups.iter().zip(indices) {
        for &a in g.vars() {
            totals[a - 1] += s;
        }
    }
    totals
}

/// Sobol reports for every model along a path.
pub fn sobol_per_model(path: &FitPath, groups: &GroupSet) -> Result<Vec<SobolReport>> {
    path.entries.iter().map(|e| empirical_sobol(&e.model, groups)).collect()
}

/// Report for the prediction-error minimizer of a path; the returned pair
/// of indices locates the winning (mu, gamma) cell.
pub fn best_model_sobol(
    path: &FitPath,
    errors: &Array2<f64>,
    groups: &GroupSet,
) -> Result<(usize, usize, SobolReport)> {
    let (i, j, entry) = select_best(errors, path)?;
    Ok((i, j, empirical_sobol(&entry.model, groups)?))
}
