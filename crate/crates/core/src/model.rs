//! Fitted meta-model representation and solver configuration.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::gram::EigenGram;
use crate::groups::GroupSet;

/// Configuration shared by the group-lasso and ridge-group-sparse solvers.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Maximum number of full sweeps through the groups.
    pub max_iter: usize,
    /// Stop when the relative criterion change over a sweep drops below this.
    pub crit_tol: f64,
    /// Stop when the relative coefficient change over a sweep drops below this.
    pub par_tol: f64,
    /// Optional per-group weights gamma'_v on the empirical-norm penalty.
    pub weights_gamma: Option<Vec<f64>>,
    /// Optional per-group weights mu'_v on the Hilbert-norm penalty.
    pub weights_mu: Option<Vec<f64>>,
    /// Comparison switch: weight the empirical-norm penalty by the bare
    /// gamma instead of sqrt(n) gamma, so the ridge zero test reads
    /// `J* <= gamma`. The nonzero update scales along with it (a test-only
    /// change would demand stationary points that do not exist); the whole
    /// fit is then equivalent to the default solver at gamma / sqrt(n).
    pub paper_literal_zero_test: bool,
    /// Print per-sweep iteration number, active groups and convergence
    /// measures.
    pub verbose: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 1000,
            crit_tol: 1e-4,
            par_tol: 1e-4,
            weights_gamma: None,
            weights_mu: None,
            paper_literal_zero_test: false,
            verbose: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, vmax: usize) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if self.crit_tol <= 0.0 || self.par_tol <= 0.0 {
            return Err(Error::invalid("convergence tolerances must be positive"));
        }
        for (name, w) in [("weights_gamma", &self.weights_gamma), ("weights_mu", &self.weights_mu)] {
            if let Some(w) = w {
                if w.len() != vmax {
                    return Err(Error::invalid(format!(
                        "{name} has length {}, expected vMax = {vmax}",
                        w.len()
                    )));
                }
                if w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                    return Err(Error::invalid(format!("{name} entries must be strictly positive")));
                }
            }
        }
        Ok(())
    }

    /// Per-group Hilbert-penalty weights, all ones unless set.
    pub(crate) fn mu_weights(&self, vmax: usize) -> Vec<f64> {
        self.weights_mu.clone().unwrap_or_else(|| vec![1.0; vmax])
    }

    /// Per-group empirical-penalty weights, all ones unless set.
    pub(crate) fn gamma_weights(&self, vmax: usize) -> Vec<f64> {
        self.weights_gamma.clone().unwrap_or_else(|| vec![1.0; vmax])
    }
}

/// A fitted sparse additive meta-model.
///
/// `theta` holds one coefficient row per group; a group is active exactly
/// when its row is not identically zero, and `supp` lists those groups
/// (0-based, canonical order). `fit_v[v] = K_v theta_v` are the per-group
/// fitted parts at the training points and `fitted = intercept + sum fit_v`.
///
/// Of the two convergence measures, `rel_diff_crit` is the relative
/// criterion change and `rel_diff_par` the relative coefficient change over
/// the last sweep. (Write-ups sometimes swap which name carries which
/// quantity; here the names mean what they say.)
#[derive(Debug, Clone)]
pub struct MetaModel {
    pub intercept: f64,
    /// vMax x n coefficient matrix, row v = theta_v.
    pub theta: Array2<f64>,
    /// Fitted values intercept + sum_v K_v theta_v at the training points.
    pub fitted: Array1<f64>,
    /// Per-group fitted parts K_v theta_v.
    pub fit_v: Vec<Array1<f64>>,
    /// Empirical norms ||K_v theta_v|| / sqrt(n).
    pub norm_n: Vec<f64>,
    /// Hilbert norms ||K_v^{1/2} theta_v||.
    pub norm_h: Vec<f64>,
    /// Active groups: exactly those v with theta_v not identically zero.
    pub supp: Vec<usize>,
    /// Residual sum of squares ||Y - fitted||^2.
    pub scr: f64,
    /// Value of the penalized criterion that was minimized.
    pub crit: f64,
    /// Hilbert-penalty parameter of record (mu_g for a group-lasso fit, mu
    /// for a ridge-group-sparse fit).
    pub mu: f64,
    /// Empirical-penalty parameter of record (0 for a group-lasso fit).
    pub gamma: f64,
    /// Sweeps used.
    pub iter: usize,
    /// Sweep budget the fit ran under.
    pub max_iter: usize,
    pub converged: bool,
    /// Relative criterion change over the final sweep.
    pub rel_diff_crit: f64,
    /// Relative coefficient change over the final sweep.
    pub rel_diff_par: f64,
}

impl MetaModel {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }

    pub fn vmax(&self) -> usize {
        self.theta.nrows()
    }

    /// Number of active groups.
    pub fn nsupp(&self) -> usize {
        self.supp.len()
    }

    /// Names of the active groups in canonical order.
    pub fn support_names(&self, groups: &GroupSet) -> Vec<String> {
        self.supp.iter().map(|&v| groups.group(v).name()).collect()
    }

    pub fn is_null(&self) -> bool {
        self.supp.is_empty()
    }

    /// The all-zero model with the intercept at the response mean.
    pub fn null_model(y: &Array1<f64>, vmax: usize, mu: f64, gamma: f64) -> Self {
        let n = y.len();
        let f0 = y.mean().unwrap_or(0.0);
        let scr = y.iter().map(|v| (v - f0) * (v - f0)).sum();
        MetaModel {
            intercept: f0,
            theta: Array2::zeros((vmax, n)),
            fitted: Array1::from_elem(n, f0),
            fit_v: vec![Array1::zeros(n); vmax],
            norm_n: vec![0.0; vmax],
            norm_h: vec![0.0; vmax],
            supp: Vec::new(),
            scr,
            crit: scr,
            mu,
            gamma,
            iter: 0,
            max_iter: 0,
            converged: true,
            rel_diff_crit: 0.0,
            rel_diff_par: 0.0,
        }
    }

    /// Checks the structural invariants against the Gram set: dimensions,
    /// exact support bookkeeping, and fitted = intercept + sum of parts.
    pub fn check_consistency(&self, grams: &EigenGram) -> Result<()> {
        if self.vmax() != grams.len() || self.n() != grams.n() {
            return Err(Error::invalid(format!(
                "model dimensions ({} x {}) do not match Gram set ({} x {})",
                self.vmax(),
                self.n(),
                grams.len(),
                grams.n()
            )));
        }
        let active: Vec<usize> = (0..self.vmax())
            .filter(|&v| self.theta.row(v).iter().any(|&t| t != 0.0))
            .collect();
        if active != self.supp {
            return Err(Error::invalid("support does not match the nonzero rows of theta"));
        }
        let mut recon = Array1::from_elem(self.n(), self.intercept);
        for fv in &self.fit_v {
            recon += fv;
        }
        let max_dev = recon
            .iter()
            .zip(&self.fitted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max_dev > 1e-10 {
            return Err(Error::invalid(format!(
                "fitted values deviate from intercept + sum of parts by {max_dev:e}"
            )));
        }
        Ok(())
    }
}
