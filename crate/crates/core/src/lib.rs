//! Estimation of sparse additive meta-models in a reproducing kernel
//! Hilbert space, and Sobol sensitivity indices derived from them.
//!
//! Given observations (X, Y) with inputs uniform on the unit cube, the
//! library builds centered group kernels up to a chosen interaction order,
//! fits penalized least-squares meta-models (a kernelized group lasso, and
//! a ridge-group-sparse variant with an additional empirical-norm penalty),
//! selects tuning parameters against a held-out test set, and reports each
//! fitted model's empirical Sobol indices. A g-function benchmark harness
//! with the analytic indices of that test function is included for
//! end-to-end validation.
//!
//! ```
//! use rkhs_meta::*;
//!
//! // noisy draws of a benchmark function on a Latin hypercube design
//! let spec = GFunctionSpec::canonical(3, 7)?;
//! let train = generate_dataset(&spec, 40, 0)?;
//! let test = generate_dataset(&spec, 40, 1)?;
//!
//! // spectra of the centered group Gram matrices up to pair interactions
//! let groups = build_group_set(3, 2)?;
//! let grams = compute_gram(&train, &groups, KernelKind::Matern, true, 1e-8)?;
//!
//! // fit a small tuning grid and keep the best model on the test set
//! let mmax = mu_max(train.y(), &grams);
//! let grid = TuningGrid::new(mu_grid(mmax, 40, &[4.0, 16.0])?, vec![0.01, 0.0])?;
//! let path = fit_path(train.y(), &grams, &grid, &FitConfig::default())?;
//! let errors = prediction_error(&path, &train, &grams, test.x().view(), test.y())?;
//! let (_, _, best) = select_best(&errors, &path)?;
//!
//! // Sobol indices of the selected meta-model sum to one
//! let report = empirical_sobol(&best.model, &groups)?;
//! assert!((report.sum() - 1.0).abs() < 1e-12);
//! assert!(!best.model.supp.is_empty());
//! # Ok::<(), rkhs_meta::Error>(())
//! ```

pub mod design;
pub mod error;
pub mod gfunction;
pub mod gram;
pub mod group_lasso;
pub mod groups;
pub mod io;
pub mod kernel;
pub mod model;
#[doc(hidden)]
pub mod oracle;
pub mod quad;
pub mod ridge;
pub mod select;
pub mod sobol;

pub use design::DesignData;
pub use error::{Error, Result};
pub use gfunction::{
    analytic_sobol, evaluate_metrics, evaluation_design, g_function, generate_dataset, lhs_sample,
    rep_streams, BenchMetrics, GFunctionSpec, RepOutcome, EVAL_STREAM,
};
pub use gram::{compute_gram, cross_gram, EigenGram, GroupEigen};
pub use group_lasso::{group_lasso_criterion, group_lasso_fit, kkt_residual, mu_max, solve_rho};
pub use groups::{build_group_set, Group, GroupSet};
pub use kernel::{base_kernel, centered_kernel, KernelKind};
pub use model::{FitConfig, MetaModel};
pub use ridge::{nonzero_update, rgs_criterion, rgs_fit, zero_test_jstar};
pub use select::{
    fit_path, fit_qmax, mu_grid, predict, prediction_error, select_best, FitPath, PathEntry,
    QmaxResult, TuningGrid,
};
pub use sobol::{best_model_sobol, empirical_sobol, sobol_per_model, SobolReport};
