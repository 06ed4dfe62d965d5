//! Tuning-parameter grids, full-path fitting, the qmax bisection, and
//! test-set model selection.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::design::DesignData;
use crate::error::{Error, Result};
use crate::gram::{cross_variable_grams, EigenGram};
use crate::group_lasso::{group_lasso_fit, mu_max};
use crate::model::{FitConfig, MetaModel};
use crate::ridge::rgs_fit;

/// A grid of tuning parameters, both axes in decreasing order. `gammas`
/// may contain 0, in which case that column holds plain group-lasso fits.
#[derive(Debug, Clone)]
pub struct TuningGrid {
    pub mus: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl TuningGrid {
    pub fn new(mus: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if mus.is_empty() || gammas.is_empty() {
            return Err(Error::invalid("tuning grid must have at least one mu and one gamma"));
        }
        if mus.iter().any(|&m| !m.is_finite() || m <= 0.0) {
            return Err(Error::invalid("mu grid entries must be strictly positive"));
        }
        if gammas.iter().any(|&g| !g.is_finite() || g < 0.0) {
            return Err(Error::invalid("gamma grid entries must be non-negative"));
        }
        if !strictly_descending(&mus) || !strictly_descending(&gammas) {
            return Err(Error::invalid("grid values must be strictly descending"));
        }
        Ok(TuningGrid { mus, gammas })
    }
}

fn strictly_descending(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] > w[1])
}

/// One fitted model along the path, keyed by its tuning parameters.
/// For gamma = 0 the recorded `mu` is the group-lasso parameter
/// mu_g = sqrt(n) * mu; for gamma > 0 it is mu itself.
#[derive(Debug, Clone)]
pub struct PathEntry {
    pub mu: f64,
    pub gamma: f64,
    pub model: MetaModel,
}

/// The sequence of fits over a [`TuningGrid`], stored mu-major: the entry
/// for (mus[i], gammas[j]) sits at index i * gammas.len() + j.
#[derive(Debug, Clone)]
pub struct FitPath {
    pub mus: Vec<f64>,
    pub gammas: Vec<f64>,
    pub entries: Vec<PathEntry>,
}

impl FitPath {
    pub fn entry(&self, i_mu: usize, i_gamma: usize) -> &PathEntry {
        &self.entries[i_mu * self.gammas.len() + i_gamma]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Builds the mu grid mu_i = mu_max / (sqrt(n) * frc_i), sorted descending.
pub fn mu_grid(mu_max_val: f64, n: usize, frc: &[f64]) -> Result<Vec<f64>> {
    if frc.is_empty() {
        return Err(Error::invalid("frc must be non-empty"));
    }
    if frc.iter().any(|&f| !f.is_finite() || f <= 0.0) {
        return Err(Error::invalid("frc entries must be strictly positive"));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut mus: Vec<f64> = frc.iter().map(|f| mu_max_val / (sqrt_n * f)).collect();
    mus.sort_by(|a, b| b.partial_cmp(a).expect("finite mu values"));
    Ok(mus)
}

/// Fits the whole grid: one group-lasso solution per mu (warm-started down
/// the mu path), then one ridge-group-sparse fit per gamma > 0 initialized
/// from it. The gamma = 0 column stores the group-lasso model itself, keyed
/// by mu_g = sqrt(n) mu.
///
/// Step 2 of the ridge solver is off along the grid (`do_step_two` in
/// [`rgs_fit`] can always be re-run on a selected model); the group-lasso
/// stage of every grid cell is identical to a direct [`group_lasso_fit`]
/// call at mu_g.
pub fn fit_path(
    y: &Array1<f64>,
    grams: &EigenGram,
    grid: &TuningGrid,
    cfg: &FitConfig,
) -> Result<FitPath> {
    let sqrt_n = (grams.n() as f64).sqrt();
    // The mu path is sequential (warm starts); gamma fits fan out per mu.
    let mut lasso_fits: Vec<MetaModel> = Vec::with_capacity(grid.mus.len());
    for (i, &mu) in grid.mus.iter().enumerate() {
        let warm = if i > 0 { Some(&lasso_fits[i - 1]) } else { None };
        lasso_fits.push(group_lasso_fit(y, grams, sqrt_n * mu, cfg, warm)?);
    }

    let cells: Vec<(usize, usize)> = (0..grid.mus.len())
        .flat_map(|i| (0..grid.gammas.len()).map(move |j| (i, j)))
        .collect();
    let entries: Vec<PathEntry> = cells
        .par_iter()
        .map(|&(i, j)| {
            let mu = grid.mus[i];
            let gamma = grid.gammas[j];
            if gamma == 0.0 {
                Ok(PathEntry { mu: sqrt_n * mu, gamma: 0.0, model: lasso_fits[i].clone() })
            } else {
                let model = rgs_fit(y, grams, mu, gamma, &lasso_fits[i], cfg, false)?;
                Ok(PathEntry { mu, gamma, model })
            }
        })
        .collect::<Result<_>>()?;

    Ok(FitPath { mus: grid.mus.clone(), gammas: grid.gammas.clone(), entries })
}

/// Outcome of the qmax bisection.
#[derive(Debug, Clone)]
pub struct QmaxResult {
    /// Group-lasso penalties mu_g probed by the bisection, in order.
    pub mus_tried: Vec<f64>,
    /// Active-set size of each probe's solution.
    pub qs: Vec<usize>,
    /// Whether a probe hit exactly qmax active groups.
    pub found: bool,
    /// The located mu (on the mu scale, i.e. mu_g / sqrt(n)), if found.
    pub mu_qmax: Option<f64>,
    /// Ridge-group-sparse fits at mu_qmax for each requested gamma
    /// (group-lasso model in the gamma = 0 slot). Empty when not found.
    pub path: FitPath,
}

/// Bisects mu_g over [mu_max/rat, mu_max] until the group-lasso support
/// has exactly `qmax` groups, then fits the requested gammas at that mu.
///
/// Each probe is warm-started from the previous one. If no probe reaches
/// qmax within `num` bisection steps the result carries `found = false`
/// and an empty path instead of an error.
pub fn fit_qmax(
    y: &Array1<f64>,
    grams: &EigenGram,
    gammas: &[f64],
    qmax: usize,
    rat: f64,
    num: usize,
    cfg: &FitConfig,
) -> Result<QmaxResult> {
    if qmax < 1 {
        return Err(Error::invalid("qmax must be at least 1"));
    }
    if !rat.is_finite() || rat <= 1.0 {
        return Err(Error::invalid("rat must exceed 1"));
    }
    if num < 1 {
        return Err(Error::invalid("num must be at least 1"));
    }
    if !strictly_descending(gammas) || gammas.is_empty() {
        return Err(Error::invalid("gammas must be non-empty and strictly descending"));
    }
    let sqrt_n = (grams.n() as f64).sqrt();
    let mu_hi = mu_max(y, grams);
    let mut mu_1 = mu_hi; // upper end: null model
    let mut mu_2 = mu_hi / rat; // lower end: densest model considered
    let mut mus_tried = Vec::new();
    let mut qs = Vec::new();
    let mut warm: Option<MetaModel> = None;
    let mut hit: Option<(f64, MetaModel)> = None;

    for _ in 0..num {
        let mu_i = 0.5 * (mu_1 + mu_2);
        let model = group_lasso_fit(y, grams, mu_i, cfg, warm.as_ref())?;
        let q = model.nsupp();
        mus_tried.push(mu_i);
        qs.push(q);
        debug_assert!(mu_2 <= mu_i && mu_i <= mu_1);
        if q == qmax {
            hit = Some((mu_i, model));
            break;
        }
        if q > qmax {
            // too many groups: move to larger penalties
            mu_2 = mu_i;
        } else {
            mu_1 = mu_i;
        }
        warm = Some(model);
    }

    match hit {
        Some((mu_g, lasso)) => {
            let mu = mu_g / sqrt_n;
            let entries: Vec<PathEntry> = gammas
                .par_iter()
                .map(|&gamma| {
                    if gamma == 0.0 {
                        Ok(PathEntry { mu: mu_g, gamma: 0.0, model: lasso.clone() })
                    } else {
                        let model = rgs_fit(y, grams, mu, gamma, &lasso, cfg, false)?;
                        Ok(PathEntry { mu, gamma, model })
                    }
                })
                .collect::<Result<_>>()?;
            let path = FitPath { mus: vec![mu], gammas: gammas.to_vec(), entries };
            Ok(QmaxResult { mus_tried, qs, found: true, mu_qmax: Some(mu), path })
        }
        None => Ok(QmaxResult {
            mus_tried,
            qs,
            found: false,
            mu_qmax: None,
            path: FitPath { mus: Vec::new(), gammas: gammas.to_vec(), entries: Vec::new() },
        }),
    }
}

/// Evaluates a fitted model at test points given the per-group cross Gram
/// matrices (one n_test x n matrix per group, canonical order). Only
/// support groups contribute; `include_intercept` adds f0.
pub fn predict(model: &MetaModel, cross: &[Array2<f64>], include_intercept: bool) -> Result<Array1<f64>> {
    if cross.len() != model.vmax() {
        return Err(Error::invalid(format!(
            "got {} cross matrices for {} groups",
            cross.len(),
            model.vmax()
        )));
    }
    let n_test = cross.first().map_or(0, |c| c.nrows());
    let mut out = Array1::from_elem(n_test, if include_intercept { model.intercept } else { 0.0 });
    for &v in &model.supp {
        if cross[v].ncols() != model.n() || cross[v].nrows() != n_test {
            return Err(Error::invalid(format!("cross matrix {v} has wrong shape")));
        }
        out += &cross[v].dot(&model.theta.row(v));
    }
    Ok(out)
}

/// Prediction errors of every path entry on a test set:
/// ErrPred(mu, gamma) = mean squared prediction error, laid out with one
/// row per mu and one column per gamma.
///
/// The per-group cross matrices are built once (as Hadamard products of
/// per-variable ones) and streamed through all models, so memory stays at
/// one n_test x n matrix per variable plus one per live group.
pub fn prediction_error(
    path: &FitPath,
    train: &DesignData,
    grams: &EigenGram,
    xtest: ArrayView2<'_, f64>,
    ytest: &Array1<f64>,
) -> Result<Array2<f64>> {
    if ytest.len() != xtest.nrows() {
        return Err(Error::invalid("test response length does not match test design"));
    }
    if ytest.is_empty() {
        return Err(Error::invalid("test set must be non-empty"));
    }
    let groups = grams.groups();
    let per_var = cross_variable_grams(train, xtest, groups, grams.kind())?;
    let n_test = xtest.nrows();

    let mut preds: Vec<Array1<f64>> = path
        .entries
        .iter()
        .map(|e| Array1::from_elem(n_test, e.model.intercept))
        .collect();
    for (v, g) in groups.iter().enumerate() {
        if !path.entries.iter().any(|e| e.model.supp.binary_search(&v).is_ok()) {
            continue;
        }
        let mut cross_v = per_var[g.vars()[0] - 1].clone();
        for &a in &g.vars()[1..] {
            cross_v *= &per_var[a - 1];
        }
        for (e, pred) in path.entries.iter().zip(&mut preds) {
            if e.model.supp.binary_search(&v).is_ok() {
                *pred += &cross_v.dot(&e.model.theta.row(v));
            }
        }
    }

    let mut errors = Array2::zeros((path.mus.len(), path.gammas.len()));
    for i in 0..path.mus.len() {
        for j in 0..path.gammas.len() {
            let pred = &preds[i * path.gammas.len() + j];
            let mse = ytest
                .iter()
                .zip(pred)
                .map(|(yi, pi)| (yi - pi) * (yi - pi))
                .sum::<f64>()
                / n_test as f64;
            errors[[i, j]] = mse;
        }
    }
    Ok(errors)
}

/// Picks the entry with the smallest prediction error; ties go to the
/// larger mu, then the larger gamma (the sparser model).
pub fn select_best<'p>(errors: &Array2<f64>, path: &'p FitPath) -> Result<(usize, usize, &'p PathEntry)> {
    if errors.dim() != (path.mus.len(), path.gammas.len()) {
        return Err(Error::invalid("error matrix shape does not match the path"));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("error matrix contains non-finite entries"));
    }
    let mut best = (0usize, 0usize);
    let mut best_err = f64::INFINITY;
    // rows are mu descending and columns gamma descending, so a strict
    // improvement scan implements the tie rule
    for i in 0..path.mus.len() {
        for j in 0..path.gammas.len() {
            if errors[[i, j]] < best_err {
                best_err = errors[[i, j]];
                best = (i, j);
            }
        }
    }
    Ok((best.0, best.1, path.entry(best.0, best.1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::compute_gram;
    use crate::groups::build_group_set;
    use crate::kernel::KernelKind;
    use crate::group_lasso::group_lasso_criterion;
    use crate::model::MetaModel;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn problem(n: usize, d: usize, dmax: usize, seed: u64) -> (DesignData, EigenGram) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
        let y = Array1::from_shape_fn(n, |i| {
            (6.0 * x[[i, 0]]).sin() + x[[i, 1 % d]] + 0.1 * rng.random::<f64>()
        });
        let data = DesignData::new(x, y).unwrap();
        let groups = build_group_set(d, dmax).unwrap();
        let grams = compute_gram(&data, &groups, KernelKind::Matern, true, 1e-8).unwrap();
        (data, grams)
    }

    #[test]
    fn mu_grid_halving() {
        let mus = mu_grid(8.0, 4, &[4.0, 8.0, 16.0, 32.0, 64.0]).unwrap();
        assert_eq!(mus.len(), 5);
        for w in mus.windows(2) {
            assert_abs_diff_eq!(w[1] / w[0], 0.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(mus[0], 8.0 / (2.0 * 4.0), epsilon = 1e-15);
        // frc = 1, n = 1 gives mu = mu_max
        let single = mu_grid(3.0, 1, &[1.0]).unwrap();
        assert_abs_diff_eq!(single[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn fit_path_gamma_zero_column_matches_direct_lasso() {
        let (data, grams) = problem(20, 2, 2, 17);
        let y = data.y().clone();
        let mmax = mu_max(&y, &grams);
        let sqrt_n = (y.len() as f64).sqrt();
        let grid = TuningGrid::new(
            mu_grid(mmax, y.len(), &[4.0, 8.0]).unwrap(),
            vec![0.1, 0.01, 0.0],
        )
        .unwrap();
        let cfg = FitConfig { crit_tol: 1e-10, par_tol: 1e-10, ..FitConfig::default() };
        let path = fit_path(&y, &grams, &grid, &cfg).unwrap();
        assert_eq!(path.len(), 6);
        // replaying the warm-started mu chain reproduces the column exactly
        let mut warm: Option<MetaModel> = None;
        for (i, &mu) in grid.mus.iter().enumerate() {
            let entry = path.entry(i, 2);
            assert_eq!(entry.gamma, 0.0);
            // stored mu for the gamma = 0 column is mu_g = sqrt(n) mu
            assert_abs_diff_eq!(entry.mu, sqrt_n * mu, epsilon = 1e-12);
            let chain = group_lasso_fit(&y, &grams, sqrt_n * mu, &cfg, warm.as_ref()).unwrap();
            let c1 = group_lasso_criterion(&y, &grams, &entry.model, sqrt_n * mu, None);
            let c2 = group_lasso_criterion(&y, &grams, &chain, sqrt_n * mu, None);
            assert!((c1 - c2).abs() <= 1e-12 * c2.abs().max(1.0));
            // a cold start lands on the same optimum up to convexity slack
            let cold = group_lasso_fit(&y, &grams, sqrt_n * mu, &cfg, None).unwrap();
            let c3 = group_lasso_criterion(&y, &grams, &cold, sqrt_n * mu, None);
            assert!((c1 - c3).abs() <= 1e-6 * c3.abs().max(1.0));
            warm = Some(chain);
        }
    }

    #[test]
    fn qmax_bisection_brackets_monotonically() {
        let (data, grams) = problem(24, 3, 2, 5);
        let res = fit_qmax(&data.y().clone(), &grams, &[0.01, 0.0], 2, 50.0, 8, &FitConfig::default())
            .unwrap();
        assert_eq!(res.mus_tried.len(), res.qs.len());
        let hi = mu_max(data.y(), &grams);
        for &m in &res.mus_tried {
            assert!(m <= hi && m >= hi / 50.0);
        }
        if res.found {
            assert_eq!(res.path.entries.len(), 2);
            for e in &res.path.entries {
                assert!(e.model.nsupp() <= 2);
            }
        }
    }

    #[test]
    fn qmax_unreachable_reports_not_found() {
        let (data, grams) = problem(10, 2, 1, 3);
        // more groups than exist
        let res = fit_qmax(&data.y().clone(), &grams, &[0.0], 40, 10.0, 4, &FitConfig::default())
            .unwrap();
        assert!(!res.found);
        assert!(res.path.entries.is_empty());
        assert_eq!(res.qs.len(), 4);
    }

    #[test]
    fn predict_null_model_is_intercept() {
        let (data, grams) = problem(8, 2, 1, 11);
        let null = MetaModel::null_model(data.y(), grams.len(), 1.0, 0.0);
        let cross = crate::gram::cross_gram(&data, data.x().view(), grams.groups(), grams.kind())
            .unwrap();
        let pred = predict(&null, &cross, true).unwrap();
        for p in pred.iter() {
            assert_abs_diff_eq!(*p, null.intercept, epsilon = 1e-15);
        }
        let no_f0 = predict(&null, &cross, false).unwrap();
        assert!(no_f0.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn predict_at_train_points_tracks_fitted() {
        let (data, grams) = problem(16, 2, 2, 23);
        let y = data.y().clone();
        let mu_g = mu_max(&y, &grams) / 6.0;
        let model = group_lasso_fit(&y, &grams, mu_g, &FitConfig::default(), None).unwrap();
        let cross = crate::gram::cross_gram(&data, data.x().view(), grams.groups(), grams.kind())
            .unwrap();
        let pred = predict(&model, &cross, true).unwrap();
        // correction-epsilon gap: |pred - fitted| <= eps * ||theta||_1 scale
        let linf = pred
            .iter()
            .zip(&model.fitted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(linf <= 1e-4, "train-point prediction gap {linf:e}");
    }

    #[test]
    fn prediction_error_of_null_model_is_centered_power() {
        let (data, grams) = problem(12, 2, 1, 31);
        let null = MetaModel::null_model(data.y(), grams.len(), 9.9, 0.0);
        let path = FitPath {
            mus: vec![9.9],
            gammas: vec![0.0],
            entries: vec![PathEntry { mu: 9.9, gamma: 0.0, model: null.clone() }],
        };
        let ytest = data.y().clone();
        let errors =
            prediction_error(&path, &data, &grams, data.x().view(), &ytest).unwrap();
        let expect = ytest
            .iter()
            .map(|v| (v - null.intercept) * (v - null.intercept))
            .sum::<f64>()
            / ytest.len() as f64;
        assert_abs_diff_eq!(errors[[0, 0]], expect, epsilon = 1e-12 * expect.max(1.0));
    }

    #[test]
    fn select_best_tie_rule_prefers_larger_mu_then_gamma() {
        let entries: Vec<PathEntry> = (0..4)
            .map(|k| PathEntry {
                mu: [2.0, 2.0, 1.0, 1.0][k],
                gamma: [0.1, 0.0, 0.1, 0.0][k],
                model: MetaModel::null_model(&array![1.0, 2.0], 1, 1.0, 0.0),
            })
            .collect();
        let path = FitPath { mus: vec![2.0, 1.0], gammas: vec![0.1, 0.0], entries };
        let errors = array![[3.0, 3.0], [3.0, 3.0]];
        let (i, j, entry) = select_best(&errors, &path).unwrap();
        assert_eq!((i, j), (0, 0));
        assert_eq!(entry.gamma, 0.1);
        // unique minimum wins regardless of position
        let errors = array![[3.0, 3.0], [3.0, 0.5]];
        let (i, j, _) = select_best(&errors, &path).unwrap();
        assert_eq!((i, j), (1, 1));
    }

    use ndarray::{Array1, Array2};
}
