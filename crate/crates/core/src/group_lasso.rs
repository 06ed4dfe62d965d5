//! Block coordinate descent for the kernelized group-lasso criterion
//!
//! ```text
//! C_g(f0, theta) = ||Y - f0 - sum_v K_v theta_v||^2
//!                  + sqrt(n) mu_g sum_v mu'_v ||K_v^{1/2} theta_v||
//! ```
//!
//! Each sweep re-estimates the intercept, then minimizes the criterion
//! exactly in one group at a time. With R_v the partial residual of group
//! v, the update is theta_v = 0 when ||(2/sqrt(n)) K_v^{1/2} R_v|| <=
//! mu_g mu'_v, and otherwise theta_v = (K_v + rho I)^{-1} R_v where rho > 0
//! solves 2 rho ||K_v^{1/2} theta(rho)|| = sqrt(n) mu_g mu'_v. All linear
//! algebra runs in each group's eigenbasis, so a rho probe costs O(n).

use ndarray::{Array1, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::gram::EigenGram;
use crate::model::{FitConfig, MetaModel};

/// Bracket expansion limits for the rho search.
const RHO_MAX: f64 = 1e30;
const RHO_MIN: f64 = 1e-30;

/// Smallest value of mu_g for which the group-lasso solution is identically
/// zero: max_v (2/sqrt(n)) ||K_v^{1/2}(Y - mean(Y))||.
pub fn mu_max(y: &Array1<f64>, grams: &EigenGram) -> f64 {
    let ybar = y.mean().unwrap_or(0.0);
    let centered = y.mapv(|v| v - ybar);
    let scale = 2.0 / (y.len() as f64).sqrt();
    grams
        .iter()
        .map(|eig| scale * eig.half_norm2(centered.view()).sqrt())
        .fold(0.0, f64::max)
}

/// Solves `2 rho ||K^{1/2} theta(rho)|| = pen` for rho > 0 in a group's
/// eigenbasis, where `theta(rho) = (K + rho I)^{-1} R` has eigen-coordinates
/// `z_i / (lambda_i + rho)`.
///
/// `lam` are the eigenvalues, `z` the eigen-coordinates of the residual R,
/// and `pen = sqrt(n) mu_g mu'_v`. The caller must have ruled out the zero
/// branch, i.e. `2 ||K^{1/2} R|| > pen`, which makes the root unique since
/// `y(rho) = 2 rho ||K^{1/2} theta(rho)|| - pen` is increasing. The bracket
/// comes from a x10 / /10 expansion started at 1 (cold) or at
/// `pen / (2 ||K^{1/2} theta_old||)` (warm start).
///
/// Returns the eigen-coordinates of the minimizer and the root rho.
pub fn solve_rho(
    lam: ArrayView1<'_, f64>,
    z: ArrayView1<'_, f64>,
    pen: f64,
    warm_half_norm: Option<f64>,
) -> Result<(Array1<f64>, f64)> {
    debug_assert_eq!(lam.len(), z.len());
    let half_norm = |rho: f64| -> f64 {
        lam.iter()
            .zip(z.iter())
            .map(|(&l, &zi)| {
                let t = zi / (l + rho);
                l * t * t
            })
            .sum::<f64>()
            .sqrt()
    };
    let limit = 2.0 * lam.iter().zip(z.iter()).map(|(&l, &zi)| l * zi * zi).sum::<f64>().sqrt();
    if limit <= pen {
        return Err(Error::invalid(format!(
            "no positive root: 2||K^(1/2)R|| = {limit:e} does not exceed the penalty {pen:e}"
        )));
    }
    let y_of = |rho: f64| 2.0 * rho * half_norm(rho) - pen;

    // Bracket [lo, hi] with y(lo) < 0 <= y(hi).
    let (mut lo, mut hi);
    match warm_half_norm {
        Some(b_old) if b_old > 0.0 => {
            let rho0 = pen / (2.0 * b_old);
            if y_of(rho0) > 0.0 {
                hi = rho0;
                loop {
                    let cand = hi / 10.0;
                    if cand < RHO_MIN {
                        return Err(Error::numeric(format!(
                            "rho bracket underflowed below {RHO_MIN:e}"
                        )));
                    }
                    if y_of(cand) <= 0.0 {
                        lo = cand;
                        break;
                    }
                    hi = cand;
                }
            } else {
                lo = rho0;
                hi = expand_up(lo, &y_of)?;
            }
        }
        _ => {
            if y_of(1.0) > 0.0 {
                lo = 0.0;
                hi = 1.0;
            } else {
                lo = 1.0;
                hi = expand_up(lo, &y_of)?;
            }
        }
    }

    // Bisection to a relative interval width of 1e-12, additionally pushing
    // the residual of the root equation below 1e-10 * pen.
    let mut rho = 0.5 * (lo + hi);
    for _ in 0..500 {
        rho = 0.5 * (lo + hi);
        let y_mid = y_of(rho);
        if y_mid < 0.0 {
            lo = rho;
        } else {
            hi = rho;
        }
        let width_ok = hi - lo <= 1e-12 * hi;
        if width_ok && (y_mid.abs() <= 1e-10 * pen || hi - lo <= 4.0 * f64::EPSILON * hi) {
            break;
        }
    }
    let theta = Array1::from_iter(lam.iter().zip(z.iter()).map(|(&l, &zi)| zi / (l + rho)));
    Ok((theta, rho))
}

fn expand_up(lo: f64, y_of: &impl Fn(f64) -> f64) -> Result<f64> {
    let mut lo = lo;
    loop {
        let cand = lo * 10.0;
        if cand > RHO_MAX {
            return Err(Error::numeric(format!("rho bracket exceeded {RHO_MAX:e}")));
        }
        if y_of(cand) > 0.0 {
            return Ok(cand);
        }
        lo = cand;
    }
}

/// State shared by the two block coordinate descent solvers.
pub(crate) struct BcdState {
    pub theta: Vec<Array1<f64>>,
    /// Per-group fitted parts K_v theta_v.
    pub fits: Vec<Array1<f64>>,
    /// sum_v K_v theta_v.
    pub total_fit: Array1<f64>,
    /// Cached Hilbert norms ||K_v^{1/2} theta_v|| for warm starts.
    pub half_norms: Vec<f64>,
    pub f0: f64,
}

impl BcdState {
    pub fn from_theta(theta: Vec<Array1<f64>>, grams: &EigenGram) -> Self {
        let n = grams.n();
        let mut fits = Vec::with_capacity(theta.len());
        let mut half_norms = Vec::with_capacity(theta.len());
        let mut total = Array1::zeros(n);
        for (v, tv) in theta.iter().enumerate() {
            if tv.iter().any(|&t| t != 0.0) {
                let eig = grams.eigen(v);
                let zt = eig.to_eigen(tv.view());
                let fit = eig.from_eigen((&zt * &eig.values).view());
                half_norms.push(zt.iter().zip(&eig.values).map(|(t, l)| l * t * t).sum::<f64>().sqrt());
                total += &fit;
                fits.push(fit);
            } else {
                half_norms.push(0.0);
                fits.push(Array1::zeros(n));
            }
        }
        BcdState { theta, fits, total_fit: total, half_norms, f0: 0.0 }
    }

    pub fn zeros(vmax: usize, n: usize) -> Self {
        BcdState {
            theta: vec![Array1::zeros(n); vmax],
            fits: vec![Array1::zeros(n); vmax],
            total_fit: Array1::zeros(n),
            half_norms: vec![0.0; vmax],
            f0: 0.0,
        }
    }

    pub fn update_intercept(&mut self, y: &Array1<f64>) {
        let n = y.len() as f64;
        self.f0 = (y - &self.total_fit).sum() / n;
    }

    /// Partial residual of group v: Y - f0 - sum_{w != v} K_w theta_w.
    pub fn residual(&self, y: &Array1<f64>, v: usize) -> Array1<f64> {
        let mut r = y - &self.total_fit;
        r += &self.fits[v];
        r -= self.f0;
        r
    }

    pub fn set_zero(&mut self, v: usize) {
        if self.theta[v].iter().any(|&t| t != 0.0) {
            self.total_fit -= &self.fits[v];
            self.theta[v].fill(0.0);
            self.fits[v].fill(0.0);
            self.half_norms[v] = 0.0;
        }
    }

    pub fn set_group(&mut self, v: usize, grams: &EigenGram, theta_eigen: ArrayView1<'_, f64>) {
        let eig = grams.eigen(v);
        let new_fit = eig.from_eigen((&theta_eigen.to_owned() * &eig.values).view());
        self.theta[v] = eig.from_eigen(theta_eigen);
        self.total_fit += &new_fit;
        self.total_fit -= &self.fits[v];
        self.fits[v] = new_fit;
        self.half_norms[v] = theta_eigen
            .iter()
            .zip(&eig.values)
            .map(|(t, l)| l * t * t)
            .sum::<f64>()
            .sqrt();
    }

    /// Recomputes the fit sum from the parts, so incremental drift cannot
    /// accumulate across sweeps.
    pub fn refresh_total(&mut self) {
        let mut total = Array1::zeros(self.total_fit.len());
        for fit in &self.fits {
            total += fit;
        }
        self.total_fit = total;
    }

    pub fn rss(&self, y: &Array1<f64>) -> f64 {
        y.iter()
            .zip(&self.total_fit)
            .map(|(yi, fi)| {
                let r = yi - self.f0 - fi;
                r * r
            })
            .sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.theta.iter().map(|t| t.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn frobenius_diff(&self, other: &[Array1<f64>]) -> f64 {
        self.theta
            .iter()
            .zip(other)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn into_model(
        mut self,
        y: &Array1<f64>,
        grams: &EigenGram,
        crit: f64,
        mu: f64,
        gamma: f64,
        iter: usize,
        max_iter: usize,
        converged: bool,
        rel_diff_crit: f64,
        rel_diff_par: f64,
    ) -> MetaModel {
        self.refresh_total();
        let n = grams.n();
        let sqrt_n = (n as f64).sqrt();
        let fitted = self.total_fit.mapv(|v| v + self.f0);
        let scr = y
            .iter()
            .zip(&fitted)
            .map(|(yi, fi)| (yi - fi) * (yi - fi))
            .sum();
        let mut norm_n = Vec::with_capacity(grams.len());
        let mut norm_h = Vec::with_capacity(grams.len());
        let mut supp = Vec::new();
        for v in 0..grams.len() {
            let active = self.theta[v].iter().any(|&t| t != 0.0);
            if active {
                supp.push(v);
                norm_n.push(self.fits[v].iter().map(|x| x * x).sum::<f64>().sqrt() / sqrt_n);
                norm_h.push(grams.eigen(v).half_norm2(self.theta[v].view()).sqrt());
            } else {
                norm_n.push(0.0);
                norm_h.push(0.0);
            }
        }
        let theta = ndarray::stack(
            Axis(0),
            &self.theta.iter().map(|t| t.view()).collect::<Vec<_>>(),
        )
        .expect("uniform row lengths");
        MetaModel {
            intercept: self.f0,
            theta,
            fitted,
            fit_v: self.fits,
            norm_n,
            norm_h,
            supp,
            scr,
            crit,
            mu,
            gamma,
            iter,
            max_iter,
            converged,
            rel_diff_crit,
            rel_diff_par,
        }
    }
}

pub(crate) fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}

/// Fits the group-lasso problem at penalty `mu_g` by block coordinate
/// descent, optionally warm-started from a previous solution.
///
/// Reaching `max_iter` sweeps is not an error; the returned model simply
/// carries `converged = false`.
pub fn group_lasso_fit(
    y: &Array1<f64>,
    grams: &EigenGram,
    mu_g: f64,
    cfg: &FitConfig,
    warm: Option<&MetaModel>,
) -> Result<MetaModel> {
    if !mu_g.is_finite() || mu_g <= 0.0 {
        return Err(Error::invalid(format!("mu_g must be positive, got {mu_g}")));
    }
    if y.len() != grams.n() {
        return Err(Error::invalid("response length does not match Gram matrices"));
    }
    let vmax = grams.len();
    cfg.validate(vmax)?;
    let muw = cfg.mu_weights(vmax);
    let n = grams.n();
    let sqrt_n = (n as f64).sqrt();

    let mut state = match warm {
        Some(model) => {
            if model.vmax() != vmax || model.n() != n {
                return Err(Error::invalid("warm-start model does not match Gram matrices"));
            }
            let rows = (0..vmax).map(|v| model.theta.row(v).to_owned()).collect();
            BcdState::from_theta(rows, grams)
        }
        None => BcdState::zeros(vmax, n),
    };

    state.update_intercept(y);
    let criterion = |state: &BcdState| -> f64 {
        state.rss(y)
            + sqrt_n
                * mu_g
                * state
                    .half_norms
                    .iter()
                    .zip(&muw)
                    .map(|(h, w)| w * h)
                    .sum::<f64>()
    };
    let mut prev_crit = criterion(&state);
    let mut iter = 0;
    let mut converged = false;
    let mut rel_diff_crit = f64::INFINITY;
    let mut rel_diff_par = f64::INFINITY;

    for sweep in 1..=cfg.max_iter {
        iter = sweep;
        let theta_prev: Vec<Array1<f64>> = state.theta.clone();
        let prev_frob = state.frobenius();
        state.update_intercept(y);
        for (v, w) in muw.iter().enumerate() {
            let pen = sqrt_n * mu_g * w;
            let r = state.residual(y, v);
            let eig = grams.eigen(v);
            let z = eig.to_eigen(r.view());
            let half2: f64 = z.iter().zip(&eig.values).map(|(zi, l)| l * zi * zi).sum();
            // zero iff ||(2/sqrt(n)) K^{1/2} R|| <= mu_g mu'_v, with the
            // boundary assigned to the zero branch
            if 2.0 * half2.sqrt() <= pen {
                state.set_zero(v);
            } else {
                let warm_b = (state.half_norms[v] > 0.0).then_some(state.half_norms[v]);
                let (theta_eigen, _rho) =
                    solve_rho(eig.values.view(), z.view(), pen, warm_b).map_err(|e| {
                        Error::numeric(format!(
                            "group {} at mu_g={mu_g}: {e}",
                            grams.groups().group(v).name()
                        ))
                    })?;
                state.set_group(v, grams, theta_eigen.view());
            }
        }
        state.refresh_total();
        let crit = criterion(&state);
        rel_diff_crit = relative_change(crit, prev_crit);
        rel_diff_par = state.frobenius_diff(&theta_prev) / prev_frob.max(f64::MIN_POSITIVE);
        if cfg.verbose {
            let active: Vec<String> = (0..vmax)
                .filter(|&v| state.theta[v].iter().any(|&x| x != 0.0))
                .map(|v| grams.groups().group(v).name())
                .collect();
            eprintln!(
                "[group-lasso mu_g={mu_g:.6e}] sweep {sweep}: crit={crit:.10e} \
                 rel_crit={rel_diff_crit:.3e} rel_par={rel_diff_par:.3e} active={active:?}"
            );
        }
        prev_crit = crit;
        if rel_diff_crit < cfg.crit_tol || rel_diff_par < cfg.par_tol {
            converged = true;
            break;
        }
    }

    let crit = prev_crit;
    Ok(state.into_model(
        y,
        grams,
        crit,
        mu_g,
        0.0,
        iter,
        cfg.max_iter,
        converged,
        rel_diff_crit,
        rel_diff_par,
    ))
}

/// Evaluates the group-lasso criterion at a model, recomputing every term
/// from the coefficients.
pub fn group_lasso_criterion(
    y: &Array1<f64>,
    grams: &EigenGram,
    model: &MetaModel,
    mu_g: f64,
    weights_mu: Option<&[f64]>,
) -> f64 {
    let n = grams.n() as f64;
    let mut fitted = Array1::from_elem(grams.n(), model.intercept);
    let mut penalty = 0.0;
    for v in 0..grams.len() {
        let eig = grams.eigen(v);
        let row = model.theta.row(v);
        fitted += &eig.matvec(row);
        let w = weights_mu.map_or(1.0, |w| w[v]);
        penalty += w * eig.half_norm2(row).sqrt();
    }
    let rss: f64 = y.iter().zip(&fitted).map(|(yi, fi)| (yi - fi) * (yi - fi)).sum();
    rss + n.sqrt() * mu_g * penalty
}

/// Largest relative violation of the stationarity conditions over all
/// groups: for active groups the residual of
/// `2 K_v (R_v - K_v theta_v) = sqrt(n) mu_g mu'_v K_v theta_v / ||K_v^{1/2} theta_v||`
/// relative to `||2 K_v R_v||`, and for inactive groups the amount by which
/// `||(2/sqrt(n)) K_v^{1/2} R_v||` exceeds `mu_g mu'_v`, relative to the
/// same scale.
pub fn kkt_residual(
    y: &Array1<f64>,
    grams: &EigenGram,
    model: &MetaModel,
    mu_g: f64,
    weights_mu: Option<&[f64]>,
) -> f64 {
    let n = grams.n();
    let sqrt_n = (n as f64).sqrt();
    let mut worst = 0.0f64;
    for v in 0..grams.len() {
        let eig = grams.eigen(v);
        let mut r = y - &model.fitted;
        r += &model.fit_v[v];
        let z = eig.to_eigen(r.view());
        let w = weights_mu.map_or(1.0, |w| w[v]);
        let pen = sqrt_n * mu_g * w;
        let scale: f64 = 2.0
            * z.iter()
                .zip(&eig.values)
                .map(|(zi, l)| (l * zi) * (l * zi))
                .sum::<f64>()
                .sqrt();
        let theta_eigen = eig.to_eigen(model.theta.row(v));
        let active = model.supp.binary_search(&v).is_ok();
        let viol = if active {
            let b: f64 = theta_eigen
                .iter()
                .zip(&eig.values)
                .map(|(t, l)| l * t * t)
                .sum::<f64>()
                .sqrt();
            let resid2: f64 = theta_eigen
                .iter()
                .zip(z.iter())
                .zip(&eig.values)
                .map(|((t, zi), l)| {
                    let g = 2.0 * l * (zi - l * t) - pen * l * t / b;
                    g * g
                })
                .sum();
            resid2.sqrt() / scale.max(f64::MIN_POSITIVE)
        } else {
            let half: f64 = z
                .iter()
                .zip(&eig.values)
                .map(|(zi, l)| l * zi * zi)
                .sum::<f64>()
                .sqrt();
            (2.0 * half - pen).max(0.0) / pen.max(f64::MIN_POSITIVE)
        };
        worst = worst.max(viol);
    }
    worst
}
