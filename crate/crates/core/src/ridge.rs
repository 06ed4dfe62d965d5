//! Block coordinate descent for the ridge-group-sparse criterion
//!
//! ```text
//! C(f0, theta) = ||Y - f0 - sum_v K_v theta_v||^2
//!                + sqrt(n) gamma sum_v gamma'_v ||K_v theta_v||
//!                + n mu sum_v mu'_v ||K_v^{1/2} theta_v||
//! ```
//!
//! The per-group subproblem splits into a zero test and a nonzero update.
//!
//! Zero test: theta_v = 0 is optimal iff
//! `J* = min { ||2 R_v - n mu K_v^{-1} t|| : ||K_v^{-1/2} t|| <= 1 }` does
//! not exceed `sqrt(n) gamma`. Substituting u = K_v^{-1/2} t reduces J* to
//! a trust-region-style secular equation in the eigenbasis. The sqrt(n)
//! scaling of the threshold comes from the stationarity system
//! `2 K_v R_v - n mu t = sqrt(n) gamma s`, `||K_v^{-1} s|| <= 1`.
//!
//! Nonzero update: theta_v solves
//! `theta = ((1 + alpha) K_v + beta I)^{-1} R_v` with
//! `alpha = sqrt(n) gamma / (2 ||K_v theta||)`,
//! `beta = n mu / (2 ||K_v^{1/2} theta||)`,
//! found by a damped two-variable fixed-point iteration on
//! `(||K_v theta||, ||K_v^{1/2} theta||)`, falling back to a pair of
//! nested monotone bisections when the iteration contracts too slowly
//! (which happens arbitrarily close to the activation boundary). The
//! returned point must satisfy the stationarity equation to 1e-8 relative.
//!
//! `FitConfig::paper_literal_zero_test` switches the whole empirical-norm
//! weighting to the bare gamma, turning the zero test into `J* <= gamma`
//! with the update rescaled to match; see the flag's documentation.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::gram::EigenGram;
use crate::group_lasso::{relative_change, solve_rho, BcdState};
use crate::model::{FitConfig, MetaModel};

const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITER: usize = 500;
const STATIONARITY_RTOL: f64 = 1e-8;

/// Computes `J* = min { ||2 R - c K^{-1} t|| : ||K^{-1/2} t|| <= 1 }` with
/// `c = n mu`, in the group's eigenbasis.
///
/// `z` holds the eigen-coordinates of the residual R. With u = K^{-1/2} t
/// the unconstrained minimizer has coordinates (2/c) lambda_i^{1/2} z_i; if
/// it lies inside the unit ball J* = 0, otherwise the multiplier kappa > 0
/// solving ||u(kappa)|| = 1, with
/// `u_i(kappa) = 2 c lambda_i^{1/2} z_i / (c^2 + kappa lambda_i)`,
/// is found by monotone bisection and J* is evaluated there.
pub fn zero_test_jstar(lam: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>, mu: f64, n: usize) -> f64 {
    let c = n as f64 * mu;
    let znorm2: f64 = z.iter().map(|zi| zi * zi).sum();
    if c == 0.0 {
        // the constraint cannot help: J(t) = ||2R|| for every feasible t
        return 2.0 * znorm2.sqrt();
    }
    let unconstrained2: f64 = lam
        .iter()
        .zip(z.iter())
        .map(|(&l, &zi)| {
            let u = 2.0 / c * l.sqrt() * zi;
            u * u
        })
        .sum();
    if unconstrained2 <= 1.0 {
        return 0.0;
    }
    // ||u(kappa)||^2 is strictly decreasing from ||u(0)|| > 1 to 0.
    let unorm2 = |kappa: f64| -> f64 {
        lam.iter()
            .zip(z.iter())
            .map(|(&l, &zi)| {
                let u = 2.0 * c * l.sqrt() * zi / (c * c + kappa * l);
                u * u
            })
            .sum()
    };
    let mut hi = 1.0f64.max(c * c / lam.iter().cloned().fold(f64::MIN_POSITIVE, f64::max));
    while unorm2(hi) >= 1.0 {
        hi *= 10.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        if unorm2(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let kappa = 0.5 * (lo + hi);
    // J at u(kappa): 2 z_i - c lambda^{-1/2} u_i = 2 z_i kappa lambda_i / (c^2 + kappa lambda_i)
    let j2: f64 = lam
        .iter()
        .zip(z.iter())
        .map(|(&l, &zi)| {
            let r = 2.0 * zi * kappa * l / (c * c + kappa * l);
            r * r
        })
        .sum();
    j2.sqrt()
}

/// The two norms entering the fixed point, evaluated at
/// theta_i = z_i / ((1 + alpha) lambda_i + beta):
/// returns (||K theta||, ||K^{1/2} theta||).
fn norms_at(lam: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>, alpha: f64, beta: f64) -> (f64, f64) {
    let mut a2 = 0.0;
    let mut b2 = 0.0;
    for (&l, &zi) in lam.iter().zip(z.iter()) {
        let t = zi / ((1.0 + alpha) * l + beta);
        let lt = l * t;
        a2 += lt * lt;
        b2 += l * t * t;
    }
    (a2.sqrt(), b2.sqrt())
}

fn theta_at(lam: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>, alpha: f64, beta: f64) -> Array1<f64> {
    Array1::from_iter(
        lam.iter()
            .zip(z.iter())
            .map(|(&l, &zi)| zi / ((1.0 + alpha) * l + beta)),
    )
}

/// Relative stationarity residual of a candidate theta (eigen-coordinates):
/// `||2 K (R - K theta) - c1 K^2 theta / a - c2 K theta / b||` over
/// `||2 K R||`.
fn stationarity_residual(
    lam: ArrayView1<'_, f64>,
    z: ArrayView1<'_, f64>,
    theta: ArrayView1<'_, f64>,
    c1: f64,
    c2: f64,
) -> f64 {
    let mut a2 = 0.0;
    let mut b2 = 0.0;
    for (&l, &t) in lam.iter().zip(theta.iter()) {
        let lt = l * t;
        a2 += lt * lt;
        b2 += l * t * t;
    }
    let (a, b) = (a2.sqrt(), b2.sqrt());
    if a == 0.0 || b == 0.0 {
        return f64::INFINITY;
    }
    let mut num2 = 0.0;
    let mut scale2 = 0.0;
    for ((&l, &zi), &t) in lam.iter().zip(z.iter()).zip(theta.iter()) {
        let g = 2.0 * l * (zi - l * t) - c1 * l * l * t / a - c2 * l * t / b;
        num2 += g * g;
        let s = 2.0 * l * zi;
        scale2 += s * s;
    }
    num2.sqrt() / scale2.sqrt().max(f64::MIN_POSITIVE)
}

/// Solves the nonzero-group stationarity equation in the eigenbasis.
///
/// `mu` and `gamma` arrive with any per-group weights already folded in;
/// internally c1 = sqrt(n) gamma and c2 = n mu. `warm_theta` seeds the
/// two-norm iteration; when absent (or zero) the seed is the group-lasso
/// update at the same Hilbert penalty, which exists because the zero test
/// has already failed. With gamma = 0 the update IS that group-lasso
/// update.
pub fn nonzero_update(
    lam: ArrayView1<'_, f64>,
    z: ArrayView1<'_, f64>,
    mu: f64,
    gamma: f64,
    n: usize,
    warm_theta: Option<ArrayView1<'_, f64>>,
) -> Result<Array1<f64>> {
    let c1 = (n as f64).sqrt() * gamma;
    let c2 = n as f64 * mu;
    if c1 == 0.0 {
        let (theta, _rho) = solve_rho(lam, z, c2, None)?;
        return Ok(theta);
    }

    // Seed (a, b) from the warm coefficients or the group-lasso update.
    let seed = match warm_theta {
        Some(t) if t.iter().any(|&x| x != 0.0) => {
            let mut a2 = 0.0;
            let mut b2 = 0.0;
            for (&l, &ti) in lam.iter().zip(t.iter()) {
                let lt = l * ti;
                a2 += lt * lt;
                b2 += l * ti * ti;
            }
            (a2.sqrt(), b2.sqrt())
        }
        _ => {
            let (gl_theta, _rho) = solve_rho(lam, z, c2, None)?;
            let mut a2 = 0.0;
            let mut b2 = 0.0;
            for (&l, &ti) in lam.iter().zip(gl_theta.iter()) {
                let lt = l * ti;
                a2 += lt * lt;
                b2 += l * ti * ti;
            }
            (a2.sqrt(), b2.sqrt())
        }
    };
    let (mut a, mut b) = seed;
    a = a.max(1e-300);
    b = b.max(1e-300);

    // Damped fixed-point iteration on (a, b).
    let mut fp_converged = false;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let alpha = c1 / (2.0 * a);
        let beta = c2 / (2.0 * b);
        let (na, nb) = norms_at(lam, z, alpha, beta);
        if !(na > 0.0 && nb > 0.0) {
            break;
        }
        let a_next = 0.5 * a + 0.5 * na;
        let b_next = 0.5 * b + 0.5 * nb;
        let rel = ((a_next - a).abs() / a.max(1e-300)).max((b_next - b).abs() / b.max(1e-300));
        a = a_next;
        b = b_next;
        if rel < FIXED_POINT_TOL {
            fp_converged = true;
            break;
        }
    }

    let candidate = theta_at(lam, z, c1 / (2.0 * a), c2 / (2.0 * b));
    if fp_converged && stationarity_residual(lam, z, candidate.view(), c1, c2) <= STATIONARITY_RTOL {
        return Ok(candidate);
    }

    // Derivative-free fallback: nested monotone bisections on the
    // stationarity system, robust arbitrarily close to the activation
    // boundary (where the damped iteration contracts too slowly).
    if let Some((alpha, beta)) = nested_bisection(lam, z, c1, c2, c1 / (2.0 * a)) {
        let theta = theta_at(lam, z, alpha, beta);
        if stationarity_residual(lam, z, theta.view(), c1, c2) <= STATIONARITY_RTOL {
            return Ok(theta);
        }
    }
    Err(Error::numeric(
        "two-norm fixed point did not reach the stationarity tolerance".to_string(),
    ))
}

/// Solves the stationarity system by two nested bisections.
///
/// For fixed alpha, `y(beta) = 2 beta ||K^{1/2} theta(alpha, beta)|| - c2`
/// is increasing in beta with y(0) < 0 and limit 2||K^{1/2}R|| - c2 > 0
/// (the zero test failed), so the inner root beta(alpha) always exists.
/// The outer function `h(alpha) = 2 alpha ||K theta(alpha, beta(alpha))|| - c1`
/// starts below zero and has exactly one sign change: a root of h is
/// a nonzero stationary point of the strictly convex group subproblem,
/// which is unique. Bisection therefore cannot be misled, only slow.
fn nested_bisection(
    lam: ArrayView1<'_, f64>,
    z: ArrayView1<'_, f64>,
    c1: f64,
    c2: f64,
    alpha_seed: f64,
) -> Option<(f64, f64)> {
    let solve_beta = |alpha: f64| -> Option<f64> {
        let y_of = |beta: f64| 2.0 * beta * norms_at(lam, z, alpha, beta).1 - c2;
        let mut hi = c2.max(1.0);
        let mut grow = 0;
        while y_of(hi) <= 0.0 {
            hi *= 10.0;
            grow += 1;
            if grow > 320 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if y_of(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let h_of = |alpha: f64| -> Option<f64> {
        let beta = solve_beta(alpha)?;
        Some(2.0 * alpha * norms_at(lam, z, alpha, beta).0 - c1)
    };

    // Bracket the outer root around the seed.
    let mut lo = alpha_seed.clamp(1e-280, 1e280);
    let mut steps = 0;
    while h_of(lo)? >= 0.0 {
        lo /= 10.0;
        steps += 1;
        if lo < 1e-290 || steps > 600 {
            // h(0+) = -c1 < 0 analytically; treat failure to see it as a
            // degenerate instance
            return None;
        }
    }
    let mut hi = lo;
    steps = 0;
    loop {
        hi *= 10.0;
        steps += 1;
        if hi > 1e290 || steps > 600 {
            return None;
        }
        if h_of(hi)? > 0.0 {
            break;
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if h_of(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let beta = solve_beta(alpha)?;
    Some((alpha, beta))
}

/// Runs the two-step ridge-group-sparse block coordinate descent.
///
/// `init` must be a group-lasso solution at the same mu; Step 1 iterates
/// over its active support only, and Step 2 (optional) re-runs the descent
/// over all groups from the Step 1 solution so that no group is missed.
pub fn rgs_fit(
    y: &Array1<f64>,
    grams: &EigenGram,
    mu: f64,
    gamma: f64,
    init: &MetaModel,
    cfg: &FitConfig,
    do_step_two: bool,
) -> Result<MetaModel> {
    if !mu.is_finite() || mu < 0.0 || !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::invalid("mu and gamma must be non-negative"));
    }
    if y.len() != grams.n() {
        return Err(Error::invalid("response length does not match Gram matrices"));
    }
    let vmax = grams.len();
    cfg.validate(vmax)?;
    if init.vmax() != vmax || init.n() != grams.n() {
        return Err(Error::invalid("initial model does not match Gram matrices"));
    }
    let muw = cfg.mu_weights(vmax);
    let gamw = cfg.gamma_weights(vmax);
    let n = grams.n();
    let sqrt_n = (n as f64).sqrt();
    // Coefficient of ||K_v theta_v|| in the criterion actually minimized.
    // The literal variant drops the sqrt(n) factor from BOTH the zero test
    // and the nonzero update: scaling only the test would ask the update
    // for stationary points that do not exist whenever
    // gamma < J* <= sqrt(n) gamma.
    let emp_scale = if cfg.paper_literal_zero_test { 1.0 } else { sqrt_n };

    let rows = (0..vmax).map(|v| init.theta.row(v).to_owned()).collect();
    let mut state = BcdState::from_theta(rows, grams);
    state.update_intercept(y);

    let criterion = |state: &BcdState| -> f64 {
        let emp: f64 = state
            .fits
            .iter()
            .zip(&gamw)
            .map(|(fit, w)| w * fit.iter().map(|x| x * x).sum::<f64>().sqrt())
            .sum();
        let hil: f64 = state.half_norms.iter().zip(&muw).map(|(h, w)| w * h).sum();
        state.rss(y) + emp_scale * gamma * emp + n as f64 * mu * hil
    };

    let mut total_iter = 0;
    let mut all_converged = true;
    let mut rel_diff_crit = 0.0;
    let mut rel_diff_par = 0.0;
    let mut prev_crit = criterion(&state);

    let steps: Vec<Vec<usize>> = {
        let mut s = vec![init.supp.clone()];
        if do_step_two {
            s.push((0..vmax).collect());
        }
        s
    };

    for (step_idx, active) in steps.iter().enumerate() {
        let mut converged = active.is_empty();
        for sweep in 1..=cfg.max_iter {
            if active.is_empty() {
                break;
            }
            total_iter += 1;
            let theta_prev: Vec<Array1<f64>> = state.theta.clone();
            let prev_frob = state.frobenius();
            state.update_intercept(y);
            for &v in active {
                let r = state.residual(y, v);
                let eig = grams.eigen(v);
                let z = eig.to_eigen(r.view());
                let jstar = zero_test_jstar(eig.values.view(), z.view(), mu * muw[v], n);
                let threshold = emp_scale * gamma * gamw[v];
                if jstar <= threshold {
                    state.set_zero(v);
                } else {
                    let warm = if state.half_norms[v] > 0.0 {
                        Some(eig.to_eigen(state.theta[v].view()))
                    } else {
                        None
                    };
                    // nonzero_update puts sqrt(n) in front of its gamma, so
                    // hand it threshold / sqrt(n) to keep test and update
                    // on the same criterion
                    let theta_eigen = nonzero_update(
                        eig.values.view(),
                        z.view(),
                        mu * muw[v],
                        threshold / sqrt_n,
                        n,
                        warm.as_ref().map(|w| w.view()),
                    )
                    .map_err(|e| {
                        Error::numeric(format!(
                            "group {} at (mu={mu}, gamma={gamma}): {e}",
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
                    "[rgs mu={mu:.6e} gamma={gamma:.6e} step {}] sweep {sweep}: crit={crit:.10e} \
                     rel_crit={rel_diff_crit:.3e} rel_par={rel_diff_par:.3e} active={active:?}",
                    step_idx + 1
                );
            }
            prev_crit = crit;
            if rel_diff_crit < cfg.crit_tol || rel_diff_par < cfg.par_tol {
                converged = true;
                break;
            }
        }
        all_converged &= converged;
    }

    let crit = prev_crit;
    Ok(state.into_model(
        y,
        grams,
        crit,
        mu,
        gamma,
        total_iter,
        cfg.max_iter,
        all_converged,
        rel_diff_crit,
        rel_diff_par,
    ))
}

/// Evaluates the ridge-group-sparse criterion at a model, recomputing every
/// term from the coefficients.
pub fn rgs_criterion(
    y: &Array1<f64>,
    grams: &EigenGram,
    model: &MetaModel,
    mu: f64,
    gamma: f64,
    weights_gamma: Option<&[f64]>,
    weights_mu: Option<&[f64]>,
) -> f64 {
    let n = grams.n() as f64;
    let mut fitted = Array1::from_elem(grams.n(), model.intercept);
    let mut emp = 0.0;
    let mut hil = 0.0;
    for v in 0..grams.len() {
        let eig = grams.eigen(v);
        let row = model.theta.row(v);
        let fit = eig.matvec(row);
        emp += weights_gamma.map_or(1.0, |w| w[v]) * fit.iter().map(|x| x * x).sum::<f64>().sqrt();
        fitted += &fit;
        hil += weights_mu.map_or(1.0, |w| w[v]) * eig.half_norm2(row).sqrt();
    }
    let rss: f64 = y.iter().zip(&fitted).map(|(yi, fi)| (yi - fi) * (yi - fi)).sum();
    rss + n.sqrt() * gamma * emp + n * mu * hil
}
