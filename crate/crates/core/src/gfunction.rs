//! The g-function benchmark: data generation on Latin hypercube designs,
//! analytic Sobol ground truth, and the evaluation metrics used to score
//! fitted meta-models against it.
//!
//! The test function over [0,1]^d is
//!
//! ```text
//! m(x) = prod_a (|4 x_a - 2| + c_a) / (1 + c_a),   c_a > 0,
//! ```
//!
//! whose Sobol indices are exactly
//! S_v = prod_{a in v} D_a / D with D_a = 1/(3 (1+c_a)^2) and
//! D = prod_a (D_a + 1) - 1.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::design::DesignData;
use crate::error::{Error, Result};
use crate::gram::cross_gram;
use crate::groups::{build_group_set, GroupSet};
use crate::kernel::KernelKind;
use crate::model::MetaModel;
use crate::select::predict;

/// RNG stream used for the held-out noiseless evaluation design.
pub const EVAL_STREAM: u64 = u64::MAX;

/// RNG streams of repetition `rep`: (training data, testing data). Each
/// repetition draws from its own pair of streams of the seeded generator,
/// so repetitions are independent and individually reproducible.
pub fn rep_streams(rep: u64) -> (u64, u64) {
    (2 * rep, 2 * rep + 1)
}

/// Specification of a g-function experiment.
#[derive(Debug, Clone)]
pub struct GFunctionSpec {
    pub d: usize,
    /// Positive coefficients c_a; small values make a variable important.
    pub c: Vec<f64>,
    /// Standard deviation of the additive Gaussian noise.
    pub sigma: f64,
    pub seed: u64,
}

impl GFunctionSpec {
    pub fn new(d: usize, c: Vec<f64>, sigma: f64, seed: u64) -> Result<Self> {
        if c.len() != d {
            return Err(Error::invalid(format!("expected {d} coefficients, got {}", c.len())));
        }
        if c.iter().any(|&ci| !ci.is_finite() || ci <= 0.0) {
            return Err(Error::invalid("g-function coefficients must be strictly positive"));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::invalid("sigma must be non-negative"));
        }
        Ok(GFunctionSpec { d, c, sigma, seed })
    }

    /// The canonical coefficients c = (0.2, 0.6, 0.8, 100, ..., 100) with
    /// noise level 0.2: the first three variables carry nearly all of the
    /// variance.
    pub fn canonical(d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d must be at least 1"));
        }
        let base = [0.2, 0.6, 0.8];
        let c = (0..d).map(|a| if a < 3 { base[a] } else { 100.0 }).collect();
        GFunctionSpec::new(d, c, 0.2, seed)
    }
}

/// Evaluates the g-function at one point.
pub fn g_function(x: &[f64], c: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), c.len());
    x.iter()
        .zip(c)
        .map(|(&xi, &ci)| ((4.0 * xi - 2.0).abs() + ci) / (1.0 + ci))
        .product()
}

/// Exact Sobol indices of the g-function for every group up to `dmax`,
/// aligned with the canonical order of [`build_group_set`]. The total
/// variance D always uses all d variables.
pub fn analytic_sobol(c: &[f64], dmax: usize) -> Result<(GroupSet, Vec<f64>)> {
    let d = c.len();
    let groups = build_group_set(d, dmax)?;
    let d_a: Vec<f64> = c.iter().map(|&ci| 1.0 / (3.0 * (1.0 + ci) * (1.0 + ci))).collect();
    let total = d_a.iter().map(|&da| da + 1.0).product::<f64>() - 1.0;
    let indices = groups
        .iter()
        .map(|g| g.vars().iter().map(|&a| d_a[a - 1]).product::<f64>() / total)
        .collect();
    Ok((groups, indices))
}

/// Stratified Latin hypercube sample: each column places exactly one point
/// uniformly inside each stratum [k/n, (k+1)/n), in a random stratum order.
pub fn lhs_sample<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Array2<f64> {
    let mut x = Array2::zeros((n, d));
    let mut strata: Vec<usize> = (0..n).collect();
    for a in 0..d {
        strata.shuffle(rng);
        for i in 0..n {
            let u: f64 = rng.random();
            x[[i, a]] = (strata[i] as f64 + u) / n as f64;
        }
    }
    x
}

/// Draws one dataset Y = m(X) + sigma * eps on a fresh Latin hypercube
/// design, using the given stream of the spec's seeded generator.
pub fn generate_dataset(spec: &GFunctionSpec, n: usize, stream: u64) -> Result<DesignData> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let x = lhs_sample(n, spec.d, &mut rng);
    let y = Array1::from_shape_fn(n, |i| {
        let m = g_function(x.row(i).as_slice().expect("contiguous row"), &spec.c);
        let eps: f64 = rng.sample(StandardNormal);
        m + spec.sigma * eps
    });
    DesignData::new(x, y)
}

/// Noiseless evaluation design on the dedicated stream: the points and the
/// true g-function values there.
pub fn evaluation_design(spec: &GFunctionSpec, n: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(EVAL_STREAM);
    let x = lhs_sample(n, spec.d, &mut rng);
    let m = Array1::from_shape_fn(n, |i| {
        g_function(x.row(i).as_slice().expect("contiguous row"), &spec.c)
    });
    (x, m)
}

/// Benchmark scores of a set of repetitions.
#[derive(Debug, Clone)]
pub struct BenchMetrics {
    /// Mean over repetitions of the mean squared error of the selected
    /// meta-model against the true function on the evaluation design.
    pub gpe: f64,
    /// The per-repetition values behind `gpe`.
    pub gpe_by_rep: Vec<f64>,
    /// Sobol mean squared error sum_v (bias_v^2 + variance_v), unscaled.
    pub mse: f64,
    /// Relative Sobol error sum_v |S_hat_v - S_v| / S_v over groups whose
    /// true index exceeds the reporting threshold, using the mean estimate
    /// across repetitions.
    pub re: f64,
}

impl BenchMetrics {
    pub fn median_gpe(&self) -> f64 {
        let mut v = self.gpe_by_rep.clone();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite GPE"));
        if v.is_empty() {
            return f64::NAN;
        }
        let k = v.len();
        if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        }
    }
}

/// The selected model of one repetition, with everything needed to
/// evaluate it at new points.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub train: DesignData,
    pub model: MetaModel,
    /// Empirical Sobol indices of the model, canonical group order.
    pub indices: Vec<f64>,
}

/// Scores repetitions against the analytic truth.
///
/// `truth` must align with `groups`; `re_min_truth` is the reporting
/// threshold on the true indices for the relative-error sum (indices are
/// conventionally displayed when they exceed 1e-2 on the x100 scale, i.e.
/// 1e-4 as fractions).
pub fn evaluate_metrics(
    reps: &[RepOutcome],
    spec: &GFunctionSpec,
    groups: &GroupSet,
    kind: KernelKind,
    n_eval: usize,
    truth: &[f64],
    re_min_truth: f64,
) -> Result<BenchMetrics> {
    if reps.is_empty() {
        return Err(Error::invalid("need at least one repetition"));
    }
    if truth.len() != groups.len() {
        return Err(Error::invalid("truth vector does not align with the group set"));
    }
    let (x_eval, m_eval) = evaluation_design(spec, n_eval);

    let mut gpe_by_rep = Vec::with_capacity(reps.len());
    for rep in reps {
        let cross = cross_gram(&rep.train, x_eval.view(), groups, kind)?;
        let pred = predict(&rep.model, &cross, true)?;
        let mse = pred
            .iter()
            .zip(&m_eval)
            .map(|(p, m)| (p - m) * (p - m))
            .sum::<f64>()
            / n_eval as f64;
        gpe_by_rep.push(mse);
    }
    let gpe = gpe_by_rep.iter().sum::<f64>() / reps.len() as f64;

    let nr = reps.len() as f64;
    let mut mse = 0.0;
    let mut re = 0.0;
    for (v, &s_true) in truth.iter().enumerate() {
        let mean_est = reps.iter().map(|r| r.indices[v]).sum::<f64>() / nr;
        let bias = mean_est - s_true;
        let var = reps.iter().map(|r| (r.indices[v] - mean_est).powi(2)).sum::<f64>() / nr;
        mse += bias * bias + var;
        if s_true > re_min_truth {
            re += bias.abs() / s_true;
        }
    }
    Ok(BenchMetrics { gpe, gpe_by_rep, mse, re })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use itertools::Itertools;

    #[test]
    fn g_function_unit_factors() {
        // |4x-2| = 1 at x = 0.25 and 0.75 makes every factor 1
        let c = vec![0.2, 0.6, 0.8, 100.0];
        assert_abs_diff_eq!(g_function(&[0.25; 4], &c), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g_function(&[0.75; 4], &c), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g_function(&[0.5], &[0.2]), 0.2 / 1.2, epsilon = 1e-15);
        // at the origin every factor is (2 + c)/(1 + c)
        let expect: f64 = c.iter().map(|&ci| (2.0 + ci) / (1.0 + ci)).product();
        assert_abs_diff_eq!(g_function(&[0.0; 4], &c), expect, epsilon = 1e-15);
    }

    #[test]
    fn g_function_range() {
        let spec = GFunctionSpec::canonical(5, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let upper: f64 = spec.c.iter().map(|&ci| (2.0 + ci) / (1.0 + ci)).product();
        for _ in 0..2000 {
            let x: Vec<f64> = (0..5).map(|_| rng.random()).collect();
            let m = g_function(&x, &spec.c);
            assert!(m > 0.0 && m <= upper + 1e-12);
        }
    }

    #[test]
    fn analytic_variance_term() {
        // c = 0.2: D_a = 1/(3 * 1.44)
        let da = 1.0 / (3.0 * 1.2f64 * 1.2);
        assert_abs_diff_eq!(da, 0.23148148148148148, epsilon = 1e-16);
    }

    #[test]
    fn analytic_sobol_sums_to_one_over_all_groups() {
        let spec = GFunctionSpec::canonical(10, 0).unwrap();
        let (_, indices) = analytic_sobol(&spec.c, 10).unwrap();
        assert_eq!(indices.len(), 1023);
        let total: f64 = indices.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn analytic_sobol_canonical_values() {
        // Exact values of the canonical-coefficient indices at d = 10.
        let spec = GFunctionSpec::canonical(10, 0).unwrap();
        let (groups, indices) = analytic_sobol(&spec.c, 3).unwrap();
        let by_name = |name: &str| {
            let pos = groups.iter().position(|g| g.name() == name).unwrap();
            indices[pos]
        };
        assert_abs_diff_eq!(by_name("v1"), 0.4323732202736639, epsilon = 1e-12);
        assert_abs_diff_eq!(by_name("v2"), 0.24320993640393596, epsilon = 1e-12);
        assert_abs_diff_eq!(by_name("v3"), 0.192165875677184, epsilon = 1e-12);
        assert_abs_diff_eq!(by_name("v1.2"), 0.05629859638979998, epsilon = 1e-12);
        assert_abs_diff_eq!(by_name("v1.3"), 0.044482841591940735, epsilon = 1e-12);
        assert_abs_diff_eq!(by_name("v2.3"), 0.025021598395466662, epsilon = 1e-12);
        assert_abs_diff_eq!(by_name("v1.2.3"), 0.005792036665617281, epsilon = 1e-12);
        // the three main variables explain 99.93% of the variance
        let seven: f64 = ["v1", "v2", "v3", "v1.2", "v1.3", "v2.3", "v1.2.3"]
            .iter()
            .map(|n| by_name(n))
            .sum();
        assert_abs_diff_eq!(seven, 0.9993441053976084, epsilon = 1e-10);
    }

    #[test]
    fn analytic_matches_quasi_monte_carlo() {
        // Validate the per-variable variances D_a against a Kronecker
        // lattice integration of the main-effect conditional means.
        let c: [f64; 3] = [0.2, 0.6, 0.8];
        let d_a: Vec<f64> = c.iter().map(|&ci| 1.0 / (3.0 * (1.0 + ci).powi(2))).collect();
        let n = 1_000_000usize;
        for (a, &da) in d_a.iter().enumerate() {
            // Var over x_a of E[g_a(x_a)] since the factors are independent
            // and the off-factors have unit mean.
            let alpha = [2f64, 3.0, 5.0][a].sqrt().fract();
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for i in 1..=n {
                let x = (i as f64 * alpha).fract();
                let f = ((4.0 * x - 2.0).abs() + c[a]) / (1.0 + c[a]);
                sum += f;
                sum2 += f * f;
            }
            let mean = sum / n as f64;
            let var = sum2 / n as f64 - mean * mean;
            assert!(
                (var - da).abs() / da < 5e-3,
                "variable {a}: qmc {var} vs analytic {da}"
            );
        }
    }

    #[test]
    fn lhs_hits_every_stratum_exactly_once() {
        let n = 37;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = lhs_sample(n, 3, &mut rng);
        for a in 0..3 {
            let mut counts = vec![0usize; n];
            for i in 0..n {
                let k = (x[[i, a]] * n as f64).floor() as usize;
                counts[k.min(n - 1)] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1), "column {a}: {counts:?}");
        }
    }

    #[test]
    fn datasets_are_deterministic_per_stream() {
        let spec = GFunctionSpec::canonical(4, 42).unwrap();
        let d1 = generate_dataset(&spec, 20, 0).unwrap();
        let d2 = generate_dataset(&spec, 20, 0).unwrap();
        assert_eq!(d1.x(), d2.x());
        assert_eq!(d1.y(), d2.y());
        let d3 = generate_dataset(&spec, 20, 1).unwrap();
        assert_ne!(d1.x(), d3.x());
    }

    #[test]
    fn sigma_zero_reproduces_g_exactly() {
        let mut spec = GFunctionSpec::canonical(3, 5).unwrap();
        spec.sigma = 0.0;
        let data = generate_dataset(&spec, 10, 0).unwrap();
        for i in 0..10 {
            let m = g_function(data.x().row(i).as_slice().unwrap(), &spec.c);
            assert_abs_diff_eq!(data.y()[i], m, epsilon = 1e-15);
        }
    }

    #[test]
    fn noise_is_centered() {
        let mut spec = GFunctionSpec::canonical(1, 77).unwrap();
        spec.sigma = 1.0;
        let n = 100_000;
        let data = generate_dataset(&spec, n, 0).unwrap();
        let resid_mean = (0..n)
            .map(|i| data.y()[i] - g_function(data.x().row(i).as_slice().unwrap(), &spec.c))
            .sum::<f64>()
            / n as f64;
        assert!(resid_mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn exact_indices_give_zero_re_and_mse() {
        let spec = GFunctionSpec::canonical(3, 1).unwrap();
        let (groups, truth) = analytic_sobol(&spec.c, 2).unwrap();
        let data = generate_dataset(&spec, 12, 0).unwrap();
        let model = MetaModel::null_model(data.y(), groups.len(), 1.0, 0.0);
        let rep = RepOutcome { train: data, model, indices: truth.clone() };
        let metrics = evaluate_metrics(
            &[rep],
            &spec,
            &groups,
            KernelKind::Matern,
            64,
            &truth,
            1e-4,
        )
        .unwrap();
        assert_abs_diff_eq!(metrics.mse, 0.0, epsilon = 1e-18);
        assert_abs_diff_eq!(metrics.re, 0.0, epsilon = 1e-15);
        assert!(metrics.gpe > 0.0); // the null model does not predict g
    }

    #[test]
    fn re_threshold_selects_display_groups() {
        let spec = GFunctionSpec::canonical(10, 1).unwrap();
        let (_, truth) = analytic_sobol(&spec.c, 3).unwrap();
        let over: Vec<usize> = truth
            .iter()
            .positions(|&s| s > 1e-4)
            .collect();
        assert_eq!(over.len(), 7);
    }
}
