//! Gram matrices of the centered group kernels and their spectra.
//!
//! For each variable a, (K_a)_{ii'} = k0_a(X_ai, X_ai'); for a group v the
//! matrix K_v is the entrywise (Hadamard) product of its member variables'
//! matrices. Every K_v is symmetrized, eigendecomposed, and optionally
//! shifted so that its smallest eigenvalue is at least lambda_max * tol.
//! The solvers afterwards only ever touch the eigenpairs, so the corrected
//! matrix K_v + eps I is what defines the optimization problems.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{Eigh, UPLO};
use rayon::prelude::*;

use crate::design::{validate_unit_range, DesignData};
use crate::error::{Error, Result};
use crate::groups::GroupSet;
use crate::kernel::{centered_kernel_with, double_mean, mean_embedding, KernelKind};

/// Maximum number of eigenvalue shifts before the correction gives up.
/// Floating-point noise needs two rounds; anything past a handful means the
/// matrix was not remotely positive semi-definite.
const MAX_CORRECTION_ROUNDS: usize = 64;

/// Eigendecomposition of one corrected group Gram matrix.
#[derive(Debug, Clone)]
pub struct GroupEigen {
    /// Eigenvalues in descending order; strictly positive after correction.
    pub values: Array1<f64>,
    /// Orthonormal eigenvectors, column i paired with values[i].
    pub vectors: Array2<f64>,
    /// Whether the eigenvalues were shifted.
    pub corrected: bool,
}

impl GroupEigen {
    /// Q^T x: coordinates of `x` in the eigenbasis.
    pub fn to_eigen(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.vectors.t().dot(&x)
    }

    /// Q z: back from eigen-coordinates.
    pub fn from_eigen(&self, z: ArrayView1<'_, f64>) -> Array1<f64> {
        self.vectors.dot(&z)
    }

    /// K_v x through the eigenpairs.
    pub fn matvec(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let z = self.to_eigen(x);
        self.from_eigen((&z * &self.values).view())
    }

    /// Dense reconstruction Q diag(lambda) Q^T.
    pub fn dense(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.values.view().insert_axis(Axis(0));
        scaled.dot(&self.vectors.t())
    }

    /// ||K^{1/2} x||^2 = sum_i lambda_i (q_i . x)^2.
    pub fn half_norm2(&self, x: ArrayView1<'_, f64>) -> f64 {
        let z = self.to_eigen(x);
        z.iter().zip(&self.values).map(|(zi, li)| li * zi * zi).sum()
    }
}

/// The eigendecompositions of all group Gram matrices for one dataset.
#[derive(Debug, Clone)]
pub struct EigenGram {
    groups: GroupSet,
    kind: KernelKind,
    n: usize,
    tol: f64,
    eigs: Vec<GroupEigen>,
}

impl EigenGram {
    pub fn groups(&self) -> &GroupSet {
        &self.groups
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.eigs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigs.is_empty()
    }

    pub fn eigen(&self, v: usize) -> &GroupEigen {
        &self.eigs[v]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GroupEigen> {
        self.eigs.iter()
    }

    pub(crate) fn from_parts(
        groups: GroupSet,
        kind: KernelKind,
        n: usize,
        tol: f64,
        eigs: Vec<GroupEigen>,
    ) -> Self {
        EigenGram { groups, kind, n, tol, eigs }
    }
}

/// Centered Gram matrix of a single variable's column.
fn variable_gram(kind: KernelKind, column: ArrayView1<'_, f64>) -> Array2<f64> {
    let n = column.len();
    let e2 = double_mean(kind);
    let h: Vec<f64> = column.iter().map(|&x| mean_embedding(kind, x)).collect();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let val = centered_kernel_with(kind, column[i], column[j], h[i], h[j], e2);
            k[[i, j]] = val;
            k[[j, i]] = val;
        }
    }
    k
}

/// Shifts all eigenvalues by lambda_max * tol until the smallest one clears
/// lambda_max * tol, re-checking against the shifted spectrum each round.
fn correct_eigenvalues(values: &mut Array1<f64>, tol: f64, name: &str) -> Result<bool> {
    let mut corrected = false;
    for _ in 0..MAX_CORRECTION_ROUNDS {
        let lmax = values[0];
        let lmin = values[values.len() - 1];
        if lmin >= lmax * tol {
            return Ok(corrected);
        }
        if lmax <= 0.0 {
            return Err(Error::numeric(format!(
                "group {name}: largest eigenvalue {lmax} is not positive, cannot correct"
            )));
        }
        let eps = lmax * tol;
        values.mapv_inplace(|l| l + eps);
        corrected = true;
    }
    Err(Error::numeric(format!(
        "group {name}: eigenvalue correction did not stabilize after {MAX_CORRECTION_ROUNDS} rounds"
    )))
}

fn decompose_group(kv: Array2<f64>, correction: bool, tol: f64, name: &str) -> Result<GroupEigen> {
    if kv.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("group {name}: non-finite Gram entry")));
    }
    // guard floating-point asymmetry before handing to the symmetric solver
    let sym = 0.5 * (&kv + &kv.t());
    let (vals, vecs) = sym
        .eigh(UPLO::Lower)
        .map_err(|e| Error::numeric(format!("group {name}: eigendecomposition failed: {e}")))?;
    // LAPACK returns ascending order; flip to descending.
    let mut values = vals.slice(s![..;-1]).to_owned();
    let vectors = vecs.slice(s![.., ..;-1]).as_standard_layout().to_owned();
    let corrected = if correction {
        correct_eigenvalues(&mut values, tol, name)?
    } else {
        false
    };
    Ok(GroupEigen { values, vectors, corrected })
}

/// Builds and eigendecomposes the Gram matrices of every group.
///
/// With `correction` on (the default in practice), each spectrum is shifted
/// so the solved problems see strictly positive definite matrices; `tol` is
/// the relative eigenvalue floor, 1e-8 unless there is a reason to deviate.
pub fn compute_gram(
    data: &DesignData,
    groups: &GroupSet,
    kind: KernelKind,
    correction: bool,
    tol: f64,
) -> Result<EigenGram> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    if groups.d() != data.d() {
        return Err(Error::invalid(format!(
            "group set is over {} variables but design has {} columns",
            groups.d(),
            data.d()
        )));
    }
    let per_var: Vec<Array2<f64>> = (0..data.d())
        .into_par_iter()
        .map(|a| variable_gram(kind, data.x().column(a)))
        .collect();

    let eigs: Vec<GroupEigen> = groups
        .groups()
        .par_iter()
        .map(|g| {
            let mut kv = per_var[g.vars()[0] - 1].clone();
            for &a in &g.vars()[1..] {
                kv *= &per_var[a - 1];
            }
            decompose_group(kv, correction, tol, &g.name())
        })
        .collect::<Result<_>>()?;

    Ok(EigenGram::from_parts(groups.clone(), kind, data.n(), tol, eigs))
}

/// Cross Gram matrices between training and test points.
///
/// Entry (j, i) of the matrix for group v is k_v(X_vi, Xtest_vj), built from
/// the same centered kernels as the training Gram but never corrected:
/// the eigenvalue shift is a training-side repair only.
pub fn cross_gram(
    train: &DesignData,
    xtest: ArrayView2<'_, f64>,
    groups: &GroupSet,
    kind: KernelKind,
) -> Result<Vec<Array2<f64>>> {
    let per_var = cross_variable_grams(train, xtest, groups, kind)?;
    Ok(groups
        .groups()
        .iter()
        .map(|g| {
            let mut kv = per_var[g.vars()[0] - 1].clone();
            for &a in &g.vars()[1..] {
                kv *= &per_var[a - 1];
            }
            kv
        })
        .collect())
}

/// Per-variable cross matrices (n_test x n); the per-group products are
/// Hadamard products of these.
pub(crate) fn cross_variable_grams(
    train: &DesignData,
    xtest: ArrayView2<'_, f64>,
    groups: &GroupSet,
    kind: KernelKind,
) -> Result<Vec<Array2<f64>>> {
    if xtest.ncols() != train.d() {
        return Err(Error::invalid(format!(
            "test design has {} columns, training design has {}",
            xtest.ncols(),
            train.d()
        )));
    }
    if groups.d() != train.d() {
        return Err(Error::invalid("group set does not match design dimension"));
    }
    validate_unit_range(&xtest.to_owned())?;
    let n = train.n();
    let m = xtest.nrows();
    let e2 = double_mean(kind);
    Ok((0..train.d())
        .map(|a| {
            let col = train.x().column(a);
            let tcol = xtest.column(a);
            let h: Vec<f64> = col.iter().map(|&x| mean_embedding(kind, x)).collect();
            let ht: Vec<f64> = tcol.iter().map(|&x| mean_embedding(kind, x)).collect();
            let mut c = Array2::zeros((m, n));
            for j in 0..m {
                for i in 0..n {
                    c[[j, i]] = centered_kernel_with(kind, col[i], tcol[j], h[i], ht[j], e2);
                }
            }
            c
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::build_group_set;
    use crate::kernel::centered_kernel;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn toy_data() -> DesignData {
        let x = array![[0.0], [1.0]];
        let y = array![0.0, 1.0];
        DesignData::new(x, y).unwrap()
    }

    #[test]
    fn brownian_two_point_gram() {
        // k0(0,0)=0.25, k0(1,1)=0.3125, k0(0,1)=-0.125 from the closed form.
        let data = toy_data();
        let groups = build_group_set(1, 1).unwrap();
        let gram = compute_gram(&data, &groups, KernelKind::Brownian, false, 1e-8).unwrap();
        let k = gram.eigen(0).dense();
        assert_abs_diff_eq!(k[[0, 0]], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(k[[1, 1]], 0.3125, epsilon = 1e-12);
        assert_abs_diff_eq!(k[[0, 1]], -0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(k[[1, 0]], -0.125, epsilon = 1e-12);
    }

    #[test]
    fn hadamard_matches_direct_group_kernel() {
        let x = array![
            [0.12, 0.91, 0.50],
            [0.75, 0.08, 0.33],
            [0.40, 0.64, 0.99],
            [0.05, 0.37, 0.21]
        ];
        let y = array![0.0, 0.0, 0.0, 0.0];
        let data = DesignData::new(x.clone(), y).unwrap();
        let groups = build_group_set(3, 3).unwrap();
        for kind in KernelKind::ALL {
            let gram = compute_gram(&data, &groups, kind, false, 1e-8).unwrap();
            for (v, g) in groups.iter().enumerate() {
                let k = gram.eigen(v).dense();
                for i in 0..4 {
                    for j in 0..4 {
                        let direct: f64 = g
                            .vars()
                            .iter()
                            .map(|&a| centered_kernel(kind, x[[i, a - 1]], x[[j, a - 1]]))
                            .product();
                        assert_abs_diff_eq!(k[[i, j]], direct, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn correction_establishes_eigenvalue_floor() {
        // Duplicated rows force an exactly singular Gram matrix.
        let x = array![[0.3, 0.3], [0.3, 0.3], [0.8, 0.1]];
        let y = array![0.0, 0.0, 0.0];
        let data = DesignData::new(x, y).unwrap();
        let groups = build_group_set(2, 2).unwrap();
        let tol = 1e-8;
        let gram = compute_gram(&data, &groups, KernelKind::Gaussian, true, tol).unwrap();
        for (v, eig) in gram.iter().enumerate() {
            let lmax = eig.values[0];
            let lmin = eig.values[eig.values.len() - 1];
            assert!(
                lmin >= lmax * tol * (1.0 - 1e-12),
                "group {v}: lmin={lmin:e} below floor {:e}",
                lmax * tol
            );
            assert!(eig.corrected);
        }
    }

    #[test]
    fn eigenvectors_orthonormal_and_reconstruct() {
        let x = array![[0.1, 0.9], [0.4, 0.2], [0.6, 0.7], [0.95, 0.05]];
        let y = array![0.0, 0.0, 0.0, 0.0];
        let data = DesignData::new(x, y).unwrap();
        let groups = build_group_set(2, 2).unwrap();
        let gram = compute_gram(&data, &groups, KernelKind::Matern, true, 1e-8).unwrap();
        for eig in gram.iter() {
            let qtq = eig.vectors.t().dot(&eig.vectors);
            for i in 0..4 {
                for j in 0..4 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(qtq[[i, j]], expect, epsilon = 1e-8);
                }
            }
            // descending order
            assert!(eig.values.windows(2).into_iter().all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn cross_gram_at_training_points_matches_uncorrected_gram() {
        let x = array![[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]];
        let y = array![0.0, 0.0, 0.0];
        let data = DesignData::new(x.clone(), y).unwrap();
        let groups = build_group_set(2, 2).unwrap();
        let gram = compute_gram(&data, &groups, KernelKind::Brownian, false, 1e-8).unwrap();
        let cross = cross_gram(&data, x.view(), &groups, KernelKind::Brownian).unwrap();
        for (v, cv) in cross.iter().enumerate() {
            let k = gram.eigen(v).dense();
            for i in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(cv[[j, i]], k[[i, j]], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn cross_gram_single_entry_brownian() {
        let x = array![[0.0], [0.5]];
        let y = array![0.0, 0.0];
        let data = DesignData::new(x, y).unwrap();
        let groups = build_group_set(1, 1).unwrap();
        let xt = array![[1.0]];
        let cross = cross_gram(&data, xt.view(), &groups, KernelKind::Brownian).unwrap();
        // k0(0, 1) = -0.125 from the closed form
        assert_abs_diff_eq!(cross[0][[0, 0]], -0.125, epsilon = 1e-12);
    }

    #[test]
    fn cross_gram_rejects_column_mismatch() {
        let data = toy_data();
        let groups = build_group_set(1, 1).unwrap();
        let xt = array![[0.1, 0.2]];
        assert!(cross_gram(&data, xt.view(), &groups, KernelKind::Linear).is_err());
        let out_of_range = array![[1.5]];
        assert!(cross_gram(&data, out_of_range.view(), &groups, KernelKind::Linear).is_err());
    }
}
