//! Univariate reproducing kernels and their centered versions.
//!
//! Each base kernel k_a on [0,1] is turned into the kernel k0_a of the
//! subspace of zero-mean functions under the uniform law:
//!
//! ```text
//! k0(x, x') = k(x, x') - h(x) h(x') / e2
//! h(x)  = E_U k(x, U)          (U uniform on [0,1])
//! e2    = E_{U,V} k(U, V)
//! ```
//!
//! The moments h and e2 have closed forms for the linear, quadratic and
//! brownian kernels. For matern and gaussian they are computed with the
//! 128-node Gauss-Legendre rule, splitting the panel at the |x-u| kink so
//! the quadrature is exact to machine precision.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gl128;

/// The reproducing kernels available for constructing the approximation
/// space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// k(u,v) = u v + 1
    #[serde(rename = "linear")]
    Linear,
    /// k(u,v) = (u v + 1)^2
    #[serde(rename = "quad")]
    Quadratic,
    /// k(u,v) = min(u,v) + 1
    #[serde(rename = "brownian")]
    Brownian,
    /// k(u,v) = (1 + 2|u-v|) exp(-2|u-v|)
    #[serde(rename = "matern")]
    Matern,
    /// k(u,v) = exp(-2 (u-v)^2)
    #[serde(rename = "gaussian")]
    Gaussian,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Linear,
        KernelKind::Quadratic,
        KernelKind::Brownian,
        KernelKind::Matern,
        KernelKind::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Quadratic => "quad",
            KernelKind::Brownian => "brownian",
            KernelKind::Matern => "matern",
            KernelKind::Gaussian => "gaussian",
        }
    }

    fn index(self) -> usize {
        match self {
            KernelKind::Linear => 0,
            KernelKind::Quadratic => 1,
            KernelKind::Brownian => 2,
            KernelKind::Matern => 3,
            KernelKind::Gaussian => 4,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "quad" => Ok(KernelKind::Quadratic),
            "brownian" => Ok(KernelKind::Brownian),
            "matern" => Ok(KernelKind::Matern),
            "gaussian" => Ok(KernelKind::Gaussian),
            other => Err(Error::invalid(format!(
                "unknown kernel {other:?}; expected one of linear, quad, brownian, matern, gaussian"
            ))),
        }
    }
}

/// Evaluates the base kernel at a pair of scalars in [0,1].
pub fn base_kernel(kind: KernelKind, u: f64, v: f64) -> f64 {
    match kind {
        KernelKind::Linear => u * v + 1.0,
        KernelKind::Quadratic => {
            let t = u * v + 1.0;
            t * t
        }
        KernelKind::Brownian => u.min(v) + 1.0,
        KernelKind::Matern => {
            let r = (u - v).abs();
            (1.0 + 2.0 * r) * (-2.0 * r).exp()
        }
        KernelKind::Gaussian => {
            let r = u - v;
            (-2.0 * r * r).exp()
        }
    }
}

/// Mean embedding h(x) = E_U k(x, U) under the uniform law on [0,1].
pub fn mean_embedding(kind: KernelKind, x: f64) -> f64 {
    match kind {
        KernelKind::Linear => 0.5 * x + 1.0,
        KernelKind::Quadratic => x * x / 3.0 + x + 1.0,
        KernelKind::Brownian => 1.0 + x - 0.5 * x * x,
        KernelKind::Matern | KernelKind::Gaussian => {
            gl128().integrate_unit_split(x, |u| base_kernel(kind, x, u))
        }
    }
}

/// Double mean e2 = E_{U,V} k(U, V); the quadrature-based value is computed
/// once per kernel and cached.
pub fn double_mean(kind: KernelKind) -> f64 {
    match kind {
        KernelKind::Linear => 1.25,
        KernelKind::Quadratic => 29.0 / 18.0,
        KernelKind::Brownian => 4.0 / 3.0,
        KernelKind::Matern | KernelKind::Gaussian => {
            static CACHE: [OnceLock<f64>; 5] = [const { OnceLock::new() }; 5];
            *CACHE[kind.index()].get_or_init(|| {
                // h is smooth in v for both kernels, so a single panel is exact.
                gl128().integrate(0.0, 1.0, |v| mean_embedding(kind, v))
            })
        }
    }
}

/// Evaluates the centered kernel k0(x, x').
pub fn centered_kernel(kind: KernelKind, x: f64, y: f64) -> f64 {
    base_kernel(kind, x, y) - mean_embedding(kind, x) * mean_embedding(kind, y) / double_mean(kind)
}

/// Centered kernel with the moments of `x` and `y` precomputed; the Gram
/// builder uses this to evaluate each column's embedding only once.
#[inline]
pub(crate) fn centered_kernel_with(kind: KernelKind, x: f64, y: f64, hx: f64, hy: f64, e2: f64) -> f64 {
    base_kernel(kind, x, y) - hx * hy / e2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn base_kernel_matches_table_values() {
        assert_abs_diff_eq!(base_kernel(KernelKind::Brownian, 0.3, 0.7), 1.3, epsilon = 1e-15);
        assert_abs_diff_eq!(base_kernel(KernelKind::Quadratic, 0.5, 0.5), 1.5625, epsilon = 1e-15);
        for x in [0.0, 0.17, 0.5, 1.0] {
            assert_abs_diff_eq!(base_kernel(KernelKind::Matern, x, x), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn base_kernel_is_symmetric() {
        for kind in KernelKind::ALL {
            for &(u, v) in &[(0.0, 1.0), (0.2, 0.9), (0.5, 0.5), (0.31, 0.77)] {
                assert_eq!(base_kernel(kind, u, v), base_kernel(kind, v, u), "{kind}");
            }
        }
    }

    #[test]
    fn centered_brownian_closed_form() {
        // min(x,x')+1 - (3/4)(1+x-x^2/2)(1+x'-x'^2/2)
        assert_abs_diff_eq!(
            centered_kernel(KernelKind::Brownian, 0.5, 0.5),
            0.08203125,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            centered_kernel(KernelKind::Brownian, 0.0, 1.0),
            -0.125,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            centered_kernel(KernelKind::Brownian, 1.0, 1.0),
            0.3125,
            epsilon = 1e-15
        );
    }

    #[test]
    fn centered_linear_at_origin() {
        assert_abs_diff_eq!(centered_kernel(KernelKind::Linear, 0.0, 0.0), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn matern_moments_match_antiderivative() {
        // int_0^s (1+2r) e^{-2r} dr = 1 - (1+s) e^{-2s}, hence
        // h(x) = 2 - (1+x) e^{-2x} - (2-x) e^{-2(1-x)}.
        for x in [0.0f64, 0.1, 0.37, 0.5, 0.93, 1.0] {
            let expect = 2.0 - (1.0 + x) * (-2.0 * x).exp() - (2.0 - x) * (-2.0 * (1.0 - x)).exp();
            assert_abs_diff_eq!(mean_embedding(KernelKind::Matern, x), expect, epsilon = 1e-13);
        }
    }

    #[test]
    fn centered_kernels_have_zero_mean() {
        // |int_0^1 k0(x,u) du| <= 1e-7 on a 20-point grid, integrating with
        // the quadrature panel split at the kink.
        let rule = gl128();
        for kind in KernelKind::ALL {
            for i in 0..20 {
                let x = i as f64 / 19.0;
                let integral = rule.integrate_unit_split(x, |u| centered_kernel(kind, x, u));
                assert!(
                    integral.abs() <= 1e-7,
                    "{kind} at x={x}: residual mean {integral:.3e}"
                );
            }
        }
    }

    #[test]
    fn kernel_names_round_trip() {
        for kind in KernelKind::ALL {
            assert_eq!(kind.name().parse::<KernelKind>().unwrap(), kind);
        }
        assert!("cubic".parse::<KernelKind>().is_err());
    }
}
