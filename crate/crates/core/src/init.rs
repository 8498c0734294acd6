//! Spectral initialization for low-rank regression.

use log::warn;
use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{svd_top, LowRankFactors, Matrix, Vector};
use crate::problem::{flatten_row_major, unflatten_row_major, MatrixProblem};

/// Covariance of `vec(Xᵢ)` (row-major vectorization), shared by all samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Identity,
    Diagonal(Vector),
    Full(Matrix),
}

/// `SVD_r(n⁻¹ Σ mat(Σ⁻¹ vec(Xᵢ)) yᵢ)`; an unbiased moment estimate of the
/// truth, truncated to rank `r`. Without a covariance the identity is assumed.
pub fn spectral_init(problem: &MatrixProblem, covariance: Option<&Covariance>, r: usize) -> Result<LowRankFactors> {
    let (d1, d2) = problem.shape();
    let cov = match covariance {
        Some(c) => c,
        None => {
            warn!("no design covariance supplied; spectral initialization assumes identity");
            &Covariance::Identity
        }
    };
    let moment = problem.adjoint(problem.responses()) / problem.n() as f64;
    let whitened = match cov {
        Covariance::Identity => moment,
        Covariance::Diagonal(diag) => {
            if diag.len() != d1 * d2 {
                return Err(Error::param(format!(
                    "diagonal covariance has {} entries, expected {}",
                    diag.len(),
                    d1 * d2
                )));
            }
            if diag.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::param("diagonal covariance must be positive definite"));
            }
            let flat = flatten_row_major(&moment).component_div(diag);
            unflatten_row_major(flat.as_slice(), d1, d2)
        }
        Covariance::Full(sigma) => {
            if sigma.shape() != (d1 * d2, d1 * d2) {
                return Err(Error::param("full covariance must be (d1*d2)x(d1*d2)"));
            }
            let chol = Cholesky::new(sigma.clone())
                .ok_or_else(|| Error::param("covariance is singular or not positive definite"))?;
            let flat = chol.solve(&flatten_row_major(&moment));
            unflatten_row_major(flat.as_slice(), d1, d2)
        }
    };
    svd_top(&whitened, r)
}

/// `n⁻¹ Σ |yᵢ − ⟨M₀, Xᵢ⟩|`; tracks `‖M₀ − M*‖_F` up to a constant.
pub fn estimate_init_distance(problem: &MatrixProblem, m0: &LowRankFactors) -> Result<f64> {
    let r = problem.residuals(&m0.reconstruct())?;
    Ok(r.iter().map(|u| u.abs()).sum::<f64>() / r.len() as f64)
}
