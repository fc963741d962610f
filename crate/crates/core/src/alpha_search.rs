//! Smoothing-weight selection by leave-one-out cross-validation.
//!
//! Omitting measurement `j` of sample `i` from cluster `k` changes the fitted
//! mean in closed form: the omitted-fit residual equals
//! `(mu_j - y_ij) / (1 - S_jj z_ik)`, where `S_jj` is the diagonal of the
//! cluster's smoother. One banded solve plus one diagonal extraction therefore
//! yields the whole CV score.

use ndarray::ArrayView1;

use crate::band_spline::{penalized_system, reinsch_solve_factored, smoother_diagonal, BandPair};
use crate::config::{ALPHA_MAX, ALPHA_MIN, DEFAULT_FD_H, DEFAULT_THETA, DENOM_FLOOR};
use crate::dense::{dense_smooth, roughness_matrix, DenseMatrix};
use crate::error::{Error, Result};
use crate::model::{check_cluster_weight, weighted_sums, Dataset};

/// Per-cluster smoothing weights and the gradient-descent settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSearchState {
    pub alpha: Vec<f64>,
    pub theta: f64,
    pub fd_h: f64,
}

impl AlphaSearchState {
    pub fn new(alpha: Vec<f64>, theta: f64, fd_h: f64) -> Self {
        AlphaSearchState { alpha, theta, fd_h }
    }

    pub fn with_defaults(c: usize) -> Self {
        Self::new(vec![ALPHA_MIN; c], DEFAULT_THETA, DEFAULT_FD_H)
    }
}

/// Leave-one-out residuals `(mu_j - y_ij) / (1 - S_jj z_i)` for every sample
/// with nonzero weight, together with the fitted mean.
pub fn loo_residuals(
    d: &Dataset,
    resp_k: ArrayView1<'_, f64>,
    alpha: f64,
    bp: &BandPair,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (w, ytilde) = weighted_sums(d.y(), resp_k);
    check_cluster_weight(w, d.n())?;
    let chol = penalized_system(bp, w, alpha)?;
    let mu = reinsch_solve_factored(bp, &chol, w, alpha, &ytilde)?.mu;
    let diag = smoother_diagonal(bp, &chol, w, alpha)?;
    let mut out = Vec::with_capacity(d.n());
    for (i, (row, &z)) in d.y().rows().into_iter().zip(resp_k.iter()).enumerate() {
        let mut r = vec![0.0; d.p()];
        if z != 0.0 {
            for (j, (y, s)) in row.iter().zip(&diag).enumerate() {
                let denom = 1.0 - s * z;
                if !(denom > DENOM_FLOOR) {
                    return Err(Error::LeverageSingularity { i, j });
                }
                r[j] = (mu[j] - y) / denom;
            }
        }
        out.push(r);
    }
    Ok((mu, out))
}

/// `CV(alpha) = sum_i z_i sum_j (mu_j^{-ij} - y_ij)^2` in O(n p).
pub fn cv_score(d: &Dataset, resp_k: ArrayView1<'_, f64>, alpha: f64, bp: &BandPair) -> Result<f64> {
    let (_, res) = loo_residuals(d, resp_k, alpha, bp)?;
    let cv: f64 = res.iter().zip(resp_k.iter()).map(|(r, z)| z * r.iter().map(|v| v * v).sum::<f64>()).sum();
    if !cv.is_finite() {
        return Err(Error::NonFiniteCv);
    }
    Ok(cv)
}

/// Cluster mean refitted without measurement `(i, j)`.
///
/// Removing the measurement subtracts `z_i y_ij` from the weighted sum and `z_i`
/// from the `j`-th weight; the resulting system is solved densely.
pub fn omitted_fit(
    d: &Dataset,
    g: &DenseMatrix,
    resp_k: ArrayView1<'_, f64>,
    alpha: f64,
    i: usize,
    j: usize,
) -> Result<Vec<f64>> {
    let (w, mut ytilde) = weighted_sums(d.y(), resp_k);
    check_cluster_weight(w, d.n())?;
    let z = resp_k[i];
    let mut weights = vec![w; d.p()];
    weights[j] -= z;
    ytilde[j] -= z * d.y()[[i, j]];
    dense_smooth(g, &weights, alpha, &ytilde).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::DegenerateWeight { weight: weights[j], floor: 0.0 },
        other => other,
    })
}

/// Literal leave-one-out CV with one dense refit per measurement. O(n p^4);
/// intended as a reference for [`cv_score`].
pub fn cv_score_bruteforce(d: &Dataset, resp_k: ArrayView1<'_, f64>, alpha: f64, bp: &BandPair) -> Result<f64> {
    let g = roughness_matrix(bp);
    let mut cv = 0.0;
    for (i, &z) in resp_k.iter().enumerate() {
        if z == 0.0 {
            continue;
        }
        for j in 0..d.p() {
            let mu = omitted_fit(d, &g, resp_k, alpha, i, j)?;
            cv += z * (mu[j] - d.y()[[i, j]]).powi(2);
        }
    }
    Ok(cv)
}

/// One finite-difference descent step on cluster `k`'s smoothing weight,
/// clamped to `[ALPHA_MIN, ALPHA_MAX]`.
pub fn gradient_step(state: &mut AlphaSearchState, k: usize, cv_at_alpha: f64, cv_at_alpha_plus_h: f64) -> Result<f64> {
    if !cv_at_alpha.is_finite() || !cv_at_alpha_plus_h.is_finite() {
        return Err(Error::NonFiniteCv);
    }
    let slope = (cv_at_alpha_plus_h - cv_at_alpha) / state.fd_h;
    let next = (state.alpha[k] - state.theta * slope).clamp(ALPHA_MIN, ALPHA_MAX);
    if !next.is_finite() {
        return Err(Error::NonFiniteCv);
    }
    state.alpha[k] = next;
    Ok(next)
}

/// Candidate with the lowest CV score; near-ties go to the smaller weight.
pub fn grid_search(d: &Dataset, resp_k: ArrayView1<'_, f64>, bp: &BandPair, alphas: &[f64]) -> Result<f64> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("empty smoothing grid".into()));
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for a in sorted {
        let Ok(cv) = cv_score(d, resp_k, a, bp) else { continue };
        best = match best {
            Some((ba, bcv)) if cv >= bcv - 1e-12 * bcv.abs().max(1.0) => Some((ba, bcv)),
            _ => Some((a, cv)),
        };
    }
    best.map(|(a, _)| a).ok_or(Error::AllCandidatesFailed)
}
