//! Mixture of Gaussian clusters with smoothing-spline means, fitted by EM.
//!
//! Cluster `k` has density `N(mu_k, sigma2_k I)` over the `p` shared
//! measurement times. Its mean is penalized by `alpha_k / (2 sigma2_k)` times
//! the roughness `mu_k^T G mu_k`, so that the mean update is
//! `(sum_i z_ik I + alpha_k G)^{-1} sum_i z_ik y_i` and the variance update
//! adds `alpha_k mu_k^T G mu_k` to the weighted residual sum.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::alpha_search::{self, AlphaSearchState};
use crate::band_spline::{build_band_pair, knot_geometry, reinsch_solve, roughness_form, BandPair, SplineSolve};
use crate::config::{weight_floor, AlphaMode, AlphaOrder, Backend, FitConfig, Mode, VarianceEstimator, SIGMA2_FLOOR};
use crate::dense::{dense_smooth, roughness_matrix, DenseMatrix};
use crate::error::{Error, Result};

/// `n` curves measured at the same `p` strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Array2<f64>,
    t: Vec<f64>,
    ids: Vec<String>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(y: Array2<f64>, t: Vec<f64>) -> Result<Self> {
        let ids = (0..y.nrows()).map(|i| i.to_string()).collect();
        Self::with_ids(y, t, ids)
    }

    pub fn with_ids(y: Array2<f64>, t: Vec<f64>, ids: Vec<String>) -> Result<Self> {
        knot_geometry(&t)?;
        if y.nrows() == 0 {
            return Err(Error::InvalidInput("dataset has no samples".into()));
        }
        if y.ncols() != t.len() {
            return Err(Error::DimensionMismatch { expected: t.len(), got: y.ncols() });
        }
        if ids.len() != y.nrows() {
            return Err(Error::DimensionMismatch { expected: y.nrows(), got: ids.len() });
        }
        if let Some(((i, j), _)) = y.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite measurement at sample {i}, position {j}")));
        }
        Ok(Dataset { y, t, ids, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn band_pair(&self) -> Result<BandPair> {
        build_band_pair(&knot_geometry(&self.t)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    pub pi: f64,
    pub mu: Vec<f64>,
    pub sigma2: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixtureParams {
    pub clusters: Vec<ClusterParams>,
}

impl MixtureParams {
    pub fn c(&self) -> usize {
        self.clusters.len()
    }

    pub fn p(&self) -> usize {
        self.clusters.first().map_or(0, |k| k.mu.len())
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::InvalidInput("mixture has no clusters".into()));
        }
        for k in &self.clusters {
            if k.mu.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: k.mu.len() });
            }
            if !(k.sigma2 > 0.0) {
                return Err(Error::NonPositiveVariance(k.sigma2));
            }
            if !(k.pi >= 0.0) || !(k.alpha >= 0.0) {
                return Err(Error::InvalidInput("negative proportion or smoothing weight".into()));
            }
        }
        let total: f64 = self.clusters.iter().map(|k| k.pi).sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!("mixing proportions sum to {total}")));
        }
        Ok(())
    }

    /// Reorders clusters so that new cluster `k` is old cluster `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        MixtureParams { clusters: perm.iter().map(|&k| self.clusters[k].clone()).collect() }
    }
}

/// Posterior membership probabilities, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub z: Array2<f64>,
}

impl Responsibilities {
    pub fn column(&self, k: usize) -> ArrayView1<'_, f64> {
        self.z.column(k)
    }

    /// Hard assignment by row-wise argmax (first maximum wins).
    pub fn hard_labels(&self) -> Vec<usize> {
        self.z
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0
            })
            .collect()
    }
}

pub fn log_density(y: ArrayView1<'_, f64>, mu: &[f64], sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    if y.len() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: y.len() });
    }
    let sq: f64 = y.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
    let p = mu.len() as f64;
    Ok(-0.5 * p * (2.0 * PI * sigma2).ln() - sq / (2.0 * sigma2))
}

fn log_weights(y: ArrayView2<'_, f64>, params: &MixtureParams) -> Result<Array2<f64>> {
    let mut lw = Array2::zeros((y.nrows(), params.c()));
    for (k, cl) in params.clusters.iter().enumerate() {
        let lp = cl.pi.ln();
        for (i, row) in y.rows().into_iter().enumerate() {
            lw[[i, k]] = lp + log_density(row, &cl.mu, cl.sigma2)?;
        }
    }
    Ok(lw)
}

/// E-step on raw measurements; also returns the observed-data log-likelihood.
pub fn e_step_raw(y: ArrayView2<'_, f64>, params: &MixtureParams) -> Result<(Responsibilities, f64)> {
    let mut z = log_weights(y, params)?;
    let mut loglik = 0.0;
    for (i, mut row) in z.rows_mut().into_iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::AllClustersUnderflow(i));
        }
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
        loglik += max + sum.ln();
    }
    Ok((Responsibilities { z }, loglik))
}

pub fn e_step(d: &Dataset, params: &MixtureParams) -> Result<Responsibilities> {
    Ok(e_step_raw(d.y(), params)?.0)
}

/// Observed-data log-likelihood `sum_i ln sum_k pi_k f_k(y_i)`.
pub fn log_likelihood(d: &Dataset, params: &MixtureParams) -> Result<f64> {
    Ok(e_step_raw(d.y(), params)?.1)
}

pub fn m_step_pi(resp: &Responsibilities) -> Vec<f64> {
    let n = resp.z.nrows() as f64;
    resp.z.sum_axis(Axis(0)).iter().map(|s| s / n).collect()
}

/// `(sum_i z_i, sum_i z_i y_i)`.
pub fn weighted_sums(y: ArrayView2<'_, f64>, resp_k: ArrayView1<'_, f64>) -> (f64, Vec<f64>) {
    let mut ytilde = vec![0.0; y.ncols()];
    let mut w = 0.0;
    for (row, &z) in y.rows().into_iter().zip(resp_k.iter()) {
        if z == 0.0 {
            continue;
        }
        w += z;
        for (acc, v) in ytilde.iter_mut().zip(row.iter()) {
            *acc += z * v;
        }
    }
    (w, ytilde)
}

pub(crate) fn check_cluster_weight(w: f64, n: usize) -> Result<()> {
    let floor = weight_floor(n);
    if !(w > floor) {
        return Err(Error::DegenerateWeight { weight: w, floor });
    }
    Ok(())
}

pub fn m_step_mu(d: &Dataset, resp_k: ArrayView1<'_, f64>, alpha_k: f64, bp: &BandPair) -> Result<SplineSolve> {
    let (w, ytilde) = weighted_sums(d.y(), resp_k);
    check_cluster_weight(w, d.n())?;
    reinsch_solve(bp, w, alpha_k, &ytilde)
}

/// Weighted residual sum `sum_i z_i ||y_i - mu||^2`.
pub fn weighted_residual(y: ArrayView2<'_, f64>, resp_k: ArrayView1<'_, f64>, mu: &[f64]) -> f64 {
    y.rows()
        .into_iter()
        .zip(resp_k.iter())
        .filter(|(_, &z)| z != 0.0)
        .map(|(row, &z)| z * row.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

/// Variance update given the roughness penalty `alpha mu^T G mu` (zero for the
/// uncorrected estimator); floored at [`SIGMA2_FLOOR`].
pub fn penalized_variance(
    y: ArrayView2<'_, f64>,
    resp_k: ArrayView1<'_, f64>,
    mu: &[f64],
    penalty: f64,
) -> Result<f64> {
    let w: f64 = resp_k.sum();
    check_cluster_weight(w, y.nrows())?;
    let num = weighted_residual(y, resp_k, mu) + penalty;
    Ok((num / (w * y.ncols() as f64)).max(SIGMA2_FLOOR))
}

pub fn m_step_sigma2(
    d: &Dataset,
    resp_k: ArrayView1<'_, f64>,
    mu_k: &[f64],
    alpha_k: f64,
    bp: &BandPair,
    corrected: bool,
) -> Result<f64> {
    let penalty = if corrected && alpha_k != 0.0 { alpha_k * roughness_form(bp, mu_k)? } else { 0.0 };
    penalized_variance(d.y(), resp_k, mu_k, penalty)
}

/// `sum_i sum_k z_ik (ln pi_k + ln f_k(y_i))`, without any penalty.
pub fn expected_loglik(y: ArrayView2<'_, f64>, params: &MixtureParams, resp: &Responsibilities) -> Result<f64> {
    let mut total = 0.0;
    for (k, cl) in params.clusters.iter().enumerate() {
        let lp = cl.pi.ln();
        for (row, &z) in y.rows().into_iter().zip(resp.z.column(k).iter()) {
            if z == 0.0 {
                continue;
            }
            total += z * (lp + log_density(row, &cl.mu, cl.sigma2)?);
        }
    }
    Ok(total)
}

/// Penalized conditional expectation: [`expected_loglik`] minus
/// `sum_k alpha_k / (2 sigma2_k) mu_k^T G mu_k`.
pub fn penalized_expectation(
    d: &Dataset,
    params: &MixtureParams,
    resp: &Responsibilities,
    bp: &BandPair,
) -> Result<f64> {
    let mut pen = 0.0;
    for cl in &params.clusters {
        if cl.alpha != 0.0 {
            pen += cl.alpha / (2.0 * cl.sigma2) * roughness_form(bp, &cl.mu)?;
        }
    }
    Ok(expected_loglik(d.y(), params, resp)? - pen)
}

/// Roughness penalty evaluator with a selectable solver backend.
#[derive(Debug, Clone)]
pub struct Smoother {
    bp: BandPair,
    dense_g: Option<DenseMatrix>,
}

impl Smoother {
    pub fn new(d: &Dataset, backend: Backend) -> Result<Self> {
        let bp = d.band_pair()?;
        let dense_g = match backend {
            Backend::Banded => None,
            Backend::Dense => Some(roughness_matrix(&bp)),
        };
        Ok(Smoother { bp, dense_g })
    }

    pub fn band_pair(&self) -> &BandPair {
        &self.bp
    }

    pub fn smooth(&self, w: f64, alpha: f64, ytilde: &[f64]) -> Result<Vec<f64>> {
        match &self.dense_g {
            None => Ok(reinsch_solve(&self.bp, w, alpha, ytilde)?.mu),
            Some(g) => dense_smooth(g, &vec![w; ytilde.len()], alpha, ytilde),
        }
    }

    pub fn roughness(&self, mu: &[f64]) -> Result<f64> {
        match &self.dense_g {
            None => roughness_form(&self.bp, mu),
            Some(g) => Ok(g.quad_form(mu).max(0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub e_step: Duration,
    pub alpha: Duration,
    pub m_step: Duration,
    pub objective: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.e_step + self.alpha + self.m_step + self.objective
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: MixtureParams,
    /// Posterior memberships under the final parameters.
    pub resp: Responsibilities,
    /// Penalized log-likelihood after each iteration: the observed-data
    /// log-likelihood minus `sum_k alpha_k / (2 sigma2_k) mu_k^T G mu_k`.
    /// This is [`penalized_expectation`] at the posterior memberships plus
    /// their entropy, and never decreases under EM with fixed smoothing and
    /// the corrected variance.
    pub objective_trace: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Per-cluster count of smoothing updates skipped because the CV score failed.
    pub alpha_failures: Vec<usize>,
    /// Parameters after every iteration, when requested.
    pub trajectory: Option<Vec<MixtureParams>>,
    pub timings: PhaseTimings,
}

/// Runs EM from `init` until the relative change of the penalized
/// log-likelihood drops below `config.rel_tol` or `config.max_iter` is reached.
pub fn fit_em(d: &Dataset, c: usize, config: &FitConfig, init: &MixtureParams) -> Result<FitResult> {
    let smoother = Smoother::new(d, config.backend)?;
    fit_em_with(d, c, config, init, &smoother, false)
}

pub fn fit_em_with(
    d: &Dataset,
    c: usize,
    config: &FitConfig,
    init: &MixtureParams,
    smoother: &Smoother,
    record_trajectory: bool,
) -> Result<FitResult> {
    if c == 0 || init.c() != c {
        return Err(Error::InvalidInput(format!("expected {c} initial clusters, got {}", init.c())));
    }
    init.validate(d.p())?;
    let mut params = init.clone();
    let alpha0 = config.initial_alpha();
    let pin_alpha = !matches!((config.mode, &config.alpha_mode), (Mode::Smixs, AlphaMode::Gradient | AlphaMode::Grid));
    for cl in &mut params.clusters {
        if pin_alpha {
            cl.alpha = alpha0;
        } else {
            cl.alpha = alpha0.max(cl.alpha).clamp(crate::config::ALPHA_MIN, crate::config::ALPHA_MAX);
        }
    }
    let mut alpha_state =
        AlphaSearchState::new(params.clusters.iter().map(|k| k.alpha).collect(), config.theta, config.fd_h);
    let mut timings = PhaseTimings::default();
    let mut trace = Vec::new();
    let mut trajectory = record_trajectory.then(Vec::new);
    let mut alpha_failures = vec![0; c];
    let mut converged = false;

    let start = Instant::now();
    let (mut resp, mut loglik) = e_step_raw(d.y(), &params)?;
    timings.e_step += start.elapsed();

    for iter in 1..=config.max_iter {
        if !pin_alpha && config.alpha_order == AlphaOrder::BeforeMStep {
            let start = Instant::now();
            update_alpha(d, &resp, config, smoother.band_pair(), &mut alpha_state, &mut alpha_failures);
            timings.alpha += start.elapsed();
        }

        let start = Instant::now();
        let pis = m_step_pi(&resp);
        for (k, cl) in params.clusters.iter_mut().enumerate() {
            let col = resp.column(k);
            let (w, ytilde) = weighted_sums(d.y(), col);
            check_cluster_weight(w, d.n()).map_err(|_| Error::EmptyCluster { k })?;
            cl.pi = pis[k];
            cl.alpha = alpha_state.alpha[k];
            match config.mode {
                Mode::Gmm => {
                    cl.mu = ytilde.iter().map(|v| v / w).collect();
                    cl.sigma2 = penalized_variance(d.y(), col, &cl.mu, 0.0)?;
                }
                Mode::Smixs => {
                    cl.mu = smoother.smooth(w, cl.alpha, &ytilde)?;
                    let penalty = match config.variance {
                        VarianceEstimator::Corrected if cl.alpha != 0.0 => cl.alpha * smoother.roughness(&cl.mu)?,
                        _ => 0.0,
                    };
                    cl.sigma2 = penalized_variance(d.y(), col, &cl.mu, penalty)?;
                }
            }
        }
        timings.m_step += start.elapsed();

        if !pin_alpha && config.alpha_order == AlphaOrder::AfterMStep {
            let start = Instant::now();
            update_alpha(d, &resp, config, smoother.band_pair(), &mut alpha_state, &mut alpha_failures);
            for (cl, a) in params.clusters.iter_mut().zip(&alpha_state.alpha) {
                cl.alpha = *a;
            }
            timings.alpha += start.elapsed();
        }

        let start = Instant::now();
        (resp, loglik) = e_step_raw(d.y(), &params)?;
        timings.e_step += start.elapsed();

        let start = Instant::now();
        let obj = loglik - penalty(&params, smoother, config.mode)?;
        timings.objective += start.elapsed();
        if !obj.is_finite() {
            return Err(Error::NonFiniteObjective(iter));
        }
        if let Some(tr) = trajectory.as_mut() {
            tr.push(params.clone());
        }
        let prev = trace.last().copied();
        trace.push(obj);
        if let Some(prev) = prev {
            if (obj - prev).abs() < config.rel_tol * (1.0 + obj.abs()) {
                converged = true;
                break;
            }
        }
    }

    if !loglik.is_finite() {
        return Err(Error::NonFiniteObjective(trace.len()));
    }
    Ok(FitResult {
        params,
        resp,
        iterations: trace.len(),
        objective_trace: trace,
        loglik,
        converged,
        alpha_failures,
        trajectory,
        timings,
    })
}

/// `sum_k alpha_k / (2 sigma2_k) mu_k^T G mu_k`; zero for the plain mixture.
fn penalty(params: &MixtureParams, smoother: &Smoother, mode: Mode) -> Result<f64> {
    let mut pen = 0.0;
    if mode == Mode::Smixs {
        for cl in &params.clusters {
            if cl.alpha != 0.0 {
                pen += cl.alpha / (2.0 * cl.sigma2) * smoother.roughness(&cl.mu)?;
            }
        }
    }
    Ok(pen)
}

fn update_alpha(
    d: &Dataset,
    resp: &Responsibilities,
    config: &FitConfig,
    bp: &BandPair,
    state: &mut AlphaSearchState,
    failures: &mut [usize],
) {
    for k in 0..state.alpha.len() {
        let col = resp.column(k);
        let ok = match config.alpha_mode {
            AlphaMode::Gradient => (0..config.alpha_steps.max(1)).all(|_| {
                let a = state.alpha[k];
                let step = alpha_search::cv_score(d, col, a, bp)
                    .and_then(|cv0| Ok((cv0, alpha_search::cv_score(d, col, a + state.fd_h, bp)?)))
                    .and_then(|(cv0, cv1)| alpha_search::gradient_step(state, k, cv0, cv1));
                step.is_ok()
            }),
            AlphaMode::Grid => match alpha_search::grid_search(d, col, bp, &config.alpha_grid) {
                Ok(a) => {
                    state.alpha[k] = a;
                    true
                }
                Err(_) => false,
            },
            AlphaMode::Fixed(_) => true,
        };
        if !ok {
            failures[k] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ln2pi_half() -> f64 {
        0.5 * (2.0 * PI).ln()
    }

    #[test]
    fn density_values() {
        let y = array![0.0];
        assert!((log_density(y.view(), &[0.0], 1.0).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-15);
        let y = array![1.0];
        assert!((log_density(y.view(), &[0.0], 1.0).unwrap() + ln2pi_half() + 0.5).abs() < 1e-15);
        assert_eq!(log_density(y.view(), &[0.0], 0.0), Err(Error::NonPositiveVariance(0.0)));
    }

    fn two_cluster_params(mu0: f64, mu1: f64, p: usize) -> MixtureParams {
        MixtureParams {
            clusters: vec![
                ClusterParams { pi: 0.5, mu: vec![mu0; p], sigma2: 1.0, alpha: 0.0 },
                ClusterParams { pi: 0.5, mu: vec![mu1; p], sigma2: 1.0, alpha: 0.0 },
            ],
        }
    }

    #[test]
    fn e_step_cases() {
        let y = array![[0.0, 0.0, 0.0], [5.0, 1.0, -2.0]];
        let one =
            MixtureParams { clusters: vec![ClusterParams { pi: 1.0, mu: vec![0.0; 3], sigma2: 2.0, alpha: 0.0 }] };
        let (r, _) = e_step_raw(y.view(), &one).unwrap();
        assert!(r.z.iter().all(|&v| v == 1.0));

        let y = array![[0.0, 0.0, 0.0]];
        let (r, _) = e_step_raw(y.view(), &two_cluster_params(-1.0, 1.0, 3)).unwrap();
        assert!((r.z[[0, 0]] - 0.5).abs() < 1e-15 && (r.z[[0, 1]] - 0.5).abs() < 1e-15);

        // 1-D: y at mean 0, other mean 10 sigma away
        let y = array![[0.0]];
        let (r, _) = e_step_raw(y.view(), &two_cluster_params(0.0, 10.0, 1)).unwrap();
        let ratio = (-50.0f64).exp();
        assert!((r.z[[0, 0]] - 1.0 / (1.0 + ratio)).abs() < 1e-15);
        assert!(r.z[[0, 0]] > 0.999);

        // large p would underflow the plain ratio
        let y = Array2::from_elem((1, 400), 3.0);
        let (r, ll) = e_step_raw(y.view(), &two_cluster_params(0.0, 2.9, 400)).unwrap();
        assert!(ll.is_finite());
        assert!((r.z.row(0).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn proportions() {
        let r = Responsibilities { z: array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]] };
        let pi = m_step_pi(&r);
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-15 && (pi[1] - 1.0 / 3.0).abs() < 1e-15);
        let r = Responsibilities { z: Array2::from_elem((4, 2), 0.5) };
        assert_eq!(m_step_pi(&r), vec![0.5, 0.5]);
        let r = Responsibilities { z: Array2::from_elem((3, 1), 1.0) };
        assert_eq!(m_step_pi(&r), vec![1.0]);
    }

    #[test]
    fn variance_estimator() {
        let y = array![[0.0], [2.0]];
        let z = array![1.0, 1.0];
        assert_eq!(penalized_variance(y.view(), z.view(), &[1.0], 0.0).unwrap(), 1.0);

        // p = 3 uniform, mu = (0,1,0) with zero residual: roughness 6
        let d = Dataset::new(array![[0.0, 1.0, 0.0]], vec![0.0, 1.0, 2.0]).unwrap();
        let bp = d.band_pair().unwrap();
        let z = array![1.0];
        let corrected = m_step_sigma2(&d, z.view(), &[0.0, 1.0, 0.0], 1.0, &bp, true).unwrap();
        assert!((corrected - 2.0).abs() < 1e-12);
        let plain = m_step_sigma2(&d, z.view(), &[0.0, 1.0, 0.0], 1.0, &bp, false).unwrap();
        assert_eq!(plain, SIGMA2_FLOOR);
        let a = m_step_sigma2(&d, z.view(), &[0.1, 0.5, 0.2], 0.0, &bp, true).unwrap();
        let b = m_step_sigma2(&d, z.view(), &[0.1, 0.5, 0.2], 0.0, &bp, false).unwrap();
        assert_eq!(a, b);
        let zero = array![0.0];
        assert!(matches!(
            m_step_sigma2(&d, zero.view(), &[0.0; 3], 1.0, &bp, true),
            Err(Error::DegenerateWeight { .. })
        ));
    }

    #[test]
    fn expectation_single_point() {
        let y = array![[0.0]];
        let params =
            MixtureParams { clusters: vec![ClusterParams { pi: 1.0, mu: vec![0.0], sigma2: 1.0, alpha: 0.0 }] };
        let resp = Responsibilities { z: array![[1.0]] };
        let e = expected_loglik(y.view(), &params, &resp).unwrap();
        assert!((e + ln2pi_half()).abs() < 1e-15);
    }

    #[test]
    fn affine_mean_has_no_penalty() {
        let t = vec![0.0, 1.0, 2.5, 4.0];
        let d = Dataset::new(array![[1.0, 2.0, 3.0, 5.0], [0.0, 1.0, 2.0, 2.0]], t.clone()).unwrap();
        let bp = d.band_pair().unwrap();
        let mu: Vec<f64> = t.iter().map(|x| 0.5 * x + 1.0).collect();
        let params = MixtureParams { clusters: vec![ClusterParams { pi: 1.0, mu, sigma2: 0.7, alpha: 1e4 }] };
        let resp = Responsibilities { z: Array2::from_elem((2, 1), 1.0) };
        let pen = penalized_expectation(&d, &params, &resp, &bp).unwrap();
        let raw = expected_loglik(d.y(), &params, &resp).unwrap();
        assert!((pen - raw).abs() < 1e-9 * raw.abs());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(array![[1.0, 2.0, 3.0]], vec![0.0, 1.0, 1.0]).is_err());
        assert!(Dataset::new(array![[1.0, 2.0]], vec![0.0, 1.0]).is_err());
        assert!(Dataset::new(array![[1.0, f64::NAN, 3.0]], vec![0.0, 1.0, 2.0]).is_err());
        assert!(Dataset::new(array![[1.0, 2.0, 3.0]], vec![0.0, 1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn hard_labels_take_first_max() {
        let r = Responsibilities { z: array![[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]] };
        assert_eq!(r.hard_labels(), vec![1, 0, 0]);
    }
}
