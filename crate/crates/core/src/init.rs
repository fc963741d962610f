//! K-means seeding, multi-restart EM and BIC-based cluster-count selection.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band_spline::{penalized_system, smoother_diagonal};
use crate::config::{BicDf, FitConfig, Mode, ALPHA_MIN, SIGMA2_FLOOR};
use crate::error::{Error, Result};
use crate::model::{fit_em_with, weighted_sums, ClusterParams, Dataset, FitResult, MixtureParams, Smoother};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartPlan {
    pub n_restarts: usize,
    pub seed: u64,
    pub c_range: Vec<usize>,
    pub bic_threshold: f64,
}

impl RestartPlan {
    pub fn new(n_restarts: usize, seed: u64, c_range: Vec<usize>) -> Self {
        RestartPlan { n_restarts, seed, c_range, bic_threshold: 0.03 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 {
            return Err(Error::InvalidInput("at least one restart is required".into()));
        }
        if self.c_range.is_empty() || self.c_range.contains(&0) {
            return Err(Error::InvalidInput("cluster counts must be nonempty and >= 1".into()));
        }
        if !self.c_range.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("cluster counts must be strictly ascending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(y: ArrayView2<'_, f64>, centroids: &Array2<f64>, labels: &mut [usize], dist: &mut [f64]) -> bool {
    let mut changed = false;
    for (i, row) in y.rows().into_iter().enumerate() {
        let (best, bd) = centroids
            .rows()
            .into_iter()
            .enumerate()
            .map(|(k, c)| (k, sq_dist(row, c)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if labels[i] != best {
            changed = true;
        }
        labels[i] = best;
        dist[i] = bd;
    }
    changed
}

/// Lloyd's algorithm on whole curves, seeded by `c` distinct random samples.
///
/// Empty clusters are reseeded at the sample farthest from its centroid; when
/// every sample already sits on its centroid no repair is possible and the
/// cluster stays empty.
pub fn kmeans(d: &Dataset, c: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    let n = d.n();
    if c == 0 || c > n {
        return Err(Error::TooManyClusters { c, n });
    }
    let y = d.y();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, n, c).into_vec();
    picks.sort_unstable();
    let mut centroids = Array2::zeros((c, d.p()));
    for (k, &i) in picks.iter().enumerate() {
        centroids.row_mut(k).assign(&y.row(i));
    }
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let changed = assign(y, &centroids, &mut labels, &mut dist);
        repair_empty(y, c, &mut centroids, &mut labels, &mut dist);
        let mut sums = Array2::<f64>::zeros((c, d.p()));
        let mut counts = vec![0usize; c];
        for (i, &k) in labels.iter().enumerate() {
            counts[k] += 1;
            let mut s = sums.row_mut(k);
            s += &y.row(i);
        }
        for k in 0..c {
            if counts[k] > 0 {
                let mut row = centroids.row_mut(k);
                row.assign(&sums.row(k));
                row /= counts[k] as f64;
            }
        }
        if !changed && iterations > 1 {
            break;
        }
    }
    assign(y, &centroids, &mut labels, &mut dist);
    repair_empty(y, c, &mut centroids, &mut labels, &mut dist);
    let inertia = dist.iter().sum();
    Ok(KMeans { labels, centroids, inertia, iterations })
}

fn repair_empty(y: ArrayView2<'_, f64>, c: usize, centroids: &mut Array2<f64>, labels: &mut [usize], dist: &mut [f64]) {
    for k in 0..c {
        if labels.contains(&k) {
            continue;
        }
        let (far, fd) = dist.iter().enumerate().fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if fd <= 0.0 {
            continue;
        }
        centroids.row_mut(k).assign(&y.row(far));
        labels[far] = k;
        dist[far] = 0.0;
    }
}

/// Mixture parameters from a hard partition.
pub fn init_params(d: &Dataset, labels: &[usize], centroids: &Array2<f64>) -> Result<MixtureParams> {
    if labels.len() != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: labels.len() });
    }
    let c = centroids.nrows();
    let mut clusters = Vec::with_capacity(c);
    for k in 0..c {
        let members: Vec<usize> = (0..d.n()).filter(|&i| labels[i] == k).collect();
        if members.is_empty() {
            return Err(Error::EmptyCluster { k });
        }
        let mu = centroids.row(k).to_vec();
        let ss: f64 = members.iter().map(|&i| sq_dist(d.y().row(i), centroids.row(k))).sum();
        let sigma2 = (ss / (members.len() * d.p()) as f64).max(SIGMA2_FLOOR);
        clusters.push(ClusterParams { pi: members.len() as f64 / d.n() as f64, mu, sigma2, alpha: ALPHA_MIN });
    }
    Ok(MixtureParams { clusters })
}

/// Outcome of one restart.
#[derive(Debug, Clone)]
pub struct RestartRecord {
    pub seed: u64,
    pub loglik: Option<f64>,
    pub error: Option<Error>,
}

#[derive(Debug, Clone)]
pub struct MultiRestart {
    pub best: FitResult,
    pub best_index: usize,
    pub records: Vec<RestartRecord>,
}

/// Initial parameters for restart seed `seed`.
pub fn seeded_init(d: &Dataset, c: usize, seed: u64, config: &FitConfig) -> Result<MixtureParams> {
    let km = kmeans(d, c, seed, config.kmeans_iter)?;
    init_params(d, &km.labels, &km.centroids)
}

fn single_restart(d: &Dataset, c: usize, seed: u64, config: &FitConfig, smoother: &Smoother) -> Result<FitResult> {
    let init = seeded_init(d, c, seed, config)?;
    fit_em_with(d, c, config, &init, smoother, false)
}

fn run_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Every restart of [`multi_restart`], including failures.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    /// Index and fit of the best successful restart.
    pub best: Option<(usize, FitResult)>,
    pub records: Vec<RestartRecord>,
}

/// Runs `plan.n_restarts` fits from k-means seeds `plan.seed + r` and keeps the
/// one with the highest observed-data log-likelihood (earliest restart on ties).
pub fn run_restarts(d: &Dataset, c: usize, plan: &RestartPlan, config: &FitConfig) -> Result<RestartOutcome> {
    plan.validate()?;
    let smoother = Smoother::new(d, config.backend)?;
    let seeds: Vec<u64> = (0..plan.n_restarts as u64).map(|r| plan.seed.wrapping_add(r)).collect();
    let outcomes: Vec<Result<FitResult>> =
        run_pool(config.workers, || seeds.par_iter().map(|&s| single_restart(d, c, s, config, &smoother)).collect());
    let mut records = Vec::with_capacity(outcomes.len());
    let mut best: Option<(usize, FitResult)> = None;
    for (idx, (seed, outcome)) in seeds.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(fit) => {
                records.push(RestartRecord { seed: *seed, loglik: Some(fit.loglik), error: None });
                if best.as_ref().is_none_or(|(_, b)| fit.loglik > b.loglik) {
                    best = Some((idx, fit));
                }
            }
            Err(e) => records.push(RestartRecord { seed: *seed, loglik: None, error: Some(e) }),
        }
    }
    Ok(RestartOutcome { best, records })
}

/// [`run_restarts`] that fails with `AllRestartsFailed` when no restart succeeds.
pub fn multi_restart(d: &Dataset, c: usize, plan: &RestartPlan, config: &FitConfig) -> Result<MultiRestart> {
    let RestartOutcome { best, records } = run_restarts(d, c, plan, config)?;
    match best {
        Some((best_index, best)) => Ok(MultiRestart { best, best_index, records }),
        None => Err(Error::AllRestartsFailed(plan.n_restarts)),
    }
}

/// Free-parameter count used by [`bic`].
pub fn parameter_count(fit: &FitResult, d: &Dataset, df: BicDf, mode: Mode) -> Result<f64> {
    let c = fit.params.c() as f64;
    let base = (c - 1.0) + c;
    let means = match (df, mode) {
        (BicDf::Naive, _) | (BicDf::Trace, Mode::Gmm) => c * d.p() as f64,
        (BicDf::Trace, Mode::Smixs) => {
            let bp = d.band_pair()?;
            let mut total = 0.0;
            for (k, cl) in fit.params.clusters.iter().enumerate() {
                let (w, _) = weighted_sums(d.y(), fit.resp.column(k));
                if !(w > 0.0) {
                    continue;
                }
                let chol = penalized_system(&bp, w, cl.alpha)?;
                total += w * smoother_diagonal(&bp, &chol, w, cl.alpha)?.iter().sum::<f64>();
            }
            total
        }
    };
    Ok(base + means)
}

/// `k ln n - 2 ln L`; lower is better.
pub fn bic_value(loglik: f64, k: f64, n: usize) -> f64 {
    k * (n as f64).ln() - 2.0 * loglik
}

pub fn bic(fit: &FitResult, d: &Dataset) -> f64 {
    let c = fit.params.c() as f64;
    let k = (c - 1.0) + c + c * d.p() as f64;
    bic_value(fit.loglik, k, d.n())
}

/// One entry of the BIC curve. `bic` and `loglik` are absent when every
/// restart at this cluster count failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicPoint {
    pub c: usize,
    pub bic: Option<f64>,
    pub loglik: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub chosen_c: usize,
    /// True when the improvement never fell below the threshold.
    pub exhausted: bool,
    pub curve: Vec<BicPoint>,
    pub fit: FitResult,
}

/// Smallest `c` whose successor improves BIC by less than `threshold` relative.
/// Returns the index into `curve` and whether the rule never triggered.
pub fn choose_from_curve(curve: &[f64], threshold: f64) -> (usize, bool) {
    for i in 0..curve.len().saturating_sub(1) {
        let improvement = (curve[i] - curve[i + 1]) / curve[i].abs();
        if !(improvement >= threshold) {
            return (i, false);
        }
    }
    (curve.len().saturating_sub(1), curve.len() > 1)
}

/// Fits every count in `plan.c_range` and applies [`choose_from_curve`].
///
/// A count at which all restarts fail is kept in the curve without a value and
/// treated as infinitely bad, so it never counts as an improvement. The
/// search starts at the first count that could be fitted.
pub fn select_cluster_count(d: &Dataset, plan: &RestartPlan, config: &FitConfig) -> Result<Selection> {
    plan.validate()?;
    let fits: Vec<Result<MultiRestart>> = plan.c_range.iter().map(|&c| multi_restart(d, c, plan, config)).collect();
    let mut curve = Vec::new();
    let mut best_fits = Vec::new();
    for (&c, fit) in plan.c_range.iter().zip(fits) {
        match fit {
            Ok(m) => {
                let k = parameter_count(&m.best, d, config.bic_df, config.mode)?;
                let b = bic_value(m.best.loglik, k, d.n());
                curve.push(BicPoint { c, bic: Some(b), loglik: Some(m.best.loglik), error: None });
                best_fits.push(Some(m.best));
            }
            Err(e @ Error::AllRestartsFailed(_)) => {
                curve.push(BicPoint { c, bic: None, loglik: None, error: Some(e.to_string()) });
                best_fits.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let first = curve
        .iter()
        .position(|b| b.bic.is_some())
        .ok_or(Error::AllRestartsFailed(plan.n_restarts * plan.c_range.len()))?;
    let values: Vec<f64> = curve[first..].iter().map(|b| b.bic.unwrap_or(f64::INFINITY)).collect();
    let (offset, exhausted) = choose_from_curve(&values, plan.bic_threshold);
    let idx = first + offset;
    let fit = best_fits.swap_remove(idx).expect("chosen count has a fit");
    Ok(Selection { chosen_c: curve[idx].c, exhausted, curve, fit })
}
