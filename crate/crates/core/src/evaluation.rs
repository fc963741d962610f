//! Clustering and regression metrics, paired win counting and the runtime
//! benchmark harness.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use pathfinding::prelude::{kuhn_munkres, Matrix};
use serde::{Deserialize, Serialize};

use crate::config::{AlphaMode, Backend, FitConfig, Mode, ALPHA_MIN};
use crate::error::{Error, Result};
use crate::init::seeded_init;
use crate::model::{fit_em_with, Dataset, FitResult, MixtureParams, Responsibilities, Smoother};
use crate::synth::{generate_dataset, GeneratorSpec};

/// Metric values closer than this count as a tie.
pub const TIE_TOL: f64 = 1e-12;

/// `counts[t][k]`: samples with true label `t` assigned to predicted cluster `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    counts: Vec<Vec<usize>>,
}

impl Confusion {
    /// Sized by the largest label on each side.
    pub fn new(true_labels: &[usize], pred_labels: &[usize]) -> Result<Self> {
        let rows = true_labels.iter().max().map_or(0, |m| m + 1);
        let cols = pred_labels.iter().max().map_or(0, |m| m + 1);
        Self::sized(true_labels, pred_labels, rows, cols)
    }

    /// `n_true x n_pred` confusion; clusters without members keep empty rows or columns.
    pub fn sized(true_labels: &[usize], pred_labels: &[usize], n_true: usize, n_pred: usize) -> Result<Self> {
        if true_labels.len() != pred_labels.len() {
            return Err(Error::DimensionMismatch { expected: true_labels.len(), got: pred_labels.len() });
        }
        let mut counts = vec![vec![0; n_pred]; n_true];
        for (&t, &k) in true_labels.iter().zip(pred_labels) {
            if t >= n_true || k >= n_pred {
                return Err(Error::InvalidInput(format!("label pair ({t}, {k}) outside {n_true}x{n_pred} confusion")));
            }
            counts[t][k] += 1;
        }
        Ok(Confusion { counts })
    }

    /// Builds from explicit counts; rows must have equal length.
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let cols = counts.first().map_or(0, Vec::len);
        if let Some(bad) = counts.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, got: bad.len() });
        }
        Ok(Confusion { counts })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn n_true(&self) -> usize {
        self.counts.len()
    }

    pub fn n_pred(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    fn get(&self, t: usize, k: usize) -> usize {
        self.counts.get(t).and_then(|r| r.get(k)).copied().unwrap_or(0)
    }

    /// Square confusion with predicted cluster `k` moved to column `assignment[k]`,
    /// padded with empty clusters.
    pub fn aligned(&self, assignment: &[usize]) -> Confusion {
        let m = self.n_true().max(self.n_pred()).max(assignment.len());
        let mut counts = vec![vec![0; m]; m];
        for (t, row) in counts.iter_mut().enumerate() {
            for (k, &dest) in assignment.iter().enumerate() {
                row[dest] = self.get(t, k);
            }
        }
        Confusion { counts }
    }
}

/// Maximum-count one-to-one assignment of predicted to true clusters.
///
/// Returns `assignment` with `assignment[k]` the true cluster matched to
/// predicted cluster `k`; both sides are padded with empty clusters to a
/// common size. Ties in matched count go to the higher F-score, then to the
/// matching keeping the most clusters on their own index.
pub fn match_clusters(pred_labels: &[usize], true_labels: &[usize]) -> Result<Vec<usize>> {
    let conf = Confusion::new(true_labels, pred_labels)?;
    Ok(match_confusion(&conf))
}

pub fn match_confusion(conf: &Confusion) -> Vec<usize> {
    let m = conf.n_true().max(conf.n_pred());
    if m == 0 {
        return Vec::new();
    }
    let rows: Vec<usize> = (0..m).map(|t| (0..m).map(|k| conf.get(t, k)).sum()).collect();
    let cols: Vec<usize> = (0..m).map(|k| (0..m).map(|t| conf.get(t, k)).sum()).collect();
    // count first, then the pair's F1 term quantized to F1_STEPS, then identity
    let (m_i, steps) = (m as i128, F1_STEPS as i128);
    let weights = Matrix::from_fn(m, m, |(k, t)| {
        let n = conf.get(t, k);
        let f1 = if n == 0 { 0 } else { (2.0 * n as f64 / (rows[t] + cols[k]) as f64 * F1_STEPS).round() as i128 };
        ((n as i128 * (m_i * steps + 1)) + f1) * (m_i + 1) + i128::from(k == t)
    });
    let (_, assignment) = kuhn_munkres(&weights);
    assignment
}

const F1_STEPS: f64 = 1e12;

/// Unweighted mean of per-cluster one-vs-rest F1 over an aligned (square)
/// confusion. A cluster with no true or predicted members scores 0.
pub fn f_score(conf: &Confusion) -> f64 {
    let m = conf.n_true().max(conf.n_pred());
    if m == 0 {
        return 0.0;
    }
    let total: f64 = (0..m)
        .map(|k| {
            let tp = conf.get(k, k) as f64;
            let pred: f64 = (0..conf.n_true()).map(|t| conf.get(t, k) as f64).sum();
            let actual: f64 = (0..conf.n_pred()).map(|j| conf.get(k, j) as f64).sum();
            let precision = if pred > 0.0 { tp / pred } else { 0.0 };
            let recall = if actual > 0.0 { tp / actual } else { 0.0 };
            if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            }
        })
        .sum();
    total / m as f64
}

/// Macro F-score after optimal matching.
pub fn matched_f_score(pred_labels: &[usize], true_labels: &[usize]) -> Result<f64> {
    let conf = Confusion::new(true_labels, pred_labels)?;
    Ok(f_score(&conf.aligned(&match_confusion(&conf))))
}

/// Root mean squared difference between matched estimated and true mean
/// curves, over every knot of every matched pair.
pub fn mean_rmse(est_means: &Array2<f64>, true_means: &Array2<f64>, assignment: &[usize]) -> Result<f64> {
    if est_means.ncols() != true_means.ncols() {
        return Err(Error::DimensionMismatch { expected: true_means.ncols(), got: est_means.ncols() });
    }
    if assignment.len() < est_means.nrows() {
        return Err(Error::DimensionMismatch { expected: est_means.nrows(), got: assignment.len() });
    }
    let mut ss = 0.0;
    let mut count = 0usize;
    for (k, est) in est_means.rows().into_iter().enumerate() {
        let t = assignment[k];
        if t >= true_means.nrows() {
            continue;
        }
        ss += est.iter().zip(true_means.row(t)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        count += est.len();
    }
    if count == 0 {
        return Err(Error::InvalidInput("no matched clusters".into()));
    }
    Ok((ss / count as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Better {
    Higher,
    Lower,
}

/// `(wins_a, wins_b, ties)` over paired per-dataset metric values.
pub fn head_to_head(a: &[f64], b: &[f64], better: Better) -> Result<(usize, usize, usize)> {
    if a.len() != b.len() {
        return Err(Error::UnpairedResults(a.len(), b.len()));
    }
    let mut out = (0, 0, 0);
    for (&x, &y) in a.iter().zip(b) {
        if (x - y).abs() <= TIE_TOL {
            out.2 += 1;
        } else if (x > y) == (better == Better::Higher) {
            out.0 += 1;
        } else {
            out.1 += 1;
        }
    }
    Ok(out)
}

/// Metrics of one fit against generator ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f_score: f64,
    pub rmse: f64,
    pub assignment: Vec<usize>,
}

pub fn evaluate_fit(fit: &FitResult, true_labels: &[usize], true_means: &Array2<f64>) -> Result<Metrics> {
    evaluate_params(&fit.params, &fit.resp, true_labels, true_means)
}

/// Metrics from fitted parameters and their hard-assigned memberships.
pub fn evaluate_params(
    params: &MixtureParams,
    resp: &Responsibilities,
    true_labels: &[usize],
    true_means: &Array2<f64>,
) -> Result<Metrics> {
    let c = params.c();
    let n_true = true_labels.iter().max().map_or(0, |m| m + 1).max(true_means.nrows());
    let conf = Confusion::sized(true_labels, &resp.hard_labels(), n_true, c)?;
    let assignment = match_confusion(&conf);
    let mut est = Array2::zeros((c, params.p()));
    for (k, cl) in params.clusters.iter().enumerate() {
        est.row_mut(k).assign(&ndarray::ArrayView1::from(&cl.mu));
    }
    Ok(Metrics {
        f_score: f_score(&conf.aligned(&assignment)),
        rmse: mean_rmse(&est, true_means, &assignment)?,
        assignment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "gmm")]
    Gmm,
    #[serde(rename = "smixs")]
    Smixs,
    /// Constant smoothing weight.
    #[serde(rename = "smixs-ca")]
    SmixsCa,
    /// Constant smoothing weight with the dense solver.
    #[serde(rename = "smixs-ca-nr")]
    SmixsCaNr,
}

impl Variant {
    pub fn config(self, base: &FitConfig) -> FitConfig {
        let mut cfg = base.clone();
        match self {
            Variant::Gmm => cfg.mode = Mode::Gmm,
            Variant::Smixs => {
                cfg.mode = Mode::Smixs;
                if matches!(cfg.alpha_mode, AlphaMode::Fixed(_)) {
                    cfg.alpha_mode = AlphaMode::Gradient;
                }
            }
            Variant::SmixsCa | Variant::SmixsCaNr => {
                cfg.mode = Mode::Smixs;
                cfg.alpha_mode = AlphaMode::Fixed(ALPHA_MIN);
            }
        }
        cfg.backend = if self == Variant::SmixsCaNr { Backend::Dense } else { Backend::Banded };
        cfg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Gmm => "gmm",
            Variant::Smixs => "smixs",
            Variant::SmixsCa => "smixs-ca",
            Variant::SmixsCaNr => "smixs-ca-nr",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gmm" => Ok(Variant::Gmm),
            "smixs" => Ok(Variant::Smixs),
            "smixs-ca" => Ok(Variant::SmixsCa),
            "smixs-ca-nr" => Ok(Variant::SmixsCaNr),
            _ => Err(format!("unknown variant '{s}' (expected gmm, smixs, smixs-ca or smixs-ca-nr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    C,
    N,
    P,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "c" => Ok(SweepAxis::C),
            "n" => Ok(SweepAxis::N),
            "p" => Ok(SweepAxis::P),
            _ => Err(format!("unknown sweep axis '{s}' (expected c, n or p)")),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::C => "c",
            SweepAxis::N => "n",
            SweepAxis::P => "p",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub base: GeneratorSpec,
    pub variants: Vec<Variant>,
    pub fit: FitConfig,
    /// Timed runs per point and variant; the median is reported.
    pub repeats: usize,
    /// Fixed EM iteration count per run; `None` runs to convergence.
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub axis_value: usize,
    pub variant: Variant,
    pub seconds: Option<f64>,
    pub ratio_to_gmm: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEnvironment {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub repeats: usize,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub axis: SweepAxis,
    pub rows: Vec<BenchRow>,
    pub environment: BenchEnvironment,
}

impl BenchReport {
    pub fn seconds(&self, axis_value: usize, variant: Variant) -> Option<f64> {
        self.rows.iter().find(|r| r.axis_value == axis_value && r.variant == variant).and_then(|r| r.seconds)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn time_variant(d: &Dataset, c: usize, cfg: &FitConfig, init: &MixtureParams, repeats: usize) -> Result<(f64, usize)> {
    let mut times = Vec::with_capacity(repeats);
    let mut iterations = 0;
    for _ in 0..repeats {
        let start = Instant::now();
        let smoother = Smoother::new(d, cfg.backend)?;
        let fit = fit_em_with(d, c, cfg, init, &smoother, false)?;
        times.push(start.elapsed().as_secs_f64());
        iterations = fit.iterations;
    }
    Ok((median(times), iterations))
}

/// Times every variant at every sweep point on the same generated dataset and
/// k-means start. Generation and initialisation are not timed. Failures are
/// reported per row.
pub fn run_benchmark(settings: &BenchSettings) -> Result<BenchReport> {
    if settings.repeats == 0 || settings.variants.is_empty() || settings.values.is_empty() {
        return Err(Error::InvalidInput("benchmark needs repeats, variants and sweep values".into()));
    }
    let mut rows = Vec::new();
    for &value in &settings.values {
        let mut spec = settings.base.clone();
        match settings.axis {
            SweepAxis::C => spec.c = value,
            SweepAxis::N => spec.n = value,
            SweepAxis::P => spec.p = value,
        }
        let prepared = generate_dataset(&spec).and_then(|data| {
            let init = seeded_init(&data.dataset, spec.c, settings.fit.seed, &settings.fit)?;
            Ok((data, init))
        });
        let mut point: Vec<BenchRow> = settings
            .variants
            .iter()
            .map(|&variant| {
                let outcome = prepared.as_ref().map_err(Clone::clone).and_then(|(data, init)| {
                    let mut cfg = variant.config(&settings.fit);
                    if let Some(it) = settings.iterations {
                        cfg.max_iter = it;
                        cfg.rel_tol = 0.0;
                    }
                    time_variant(&data.dataset, spec.c, &cfg, init, settings.repeats)
                });
                match outcome {
                    Ok((secs, iters)) => BenchRow {
                        axis_value: value,
                        variant,
                        seconds: Some(secs),
                        ratio_to_gmm: None,
                        iterations: Some(iters),
                        error: None,
                    },
                    Err(e) => BenchRow {
                        axis_value: value,
                        variant,
                        seconds: None,
                        ratio_to_gmm: None,
                        iterations: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect();
        let gmm = point.iter().find(|r| r.variant == Variant::Gmm).and_then(|r| r.seconds);
        if let Some(g) = gmm.filter(|g| *g > 0.0) {
            for r in &mut point {
                r.ratio_to_gmm = r.seconds.map(|s| s / g);
            }
        }
        rows.extend(point);
    }
    Ok(BenchReport {
        axis: settings.axis,
        rows,
        environment: BenchEnvironment {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            repeats: settings.repeats,
            iterations: settings.iterations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn permuted_truth_is_inverted() {
        let truth = [0, 0, 1, 1, 2, 2];
        let pred = [2, 2, 0, 0, 1, 1];
        let a = match_clusters(&pred, &truth).unwrap();
        assert_eq!(a, vec![1, 2, 0]);
        assert_eq!(matched_f_score(&pred, &truth).unwrap(), 1.0);
        assert_eq!(match_clusters(&truth, &truth).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn f_score_fixtures() {
        let c = Confusion::from_counts(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(f_score(&c), 0.5);
        let c = Confusion::from_counts(vec![vec![3, 0], vec![0, 4]]).unwrap();
        assert_eq!(f_score(&c), 1.0);
        // second predicted cluster empty
        let c = Confusion::from_counts(vec![vec![3, 0], vec![2, 0]]).unwrap();
        let f0 = 2.0 * (3.0 / 5.0) / (1.0 + 3.0 / 5.0);
        assert!((f_score(&c) - f0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn padding_unequal_counts() {
        let truth = [0, 0, 1, 1];
        let pred = [0, 0, 0, 0];
        let a = match_clusters(&pred, &truth).unwrap();
        assert_eq!(a.len(), 2);
        let f = matched_f_score(&pred, &truth).unwrap();
        assert!((f - (2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(Confusion::new(&truth, &pred[..3]).unwrap_err(), Error::DimensionMismatch { expected: 4, got: 3 });
    }

    #[test]
    fn rmse_offsets() {
        let t = array![[0.0, 1.0, 2.0], [5.0, 5.0, 5.0]];
        assert_eq!(mean_rmse(&t, &t, &[0, 1]).unwrap(), 0.0);
        let shifted = array![[5.25, 5.25, 5.25], [0.25, 1.25, 2.25]];
        assert!((mean_rmse(&shifted, &t, &[1, 0]).unwrap() - 0.25).abs() < 1e-15);
        assert!(mean_rmse(&array![[1.0, 2.0]], &t, &[0]).is_err());
    }

    #[test]
    fn head_to_head_counts() {
        assert_eq!(head_to_head(&[0.5, 0.7], &[0.5, 0.7], Better::Higher).unwrap(), (0, 0, 2));
        assert_eq!(head_to_head(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0], Better::Higher).unwrap(), (3, 0, 0));
        let a = [0.9, 0.2, 0.5, 0.4, 0.3];
        let b = [0.8, 0.3, 0.5 + 1e-13, 0.6, 0.1];
        assert_eq!(head_to_head(&a, &b, Better::Higher).unwrap(), (2, 2, 1));
        assert_eq!(head_to_head(&a, &b, Better::Lower).unwrap(), (2, 2, 1));
        assert_eq!(head_to_head(&a, &b[..4], Better::Lower), Err(Error::UnpairedResults(5, 4)));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [Variant::Gmm, Variant::Smixs, Variant::SmixsCa, Variant::SmixsCaNr] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("kmeans".parse::<Variant>().is_err());
        assert_eq!(Variant::SmixsCaNr.config(&FitConfig::default()).backend, Backend::Dense);
    }

    #[test]
    fn single_point_single_variant() {
        let settings = BenchSettings {
            axis: SweepAxis::P,
            values: vec![12],
            base: GeneratorSpec::new(2, 10, 12, 1, 3),
            variants: vec![Variant::SmixsCa],
            fit: FitConfig::default(),
            repeats: 1,
            iterations: Some(3),
        };
        let report = run_benchmark(&settings).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].iterations, Some(3));
        assert!(report.rows[0].seconds.is_some());
        assert!(report.rows[0].ratio_to_gmm.is_none());
    }
}
