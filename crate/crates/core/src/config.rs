//! Fit configuration shared by the library entry points and the CLI.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const ALPHA_MIN: f64 = 1.0;
pub const ALPHA_MAX: f64 = 1e6;
pub const SIGMA2_FLOOR: f64 = 1e-12;
pub const DENOM_FLOOR: f64 = 1e-8;
pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_RESTARTS: usize = 50;
pub const DEFAULT_THETA: f64 = 1e-3;
pub const DEFAULT_FD_H: f64 = 0.1;

/// Smallest admissible cluster weight `sum_i z_ik` for a dataset of `n` samples.
pub fn weight_floor(n: usize) -> f64 {
    1e-10 * n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Plain Gaussian mixture: smoothing pinned to zero, no penalty.
    Gmm,
    /// Smoothing-spline cluster means with a roughness penalty.
    Smixs,
}

/// How the per-cluster smoothing weight is chosen during EM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    /// One (or more) finite-difference gradient steps on the CV score per iteration.
    Gradient,
    /// Exhaustive CV minimisation over [`FitConfig::alpha_grid`] each iteration.
    Grid,
    /// Constant smoothing weight.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VarianceEstimator {
    /// Maximiser of the penalized expectation (includes the roughness term).
    Corrected,
    /// Residual-only estimator; kept for ablation.
    Uncorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BicDf {
    /// `c - 1` proportions, `c` variances and `c * p` mean values.
    Naive,
    /// Mean values counted by the trace of each cluster's smoother.
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// O(p) banded Reinsch solve.
    Banded,
    /// Dense `(wI + alpha G)` Cholesky, O(p^3) per solve.
    Dense,
}

/// When the smoothing weight is updated relative to the other M-step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlphaOrder {
    #[value(name = "before")]
    BeforeMStep,
    #[value(name = "after")]
    AfterMStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub mode: Mode,
    pub alpha_mode: AlphaMode,
    pub alpha_order: AlphaOrder,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub bic_df: BicDf,
    pub variance: VarianceEstimator,
    pub backend: Backend,
    pub theta: f64,
    pub fd_h: f64,
    /// Gradient steps per EM iteration.
    pub alpha_steps: usize,
    pub alpha_grid: Vec<f64>,
    pub kmeans_iter: usize,
    /// Worker threads for restarts; 0 uses the global pool.
    pub workers: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: Mode::Smixs,
            alpha_mode: AlphaMode::Gradient,
            alpha_order: AlphaOrder::BeforeMStep,
            rel_tol: DEFAULT_REL_TOL,
            max_iter: DEFAULT_MAX_ITER,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            bic_df: BicDf::Naive,
            variance: VarianceEstimator::Corrected,
            backend: Backend::Banded,
            theta: DEFAULT_THETA,
            fd_h: DEFAULT_FD_H,
            alpha_steps: 1,
            alpha_grid: (0..=6).map(|e| 10f64.powi(e)).collect(),
            kmeans_iter: 100,
            workers: 0,
        }
    }
}

impl FitConfig {
    pub fn gmm() -> Self {
        FitConfig { mode: Mode::Gmm, ..Default::default() }
    }

    /// Smoothing weight a fit starts from.
    pub fn initial_alpha(&self) -> f64 {
        match (self.mode, &self.alpha_mode) {
            (Mode::Gmm, _) => 0.0,
            (Mode::Smixs, AlphaMode::Fixed(a)) => *a,
            (Mode::Smixs, _) => ALPHA_MIN,
        }
    }
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaMode::Gradient => write!(f, "gradient"),
            AlphaMode::Grid => write!(f, "grid"),
            AlphaMode::Fixed(a) => write!(f, "fixed:{a}"),
        }
    }
}

impl FromStr for AlphaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gradient" => Ok(AlphaMode::Gradient),
            "grid" => Ok(AlphaMode::Grid),
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| format!("expected gradient, grid or fixed:<value>, got '{s}'"))?;
                let a: f64 = v.parse().map_err(|_| format!("bad smoothing weight '{v}'"))?;
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(format!("smoothing weight must be finite and >= 0, got {a}"));
                }
                Ok(AlphaMode::Fixed(a))
            }
        }
    }
}
