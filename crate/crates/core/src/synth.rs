//! Synthetic longitudinal datasets with smooth Perlin-noise cluster means.
//!
//! Each cluster mean is octave-summed 1-D gradient noise sampled at `p`
//! equally spaced times `t_j = j`. Subjects are assigned to clusters
//! round-robin and observed with white Gaussian noise whose magnitude is set by
//! one of four levels.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Noise magnitude per level, as a fraction of the mean amplitude.
pub const NOISE_TABLE: [f64; 4] = [0.05, 0.15, 0.30, 0.50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub c: usize,
    pub n: usize,
    pub p: usize,
    pub noise_level: u8,
    pub seed: u64,
    pub mean_scale: f64,
    pub octaves: u32,
    /// Lattice cells spanned by the first octave.
    pub frequency: f64,
    /// Replaces the level-derived noise magnitude when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma_override: Option<f64>,
}

impl GeneratorSpec {
    pub fn new(c: usize, n: usize, p: usize, noise_level: u8, seed: u64) -> Self {
        GeneratorSpec {
            c,
            n,
            p,
            noise_level,
            seed,
            mean_scale: 1.0,
            octaves: 2,
            frequency: 4.0,
            noise_sigma_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.noise_level) {
            return Err(Error::BadLevel(self.noise_level));
        }
        if self.c == 0 || self.n < self.c {
            return Err(Error::InvalidInput(format!("need n >= c >= 1, got c={}, n={}", self.c, self.n)));
        }
        if self.p < 3 {
            return Err(Error::TooFewKnots(self.p));
        }
        if !(self.mean_scale > 0.0) || !(self.frequency > 0.0) || self.octaves == 0 {
            return Err(Error::InvalidInput("mean scale, frequency and octaves must be positive".into()));
        }
        if let Some(s) = self.noise_sigma_override {
            if !(s >= 0.0) {
                return Err(Error::InvalidInput(format!("noise sigma must be >= 0, got {s}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> Result<f64> {
        match self.noise_sigma_override {
            Some(s) => Ok(s),
            None => noise_sigma(self.noise_level, self.mean_scale),
        }
    }

    fn amplitude_sum(&self) -> f64 {
        (0..self.octaves).map(|o| 0.5f64.powi(o as i32)).sum()
    }
}

pub fn noise_sigma(level: u8, mean_scale: f64) -> Result<f64> {
    match level {
        1..=4 => Ok(mean_scale * NOISE_TABLE[level as usize - 1]),
        _ => Err(Error::BadLevel(level)),
    }
}

/// Gradient lattice for one octave: slope `g[i]` at integer point `i`.
#[derive(Debug, Clone)]
pub struct GradientLattice {
    gradients: Vec<f64>,
}

impl GradientLattice {
    pub fn random(rng: &mut impl Rng, cells: usize) -> Self {
        GradientLattice { gradients: (0..=cells + 1).map(|_| rng.random_range(-1.0..=1.0)).collect() }
    }

    pub fn from_gradients(gradients: Vec<f64>) -> Self {
        GradientLattice { gradients }
    }

    /// Classic gradient noise with smoothstep blending; zero at lattice points.
    pub fn eval(&self, x: f64) -> f64 {
        let cell = x.floor();
        let i = (cell as usize).min(self.gradients.len() - 2);
        let u = x - i as f64;
        let s = u * u * (3.0 - 2.0 * u);
        let left = self.gradients[i] * u;
        let right = self.gradients[i + 1] * (u - 1.0);
        left + s * (right - left)
    }
}

/// One smooth mean curve of `p` values, bounded by `spec.mean_scale` in magnitude.
pub fn perlin_curve(seed: u64, p: usize, spec: &GeneratorSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; p];
    let norm = spec.mean_scale / (0.5 * spec.amplitude_sum());
    for o in 0..spec.octaves {
        let freq = spec.frequency * 2f64.powi(o as i32);
        let amp = 0.5f64.powi(o as i32);
        let phase: f64 = rng.random_range(0.0..1.0);
        let lattice = GradientLattice::random(&mut rng, freq.ceil() as usize + 1);
        for (j, v) in out.iter_mut().enumerate() {
            let x = phase + freq * j as f64 / (p - 1) as f64;
            *v += amp * lattice.eval(x);
        }
    }
    out.iter_mut().for_each(|v| *v *= norm);
    out
}

/// Upper bound on `|m_{j+1} - 2 m_j + m_{j-1}|` for any curve from [`perlin_curve`].
///
/// A single gradient cell has `|f''| <= 12` for slopes in `[-1, 1]`, and the
/// noise is C1 across cells, so a second difference with step `dx` is at most
/// `12 dx^2` per unit amplitude.
pub fn smoothness_bound(spec: &GeneratorSpec) -> f64 {
    let dx = 1.0 / (spec.p - 1) as f64;
    let norm = spec.mean_scale / (0.5 * spec.amplitude_sum());
    (0..spec.octaves)
        .map(|o| {
            let freq = spec.frequency * 2f64.powi(o as i32);
            0.5f64.powi(o as i32) * 12.0 * (freq * dx).powi(2)
        })
        .sum::<f64>()
        * norm
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub labels: Vec<usize>,
    /// `c x p` generating means.
    pub true_means: Array2<f64>,
    pub spec: GeneratorSpec,
}

pub fn generate_dataset(spec: &GeneratorSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let sigma = spec.sigma()?;
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut true_means = Array2::zeros((spec.c, spec.p));
    for k in 0..spec.c {
        let curve_seed: u64 = master.random();
        let curve = perlin_curve(curve_seed, spec.p, spec);
        true_means.row_mut(k).assign(&ndarray::ArrayView1::from(&curve));
    }
    let mut noise_rng = ChaCha8Rng::seed_from_u64(master.random());
    let labels: Vec<usize> = (0..spec.n).map(|i| i % spec.c).collect();
    let mut y = Array2::zeros((spec.n, spec.p));
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
        for (i, &k) in labels.iter().enumerate() {
            for j in 0..spec.p {
                y[[i, j]] = true_means[[k, j]] + normal.sample(&mut noise_rng);
            }
        }
    } else {
        for (i, &k) in labels.iter().enumerate() {
            y.row_mut(i).assign(&true_means.row(k));
        }
    }
    let t: Vec<f64> = (0..spec.p).map(|j| j as f64).collect();
    let dataset = Dataset::new(y, t)?.with_labels(labels.clone())?;
    Ok(SyntheticData { dataset, labels, true_means, spec: spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_table() {
        assert_eq!(noise_sigma(1, 1.0).unwrap(), 0.05);
        for scale in [0.1, 1.0, 7.0] {
            assert!(noise_sigma(4, scale).unwrap() > noise_sigma(1, scale).unwrap());
        }
        assert_eq!(noise_sigma(5, 1.0), Err(Error::BadLevel(5)));
        assert_eq!(noise_sigma(0, 1.0), Err(Error::BadLevel(0)));
    }

    #[test]
    fn lattice_points_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lat = GradientLattice::random(&mut rng, 6);
        for i in 0..=6 {
            assert_eq!(lat.eval(i as f64), 0.0);
        }
        let lat = GradientLattice::from_gradients(vec![1.0, -1.0, 0.0]);
        assert!((lat.eval(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn curves_are_deterministic_and_bounded() {
        let spec = GeneratorSpec::new(3, 30, 40, 1, 0);
        let a = perlin_curve(99, 40, &spec);
        assert_eq!(a, perlin_curve(99, 40, &spec));
        assert_ne!(a, perlin_curve(100, 40, &spec));
        assert!(a.iter().all(|v| v.abs() <= spec.mean_scale));
    }

    #[test]
    fn round_robin_shapes() {
        let spec = GeneratorSpec::new(3, 30, 20, 2, 7);
        let data = generate_dataset(&spec).unwrap();
        assert_eq!(data.dataset.n(), 30);
        assert_eq!(data.dataset.p(), 20);
        let mut sizes = [0; 3];
        for &l in &data.labels {
            sizes[l] += 1;
        }
        assert_eq!(sizes, [10, 10, 10]);
        let spec = GeneratorSpec::new(3, 31, 20, 2, 7);
        let data = generate_dataset(&spec).unwrap();
        let mut sizes = [0; 3];
        data.labels.iter().for_each(|&l| sizes[l] += 1);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn zero_noise_reproduces_means() {
        let mut spec = GeneratorSpec::new(2, 6, 10, 3, 4);
        spec.noise_sigma_override = Some(0.0);
        let data = generate_dataset(&spec).unwrap();
        for (i, &k) in data.labels.iter().enumerate() {
            assert_eq!(data.dataset.y().row(i), data.true_means.row(k));
        }
    }

    #[test]
    fn spec_guards() {
        assert_eq!(generate_dataset(&GeneratorSpec::new(2, 10, 10, 5, 0)).unwrap_err(), Error::BadLevel(5));
        assert!(generate_dataset(&GeneratorSpec::new(4, 3, 10, 1, 0)).is_err());
        assert!(generate_dataset(&GeneratorSpec::new(2, 4, 2, 1, 0)).is_err());
    }
}
