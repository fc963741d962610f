//! Banded machinery for natural cubic smoothing splines.
//!
//! A natural cubic spline with knots `t_1 < .. < t_p` is fully described by its
//! values `mu` and its second derivatives `gamma` at the interior knots. The two
//! are tied by `Q^T mu = R gamma`, where `Q` is a `p x (p-2)` band matrix and `R`
//! a symmetric tridiagonal `(p-2) x (p-2)` matrix. The roughness
//! `int mu''(t)^2 dt` equals `mu^T G mu` with `G = Q R^{-1} Q^T`; `G` is never
//! formed here.
//!
//! Smoothing a weighted observation vector `ytilde` with scalar weight `w`
//! amounts to solving `(w I + alpha G) mu = ytilde`, which the Reinsch
//! formulation turns into the pentadiagonal system
//! `(R + alpha/w Q^T Q) gamma = Q^T ytilde / w` followed by
//! `mu = (ytilde - alpha Q gamma) / w`.

use crate::error::{Error, Result};

/// Knot positions and their spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotGeometry {
    t: Vec<f64>,
    h: Vec<f64>,
}

impl KnotGeometry {
    pub fn new(t: &[f64]) -> Result<Self> {
        knot_geometry(t)
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

pub fn knot_geometry(t: &[f64]) -> Result<KnotGeometry> {
    if t.len() < 3 {
        return Err(Error::TooFewKnots(t.len()));
    }
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some((index, &spacing)) = h.iter().enumerate().find(|(_, s)| !(**s > 0.0)) {
        return Err(Error::NonIncreasingKnots { index, spacing });
    }
    Ok(KnotGeometry { t: t.to_vec(), h })
}

/// Symmetric matrix with bandwidth two, stored diagonal-major.
///
/// `diag[i] = M[i][i]`, `off1[i] = M[i][i+1]`, `off2[i] = M[i][i+2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand5 {
    pub diag: Vec<f64>,
    pub off1: Vec<f64>,
    pub off2: Vec<f64>,
}

impl SymBand5 {
    pub fn zeros(m: usize) -> Self {
        SymBand5 { diag: vec![0.0; m], off1: vec![0.0; m.saturating_sub(1)], off2: vec![0.0; m.saturating_sub(2)] }
    }

    pub fn identity(m: usize) -> Self {
        let mut b = Self::zeros(m);
        b.diag.fill(1.0);
        b
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        match b - a {
            0 => self.diag[a],
            1 => self.off1[a],
            2 => self.off2[a],
            _ => 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        let m = self.dim();
        for (len, want) in [(self.off1.len(), m.saturating_sub(1)), (self.off2.len(), m.saturating_sub(2))] {
            if len != want {
                return Err(Error::DimensionMismatch { expected: want, got: len });
            }
        }
        Ok(())
    }
}

/// The value/second-derivative band matrices of a natural cubic spline.
#[derive(Debug, Clone)]
pub struct BandPair {
    geometry: KnotGeometry,
    // Column m of Q has entries in rows m, m+1, m+2.
    q_lo: Vec<f64>,
    q_mid: Vec<f64>,
    q_hi: Vec<f64>,
    r: SymBand5,
    r_chol: BandCholesky,
}

impl BandPair {
    pub fn geometry(&self) -> &KnotGeometry {
        &self.geometry
    }

    /// Number of knots.
    pub fn p(&self) -> usize {
        self.geometry.len()
    }

    /// Number of interior knots.
    pub fn interior(&self) -> usize {
        self.p() - 2
    }

    /// `Q[row][col]`, zero outside the band.
    pub fn q(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.q_lo[col]
        } else if row == col + 1 {
            self.q_mid[col]
        } else if row == col + 2 {
            self.q_hi[col]
        } else {
            0.0
        }
    }

    /// The tridiagonal `R` (its second off-diagonal is zero).
    pub fn r(&self) -> &SymBand5 {
        &self.r
    }

    /// `Q^T x` for a vector of `p` values.
    pub fn qt_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.p())?;
        Ok((0..self.interior())
            .map(|m| self.q_lo[m] * x[m] + self.q_mid[m] * x[m + 1] + self.q_hi[m] * x[m + 2])
            .collect())
    }

    /// `Q g` for a vector of `p - 2` values.
    pub fn q_mul(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(g, self.interior())?;
        let mut out = vec![0.0; self.p()];
        for (m, &gm) in g.iter().enumerate() {
            out[m] += self.q_lo[m] * gm;
            out[m + 1] += self.q_mid[m] * gm;
            out[m + 2] += self.q_hi[m] * gm;
        }
        Ok(out)
    }

    /// `R g` for a vector of `p - 2` values.
    pub fn r_mul(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(g, self.interior())?;
        let m = self.interior();
        Ok((0..m)
            .map(|i| {
                let mut acc = self.r.diag[i] * g[i];
                if i > 0 {
                    acc += self.r.off1[i - 1] * g[i - 1];
                }
                if i + 1 < m {
                    acc += self.r.off1[i] * g[i + 1];
                }
                acc
            })
            .collect())
    }

    /// `Q^T Q` in band storage.
    pub fn qtq(&self) -> SymBand5 {
        let m = self.interior();
        let mut out = SymBand5::zeros(m);
        for i in 0..m {
            out.diag[i] = self.q_lo[i].powi(2) + self.q_mid[i].powi(2) + self.q_hi[i].powi(2);
            if i + 1 < m {
                // shared rows i+1 and i+2
                out.off1[i] = self.q_mid[i] * self.q_lo[i + 1] + self.q_hi[i] * self.q_mid[i + 1];
            }
            if i + 2 < m {
                out.off2[i] = self.q_hi[i] * self.q_lo[i + 2];
            }
        }
        out
    }

    /// Second derivatives at interior knots of the natural cubic interpolant of `mu`.
    pub fn second_derivatives(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let v = self.qt_mul(mu)?;
        Ok(self.r_chol.solve(&v))
    }
}

fn check_len(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

pub fn build_band_pair(g: &KnotGeometry) -> Result<BandPair> {
    let p = g.len();
    if p < 3 {
        return Err(Error::TooFewKnots(p));
    }
    let h = g.h();
    let m = p - 2;
    let mut q_lo = Vec::with_capacity(m);
    let mut q_mid = Vec::with_capacity(m);
    let mut q_hi = Vec::with_capacity(m);
    let mut r = SymBand5::zeros(m);
    for c in 0..m {
        let (h0, h1) = (h[c], h[c + 1]);
        q_lo.push(1.0 / h0);
        q_mid.push(-1.0 / h0 - 1.0 / h1);
        q_hi.push(1.0 / h1);
        r.diag[c] = (h0 + h1) / 3.0;
        if c + 1 < m {
            r.off1[c] = h1 / 6.0;
        }
    }
    let r_chol = pentadiagonal_ldl(&r)?;
    Ok(BandPair { geometry: g.clone(), q_lo, q_mid, q_hi, r, r_chol })
}

/// `mu^T G mu`, the integrated squared second derivative of the natural
/// cubic interpolant through `mu`.
pub fn roughness_form(bp: &BandPair, mu: &[f64]) -> Result<f64> {
    let v = bp.qt_mul(mu)?;
    let x = bp.r_chol.solve(&v);
    let form: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(form.max(0.0))
}

/// `L D L^T` factors of a symmetric pentadiagonal matrix.
///
/// `l1[i] = L[i+1][i]`, `l2[i] = L[i+2][i]`; `L` has a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCholesky {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub d: Vec<f64>,
}

pub fn pentadiagonal_ldl(a: &SymBand5) -> Result<BandCholesky> {
    a.check()?;
    let m = a.dim();
    let mut d = vec![0.0; m];
    let mut l1 = vec![0.0; m.saturating_sub(1)];
    let mut l2 = vec![0.0; m.saturating_sub(2)];
    for i in 0..m {
        let mut di = a.diag[i];
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        if !(di > 0.0) {
            return Err(Error::NotPositiveDefinite { row: i, pivot: di });
        }
        d[i] = di;
        if i + 1 < m {
            let mut v = a.off1[i];
            if i >= 1 {
                v -= l1[i - 1] * l2[i - 1] * d[i - 1];
            }
            l1[i] = v / di;
        }
        if i + 2 < m {
            l2[i] = a.off2[i] / di;
        }
    }
    Ok(BandCholesky { l1, l2, d })
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Solves `L D L^T x = b` by forward and backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.dim();
        debug_assert_eq!(b.len(), m);
        let mut x = b.to_vec();
        for i in 0..m {
            if i >= 1 {
                x[i] -= self.l1[i - 1] * x[i - 1];
            }
            if i >= 2 {
                x[i] -= self.l2[i - 2] * x[i - 2];
            }
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..m).rev() {
            if i + 1 < m {
                x[i] -= self.l1[i] * x[i + 1];
            }
            if i + 2 < m {
                x[i] -= self.l2[i] * x[i + 2];
            }
        }
        x
    }

    /// Rebuilds `L D L^T` in band storage.
    pub fn reconstruct(&self) -> SymBand5 {
        let m = self.dim();
        let l = |i: usize, j: usize| -> f64 {
            if i == j {
                1.0
            } else if i == j + 1 {
                self.l1[j]
            } else if i == j + 2 {
                self.l2[j]
            } else {
                0.0
            }
        };
        let entry = |i: usize, j: usize| -> f64 {
            let lo = i.max(j).saturating_sub(2);
            (lo..=i.min(j)).map(|k| l(i, k) * self.d[k] * l(j, k)).sum()
        };
        let mut out = SymBand5::zeros(m);
        for i in 0..m {
            out.diag[i] = entry(i, i);
            if i + 1 < m {
                out.off1[i] = entry(i, i + 1);
            }
            if i + 2 < m {
                out.off2[i] = entry(i, i + 2);
            }
        }
        out
    }

    /// Central band (bandwidth two) of the inverse of `L D L^T`, in O(m).
    ///
    /// Uses the recursion `Sigma = D^{-1} L^{-1} + (I - L^T) Sigma`, evaluated
    /// from the last row upward and restricted to the band.
    pub fn band_inverse(&self) -> SymBand5 {
        let m = self.dim();
        let mut s = SymBand5::zeros(m);
        for i in (0..m).rev() {
            let a = if i + 1 < m { self.l1[i] } else { 0.0 };
            let b = if i + 2 < m { self.l2[i] } else { 0.0 };
            let s11 = if i + 1 < m { s.diag[i + 1] } else { 0.0 };
            let s22 = if i + 2 < m { s.diag[i + 2] } else { 0.0 };
            let s12 = if i + 2 < m { s.off1[i + 1] } else { 0.0 };
            if i + 2 < m {
                s.off2[i] = -a * s12 - b * s22;
            }
            if i + 1 < m {
                let s02 = if i + 2 < m { s.off2[i] } else { 0.0 };
                s.off1[i] = -a * s11 - b * s12;
                s.diag[i] = 1.0 / self.d[i] - a * s.off1[i] - b * s02;
            } else {
                s.diag[i] = 1.0 / self.d[i];
            }
        }
        s
    }
}

/// Result of one penalized spline solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSolve {
    /// Fitted values at the knots.
    pub mu: Vec<f64>,
    /// Second derivatives at the interior knots.
    pub gamma: Vec<f64>,
    pub weight: f64,
    pub alpha: f64,
}

/// Factors `R + (alpha / w) Q^T Q`.
pub fn penalized_system(bp: &BandPair, w: f64, alpha: f64) -> Result<BandCholesky> {
    check_weight(w)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("smoothing weight must be >= 0, got {alpha}")));
    }
    let scale = alpha / w;
    let mut m = bp.qtq();
    for (x, r) in m.diag.iter_mut().zip(&bp.r.diag) {
        *x = r + scale * *x;
    }
    for (x, r) in m.off1.iter_mut().zip(&bp.r.off1) {
        *x = r + scale * *x;
    }
    for x in m.off2.iter_mut() {
        *x *= scale;
    }
    pentadiagonal_ldl(&m)
}

fn check_weight(w: f64) -> Result<()> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::DegenerateWeight { weight: w, floor: 0.0 });
    }
    Ok(())
}

/// Solves `(w I + alpha G) mu = ytilde` in O(p).
pub fn reinsch_solve(bp: &BandPair, w: f64, alpha: f64, ytilde: &[f64]) -> Result<SplineSolve> {
    let chol = penalized_system(bp, w, alpha)?;
    reinsch_solve_factored(bp, &chol, w, alpha, ytilde)
}

/// As [`reinsch_solve`], reusing factors from [`penalized_system`].
pub fn reinsch_solve_factored(
    bp: &BandPair,
    chol: &BandCholesky,
    w: f64,
    alpha: f64,
    ytilde: &[f64],
) -> Result<SplineSolve> {
    check_weight(w)?;
    let rhs: Vec<f64> = bp.qt_mul(ytilde)?.into_iter().map(|v| v / w).collect();
    let gamma = chol.solve(&rhs);
    let mu = if alpha == 0.0 {
        ytilde.iter().map(|y| y / w).collect()
    } else {
        let qg = bp.q_mul(&gamma)?;
        ytilde.iter().zip(&qg).map(|(y, g)| (y - alpha * g) / w).collect()
    };
    Ok(SplineSolve { mu, gamma, weight: w, alpha })
}

/// Diagonal of the smoother `S = (w I + alpha G)^{-1}` from the band factors.
///
/// `S = I/w - (alpha/w^2) Q M^{-1} Q^T` with `M = R + (alpha/w) Q^T Q`; only the
/// central band of `M^{-1}` enters the diagonal.
pub fn smoother_diagonal(bp: &BandPair, chol: &BandCholesky, w: f64, alpha: f64) -> Result<Vec<f64>> {
    check_weight(w)?;
    if chol.dim() != bp.interior() {
        return Err(Error::DimensionMismatch { expected: bp.interior(), got: chol.dim() });
    }
    let p = bp.p();
    let inv_w = 1.0 / w;
    if alpha == 0.0 {
        return Ok(vec![inv_w; p]);
    }
    let sigma = chol.band_inverse();
    let m = bp.interior();
    let coef = alpha * inv_w * inv_w;
    Ok((0..p)
        .map(|j| {
            let lo = j.saturating_sub(2);
            let hi = j.min(m - 1);
            let mut acc = 0.0;
            for a in lo..=hi {
                let qa = bp.q(j, a);
                for b in lo..=hi {
                    acc += qa * sigma.get(a, b) * bp.q(j, b);
                }
            }
            inv_w - coef * acc
        })
        .collect())
}
