//! Dense reference linear algebra.
//!
//! Used by the no-Reinsch benchmark variant and by the brute-force
//! cross-validation oracle. Nothing in the banded fitting path touches it.

use crate::band_spline::BandPair;
use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Dense roughness matrix `G = Q R^{-1} Q^T`, built in O(p^2).
pub fn roughness_matrix(bp: &BandPair) -> DenseMatrix {
    let p = bp.p();
    let m = bp.interior();
    // X = R^{-1} Q^T, one column per knot
    let mut x = vec![vec![0.0; p]; m];
    let mut e = vec![0.0; p];
    for col in 0..p {
        e.fill(0.0);
        e[col] = 1.0;
        let qt = bp.qt_mul(&e).expect("unit vector has p entries");
        let sol = bp_r_solve(bp, &qt);
        for (row, v) in sol.into_iter().enumerate() {
            x[row][col] = v;
        }
    }
    let mut g = DenseMatrix::zeros(p);
    for i in 0..p {
        let lo = i.saturating_sub(2);
        let hi = i.min(m - 1);
        for j in 0..p {
            let v: f64 = (lo..=hi).map(|a| bp.q(i, a) * x[a][j]).sum();
            g.set(i, j, v);
        }
    }
    g
}

fn bp_r_solve(bp: &BandPair, v: &[f64]) -> Vec<f64> {
    // R is tiny relative to the O(p^3) work downstream; reuse the band factors.
    crate::band_spline::pentadiagonal_ldl(bp.r()).expect("R is positive definite").solve(v)
}

/// In-place Cholesky factor `A = L L^T`; returns `L` stored row-major in the
/// lower triangle.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.dim();
    let mut l = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = l.row(i)[..j].iter().zip(&l.row(j)[..j]).map(|(x, y)| x * y).sum();
            let v = a.get(i, j) - dot;
            if i == j {
                if !(v > 0.0) {
                    return Err(Error::NotPositiveDefinite { row: i, pivot: v });
                }
                l.set(i, i, v.sqrt());
            } else {
                let d = l.get(j, j);
                l.set(i, j, v / d);
            }
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the factor from [`cholesky`].
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.dim();
    let mut x = b.to_vec();
    for i in 0..n {
        let dot: f64 = l.row(i)[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - dot) / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in i + 1..n {
            v -= l.get(k, i) * x[k];
        }
        x[i] = v / l.get(i, i);
    }
    x
}

/// Solves `(diag(weights) + alpha G) mu = ytilde` densely.
pub fn dense_smooth(g: &DenseMatrix, weights: &[f64], alpha: f64, ytilde: &[f64]) -> Result<Vec<f64>> {
    let p = g.dim();
    if weights.len() != p || ytilde.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: weights.len().min(ytilde.len()) });
    }
    let mut a = DenseMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            a.set(i, j, alpha * g.get(i, j));
        }
        a.set(i, i, a.get(i, i) + weights[i]);
    }
    let l = cholesky(&a)?;
    Ok(cholesky_solve(&l, ytilde))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band_spline::{build_band_pair, knot_geometry, roughness_form};

    #[test]
    fn roughness_matrix_matches_band_form() {
        let bp = build_band_pair(&knot_geometry(&[0.0, 0.4, 1.0, 2.2, 3.0, 3.1]).unwrap()).unwrap();
        let g = roughness_matrix(&bp);
        let mu = [1.0, -0.5, 2.0, 0.0, 0.7, -1.2];
        let dense = g.quad_form(&mu);
        let band = roughness_form(&bp, &mu).unwrap();
        assert!((dense - band).abs() < 1e-10 * band.max(1.0));
        for i in 0..6 {
            for j in 0..6 {
                assert!((g.get(i, j) - g.get(j, i)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_solves() {
        let mut a = DenseMatrix::zeros(3);
        for (i, row) in [[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]].iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                a.set(i, j, *v);
            }
        }
        let l = cholesky(&a).unwrap();
        let x = cholesky_solve(&l, &[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, want) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - want).abs() < 1e-12);
        }
        a.set(0, 0, -1.0);
        assert!(cholesky(&a).is_err());
    }
}
