#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use smixs::band_spline::BandPair;

/// Integrated squared second derivative of the natural cubic interpolant of
/// `(t, y)`, found by solving for all piecewise-cubic coefficients directly
/// (value, C1, C2 and natural end conditions) and integrating with Simpson's
/// rule, which is exact for the squared linear second derivative.
pub fn curvature_integral(t: &[f64], y: &[f64]) -> f64 {
    let segs = t.len() - 1;
    let n = 4 * segs;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    // piece s on [t_s, t_{s+1}] in local x = t - t_s: a + b x + c x^2 + d x^3
    let mut row = 0;
    for s in 0..segs {
        let h = t[s + 1] - t[s];
        let c0 = 4 * s;
        a[(row, c0)] = 1.0;
        b[row] = y[s];
        row += 1;
        for (k, pw) in [1.0, h, h * h, h * h * h].iter().enumerate() {
            a[(row, c0 + k)] = *pw;
        }
        b[row] = y[s + 1];
        row += 1;
        if s + 1 < segs {
            let c1 = 4 * (s + 1);
            // first derivative continuity
            a[(row, c0 + 1)] = 1.0;
            a[(row, c0 + 2)] = 2.0 * h;
            a[(row, c0 + 3)] = 3.0 * h * h;
            a[(row, c1 + 1)] = -1.0;
            row += 1;
            // second derivative continuity
            a[(row, c0 + 2)] = 2.0;
            a[(row, c0 + 3)] = 6.0 * h;
            a[(row, c1 + 2)] = -2.0;
            row += 1;
        }
    }
    a[(row, 2)] = 2.0;
    row += 1;
    let hl = t[segs] - t[segs - 1];
    a[(row, 4 * (segs - 1) + 2)] = 2.0;
    a[(row, 4 * (segs - 1) + 3)] = 6.0 * hl;
    row += 1;
    assert_eq!(row, n);
    let coef = a.lu().solve(&b).expect("interpolation system is regular");
    let mut total = 0.0;
    for s in 0..segs {
        let h = t[s + 1] - t[s];
        let c = coef[4 * s + 2];
        let d = coef[4 * s + 3];
        let dd = |x: f64| 2.0 * c + 6.0 * d * x;
        let f = |x: f64| dd(x) * dd(x);
        total += h / 6.0 * (f(0.0) + 4.0 * f(h / 2.0) + f(h));
    }
    total
}

/// Dense `G = Q R^{-1} Q^T` assembled with nalgebra from the band entries.
pub fn dense_g(bp: &BandPair) -> DMatrix<f64> {
    let p = bp.p();
    let m = bp.interior();
    let q = DMatrix::from_fn(p, m, |i, j| bp.q(i, j));
    let r = DMatrix::from_fn(m, m, |i, j| bp.r().get(i, j));
    let rinv = r.try_inverse().expect("R invertible");
    &q * rinv * q.transpose()
}

/// `(diag(w) + alpha G)^{-1} ytilde` via LU.
pub fn dense_solve(g: &DMatrix<f64>, w: &[f64], alpha: f64, ytilde: &[f64]) -> DVector<f64> {
    let a = DMatrix::from_diagonal(&DVector::from_column_slice(w)) + g * alpha;
    a.lu().solve(&DVector::from_column_slice(ytilde)).expect("system regular")
}

pub fn dense_smoother_diag(g: &DMatrix<f64>, w: f64, alpha: f64) -> Vec<f64> {
    let p = g.nrows();
    let a = DMatrix::identity(p, p) * w + g * alpha;
    let inv = a.try_inverse().expect("system regular");
    (0..p).map(|j| inv[(j, j)]).collect()
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff = max_abs(got.iter().zip(want).map(|(a, b)| a - b));
    diff / max_abs(want.iter().copied()).max(f64::MIN_POSITIVE)
}
