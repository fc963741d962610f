mod common;

use common::{curvature_integral, dense_g, dense_smoother_diag, dense_solve, rel_err};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smixs::band_spline::*;

fn pair(t: &[f64]) -> BandPair {
    build_band_pair(&knot_geometry(t).unwrap()).unwrap()
}

fn random_knots(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(p);
    let mut acc = rng.random_range(-5.0..5.0);
    for _ in 0..p {
        t.push(acc);
        acc += rng.random_range(0.2..2.0);
    }
    t
}

#[test]
fn band_entries_match_curvature_integral() {
    // mu^T Q R^-1 Q^T mu against direct integration of the interpolant
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in [3, 4, 5, 8, 13] {
        let t = random_knots(&mut rng, p);
        let bp = pair(&t);
        for _ in 0..5 {
            let mu: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let want = curvature_integral(&t, &mu);
            let got = roughness_form(&bp, &mu).unwrap();
            assert!((got - want).abs() <= 1e-9 * want.max(1.0), "p={p}: {got} vs {want}");
        }
    }
    // the frozen small cases
    assert!((curvature_integral(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]) - 6.0).abs() < 1e-12);
    let bp = pair(&[0.0, 1.0, 3.0]);
    let mu = [0.2, 1.0, -0.4];
    assert!((roughness_form(&bp, &mu).unwrap() - curvature_integral(&[0.0, 1.0, 3.0], &mu)).abs() < 1e-12);
}

#[test]
fn ldl_reconstructs_penalized_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let p = rng.random_range(3..60);
        let bp = pair(&random_knots(&mut rng, p));
        let w = rng.random_range(0.1..100.0);
        let alpha = 10f64.powf(rng.random_range(-2.0..6.0));
        let chol = penalized_system(&bp, w, alpha).unwrap();
        assert!(chol.d.iter().all(|&d| d > 0.0));
        let back = chol.reconstruct();
        // independent assembly of R + alpha/w Q^T Q
        let m = bp.interior();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            for j in 0..m {
                let qtq: f64 = (0..p).map(|r| bp.q(r, i) * bp.q(r, j)).sum();
                let want = bp.r().get(i, j) + alpha / w * qtq;
                num += (back.get(i, j) - want).powi(2);
                den += want * want;
            }
        }
        assert!((num / den).sqrt() <= 1e-10);
    }
}

#[test]
fn band_inverse_matches_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bp = pair(&random_knots(&mut rng, 12));
    let chol = penalized_system(&bp, 2.0, 30.0).unwrap();
    let m = chol.dim();
    let back = chol.reconstruct();
    let dense = nalgebra::DMatrix::from_fn(m, m, |i, j| back.get(i, j)).try_inverse().unwrap();
    let band = chol.band_inverse();
    for i in 0..m {
        for j in i..(i + 3).min(m) {
            assert!((band.get(i, j) - dense[(i, j)]).abs() < 1e-12 * dense[(i, i)].abs());
        }
    }
}

#[test]
fn reinsch_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..120 {
        let p = rng.random_range(3..=200);
        let bp = pair(&random_knots(&mut rng, p));
        let w = rng.random_range(0.01..1e3);
        let alpha = if rng.random_bool(0.1) { 0.0 } else { 10f64.powf(rng.random_range(-3.0..6.0)) };
        let y: Vec<f64> = (0..p).map(|_| rng.random_range(-10.0..10.0)).collect();
        let s = reinsch_solve(&bp, w, alpha, &y).unwrap();
        let g = dense_g(&bp);
        let want = dense_solve(&g, &vec![w; p], alpha, &y);
        assert!(rel_err(&s.mu, want.as_slice()) <= 1e-8, "p={p} w={w} alpha={alpha}");

        let lhs = bp.qt_mul(&s.mu).unwrap();
        let rhs = bp.r_mul(&s.gamma).unwrap();
        let mu_inf = s.mu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + mu_inf));
        }

        let chol = penalized_system(&bp, w, alpha).unwrap();
        let diag = smoother_diagonal(&bp, &chol, w, alpha).unwrap();
        let want = dense_smoother_diag(&g, w, alpha);
        assert!(rel_err(&diag, &want) <= 1e-8);
        for s in &diag {
            assert!(*s > 0.0 && *s <= 1.0 / w + 1e-12);
        }
    }
}

#[test]
fn three_knot_smoother_diagonal() {
    let bp = pair(&[0.0, 1.0, 2.0]);
    let chol = penalized_system(&bp, 1.0, 1.0).unwrap();
    let diag = smoother_diagonal(&bp, &chol, 1.0, 1.0).unwrap();
    // (I + 1.5 v v^T)^-1 with v = (1,-2,1): I - 1.5/(1+9) v v^T
    let want = [1.0 - 0.15, 1.0 - 0.6, 1.0 - 0.15];
    for (g, w) in diag.iter().zip(want) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn heavy_smoothing_approaches_regression_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let t = random_knots(&mut rng, 25);
    let bp = pair(&t);
    let w = 3.0;
    let ytilde: Vec<f64> = t.iter().map(|x| w * (0.7 * x - 2.0) + rng.random_range(-1.0..1.0)).collect();
    let s = reinsch_solve(&bp, w, 1e6, &ytilde).unwrap();
    // least-squares line through (t, ytilde / w)
    let y: Vec<f64> = ytilde.iter().map(|v| v / w).collect();
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let slope = t.iter().zip(&y).map(|(a, b)| (a - tm) * (b - ym)).sum::<f64>()
        / t.iter().map(|a| (a - tm).powi(2)).sum::<f64>();
    let line: Vec<f64> = t.iter().map(|a| ym + slope * (a - tm)).collect();
    assert!(rel_err(&s.mu, &line) < 1e-3);
}

#[test]
fn roughness_non_increasing_in_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..20 {
        let p = rng.random_range(3..40);
        let bp = pair(&random_knots(&mut rng, p));
        let y: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut last = f64::INFINITY;
        for e in -2..=6 {
            let s = reinsch_solve(&bp, 1.5, 10f64.powi(e), &y).unwrap();
            let r = roughness_form(&bp, &s.mu).unwrap();
            assert!(r <= last * (1.0 + 1e-9) + 1e-12);
            last = r;
        }
    }
}

#[test]
fn reinsch_scales_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut times = Vec::new();
    let sizes = [100usize, 1_000, 10_000];
    for &p in &sizes {
        let t: Vec<f64> = (0..p).map(|i| i as f64).collect();
        let bp = pair(&t);
        let y: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reps = 200_000 / p;
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let start = std::time::Instant::now();
            for _ in 0..reps {
                std::hint::black_box(reinsch_solve(&bp, 2.0, 10.0, &y).unwrap());
            }
            best = best.min(start.elapsed().as_secs_f64() / reps as f64);
        }
        times.push(best);
    }
    // least-squares slope of log time against log p
    let xs: Vec<f64> = sizes.iter().map(|&p| (p as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let xm = xs.iter().sum::<f64>() / 3.0;
    let ym = ys.iter().sum::<f64>() / 3.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum::<f64>()
        / xs.iter().map(|x| (x - xm).powi(2)).sum::<f64>();
    assert!(slope <= 1.3, "fit exponent {slope}");
}

proptest! {
    #[test]
    fn affine_curves_have_zero_roughness(
        gaps in prop::collection::vec(0.05f64..5.0, 2..30),
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let mut t = vec![0.0];
        for g in &gaps {
            t.push(t.last().unwrap() + g);
        }
        let bp = pair(&t);
        let mu: Vec<f64> = t.iter().map(|x| a * x + b).collect();
        let scale = mu.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let r = roughness_form(&bp, &mu).unwrap();
        prop_assert!(r <= 1e-12 * scale * scale * (t.len() as f64));
    }
}
