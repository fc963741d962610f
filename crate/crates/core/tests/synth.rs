mod common;

use smixs::config::{FitConfig, ALPHA_MIN};
use smixs::init::seeded_init;
use smixs::model::fit_em;
use smixs::synth::{generate_dataset, perlin_curve, smoothness_bound, GeneratorSpec};

#[test]
fn second_differences_respect_bound() {
    for octaves in [1, 2, 3] {
        let mut spec = GeneratorSpec::new(3, 30, 80, 1, 0);
        spec.octaves = octaves;
        let bound = smoothness_bound(&spec);
        for seed in 0..100 {
            let m = perlin_curve(seed, spec.p, &spec);
            let worst = m.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max);
            assert!(worst <= bound, "seed {seed}: {worst} > {bound}");
        }
    }
}

#[test]
fn residual_variance_matches_noise_level() {
    for level in 1..=4 {
        let spec = GeneratorSpec::new(3, 200, 100, level, 11);
        let data = generate_dataset(&spec).unwrap();
        let want = spec.sigma().unwrap().powi(2);
        for k in 0..3 {
            let (mut ss, mut cnt) = (0.0, 0.0);
            for (i, &l) in data.labels.iter().enumerate() {
                if l == k {
                    for j in 0..spec.p {
                        ss += (data.dataset.y()[[i, j]] - data.true_means[[k, j]]).powi(2);
                        cnt += 1.0;
                    }
                }
            }
            let got = ss / cnt;
            assert!((got / want - 1.0).abs() < 0.15, "level {level} cluster {k}: {got} vs {want}");
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let spec = GeneratorSpec::new(4, 25, 30, 3, 5);
    let a = generate_dataset(&spec).unwrap();
    let b = generate_dataset(&spec).unwrap();
    assert_eq!(a.dataset.y(), b.dataset.y());
    assert_eq!(a.true_means, b.true_means);
    let c = generate_dataset(&GeneratorSpec { seed: 6, ..spec }).unwrap();
    assert_ne!(a.dataset.y(), c.dataset.y());
}

#[test]
fn true_means_have_finite_roughness() {
    let spec = GeneratorSpec::new(3, 9, 40, 1, 2);
    let data = generate_dataset(&spec).unwrap();
    let bp = data.dataset.band_pair().unwrap();
    for k in 0..3 {
        let mu = data.true_means.row(k).to_vec();
        let r = smixs::band_spline::roughness_form(&bp, &mu).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }
}

#[test]
fn smoothing_engages_at_low_noise() {
    let cfg = FitConfig::default();
    let (mut engaged, mut total) = (0, 0);
    for seed in 0..25 {
        let data = generate_dataset(&GeneratorSpec::new(3, 30, 50, 1, seed)).unwrap();
        let d = &data.dataset;
        let fit = fit_em(d, 3, &cfg, &seeded_init(d, 3, seed, &cfg).unwrap()).unwrap();
        total += fit.params.c();
        engaged += fit.params.clusters.iter().filter(|cl| cl.alpha > ALPHA_MIN).count();
    }
    eprintln!("alpha above minimum on {engaged}/{total} clusters");
    assert!(2 * engaged >= total, "{engaged}/{total}");
}
