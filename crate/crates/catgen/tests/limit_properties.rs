//! Path-level properties of the diffusion limits: local time, the scale
//! transform, quadratic variation and the I²-length of sampled excursions.

use catgen::contour::{tree_from_excursion, Excursion};
use catgen::diffusion::{
    integrate_catalytic_feller, local_time_estimate, quadratic_variation, scale_function, simulate_limit_contour, ContourConfig,
    DiffusionPath, FellerConfig, LimitContour,
};
use catgen::rng::stream_rng;
use rand_distr::{Distribution, StandardNormal};

fn reflected_bm(seed: u64, dt: f64, steps: usize) -> DiffusionPath {
    let mut rng = stream_rng(seed, 0);
    let mut x = 0.0f64;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(x);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        x = (x + dt.sqrt() * z).abs();
        values.push(x);
    }
    DiffusionPath { dt, values, absorbed_at: None, qv_increments: None }
}

fn contour(seed: u64) -> (DiffusionPath, LimitContour) {
    let (x, _) = integrate_catalytic_feller(&FellerConfig { seed, horizon: 3.0, dt: 1e-4, ..Default::default() }).unwrap();
    let run = simulate_limit_contour(&x, &ContourConfig { delta: 0.1, seed, dt: 1e-6, ..Default::default() }).unwrap();
    (x, run)
}

#[test]
fn band_estimator_is_stable_under_halving() {
    let path = reflected_bm(1, 1e-6, 4_000_000);
    for level in [0.0, 0.3] {
        let wide = local_time_estimate(&path, level, 0.02);
        let narrow = local_time_estimate(&path, level, 0.01);
        assert!(wide > 0.1, "level {level} barely visited");
        assert!((narrow / wide - 1.0).abs() < 0.15, "level {level}: {wide} vs {narrow}");
    }
}

#[test]
fn local_time_scales_with_the_scale_derivative() {
    // The first seed whose catalyst stays above delta for a while.
    let (x, run) = (0..).map(contour).find(|(_, r)| r.top > 0.5).unwrap();
    let sf = scale_function(&x, 0.1).unwrap();
    let top = run.top;
    let eps = 0.01 * top;
    let mut checked = 0;
    for frac in [0.1, 0.25, 0.5] {
        let t = frac * top;
        let direct = local_time_estimate(&run.zeta, t, eps);
        let slope = sf.speed(t);
        let via_b = local_time_estimate(&run.b, sf.eval(t), eps * slope) / slope;
        if direct < 0.05 {
            continue;
        }
        checked += 1;
        assert!((via_b / direct - 1.0).abs() < 0.1, "t = {t}: {direct} vs {via_b}");
    }
    assert!(checked >= 2);
}

#[test]
fn contour_quadratic_variation_has_density_two_over_x() {
    for seed in [4, 5] {
        let (_, run) = contour(seed);
        let realized = quadratic_variation(&run.zeta);
        let model: f64 = run.zeta.qv_increments.as_ref().unwrap().iter().sum();
        assert!(model > 0.0);
        assert!((realized / model - 1.0).abs() < 0.1, "seed {seed}: {realized} vs {model}");
    }
}

#[test]
fn i2_length_tracks_quadratic_variation() {
    // Excursions of a sampled Brownian path with height above 1/2.
    let dt: f64 = 2e-6;
    let mesh = 0.02;
    let mut rng = stream_rng(5, 0);
    let (mut i2, mut qv, mut found) = (0.0, 0.0, 0);
    let mut seg = vec![0.0f64];
    let mut w = 0.0f64;
    while found < 10 {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += dt.sqrt() * z;
        if w > 0.0 && seg.len() <= 1_500_000 {
            seg.push(w);
            continue;
        }
        let top = seg.iter().cloned().fold(0.0, f64::max);
        if w <= 0.0 && top > 0.5 {
            seg.push(0.0);
            qv += seg.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>();
            let e = Excursion::new(seg.iter().enumerate().map(|(i, &v)| (i as f64 * dt, v)).collect()).unwrap();
            i2 += tree_from_excursion(&e).i2_length(mesh).unwrap();
            found += 1;
        }
        w = 0.0;
        seg.clear();
        seg.push(0.0);
    }
    assert!((i2 / qv - 1.0).abs() < 0.1, "I² {i2} vs QV {qv}");
}
