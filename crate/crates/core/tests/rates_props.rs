use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transfer_knn::rates::{
    accelerated_exponents, lower_bound_rate, phase_grid, theoretical_rate, PhaseAxes,
};
use transfer_knn::{Configuration, RateMode, RateParams, Regime};

fn supercritical(rng: &mut ChaCha8Rng) -> (f64, f64, f64, usize) {
    loop {
        let beta = rng.random_range(0.1..=1.0);
        let d = rng.random_range(1..5);
        let rb = 2.0 * beta / (2.0 * beta + d as f64);
        let gamma = rng.random_range(0.01..2.0);
        let s = rng.random_range(0.01..1.0);
        if (gamma - rb) * (s - rb) < 0.0 && (gamma - s).abs() > 1e-3 {
            return (gamma, s, beta, d);
        }
    }
}

#[test]
fn boundary_continuity() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..2000 {
        let (gamma, s, beta, d) = supercritical(&mut rng);
        let n: f64 = rng.random_range(2.0..1e5);
        let rb = 2.0 * beta / (2.0 * beta + d as f64);
        for m in [n, n.powf(gamma / s)] {
            if !m.is_finite() || m > 1e300 {
                continue;
            }
            let r = theoretical_rate(
                &RateParams::new(gamma, s, beta, d, n, m),
                RateMode::ExponentsOnly,
            )
            .unwrap();
            assert_eq!(r.regime, Regime::Accelerated);
            let wedge = n.powf(-gamma.min(rb)).min(m.powf(-s.min(rb)));
            assert!(
                (r.rate - wedge).abs() <= 1e-9 * wedge,
                "{gamma} {s} {n} {m}: {} vs {wedge}",
                r.rate
            );
        }
    }
}

#[test]
fn accelerated_strictly_below_wedge_inside_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let (gamma, s, beta, d) = supercritical(&mut rng);
        let rb = 2.0 * beta / (2.0 * beta + d as f64);
        for i in 0..20 {
            let n = 10f64.powf(1.0 + 0.2 * i as f64);
            let lo = n.min(n.powf(gamma / s)).ln();
            let hi = n.max(n.powf(gamma / s)).ln();
            if hi > 700.0 {
                continue;
            }
            for j in 1..=20 {
                let m = (lo + (hi - lo) * j as f64 / 21.0).exp();
                let r = theoretical_rate(
                    &RateParams::new(gamma, s, beta, d, n, m),
                    RateMode::ExponentsOnly,
                )
                .unwrap();
                assert_eq!(r.regime, Regime::Accelerated);
                let wedge = n.powf(-gamma.min(rb)).min(m.powf(-s.min(rb)));
                assert!(r.rate < wedge, "{gamma} {s} n {n} m {m}");
            }
        }
    }
}

#[test]
fn exponents_and_lower_bound_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10_000 {
        let gamma = rng.random_range(0.01..3.0);
        let s = rng.random_range(0.01..1.0);
        let beta = rng.random_range(0.05..=1.0);
        let d = rng.random_range(1..6);
        let n = 10f64.powf(rng.random_range(0.0..7.0));
        let m = 10f64.powf(rng.random_range(0.0..7.0));
        let p = RateParams::new(gamma, s, beta, d, n, m);
        let r = theoretical_rate(&p, RateMode::ExponentsOnly).unwrap();
        if r.regime == Regime::Accelerated {
            assert_eq!(r.configuration, Configuration::Supercritical);
            assert!(r.window.unwrap().contains(m));
            assert!((r.source_exp + r.target_exp - r.r_beta).abs() < 1e-12);
        }
        let lb = lower_bound_rate(&p);
        assert!(
            (lb - r.rate).abs() <= 1e-12 * r.rate,
            "{p:?}: {lb} vs {}",
            r.rate
        );
        let (a, b) = accelerated_exponents(gamma, s, r.r_beta);
        if gamma != s {
            assert!((a + b - r.r_beta).abs() < 1e-9 * (1.0 + a.abs() + b.abs()));
        }
    }
}

#[test]
fn acceleration_orientations_are_exclusive() {
    // Off the diagonal the accelerated cells of a (gamma, s) grid at fixed
    // (n, m) share one orientation: gamma > s iff m > n.
    for &(n, m) in &[(1e3, 1e5), (1e5, 1e3), (1e4, 2e4)] {
        let gs: Vec<f64> = (1..=40).map(|i| i as f64 * 0.05).collect();
        let ss: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let g = phase_grid(PhaseAxes::SampleSizes { n, m }, 1.0, 1, &gs, &ss).unwrap();
        let acc: Vec<_> = g
            .cells
            .iter()
            .filter(|c| c.report.regime == Regime::Accelerated)
            .collect();
        let plus = acc.iter().filter(|c| c.axis1 > c.axis2).count();
        let minus = acc.iter().filter(|c| c.axis1 < c.axis2).count();
        assert!(!acc.is_empty());
        if m > n {
            assert_eq!(minus, 0, "n {n} m {m}");
        } else {
            assert_eq!(plus, 0, "n {n} m {m}");
        }
    }
}

#[test]
fn phase_grid_boundaries_in_log_axes() {
    let axis: Vec<f64> = (0..=16).map(|i| 2.0 + 0.25 * i as f64).collect();
    let g = phase_grid(
        PhaseAxes::Exponents { gamma: 1.0, s: 0.2 },
        1.0,
        1,
        &axis,
        &axis,
    )
    .unwrap();
    // accelerated exactly between the lines I (m = n) and b (s log m = gamma log n)
    for c in &g.cells {
        let inside = c.axis2 >= c.axis1 && 0.2 * c.axis2 <= 1.0 * c.axis1 + 1e-12;
        assert_eq!(c.report.regime == Regime::Accelerated, inside, "{c:?}");
    }
    let names: Vec<&str> = g.boundaries.iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, ["a", "b", "I", "M"]);
}
