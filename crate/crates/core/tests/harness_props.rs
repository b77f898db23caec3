use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use transfer_knn::harness::{
    bump_ensemble, generate_data, l2_distance_sq, mc_excess_risk, regime_experiment, sweep,
    sweep_detailed,
};
use transfer_knn::{
    DistributionFamily, ExperimentConfig, HolderFunction, LabeledSample, NeighborFunctionConfig,
    NoiseSpec, TrainedEstimator,
};

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        source: DistributionFamily::exponential(2.0).unwrap(),
        target: DistributionFamily::exponential(1.0).unwrap(),
        f_star: HolderFunction::Sine {
            amplitude: 1.0,
            frequency: 2.0,
        },
        noise: NoiseSpec::gaussian(0.3).unwrap(),
        estimator: NeighborFunctionConfig::default(),
        n_grid: vec![50, 100],
        m_grid: vec![0, 20],
        reps: 4,
        n_test: 200,
        seed,
    }
}

#[test]
fn sweep_is_deterministic_and_ordered() {
    let a = sweep_detailed(&small_config(9)).unwrap();
    let b = sweep_detailed(&small_config(9)).unwrap();
    assert_eq!(a, b);
    let cells: Vec<(usize, usize)> = a.estimates.iter().map(|e| (e.n, e.m)).collect();
    assert_eq!(cells, [(50, 0), (50, 20), (100, 0), (100, 20)]);
    assert!(a
        .records
        .windows(2)
        .all(|w| (w[0].n, w[0].m, w[0].rep) < (w[1].n, w[1].m, w[1].rep)));
    let c = sweep_detailed(&small_config(10)).unwrap();
    assert_ne!(a.records[0].risk, c.records[0].risk);
}

#[test]
fn single_cell_single_rep() {
    let mut cfg = small_config(1);
    cfg.n_grid = vec![30];
    cfg.m_grid = vec![0];
    cfg.reps = 1;
    let est = sweep(&cfg).unwrap();
    assert_eq!(est.len(), 1);
    assert_eq!(est[0].stderr, 0.0);
}

#[test]
fn constant_prediction_risk() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = DistributionFamily::uniform(0.0, 1.0).unwrap();
    let c = 0.7;
    let data = generate_data(
        &u,
        &HolderFunction::Constant { value: c },
        &NoiseSpec::gaussian(0.0).unwrap(),
        50,
        &mut rng,
    );
    let fitted = TrainedEstimator::fit(
        data,
        LabeledSample::empty(1),
        NeighborFunctionConfig::default(),
    )
    .unwrap();
    let risk = mc_excess_risk(&fitted, &HolderFunction::Zero, &u, 4000, &mut rng).unwrap();
    assert!((risk - c * c).abs() < 1e-12);
    let exact = mc_excess_risk(
        &fitted,
        &HolderFunction::Constant { value: c },
        &u,
        1,
        &mut rng,
    )
    .unwrap();
    assert!(exact < 1e-24);
}

#[test]
fn excess_risk_is_unbiased_for_frozen_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = small_config(0);
    let data = generate_data(&cfg.source, &cfg.f_star, &cfg.noise, 400, &mut rng);
    let fitted = TrainedEstimator::fit(data, LabeledSample::empty(1), cfg.estimator).unwrap();
    let small: Vec<f64> = (0..100)
        .map(|_| mc_excess_risk(&fitted, &cfg.f_star, &cfg.target, 1000, &mut rng).unwrap())
        .collect();
    let mean_small = small.iter().sum::<f64>() / 100.0;
    let sd_small = (small.iter().map(|r| (r - mean_small).powi(2)).sum::<f64>() / 99.0).sqrt();
    let se_small = sd_small / 10.0;
    // standard error of the large evaluation from per-point squared errors
    let big_runs: Vec<f64> = (0..10)
        .map(|_| mc_excess_risk(&fitted, &cfg.f_star, &cfg.target, 10_000, &mut rng).unwrap())
        .collect();
    let big = big_runs.iter().sum::<f64>() / 10.0;
    let sd_big =
        (big_runs.iter().map(|r| (r - big).powi(2)).sum::<f64>() / 9.0).sqrt() / 10f64.sqrt();
    let combined = (se_small.powi(2) + sd_big.powi(2)).sqrt();
    assert!(
        (mean_small - big).abs() <= 3.0 * combined,
        "{mean_small} vs {big} (se {combined})"
    );
}

#[test]
fn bump_distances_add_over_disjoint_supports() {
    let q = DistributionFamily::exponential(1.0).unwrap();
    let (a, h, l, beta): (f64, f64, f64, f64) = (1.0, 0.08, 1.5, 0.7);
    let count = (a / (2.0 * h)).floor() as usize;
    let b1: Vec<bool> = (0..count).map(|i| i % 2 == 0).collect();
    let b2: Vec<bool> = (0..count).map(|i| i % 3 == 0).collect();
    let f1 = bump_ensemble(a, h, l, beta, 1, b1.clone()).unwrap();
    let f2 = bump_ensemble(a, h, l, beta, 1, b2.clone()).unwrap();
    let HolderFunction::Bumps(ens) = &f1 else {
        unreachable!()
    };
    let mut breaks = Vec::new();
    for i in 0..count {
        let z = ens.center(i)[0];
        breaks.extend([z - h, z, z + h]);
    }
    let whole = l2_distance_sq(&f1, &f2, &q, 0.0, 3.0 * a, &breaks);
    let mut single = vec![false; count];
    let mut per_bump = 0.0;
    for i in 0..count {
        if b1[i] != b2[i] {
            single.iter_mut().for_each(|b| *b = false);
            single[i] = true;
            let phi = bump_ensemble(a, h, l, beta, 1, single.clone()).unwrap();
            let z = ens.center(i)[0];
            per_bump += l2_distance_sq(&phi, &HolderFunction::Zero, &q, z - h, z + h, &[z]);
        }
    }
    assert!(per_bump > 0.0);
    assert!(
        (whole - per_bump).abs() <= 1e-8 * per_bump,
        "{whole} vs {per_bump}"
    );
    let centre = ens.center(0);
    assert!((f1.eval(&centre) - l * h.powf(beta)).abs() < 1e-15);
}

#[test]
fn zero_signal_experiment_is_degenerate() {
    let cfg = ExperimentConfig {
        source: DistributionFamily::uniform(0.0, 1.0).unwrap(),
        target: DistributionFamily::uniform(0.0, 1.0).unwrap(),
        f_star: HolderFunction::Zero,
        noise: NoiseSpec::gaussian(0.0).unwrap(),
        estimator: NeighborFunctionConfig::default(),
        n_grid: vec![0],
        m_grid: vec![32, 64, 128, 256],
        reps: 2,
        n_test: 50,
        seed: 4,
    };
    let r = regime_experiment(&cfg, 1.0, 1.0).unwrap();
    assert!(r.degenerate);
    assert!(r.fits.is_empty());
    assert!(r.estimates.iter().all(|e| e.mean == 0.0));
}

#[test]
fn config_json_round_trip_and_unknown_fields() {
    let cfg = small_config(5);
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let bad = text.replacen("\"reps\"", "\"repz\"", 1);
    let err = serde_json::from_str::<ExperimentConfig>(&bad)
        .unwrap_err()
        .to_string();
    assert!(err.contains("repz"), "{err}");
}
