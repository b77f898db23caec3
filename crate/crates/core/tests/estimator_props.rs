use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transfer_knn::estimator::{joint_log, neighbor_count, OneSampleEstimator};
use transfer_knn::{
    HolderFunction, LabeledSample, NeighborFunctionConfig, PointSet, TrainedEstimator,
};

fn random_sample(rng: &mut ChaCha8Rng, n: usize, d: usize) -> LabeledSample {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let labels = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    LabeledSample::new(PointSet::from_rows(&rows).unwrap(), labels).unwrap()
}

fn config(d: usize, beta: f64) -> NeighborFunctionConfig {
    NeighborFunctionConfig::new(beta, d).unwrap()
}

#[test]
fn two_sample_with_empty_target_is_one_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for inst in 0..100 {
        let d = 1 + inst % 3;
        let n = rng.random_range(2..400);
        let cfg = config(d, [0.5, 1.0][inst % 2]);
        let s = random_sample(&mut rng, n, d);
        let two = TrainedEstimator::fit(s.clone(), LabeledSample::empty(d), cfg).unwrap();
        let one = OneSampleEstimator::fit(s, cfg).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 1.2 - 0.1).collect();
        assert_eq!(two.predict(&x).unwrap().value, one.predict(&x).unwrap());
    }
}

#[test]
fn clamp_envelope_and_split_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = HolderFunction::Sine {
        amplitude: 1.0,
        frequency: 3.0,
    };
    let mut queries = 0;
    while queries < 10_000 {
        let n = rng.random_range(20..300);
        let m = rng.random_range(20..300);
        let src = random_sample(&mut rng, n, 1);
        let tgt = random_sample(&mut rng, m, 1);
        let est = TrainedEstimator::fit(src, tgt, config(1, 1.0)).unwrap();
        let lower = est.joint_log().ceil() as usize;
        for _ in 0..500 {
            let x = [rng.random::<f64>() * 1.4 - 0.2];
            let pr = est.predict(&x).unwrap();
            assert!(lower <= pr.k_p_used && pr.k_p_used <= n);
            assert!(lower <= pr.k_q_used && pr.k_q_used <= m);
            let (total, bound) = est.pointwise_error_split(&x, &f).unwrap();
            assert!(total <= bound + 1e-12);
            queries += 1;
        }
    }
}

#[test]
fn split_inequality_random_200() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let est = TrainedEstimator::fit(
        random_sample(&mut rng, 200, 2),
        random_sample(&mut rng, 200, 2),
        config(2, 1.0),
    )
    .unwrap();
    let f = HolderFunction::Parabola;
    for _ in 0..1000 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let (t, b) = est.pointwise_error_split(&x, &f).unwrap();
        assert!(t <= b + 1e-12);
    }
}

#[test]
fn locality() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = random_sample(&mut rng, 300, 1);
    let mut far = s.clone();
    // a distant extra point cannot enter any neighbourhood of a query near 0.5
    let mut pts: Vec<f64> = far.points.iter().map(|p| p[0]).collect();
    pts.push(50.0);
    far.points = PointSet::from_scalars(&pts).unwrap();
    far.labels.push(10.0);
    let mut far2 = far.clone();
    *far2.labels.last_mut().unwrap() = -1e6;
    let cfg = config(1, 1.0);
    let a = TrainedEstimator::fit(far, LabeledSample::empty(1), cfg).unwrap();
    let b = TrainedEstimator::fit(far2, LabeledSample::empty(1), cfg).unwrap();
    for i in 0..50 {
        let x = [0.3 + 0.008 * i as f64];
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
    }
}

#[test]
fn constant_labels_predict_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut s = random_sample(&mut rng, 100, 1);
    let mut t = random_sample(&mut rng, 60, 1);
    s.labels.iter_mut().for_each(|y| *y = 2.5);
    t.labels.iter_mut().for_each(|y| *y = 2.5);
    let est = TrainedEstimator::fit(s, t, config(1, 1.0)).unwrap();
    for i in 0..20 {
        assert_eq!(est.predict(&[i as f64 * 0.07]).unwrap().value, 2.5);
    }
}

proptest! {
    #[test]
    fn neighbor_count_monotone(
        p1 in 0.0f64..50.0,
        dp in 0.0f64..50.0,
        n1 in 1usize..5000,
        dn in 0usize..5000,
        m in 0usize..5000,
        beta in 0.1f64..=1.0,
        d in 1usize..4,
    ) {
        let cfg = config(d, beta);
        let jl = joint_log(n1 + dn, m);
        prop_assert!(neighbor_count(p1, n1, jl, &cfg, 1.0) <= neighbor_count(p1 + dp, n1, jl, &cfg, 1.0));
        prop_assert!(neighbor_count(p1, n1, jl, &cfg, 1.0) <= neighbor_count(p1, n1 + dn, jl, &cfg, 1.0));
        let k = neighbor_count(p1, n1, jl, &cfg, 1.0);
        prop_assert!(k >= 1 && k <= n1);
    }
}
