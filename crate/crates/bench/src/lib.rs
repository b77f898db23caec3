//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transfer_knn::{DistributionFamily, HolderFunction, LabeledSample, NoiseSpec, PointSet};

pub fn uniform_cloud(n: usize, d: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    PointSet::from_rows(&rows).expect("finite rows")
}

pub fn labeled(dist: &DistributionFamily, n: usize, seed: u64) -> LabeledSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = HolderFunction::Sine {
        amplitude: 1.0,
        frequency: 4.0,
    };
    let noise = NoiseSpec::gaussian(0.5).expect("positive sigma");
    transfer_knn::harness::generate_data(dist, &f, &noise, n, &mut rng)
}

pub fn queries(dist: &DistributionFamily, n: usize, seed: u64) -> PointSet {
    dist.sample(&mut ChaCha8Rng::seed_from_u64(seed), n)
}
