//! The `l`-NN plug-in density estimator and the design-adaptive local k-NN
//! regressors.
//!
//! At a query `x` each sample gets its own neighbour count
//!
//! ```text
//! k(x) = n ∧ (⌈κ L^(d/(2β+d)) (n p̂(x))^(2β/(2β+d))⌉ ∨ ⌈L⌉),   L = log((n∨1)(m∨1)),
//! ```
//!
//! and the two-sample prediction averages the `k_P(x)` nearest source labels
//! together with the `k_Q(x)` nearest target labels.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionFamily, HolderFunction};
use crate::error::{Error, Result};
use crate::geom::{NeighborIndex, PointSet};

/// Constants of the neighbour function. `kappa_p`, `kappa_q` and
/// `ell_factor` replace the proof constants; `tau` is carried as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeighborFunctionConfig {
    pub beta: f64,
    pub d: usize,
    pub kappa_p: f64,
    pub kappa_q: f64,
    pub ell_factor: f64,
    pub tau: f64,
}

impl Default for NeighborFunctionConfig {
    fn default() -> Self {
        NeighborFunctionConfig {
            beta: 1.0,
            d: 1,
            kappa_p: 1.0,
            kappa_q: 1.0,
            ell_factor: 1.0,
            tau: 2.0,
        }
    }
}

impl NeighborFunctionConfig {
    pub fn new(beta: f64, d: usize) -> Result<Self> {
        let cfg = NeighborFunctionConfig {
            beta,
            d,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::param(
                "beta",
                format!("must lie in (0, 1], got {}", self.beta),
            ));
        }
        if self.d == 0 {
            return Err(Error::param("d", "must be positive"));
        }
        for (name, v) in [
            ("kappa_p", self.kappa_p),
            ("kappa_q", self.kappa_q),
            ("ell_factor", self.ell_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.tau > 1.0) {
            return Err(Error::param(
                "tau",
                format!("must exceed 1, got {}", self.tau),
            ));
        }
        Ok(())
    }

    /// `2β / (2β + d)`
    pub fn r_beta(&self) -> f64 {
        2.0 * self.beta / (2.0 * self.beta + self.d as f64)
    }
}

/// Points with one finite label each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub points: PointSet,
    pub labels: Vec<f64>,
}

impl LabeledSample {
    pub fn new(points: PointSet, labels: Vec<f64>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::param(
                "labels",
                format!("{} labels for {} points", labels.len(), points.len()),
            ));
        }
        if let Some(index) = labels.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFiniteLabel { index });
        }
        Ok(LabeledSample { points, labels })
    }

    pub fn empty(dim: usize) -> Self {
        LabeledSample {
            points: PointSet::new(dim),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }
}

/// `l / (n R_l(x)^d)`, or `inf` when the `l`-th neighbour sits at `x`.
pub fn knn_density(
    index: &NeighborIndex,
    x: &[f64],
    ell: usize,
    n: usize,
    d: usize,
) -> Result<f64> {
    if ell == 0 || ell > index.len() {
        return Err(Error::KOutOfRange {
            k: ell,
            n: index.len(),
        });
    }
    let r = index.kth_distance(x, ell)?;
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(ell as f64 / (n as f64 * r.powi(d as i32)))
}

/// `n_own ∧ (⌈κ L^(d/(2β+d)) (n_own p̂)^(2β/(2β+d))⌉ ∨ ⌈L⌉)` with `L = joint_log`.
///
/// The lower clamp is at least 1; `p_hat = inf` gives `n_own`.
pub fn neighbor_count(
    p_hat: f64,
    n_own: usize,
    joint_log: f64,
    config: &NeighborFunctionConfig,
    kappa: f64,
) -> usize {
    let lower = (joint_log.ceil() as usize).max(1);
    if p_hat.is_infinite() {
        return n_own;
    }
    let d = config.d as f64;
    let two_beta = 2.0 * config.beta;
    let core = kappa
        * joint_log.powf(d / (two_beta + d))
        * (n_own as f64 * p_hat).powf(two_beta / (two_beta + d));
    let core = core.ceil();
    let k = if core >= n_own as f64 {
        n_own
    } else {
        core as usize
    };
    k.max(lower).min(n_own)
}

/// `log((n ∨ 1)(m ∨ 1))`
pub fn joint_log(n: usize, m: usize) -> f64 {
    (n.max(1) as f64).ln() + (m.max(1) as f64).ln()
}

/// `max(1, ⌈c_l joint_log⌉)`
pub fn ell_for(joint_log: f64, config: &NeighborFunctionConfig) -> usize {
    ((config.ell_factor * joint_log).ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
struct SampleModel {
    index: Option<NeighborIndex>,
    labels: Vec<f64>,
    kappa: f64,
}

/// Local contribution of one sample at a query point.
#[derive(Debug, Clone, Copy)]
struct Local {
    k: usize,
    sum: f64,
    density: Option<f64>,
}

impl SampleModel {
    fn new(sample: LabeledSample, kappa: f64) -> Result<Self> {
        let index = if sample.is_empty() {
            None
        } else {
            Some(NeighborIndex::build(sample.points)?)
        };
        Ok(SampleModel {
            index,
            labels: sample.labels,
            kappa,
        })
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn local(
        &self,
        x: &[f64],
        ell: usize,
        jl: f64,
        config: &NeighborFunctionConfig,
    ) -> Result<Local> {
        let Some(index) = &self.index else {
            return Ok(Local {
                k: 0,
                sum: 0.0,
                density: None,
            });
        };
        let n = self.len();
        let (k, density) = if ell > n {
            (n.min((jl.ceil() as usize).max(1)), None)
        } else {
            let p_hat = knn_density(index, x, ell, n, config.d)?;
            (
                neighbor_count(p_hat, n, jl, config, self.kappa),
                Some(p_hat),
            )
        };
        let sum = index
            .query_knn(x, k)?
            .iter()
            .map(|nb| self.labels[nb.index])
            .sum();
        Ok(Local { k, sum, density })
    }
}

/// Output of the regressor at one query point.
///
/// `p_hat` / `q_hat` are `None` when the sample is empty or too small for
/// the density step (`l > n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub k_p_used: usize,
    pub k_q_used: usize,
    #[serde(with = "crate::serde_f64::option", default)]
    pub p_hat: Option<f64>,
    #[serde(with = "crate::serde_f64::option", default)]
    pub q_hat: Option<f64>,
}

/// Two-sample design-adaptive local k-NN regressor.
#[derive(Debug, Clone)]
pub struct TrainedEstimator {
    source: SampleModel,
    target: SampleModel,
    config: NeighborFunctionConfig,
    dim: usize,
    joint_log: f64,
    ell: usize,
}

impl TrainedEstimator {
    pub fn fit(
        source: LabeledSample,
        target: LabeledSample,
        config: NeighborFunctionConfig,
    ) -> Result<Self> {
        config.validate()?;
        let (n, m) = (source.len(), target.len());
        if n + m == 0 {
            return Err(Error::EmptyTraining);
        }
        let dim = if n > 0 { source.dim() } else { target.dim() };
        for s in [&source, &target] {
            if !s.is_empty() && s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
        }
        if dim != config.d {
            return Err(Error::DimensionMismatch {
                expected: config.d,
                found: dim,
            });
        }
        let jl = joint_log(n, m);
        Ok(TrainedEstimator {
            source: SampleModel::new(source, config.kappa_p)?,
            target: SampleModel::new(target, config.kappa_q)?,
            config,
            dim,
            joint_log: jl,
            ell: ell_for(jl, &config),
        })
    }

    pub fn n(&self) -> usize {
        self.source.len()
    }

    pub fn m(&self) -> usize {
        self.target.len()
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn joint_log(&self) -> f64 {
        self.joint_log
    }

    pub fn config(&self) -> &NeighborFunctionConfig {
        &self.config
    }

    fn locals(&self, x: &[f64]) -> Result<(Local, Local)> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let p = self
            .source
            .local(x, self.ell, self.joint_log, &self.config)?;
        let q = self
            .target
            .local(x, self.ell, self.joint_log, &self.config)?;
        Ok((p, q))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let (p, q) = self.locals(x)?;
        let sum = if q.k > 0 { p.sum + q.sum } else { p.sum };
        Ok(Prediction {
            value: sum / (p.k + q.k) as f64,
            k_p_used: p.k,
            k_q_used: q.k,
            p_hat: p.density,
            q_hat: q.density,
        })
    }

    /// Predictions at every point of `xs`, computed in parallel, in input order.
    pub fn predict_batch(&self, xs: &PointSet) -> Result<Vec<Prediction>> {
        (0..xs.len())
            .into_par_iter()
            .map(|i| self.predict(xs.point(i)))
            .collect()
    }

    /// `(f̂(x) - f(x))^2` and the convex-combination bound
    /// `w_P (f̂_P(x) - f(x))^2 + w_Q (f̂_Q(x) - f(x))^2` with `w = k / (k_P + k_Q)`.
    pub fn pointwise_error_split(&self, x: &[f64], f_star: &HolderFunction) -> Result<(f64, f64)> {
        let (p, q) = self.locals(x)?;
        let f = f_star.eval(x);
        let total_k = (p.k + q.k) as f64;
        let value = if q.k > 0 { p.sum + q.sum } else { p.sum } / total_k;
        let mut bound = 0.0;
        for part in [p, q] {
            if part.k > 0 {
                let mean = part.sum / part.k as f64;
                bound += part.k as f64 / total_k * (mean - f).powi(2);
            }
        }
        Ok(((value - f).powi(2), bound))
    }
}

/// Classical one-sample local k-NN regressor, `l = ⌈c_l log n⌉`.
#[derive(Debug, Clone)]
pub struct OneSampleEstimator {
    index: NeighborIndex,
    labels: Vec<f64>,
    config: NeighborFunctionConfig,
    log_n: f64,
    ell: usize,
}

impl OneSampleEstimator {
    pub fn fit(sample: LabeledSample, config: NeighborFunctionConfig) -> Result<Self> {
        config.validate()?;
        if sample.is_empty() {
            return Err(Error::EmptyTraining);
        }
        if sample.dim() != config.d {
            return Err(Error::DimensionMismatch {
                expected: config.d,
                found: sample.dim(),
            });
        }
        let log_n = (sample.len() as f64).ln();
        let ell = ((config.ell_factor * log_n).ceil() as usize).max(1);
        Ok(OneSampleEstimator {
            index: NeighborIndex::build(sample.points)?,
            labels: sample.labels,
            config,
            log_n,
            ell,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let n = self.labels.len();
        let k = if self.ell > n {
            n.min((self.log_n.ceil() as usize).max(1))
        } else {
            let p_hat = knn_density(&self.index, x, self.ell, n, self.config.d)?;
            neighbor_count(p_hat, n, self.log_n, &self.config, self.config.kappa_p)
        };
        let neighbors = self.index.query_knn(x, k)?;
        let sum: f64 = neighbors.iter().map(|nb| self.labels[nb.index]).sum();
        Ok(sum / k as f64)
    }
}

/// One trial of the concentration event `{R_k(x) <= zeta_{h+}(x) for every grid x}`
/// with `n` fresh draws from `dist`.
pub fn concentration_event<R: Rng + ?Sized>(
    dist: &DistributionFamily,
    n: usize,
    k: usize,
    h_plus: f64,
    grid: &[Vec<f64>],
    rng: &mut R,
) -> Result<bool> {
    let index = NeighborIndex::build(dist.sample(rng, n))?;
    for x in grid {
        if index.kth_distance(x, k)? > dist.zeta(x, h_plus)? {
            return Ok(false);
        }
    }
    Ok(true)
}
