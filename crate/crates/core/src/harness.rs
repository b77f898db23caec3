//! Monte Carlo experiments under the regression model `Y = f(X) + noise`.
//!
//! A sweep runs `reps` independent train/evaluate cycles on every cell of
//! `n_grid x m_grid`. Each cycle owns a ChaCha stream seeded from
//! `(seed, cell, rep)`, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{BumpEnsemble, DistributionFamily, HolderFunction, NoiseSpec};
use crate::error::{Error, Result};
use crate::estimator::{LabeledSample, NeighborFunctionConfig, TrainedEstimator};
use crate::quad::{integrate, QuadOptions};
use crate::rates::{theoretical_rate, RateMode, RateParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DistributionFamily,
    pub target: DistributionFamily,
    pub f_star: HolderFunction,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub estimator: NeighborFunctionConfig,
    pub n_grid: Vec<usize>,
    pub m_grid: Vec<usize>,
    pub reps: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [("n_grid", &self.n_grid), ("m_grid", &self.m_grid)] {
            if grid.is_empty() {
                return Err(Error::param(name, "must be nonempty"));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param(name, "must be strictly increasing"));
            }
        }
        if self.n_grid[0] == 0 && self.m_grid[0] == 0 {
            return Err(Error::param(
                "m_grid",
                "the cell n = m = 0 has no training data",
            ));
        }
        if self.reps == 0 {
            return Err(Error::param("reps", "must be at least 1"));
        }
        if self.n_test == 0 {
            return Err(Error::param("n_test", "must be at least 1"));
        }
        self.estimator.validate()?;
        for (name, dist) in [("source", &self.source), ("target", &self.target)] {
            if dist.dim() != self.estimator.d {
                return Err(Error::param(
                    name,
                    format!(
                        "dimension {} does not match estimator d = {}",
                        dist.dim(),
                        self.estimator.d
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Grid cells in row-major order (`n` outer, `m` inner).
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.n_grid
            .iter()
            .flat_map(|&n| self.m_grid.iter().map(move |&m| (n, m)))
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream used by replication `rep` of grid cell `cell`.
pub fn derive_seed(master: u64, cell: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell as u64) ^ rep as u64)
}

/// `n` draws `(X, f(X) + noise)` with `X ~ dist`.
pub fn generate_data<R: Rng + ?Sized>(
    dist: &DistributionFamily,
    f_star: &HolderFunction,
    noise: &NoiseSpec,
    n: usize,
    rng: &mut R,
) -> LabeledSample {
    let points = dist.sample(rng, n);
    let labels = points
        .iter()
        .map(|x| f_star.eval(x) + noise.sample(rng))
        .collect();
    LabeledSample { points, labels }
}

/// Mean of `(f̂(X) - f(X))^2` over `n_test` fresh draws `X ~ q`.
pub fn mc_excess_risk<R: Rng + ?Sized>(
    fitted: &TrainedEstimator,
    f_star: &HolderFunction,
    q: &DistributionFamily,
    n_test: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::param("n_test", "must be at least 1"));
    }
    let xs = q.sample(rng, n_test);
    let mut total = 0.0;
    for x in xs.iter() {
        let r = fitted.predict(x)?.value - f_star.eval(x);
        total += r * r;
    }
    Ok(total / n_test as f64)
}

/// One replication of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub n: usize,
    pub m: usize,
    pub rep: usize,
    pub risk: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub mean: f64,
    pub stderr: f64,
    pub q50: f64,
    pub q90: f64,
}

impl RiskEstimate {
    pub fn from_risks(n: usize, m: usize, risks: &[f64]) -> Self {
        let k = risks.len() as f64;
        let mean = risks.iter().sum::<f64>() / k;
        let stderr = if risks.len() > 1 {
            (risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            0.0
        };
        let mut sorted = risks.to_vec();
        sorted.sort_by(f64::total_cmp);
        RiskEstimate {
            n,
            m,
            reps: risks.len(),
            mean,
            stderr,
            q50: quantile(&sorted, 0.5),
            q90: quantile(&sorted, 0.9),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Ordered by cell, then replication.
    pub records: Vec<RepRecord>,
    /// One per cell, in cell order.
    pub estimates: Vec<RiskEstimate>,
}

fn run_rep(config: &ExperimentConfig, n: usize, m: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = generate_data(&config.source, &config.f_star, &config.noise, n, &mut rng);
    let target = generate_data(&config.target, &config.f_star, &config.noise, m, &mut rng);
    let fitted = TrainedEstimator::fit(source, target, config.estimator)?;
    mc_excess_risk(
        &fitted,
        &config.f_star,
        &config.target,
        config.n_test,
        &mut rng,
    )
}

pub fn sweep(config: &ExperimentConfig) -> Result<Vec<RiskEstimate>> {
    Ok(sweep_detailed(config)?.estimates)
}

/// Runs every `(cell, rep)` task in parallel and reduces in `(cell, rep)` order.
pub fn sweep_detailed(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let cells = config.cells();
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.reps).map(move |r| (c, r)))
        .collect();
    let records = tasks
        .par_iter()
        .map(|&(c, rep)| {
            let (n, m) = cells[c];
            let seed = derive_seed(config.seed, c, rep);
            let risk = run_rep(config, n, m, seed).map_err(|e| Error::Cell {
                n,
                m,
                source: Box::new(e),
            })?;
            Ok(RepRecord {
                n,
                m,
                rep,
                risk,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let estimates = records
        .chunks(config.reps)
        .map(|chunk| {
            let risks: Vec<f64> = chunk.iter().map(|r| r.risk).collect();
            RiskEstimate::from_risks(chunk[0].n, chunk[0].m, &risks)
        })
        .collect();
    Ok(SweepResult { records, estimates })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Normal-approximation 95% half-width, `1.96 * se(slope)`.
    pub slope_ci_halfwidth: f64,
    pub r_squared: f64,
}

/// Least squares of `y` on the columns of `x` plus an intercept.
/// Returns (coefficients with intercept first, standard errors, r^2).
fn ols(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let k = y.len();
    let p = x.len() + 1;
    let row =
        |i: usize| -> Vec<f64> { std::iter::once(1.0).chain(x.iter().map(|c| c[i])).collect() };
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..k {
        let r = row(i);
        for a in 0..p {
            xty[a] += r[a] * y[i];
            for b in 0..p {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    let inv = invert(&xtx);
    let coef: Vec<f64> = (0..p)
        .map(|a| (0..p).map(|b| inv[a][b] * xty[b]).sum())
        .collect();
    let fitted = |i: usize| -> f64 { row(i).iter().zip(&coef).map(|(a, b)| a * b).sum() };
    let sse: f64 = (0..k).map(|i| (y[i] - fitted(i)).powi(2)).sum();
    let ybar = y.iter().sum::<f64>() / k as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let dof = k.saturating_sub(p).max(1) as f64;
    let sigma2 = sse / dof;
    let se = (0..p)
        .map(|a| (sigma2 * inv[a][a]).max(0.0).sqrt())
        .collect();
    let r2 = if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (coef, se, r2)
}

/// Gauss–Jordan inverse with partial pivoting; singular input yields NaNs.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("nonempty");
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * p {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[p..].to_vec()).collect()
}

fn positive_logs(name: &'static str, v: &[f64]) -> Result<Vec<f64>> {
    v.iter()
        .enumerate()
        .map(|(index, &value)| {
            if value > 0.0 && value.is_finite() {
                Ok(value.ln())
            } else if name == "risks" {
                Err(Error::NonPositive { index, value })
            } else {
                Err(Error::param(
                    name,
                    format!("entry {index} must be positive, got {value}"),
                ))
            }
        })
        .collect()
}

/// Ordinary least squares of `log risk` on `log size`.
pub fn fit_slope(sizes: &[f64], risks: &[f64]) -> Result<SlopeFit> {
    if sizes.len() != risks.len() {
        return Err(Error::param("risks", "sizes and risks differ in length"));
    }
    if sizes.len() < 3 {
        return Err(Error::TooFewPoints(sizes.len()));
    }
    let lx = positive_logs("sizes", sizes)?;
    let ly = positive_logs("risks", risks)?;
    let (coef, se, r2) = ols(&[lx], &ly);
    Ok(SlopeFit {
        slope: coef[1],
        intercept: coef[0],
        slope_ci_halfwidth: 1.96 * se[1],
        r_squared: r2,
    })
}

/// Disjoint triangular bumps on a `2h`-packing of `[a, 2a]^dim`.
pub fn bump_ensemble(
    a: f64,
    h: f64,
    l: f64,
    beta: f64,
    dim: usize,
    bits: Vec<bool>,
) -> Result<HolderFunction> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    if !(h > 0.0) || h >= a / 2.0 {
        return Err(Error::param(
            "h",
            format!("need 0 < h < a/2 = {}, got {h}", a / 2.0),
        ));
    }
    if !(l > 0.0) {
        return Err(Error::param("l", format!("must be positive, got {l}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param(
            "beta",
            format!("must lie in (0, 1], got {beta}"),
        ));
    }
    if dim == 0 {
        return Err(Error::param("dim", "must be positive"));
    }
    let ens = BumpEnsemble {
        a,
        h,
        l,
        beta,
        dim,
        bits,
    };
    if ens.bits.len() != ens.len() {
        return Err(Error::param(
            "bits",
            format!(
                "packing has {} centres, got {} bits",
                ens.len(),
                ens.bits.len()
            ),
        ));
    }
    Ok(HolderFunction::Bumps(ens))
}

/// `||f - g||^2` in `L2(q)` for a one-dimensional `q`, by adaptive quadrature
/// on the support split at `breakpoints` (kinks of `f - g`).
pub fn l2_distance_sq(
    f: &HolderFunction,
    g: &HolderFunction,
    q: &DistributionFamily,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
) -> f64 {
    let mut cuts: Vec<f64> = std::iter::once(lo)
        .chain(breakpoints.iter().copied().filter(|&b| b > lo && b < hi))
        .chain(std::iter::once(hi))
        .collect();
    cuts.sort_by(f64::total_cmp);
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    cuts.windows(2)
        .map(|w| {
            integrate(
                |x| {
                    let d = f.eval(&[x]) - g.eval(&[x]);
                    d * d * q.density(&[x])
                },
                w[0],
                w[1],
                opts,
            )
            .value
        })
        .sum()
}

/// Largest observed `|f(x) - f(y)| / |x - y|^beta` over `pairs` random pairs
/// in the box `[lo, hi]^dim`, plus the largest `|f|` over the same draws.
pub fn empirical_holder_norm<R: Rng + ?Sized>(
    f: &HolderFunction,
    dim: usize,
    lo: f64,
    hi: f64,
    pairs: usize,
    rng: &mut R,
) -> f64 {
    let beta = f.beta();
    let mut seminorm: f64 = 0.0;
    let mut sup: f64 = 0.0;
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    for _ in 0..pairs {
        for v in x.iter_mut().chain(y.iter_mut()) {
            *v = rng.random_range(lo..hi);
        }
        let (fx, fy) = (f.eval(&x), f.eval(&y));
        sup = sup.max(fx.abs()).max(fy.abs());
        let dist = crate::geom::distance(&x, &y);
        if dist > 0.0 {
            seminorm = seminorm.max((fx - fy).abs() / dist.powf(beta));
        }
    }
    sup + seminorm
}

/// Empirical slope along one sample-size axis next to the theoretical exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisFit {
    /// `"n"` or `"m"`.
    pub axis: char,
    pub empirical: SlopeFit,
    /// Slope of the exponents-only theoretical rate on the same grid.
    pub theory_slope: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeExperimentReport {
    pub estimates: Vec<RiskEstimate>,
    pub fits: Vec<AxisFit>,
    /// Set when some mean risk is not positive, so no log-log fit exists.
    pub degenerate: bool,
}

/// Runs a sweep and regresses `log mean risk` on the logs of the sample sizes
/// that vary over the grid (one or both), comparing against the same
/// regression applied to `theoretical_rate` in exponents-only mode.
pub fn regime_experiment(
    config: &ExperimentConfig,
    gamma: f64,
    s: f64,
) -> Result<RegimeExperimentReport> {
    let estimates = sweep(config)?;
    let degenerate = estimates.iter().any(|e| !(e.mean > 0.0));
    let theory: Vec<f64> = estimates
        .iter()
        .map(|e| {
            let p = RateParams::new(
                gamma,
                s,
                config.estimator.beta,
                config.estimator.d,
                e.n as f64,
                e.m as f64,
            );
            theoretical_rate(&p, RateMode::ExponentsOnly).map(|r| r.rate)
        })
        .collect::<Result<_>>()?;
    let mut axes = Vec::new();
    if config.n_grid.len() > 1 {
        axes.push('n');
    }
    if config.m_grid.len() > 1 {
        axes.push('m');
    }
    if degenerate || axes.is_empty() || estimates.len() < axes.len() + 2 {
        return Ok(RegimeExperimentReport {
            estimates,
            fits: Vec::new(),
            degenerate: true,
        });
    }
    let columns: Vec<Vec<f64>> = axes
        .iter()
        .map(|&a| {
            estimates
                .iter()
                .map(|e| (if a == 'n' { e.n } else { e.m }).max(1) as f64)
                .map(f64::ln)
                .collect()
        })
        .collect();
    let ly: Vec<f64> = estimates.iter().map(|e| e.mean.ln()).collect();
    let lt: Vec<f64> = theory.iter().map(|t| t.ln()).collect();
    let (coef, se, r2) = ols(&columns, &ly);
    let (tcoef, _, _) = ols(&columns, &lt);
    let fits = axes
        .iter()
        .enumerate()
        .map(|(j, &axis)| AxisFit {
            axis,
            empirical: SlopeFit {
                slope: coef[j + 1],
                intercept: coef[0],
                slope_ci_halfwidth: 1.96 * se[j + 1],
                r_squared: r2,
            },
            theory_slope: tcoef[j + 1],
            discrepancy: coef[j + 1] - tcoef[j + 1],
        })
        .collect();
    Ok(RegimeExperimentReport {
        estimates,
        fits,
        degenerate: false,
    })
}
