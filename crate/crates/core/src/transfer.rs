//! The transfer function `T(P, Q, gamma) = E_{X~Q}[p(X)^-gamma]` and the
//! quantities built from it.
//!
//! Values come from a closed form when one is known (exponential and
//! equal-scale Pareto pairs), from adaptive quadrature on the target support
//! for other one-dimensional pairs, and from Monte Carlo for the product
//! Pareto family.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::distributions::{closed_form_indices, DistributionFamily};
use crate::error::{Error, Result};
use crate::quad::{integrate_support, TailOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl fmt::Display for TransferMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferMethod::ClosedForm => "closed_form",
            TransferMethod::Quadrature => "quadrature",
            TransferMethod::MonteCarlo => "monte_carlo",
        })
    }
}

/// One evaluation of `T(P, Q, gamma)`. A divergent evaluation has
/// `value = inf` and `converged = false`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferEvaluation {
    pub gamma: f64,
    #[serde(with = "crate::serde_f64")]
    pub value: f64,
    pub method: TransferMethod,
    #[serde(with = "crate::serde_f64")]
    pub error_estimate: f64,
    pub converged: bool,
}

impl TransferEvaluation {
    fn exact(gamma: f64, value: f64) -> Self {
        TransferEvaluation {
            gamma,
            value,
            method: TransferMethod::ClosedForm,
            error_estimate: 0.0,
            converged: true,
        }
    }

    fn divergent(gamma: f64, method: TransferMethod) -> Self {
        TransferEvaluation {
            gamma,
            value: f64::INFINITY,
            method,
            error_estimate: f64::INFINITY,
            converged: false,
        }
    }

    pub fn is_divergent(&self) -> bool {
        !self.converged && self.value.is_infinite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferOptions {
    /// Forces a method instead of the default closed form / quadrature / Monte Carlo order.
    pub method: Option<TransferMethod>,
    pub tail: TailOptions,
    pub mc_draws: usize,
    pub mc_seed: u64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions {
            method: None,
            tail: TailOptions::default(),
            mc_draws: 200_000,
            mc_seed: 0x7472_616e_7366_6572,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            "gamma",
            format!("must be nonnegative and finite, got {gamma}"),
        ))
    }
}

/// `T(P, Q, gamma)` with default options.
pub fn transfer_value(
    p: &DistributionFamily,
    q: &DistributionFamily,
    gamma: f64,
) -> Result<TransferEvaluation> {
    transfer_value_with(p, q, gamma, &TransferOptions::default())
}

pub fn transfer_value_with(
    p: &DistributionFamily,
    q: &DistributionFamily,
    gamma: f64,
    opts: &TransferOptions,
) -> Result<TransferEvaluation> {
    check_gamma(gamma)?;
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    if gamma == 0.0 {
        return Ok(TransferEvaluation::exact(0.0, 1.0));
    }
    match opts.method {
        Some(TransferMethod::ClosedForm) => transfer_closed_form(p, q, gamma)?
            .ok_or_else(|| Error::UnsupportedPair("no closed-form transfer function".into())),
        Some(TransferMethod::Quadrature) => transfer_quadrature(p, q, gamma, opts.tail),
        Some(TransferMethod::MonteCarlo) => Ok(transfer_monte_carlo(
            p,
            q,
            gamma,
            opts.mc_draws,
            opts.mc_seed,
        )),
        None => {
            if let Some(ev) = transfer_closed_form(p, q, gamma)? {
                Ok(ev)
            } else if p.dim() == 1 {
                transfer_quadrature(p, q, gamma, opts.tail)
            } else {
                Ok(transfer_monte_carlo(
                    p,
                    q,
                    gamma,
                    opts.mc_draws,
                    opts.mc_seed,
                ))
            }
        }
    }
}

/// Closed-form `T` for exponential pairs and Pareto pairs sharing a scale;
/// `Ok(None)` for any other pair.
pub fn transfer_closed_form(
    p: &DistributionFamily,
    q: &DistributionFamily,
    gamma: f64,
) -> Result<Option<TransferEvaluation>> {
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Ok(Some(TransferEvaluation::exact(0.0, 1.0)));
    }
    use DistributionFamily as D;
    let ev = match (*p, *q) {
        (D::Exponential { lambda: lp }, D::Exponential { lambda: lq }) => {
            if gamma * lp < lq {
                TransferEvaluation::exact(gamma, lq * lp.powf(-gamma) / (lq - gamma * lp))
            } else {
                TransferEvaluation::divergent(gamma, TransferMethod::ClosedForm)
            }
        }
        (
            D::Pareto {
                alpha: ap,
                sigma: sp,
            },
            D::Pareto {
                alpha: aq,
                sigma: sq,
            },
        ) if sp == sq => {
            let denom = aq - gamma * (ap + 1.0);
            if denom > 0.0 {
                TransferEvaluation::exact(gamma, aq * sp.powf(gamma) / (ap.powf(gamma) * denom))
            } else {
                TransferEvaluation::divergent(gamma, TransferMethod::ClosedForm)
            }
        }
        _ => return Ok(None),
    };
    Ok(Some(ev))
}

/// Adaptive quadrature of `q(x) p(x)^-gamma` over the support of `Q`.
pub fn transfer_quadrature(
    p: &DistributionFamily,
    q: &DistributionFamily,
    gamma: f64,
    tail: TailOptions,
) -> Result<TransferEvaluation> {
    check_gamma(gamma)?;
    let (lo, hi) = q
        .support_1d()
        .ok_or_else(|| Error::UnsupportedPair("quadrature needs one-dimensional laws".into()))?;
    if p.support_1d().is_none() {
        return Err(Error::UnsupportedPair(
            "quadrature needs one-dimensional laws".into(),
        ));
    }
    if gamma == 0.0 {
        return Ok(TransferEvaluation::exact(0.0, 1.0));
    }
    let integrand = |x: f64| {
        let lq = q.ln_density_1d(x);
        if lq == f64::NEG_INFINITY {
            0.0
        } else {
            (lq - gamma * p.ln_density_1d(x)).exp()
        }
    };
    let r = integrate_support(integrand, lo, hi, tail);
    if !r.converged {
        return Ok(TransferEvaluation::divergent(
            gamma,
            TransferMethod::Quadrature,
        ));
    }
    Ok(TransferEvaluation {
        gamma,
        value: r.value,
        method: TransferMethod::Quadrature,
        error_estimate: r.error,
        converged: true,
    })
}

/// Monte Carlo average of `p(X)^-gamma` over `draws` samples from `Q`.
///
/// Monte Carlo cannot see non-integrability, so when `gamma` is at or past a
/// known closed-form index the evaluation is reported as divergent.
pub fn transfer_monte_carlo(
    p: &DistributionFamily,
    q: &DistributionFamily,
    gamma: f64,
    draws: usize,
    seed: u64,
) -> TransferEvaluation {
    if gamma == 0.0 {
        return TransferEvaluation::exact(0.0, 1.0);
    }
    if let Ok(idx) = closed_form_indices(p, q) {
        if gamma >= idx.gamma_star {
            return TransferEvaluation::divergent(gamma, TransferMethod::MonteCarlo);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = q.sample(&mut rng, draws.max(2));
    let vals: Vec<f64> = xs.iter().map(|x| p.density(x).powf(-gamma)).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !mean.is_finite() {
        return TransferEvaluation::divergent(gamma, TransferMethod::MonteCarlo);
    }
    TransferEvaluation {
        gamma,
        value: mean,
        method: TransferMethod::MonteCarlo,
        error_estimate: (var / n).sqrt(),
        converged: true,
    }
}

/// Bracket for the integrability index `gamma* = sup{gamma : T(P, Q, gamma) < inf}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    #[serde(with = "crate::serde_f64")]
    pub gamma_star_hat: f64,
    /// Largest grid value below `upper_confirmed` with a converged evaluation
    /// (0 when there is none, since `T(P, Q, 0) = 1`).
    pub lower_confirmed: f64,
    /// Smallest grid value flagged divergent; `inf` when none is.
    #[serde(with = "crate::serde_f64")]
    pub upper_confirmed: f64,
    pub diagnostics: Vec<TransferEvaluation>,
}

pub fn estimate_index(
    p: &DistributionFamily,
    q: &DistributionFamily,
    grid: &[f64],
) -> Result<IndexEstimate> {
    estimate_index_with(p, q, grid, &TransferOptions::default())
}

pub fn estimate_index_with(
    p: &DistributionFamily,
    q: &DistributionFamily,
    grid: &[f64],
    opts: &TransferOptions,
) -> Result<IndexEstimate> {
    if grid.is_empty() {
        return Err(Error::param("gamma_grid", "must be nonempty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("gamma_grid", "must be strictly increasing"));
    }
    let diagnostics = grid
        .par_iter()
        .map(|&g| transfer_value_with(p, q, g, opts))
        .collect::<Result<Vec<_>>>()?;
    let upper = diagnostics
        .iter()
        .find(|e| e.is_divergent())
        .map_or(f64::INFINITY, |e| e.gamma);
    let lower = diagnostics
        .iter()
        .filter(|e| e.converged && e.gamma < upper)
        .map(|e| e.gamma)
        .fold(0.0, f64::max);
    let hat = if upper.is_finite() {
        0.5 * (lower + upper)
    } else {
        lower
    };
    Ok(IndexEstimate {
        gamma_star_hat: hat,
        lower_confirmed: lower,
        upper_confirmed: upper,
        diagnostics,
    })
}

/// `Q{x : p(x) <= t}` together with its Markov bound `t^gamma T(P, Q, gamma)`.
pub fn markov_mass_bound(
    p: &DistributionFamily,
    q: &DistributionFamily,
    gamma: f64,
    t: f64,
) -> Result<(f64, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    let ev = transfer_value(p, q, gamma)?;
    if !ev.converged {
        return Err(Error::Divergent { gamma });
    }
    let lhs = low_density_mass(p, q, t)?;
    Ok((lhs, t.powf(gamma) * ev.value))
}

/// `Q{x : p(x) <= t}`.
pub fn low_density_mass(p: &DistributionFamily, q: &DistributionFamily, t: f64) -> Result<f64> {
    use DistributionFamily as D;
    if let D::ProductPareto { .. } = p {
        let mut rng = ChaCha8Rng::seed_from_u64(TransferOptions::default().mc_seed);
        let draws = 200_000;
        let xs = q.sample(&mut rng, draws);
        let hits = xs.iter().filter(|x| p.density(x) <= t).count();
        return Ok(hits as f64 / draws as f64);
    }
    let (plo, phi) = p
        .support_1d()
        .ok_or_else(|| Error::UnsupportedPair("mixed dimensions".into()))?;
    if q.support_1d().is_none() {
        return Err(Error::UnsupportedPair("mixed dimensions".into()));
    }
    // Q-mass where p vanishes
    let outside = q.cdf_1d(plo) + q.survival_1d(phi);
    let inside = match *p {
        D::Uniform { a, b } => {
            if 1.0 / (b - a) <= t {
                q.survival_1d(a) - q.survival_1d(b)
            } else {
                0.0
            }
        }
        // density nonincreasing on its support: {p <= t} is a right tail
        _ => {
            if p.density(&[plo]) <= t {
                q.survival_1d(plo)
            } else {
                let mut lo = plo;
                let mut hi = plo + 1.0;
                while p.density(&[hi]) > t {
                    lo = hi;
                    hi = plo + 2.0 * (hi - plo);
                    if hi > 1e300 {
                        return Ok(outside.min(1.0));
                    }
                }
                for _ in 0..200 {
                    if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if p.density(&[mid]) > t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                q.survival_1d(hi)
            }
        }
    };
    Ok((outside + inside).clamp(0.0, 1.0))
}

/// Rényi divergence `D_alpha(Q || P) = log(int q^alpha p^(1 - alpha)) / (alpha - 1)`.
pub fn renyi_divergence(q: &DistributionFamily, p: &DistributionFamily, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::param(
            "alpha",
            format!("must be positive and different from 1, got {alpha}"),
        ));
    }
    if p == q {
        return Ok(0.0);
    }
    let (lo, hi) = q.support_1d().ok_or_else(|| {
        Error::UnsupportedPair("Rényi divergence needs one-dimensional laws".into())
    })?;
    if p.support_1d().is_none() {
        return Err(Error::UnsupportedPair(
            "Rényi divergence needs one-dimensional laws".into(),
        ));
    }
    let integrand = |x: f64| {
        let lq = q.ln_density_1d(x);
        if lq == f64::NEG_INFINITY {
            return 0.0;
        }
        let lp = p.ln_density_1d(x);
        if lp == f64::NEG_INFINITY {
            return if alpha > 1.0 { f64::INFINITY } else { 0.0 };
        }
        (alpha * lq + (1.0 - alpha) * lp).exp()
    };
    let r = integrate_support(integrand, lo, hi, TailOptions::default());
    if !r.converged {
        return Ok(f64::INFINITY);
    }
    Ok(r.value.ln() / (alpha - 1.0))
}

/// Lower bounds on `gamma*(P, Q)`: `(gamma*(P, P) (alpha - 1) / alpha, rho / (rho + d))`.
///
/// The first needs a finite Rényi divergence of order `alpha > 1`; the second
/// holds for `gamma*(P, P)` under a finite moment of order `rho`.
pub fn index_lower_bounds(gamma_pp: f64, alpha: f64, rho: f64, d: usize) -> (f64, f64) {
    (gamma_pp * (alpha - 1.0) / alpha, rho / (rho + d as f64))
}
