//! Rate calculus for the two-sample problem.
//!
//! Everything here is a closed-form function of `(gamma, s, r_beta, n, m)`:
//! configuration labels, the acceleration window, the wedge and accelerated
//! rates, phase grids over either `(gamma, s)` or `(log n, log m)`, and rates
//! along sample-size paths. Sample sizes are real-valued so that window
//! endpoints such as `n^(gamma/s)` can be hit exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// `2 beta / (2 beta + d)`
pub fn r_beta(beta: f64, d: usize) -> f64 {
    2.0 * beta / (2.0 * beta + d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Configuration::Subcritical => "subcritical",
            Configuration::Critical => "critical",
            Configuration::Supercritical => "supercritical",
        })
    }
}

/// Sign of `(gamma - r_b)(s - r_b)`; an exact zero factor is critical.
pub fn classify_configuration(gamma: f64, s: f64, r_b: f64) -> Configuration {
    let (a, b) = (gamma - r_b, s - r_b);
    if a == 0.0 || b == 0.0 {
        Configuration::Critical
    } else if (a < 0.0) != (b < 0.0) {
        Configuration::Supercritical
    } else {
        Configuration::Subcritical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Source,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Regime {
    Wedge { driver: Driver },
    Accelerated,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Wedge {
                driver: Driver::Source,
            } => "wedge_source",
            Regime::Wedge {
                driver: Driver::Target,
            } => "wedge_target",
            Regime::Accelerated => "accelerated",
        })
    }
}

/// Closed interval of target sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    #[serde(with = "crate::serde_f64")]
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, m: f64) -> bool {
        self.lo <= m && m <= self.hi
    }
}

/// `[n, n^(gamma/s)]` when `gamma > s`, `[n^(gamma/s), n]` when `gamma < s`.
pub fn acceleration_window(n: f64, gamma: f64, s: f64) -> Result<Window> {
    if gamma == s {
        return Err(Error::param(
            "s",
            "the acceleration window needs gamma != s",
        ));
    }
    if !(n >= 1.0) {
        return Err(Error::param("n", format!("must be at least 1, got {n}")));
    }
    let other = n.powf(gamma / s);
    Ok(Window {
        lo: n.min(other),
        hi: n.max(other),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Logarithms dropped and transfer factors set to 1.
    ExponentsOnly,
    /// Includes `log(nm)` factors and caller-supplied transfer values.
    Full,
}

/// Inputs of the rate formulas. `gamma` and `s` may be `inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    #[serde(with = "crate::serde_f64")]
    pub gamma: f64,
    #[serde(with = "crate::serde_f64")]
    pub s: f64,
    pub beta: f64,
    pub d: usize,
    pub n: f64,
    pub m: f64,
    /// `T(P, Q, .)` at the exponent used by the selected branch (full mode).
    pub transfer_p: Option<f64>,
    /// `T(Q, Q, .)` at the exponent used by the selected branch (full mode).
    pub transfer_q: Option<f64>,
}

impl RateParams {
    pub fn new(gamma: f64, s: f64, beta: f64, d: usize, n: f64, m: f64) -> Self {
        RateParams {
            gamma,
            s,
            beta,
            d,
            n,
            m,
            transfer_p: None,
            transfer_q: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::param(
                "gamma",
                format!("must be positive, got {}", self.gamma),
            ));
        }
        if !(self.s > 0.0) {
            return Err(Error::param(
                "s",
                format!("must be positive, got {}", self.s),
            ));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::param(
                "beta",
                format!("must lie in (0, 1], got {}", self.beta),
            ));
        }
        if self.d == 0 {
            return Err(Error::param("d", "must be positive"));
        }
        for (name, v) in [("n", self.n), ("m", self.m)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be a nonnegative finite number, got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("transfer_p", self.transfer_p),
            ("transfer_q", self.transfer_q),
        ] {
            if let Some(t) = v {
                if !(t > 0.0) {
                    return Err(Error::param(name, format!("must be positive, got {t}")));
                }
            }
        }
        Ok(())
    }

    pub fn r_beta(&self) -> f64 {
        r_beta(self.beta, self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub r_beta: f64,
    pub configuration: Configuration,
    pub regime: Regime,
    pub window: Option<Window>,
    pub rate: f64,
    pub source_exp: f64,
    pub target_exp: f64,
    /// Full mode only: a wedge term dropped because its transfer value was not supplied.
    pub omitted_term: Option<Driver>,
}

/// Accelerated exponents `(gamma (r_b - s)/(gamma - s), s (gamma - r_b)/(gamma - s))`,
/// with their limits when `gamma` or `s` is infinite.
pub fn accelerated_exponents(gamma: f64, s: f64, r_b: f64) -> (f64, f64) {
    if gamma.is_infinite() {
        (r_b - s, s)
    } else if s.is_infinite() {
        (gamma, r_b - gamma)
    } else {
        (
            gamma * (r_b - s) / (gamma - s),
            s * (gamma - r_b) / (gamma - s),
        )
    }
}

pub fn theoretical_rate(params: &RateParams, mode: RateMode) -> Result<RegimeReport> {
    params.validate()?;
    let r_b = params.r_beta();
    let (gamma, s) = (params.gamma, params.s);
    let configuration = classify_configuration(gamma, s, r_b);
    let n = params.n.max(1.0);
    let m = params.m.max(1.0);
    let window = if configuration == Configuration::Supercritical && gamma != s {
        Some(acceleration_window(n, gamma, s)?)
    } else {
        None
    };
    let log_nm = n.ln() + m.ln();

    if let Some(w) = window.filter(|w| w.contains(m)) {
        let (ex_s, ex_t) = accelerated_exponents(gamma, s, r_b);
        let rate = match mode {
            RateMode::ExponentsOnly => n.powf(-ex_s) * m.powf(-ex_t),
            RateMode::Full => {
                let tp = params.transfer_p.ok_or(Error::MissingTransfer("source"))?;
                let tq = params.transfer_q.ok_or(Error::MissingTransfer("target"))?;
                let a = ex_s / gamma;
                tp.powf(a) * tq.powf(1.0 - a) * (log_nm / n).powf(ex_s) * (log_nm / m).powf(ex_t)
            }
        };
        return Ok(RegimeReport {
            r_beta: r_b,
            configuration,
            regime: Regime::Accelerated,
            window: Some(w),
            rate,
            source_exp: ex_s,
            target_exp: ex_t,
            omitted_term: None,
        });
    }

    let r_s = gamma.min(r_b);
    let r_t = s.min(r_b);
    let (source_term, target_term, omitted) = match mode {
        RateMode::ExponentsOnly => (Some(n.powf(-r_s)), Some(m.powf(-r_t)), None),
        RateMode::Full => {
            let src = params.transfer_p.map(|t| t * (log_nm / n).powf(r_s));
            let tgt = params.transfer_q.map(|t| t * (log_nm / m).powf(r_t));
            match (src, tgt) {
                (None, None) => return Err(Error::MissingTransfer("source and target")),
                (None, Some(_)) => (src, tgt, Some(Driver::Source)),
                (Some(_), None) => (src, tgt, Some(Driver::Target)),
                _ => (src, tgt, None),
            }
        }
    };
    let (rate, driver) = match (source_term, target_term) {
        (Some(a), Some(b)) if a <= b => (a, Driver::Source),
        (Some(_), Some(b)) => (b, Driver::Target),
        (Some(a), None) => (a, Driver::Source),
        (None, Some(b)) => (b, Driver::Target),
        (None, None) => unreachable!("handled above"),
    };
    Ok(RegimeReport {
        r_beta: r_b,
        configuration,
        regime: Regime::Wedge { driver },
        window,
        rate,
        source_exp: r_s,
        target_exp: r_t,
        omitted_term: omitted,
    })
}

/// Minimax lower-bound rate with unit constant.
///
/// Written directly from the lower-bound statement: the multiplicative form
/// applies when `(gamma - r_b)(s - r_b) < 0` and `log m` lies between
/// `log n` and `(gamma/s) log n`; otherwise the wedge `n^-(gamma ∧ r_b) ∧ m^-(s ∧ r_b)`.
pub fn lower_bound_rate(params: &RateParams) -> f64 {
    let r_b = 2.0 * params.beta / (2.0 * params.beta + params.d as f64);
    let (g, s) = (params.gamma, params.s);
    let ln_n = params.n.max(1.0).ln();
    let ln_m = params.m.max(1.0).ln();
    if (g - r_b) * (s - r_b) < 0.0 && g != s {
        let edge = params.n.max(1.0).powf(g / s).ln();
        let (lo, hi) = if edge < ln_n {
            (edge, ln_n)
        } else {
            (ln_n, edge)
        };
        if lo <= ln_m && ln_m <= hi {
            let (es, et) = accelerated_exponents(g, s, r_b);
            return (-(es * ln_n + et * ln_m)).exp();
        }
    }
    let a = (-(g.min(r_b)) * ln_n).exp();
    let b = (-(s.min(r_b)) * ln_m).exp();
    a.min(b)
}

/// Implicit line `coef_axis1 * axis1 + coef_axis2 * axis2 = rhs` in the
/// coordinates of a phase grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLine {
    pub name: String,
    pub coef_axis1: f64,
    pub coef_axis2: f64,
    pub rhs: f64,
}

impl BoundaryLine {
    fn new(name: &str, coef_axis1: f64, coef_axis2: f64, rhs: f64) -> Self {
        BoundaryLine {
            name: name.to_string(),
            coef_axis1,
            coef_axis2,
            rhs,
        }
    }
}

/// Which pair of parameters is held fixed in a phase grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "fixed")]
pub enum PhaseAxes {
    /// Axes are `log10 n` and `log10 m`.
    Exponents {
        #[serde(with = "crate::serde_f64")]
        gamma: f64,
        #[serde(with = "crate::serde_f64")]
        s: f64,
    },
    /// Axes are `gamma` and `s`.
    SampleSizes { n: f64, m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub axis1: f64,
    pub axis2: f64,
    pub report: RegimeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub axes: PhaseAxes,
    pub beta: f64,
    pub d: usize,
    /// Row-major: `axis1` outer, `axis2` inner.
    pub cells: Vec<PhaseCell>,
    pub boundaries: Vec<BoundaryLine>,
}

/// Classifies every cell of `axis1 x axis2` (exponents-only rates).
pub fn phase_grid(
    axes: PhaseAxes,
    beta: f64,
    d: usize,
    axis1: &[f64],
    axis2: &[f64],
) -> Result<PhaseGrid> {
    let r_b = r_beta(beta, d);
    let coords: Vec<(f64, f64)> = axis1
        .iter()
        .flat_map(|&a| axis2.iter().map(move |&b| (a, b)))
        .collect();
    let cells = coords
        .par_iter()
        .map(|&(a, b)| {
            let params = match axes {
                PhaseAxes::Exponents { gamma, s } => {
                    RateParams::new(gamma, s, beta, d, 10f64.powf(a), 10f64.powf(b))
                }
                PhaseAxes::SampleSizes { n, m } => RateParams::new(a, b, beta, d, n, m),
            };
            theoretical_rate(&params, RateMode::ExponentsOnly).map(|report| PhaseCell {
                axis1: a,
                axis2: b,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let boundaries = match axes {
        PhaseAxes::Exponents { gamma, s } => vec![
            BoundaryLine::new("a", -r_b, s, 0.0),
            BoundaryLine::new("b", -gamma, s, 0.0),
            BoundaryLine::new("I", -1.0, 1.0, 0.0),
            BoundaryLine::new("M", -gamma, r_b, 0.0),
        ],
        PhaseAxes::SampleSizes { n, m } => {
            let (ln_n, ln_m) = (n.max(1.0).ln(), m.max(1.0).ln());
            vec![
                BoundaryLine::new("a", 0.0, ln_m, r_b * ln_n),
                BoundaryLine::new("b", -ln_n, ln_m, 0.0),
                // independent of (gamma, s): holds everywhere or nowhere
                BoundaryLine::new("I", 0.0, 0.0, ln_m - ln_n),
                BoundaryLine::new("M", ln_n, 0.0, r_b * ln_m),
                BoundaryLine::new("gamma_eq_r_beta", 1.0, 0.0, r_b),
                BoundaryLine::new("s_eq_r_beta", 0.0, 1.0, r_b),
            ]
        }
    };
    Ok(PhaseGrid {
        axes,
        beta,
        d,
        cells,
        boundaries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplePath {
    /// `(n, m) = (B^(1 - lambda), B^lambda)`
    Linear { budget: f64 },
    /// `(n, m) = ((1 - lambda) B, lambda B)`, each clamped to at least 1.
    FixedBudget { budget: f64 },
}

impl SamplePath {
    pub fn sizes(&self, lambda: f64) -> (f64, f64) {
        match *self {
            SamplePath::Linear { budget } => (budget.powf(1.0 - lambda), budget.powf(lambda)),
            SamplePath::FixedBudget { budget } => (
                ((1.0 - lambda) * budget).max(1.0),
                (lambda * budget).max(1.0),
            ),
        }
    }

    fn budget(&self) -> f64 {
        match *self {
            SamplePath::Linear { budget } | SamplePath::FixedBudget { budget } => budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub n: f64,
    pub m: f64,
    pub rate: f64,
    pub wedge_rate: f64,
    pub regime: Regime,
}

/// Exponents-only rates along a sample-size path, with the wedge rate for comparison.
pub fn path_rates(
    path: SamplePath,
    lambdas: &[f64],
    gamma: f64,
    s: f64,
    beta: f64,
    d: usize,
) -> Result<Vec<PathPoint>> {
    if !(path.budget() >= 2.0) {
        return Err(Error::param(
            "budget",
            format!("must be at least 2, got {}", path.budget()),
        ));
    }
    let r_b = r_beta(beta, d);
    lambdas
        .iter()
        .map(|&lambda| {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::param(
                    "lambda",
                    format!("must lie in [0, 1], got {lambda}"),
                ));
            }
            let (n, m) = path.sizes(lambda);
            let report = theoretical_rate(
                &RateParams::new(gamma, s, beta, d, n, m),
                RateMode::ExponentsOnly,
            )?;
            let wedge_rate = n.powf(-gamma.min(r_b)).min(m.powf(-s.min(r_b)));
            Ok(PathPoint {
                lambda,
                n,
                m,
                rate: report.rate,
                wedge_rate,
                regime: report.regime,
            })
        })
        .collect()
}
