//! Covariate distributions and their regularity diagnostics.
//!
//! Every family is absolutely continuous with a bounded density. The
//! one-dimensional families have closed-form survival functions (except the
//! log-corrected Pareto, whose normalising constant and tail masses are
//! computed by quadrature); the product Pareto law is handled by Monte Carlo
//! wherever a Euclidean ball mass is needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{squared_distance, PointSet};
use crate::quad::{integrate_to_infinity, TailOptions};

/// Serialized form of a [`DistributionFamily`]; `family` selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Pareto { alpha: f64, sigma: f64 },
    Exponential { lambda: f64 },
    Uniform { a: f64, b: f64 },
    ProductPareto { alpha: f64, sigma: f64, d: usize },
    LogPareto { b: f64, c: f64 },
}

/// A parametric covariate law.
///
/// `LogPareto { b, c }` has density proportional to
/// `1(x >= 2) / (x^(b+1) log(x)^c)`; the normalising constant is computed once
/// at construction. With `c = 0` it is a power law on `[2, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub enum DistributionFamily {
    Pareto { alpha: f64, sigma: f64 },
    Exponential { lambda: f64 },
    Uniform { a: f64, b: f64 },
    ProductPareto { alpha: f64, sigma: f64, d: usize },
    LogPareto { b: f64, c: f64, log_norm: f64 },
}

impl TryFrom<DistributionSpec> for DistributionFamily {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Pareto { alpha, sigma } => DistributionFamily::pareto(alpha, sigma),
            DistributionSpec::Exponential { lambda } => DistributionFamily::exponential(lambda),
            DistributionSpec::Uniform { a, b } => DistributionFamily::uniform(a, b),
            DistributionSpec::ProductPareto { alpha, sigma, d } => {
                DistributionFamily::product_pareto(alpha, sigma, d)
            }
            DistributionSpec::LogPareto { b, c } => DistributionFamily::log_pareto(b, c),
        }
    }
}

impl From<DistributionFamily> for DistributionSpec {
    fn from(d: DistributionFamily) -> Self {
        match d {
            DistributionFamily::Pareto { alpha, sigma } => {
                DistributionSpec::Pareto { alpha, sigma }
            }
            DistributionFamily::Exponential { lambda } => DistributionSpec::Exponential { lambda },
            DistributionFamily::Uniform { a, b } => DistributionSpec::Uniform { a, b },
            DistributionFamily::ProductPareto { alpha, sigma, d } => {
                DistributionSpec::ProductPareto { alpha, sigma, d }
            }
            DistributionFamily::LogPareto { b, c, .. } => DistributionSpec::LogPareto { b, c },
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

const BALL_MC_DRAWS: usize = 100_000;
const ZETA_MAX_RADIUS: f64 = 1_099_511_627_776.0; // 2^40

impl DistributionFamily {
    pub fn pareto(alpha: f64, sigma: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("sigma", sigma)?;
        Ok(DistributionFamily::Pareto { alpha, sigma })
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(DistributionFamily::Exponential { lambda })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::param(
                "b",
                format!("uniform needs finite a < b, got a = {a}, b = {b}"),
            ));
        }
        Ok(DistributionFamily::Uniform { a, b })
    }

    pub fn product_pareto(alpha: f64, sigma: f64, d: usize) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("sigma", sigma)?;
        if d == 0 {
            return Err(Error::param("d", "dimension must be positive"));
        }
        Ok(DistributionFamily::ProductPareto { alpha, sigma, d })
    }

    pub fn log_pareto(b: f64, c: f64) -> Result<Self> {
        positive("b", b)?;
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::param(
                "c",
                format!("must be a nonnegative finite number, got {c}"),
            ));
        }
        let unnormalized = |x: f64| (-(b + 1.0) * x.ln() - c * x.ln().ln()).exp();
        let z = integrate_to_infinity(unnormalized, 2.0, TailOptions::default());
        if !z.converged || !(z.value > 0.0) {
            return Err(Error::param(
                "b",
                "log-Pareto normalising integral did not converge",
            ));
        }
        Ok(DistributionFamily::LogPareto {
            b,
            c,
            log_norm: z.value.ln(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionFamily::ProductPareto { d, .. } => *d,
            _ => 1,
        }
    }

    /// Support of a one-dimensional family as `(lo, hi)`; `None` in higher dimension.
    pub fn support_1d(&self) -> Option<(f64, f64)> {
        match *self {
            DistributionFamily::Pareto { .. } | DistributionFamily::Exponential { .. } => {
                Some((0.0, f64::INFINITY))
            }
            DistributionFamily::Uniform { a, b } => Some((a, b)),
            DistributionFamily::LogPareto { .. } => Some((2.0, f64::INFINITY)),
            DistributionFamily::ProductPareto { d: 1, .. } => Some((0.0, f64::INFINITY)),
            DistributionFamily::ProductPareto { .. } => None,
        }
    }

    pub fn in_support(&self, x: &[f64]) -> bool {
        match *self {
            DistributionFamily::ProductPareto { .. } => x.iter().all(|&v| v >= 0.0),
            _ => {
                let (lo, hi) = self.support_1d().expect("1-D family");
                x[0] >= lo && x[0] <= hi
            }
        }
    }

    /// Logarithm of the density of a one-dimensional family at `x`.
    ///
    /// Returns `-inf` outside the support. Stable far into the tails, where
    /// the density itself underflows.
    pub fn ln_density_1d(&self, x: f64) -> f64 {
        match *self {
            DistributionFamily::Pareto { alpha, sigma }
            | DistributionFamily::ProductPareto {
                alpha, sigma, d: 1, ..
            } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (alpha / sigma).ln() - (alpha + 1.0) * (x / sigma).ln_1p()
                }
            }
            DistributionFamily::Exponential { lambda } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    lambda.ln() - lambda * x
                }
            }
            DistributionFamily::Uniform { a, b } => {
                if x < a || x > b {
                    f64::NEG_INFINITY
                } else {
                    -(b - a).ln()
                }
            }
            DistributionFamily::LogPareto { b, c, log_norm } => {
                if x < 2.0 {
                    f64::NEG_INFINITY
                } else {
                    -log_norm - (b + 1.0) * x.ln() - c * x.ln().ln()
                }
            }
            DistributionFamily::ProductPareto { .. } => {
                panic!("ln_density_1d called on a multivariate law")
            }
        }
    }

    /// Density at `x`; zero outside the support. Right-continuous at the
    /// left endpoint of the support.
    pub fn density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        match *self {
            DistributionFamily::ProductPareto { alpha, sigma, d } => {
                if x.iter().any(|&v| v < 0.0) {
                    return 0.0;
                }
                let log: f64 = x
                    .iter()
                    .map(|&v| (alpha / sigma).ln() - (alpha + 1.0) * (v / sigma).ln_1p())
                    .sum();
                debug_assert_eq!(x.len(), d);
                log.exp()
            }
            _ => self.ln_density_1d(x[0]).exp(),
        }
    }

    /// Survival function `P{X > x}` of a one-dimensional family.
    pub fn survival_1d(&self, x: f64) -> f64 {
        match *self {
            DistributionFamily::Pareto { alpha, sigma }
            | DistributionFamily::ProductPareto {
                alpha, sigma, d: 1, ..
            } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-alpha * (x / sigma).ln_1p()).exp()
                }
            }
            DistributionFamily::Exponential { lambda } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-lambda * x).exp()
                }
            }
            DistributionFamily::Uniform { a, b } => ((b - x) / (b - a)).clamp(0.0, 1.0),
            DistributionFamily::LogPareto { .. } => {
                if x <= 2.0 {
                    1.0
                } else if x.is_infinite() {
                    0.0
                } else {
                    let r = integrate_to_infinity(
                        |t| self.ln_density_1d(t).exp(),
                        x,
                        TailOptions::default(),
                    );
                    r.value.clamp(0.0, 1.0)
                }
            }
            DistributionFamily::ProductPareto { .. } => {
                panic!("survival_1d called on a multivariate law")
            }
        }
    }

    pub fn cdf_1d(&self, x: f64) -> f64 {
        1.0 - self.survival_1d(x)
    }

    /// Upper bound `D` on the density.
    pub fn density_bound(&self) -> f64 {
        match *self {
            DistributionFamily::Pareto { alpha, sigma } => alpha / sigma,
            DistributionFamily::Exponential { lambda } => lambda,
            DistributionFamily::Uniform { a, b } => 1.0 / (b - a),
            DistributionFamily::ProductPareto { alpha, sigma, d } => (alpha / sigma).powi(d as i32),
            // the density is decreasing on [2, inf)
            DistributionFamily::LogPareto { .. } => self.ln_density_1d(2.0).exp(),
        }
    }

    /// A local-mass constant `theta` for which the family is known to satisfy
    /// `theta^-1 p(x) r^d <= P{B(x, r)} <= theta p(x) r^d` for `r` in `(0, 1]`.
    pub fn local_mass_theta(&self) -> Option<f64> {
        match *self {
            DistributionFamily::Pareto { alpha, sigma } => {
                Some(2.0 * (1.0 + 1.0 / sigma).powf(alpha + 1.0))
            }
            // e^lambda alone is too small below lambda ~ 0.8, where the
            // interior ratio 2 sinh(lambda r) / (lambda r) at r = 1 exceeds it
            DistributionFamily::Exponential { lambda } => {
                Some(lambda.exp().max(2.0 * lambda.sinh() / lambda))
            }
            DistributionFamily::Uniform { a, b } => Some(2f64.max(1.0 / (b - a).min(1.0))),
            DistributionFamily::ProductPareto { .. } | DistributionFamily::LogPareto { .. } => None,
        }
    }

    /// Draws one point into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match *self {
            DistributionFamily::Pareto { alpha, sigma } => {
                out.push(pareto_inverse(rng, alpha, sigma))
            }
            DistributionFamily::Exponential { lambda } => {
                let u: f64 = rng.random();
                out.push(-(-u).ln_1p() / lambda)
            }
            DistributionFamily::Uniform { a, b } => {
                let u: f64 = rng.random();
                out.push(a + (b - a) * u)
            }
            DistributionFamily::ProductPareto { alpha, sigma, d } => {
                for _ in 0..d {
                    out.push(pareto_inverse(rng, alpha, sigma));
                }
            }
            DistributionFamily::LogPareto { b, c, .. } => {
                // Rejection from the classical Pareto law with scale 2 and
                // index b: the density ratio is proportional to
                // (ln 2 / ln x)^c <= 1.
                let ln2 = std::f64::consts::LN_2;
                loop {
                    let u: f64 = rng.random();
                    let x = 2.0 * (1.0 - u).powf(-1.0 / b);
                    let accept = (ln2 / x.ln()).powf(c);
                    if rng.random::<f64>() < accept {
                        out.push(x);
                        break;
                    }
                }
            }
        }
    }

    /// `n` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> PointSet {
        let d = self.dim();
        let mut buf = Vec::with_capacity(d);
        let mut set = PointSet::with_capacity(d, n);
        for _ in 0..n {
            buf.clear();
            self.sample_into(rng, &mut buf);
            set.push(&buf)
                .expect("sampler yields finite points of the family dimension");
        }
        set
    }

    /// Probability of the closed Euclidean ball `B(x, r)`.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        self.ball_mass_with_error(x, r).0
    }

    /// Ball mass together with its standard error; the error is zero for
    /// the one-dimensional families and a Monte Carlo standard error for the
    /// product Pareto law (10^5 draws, common random numbers per centre).
    pub fn ball_mass_with_error(&self, x: &[f64], r: f64) -> (f64, f64) {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        if r <= 0.0 {
            return (0.0, 0.0);
        }
        match *self {
            DistributionFamily::ProductPareto { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_from_point(x));
                let draws = self.sample(&mut rng, BALL_MC_DRAWS);
                let r2 = r * r;
                let hits = draws
                    .iter()
                    .filter(|p| squared_distance(p, x) <= r2)
                    .count();
                let p = hits as f64 / BALL_MC_DRAWS as f64;
                (p, (p * (1.0 - p) / BALL_MC_DRAWS as f64).sqrt())
            }
            DistributionFamily::Uniform { a, b } => {
                let lo = (x[0] - r).max(a);
                let hi = (x[0] + r).min(b);
                (((hi - lo) / (b - a)).max(0.0), 0.0)
            }
            _ => {
                let m = self.survival_1d(x[0] - r) - self.survival_1d(x[0] + r);
                (m.clamp(0.0, 1.0), 0.0)
            }
        }
    }

    /// Smallest radius whose ball around `x` carries mass at least `h`.
    pub fn zeta(&self, x: &[f64], h: f64) -> Result<f64> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::param("h", format!("must lie in (0, 1], got {h}")));
        }
        let mut hi = 1.0;
        while self.ball_mass(x, hi) < h {
            hi *= 2.0;
            if hi > ZETA_MAX_RADIUS {
                return Err(Error::RadiusSearchFailed {
                    target: h,
                    mass: self.ball_mass(x, ZETA_MAX_RADIUS),
                    radius: ZETA_MAX_RADIUS,
                });
            }
        }
        let mut lo = 0.0;
        for _ in 0..400 {
            if hi - lo <= 1e-13 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.ball_mass(x, mid) >= h {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Checks both local-mass inequalities at every `(x, r)` pair.
    pub fn local_mass_check(
        &self,
        theta: f64,
        x_grid: &[Vec<f64>],
        r_grid: &[f64],
    ) -> LocalMassReport {
        let d = self.dim() as i32;
        let mut cells = Vec::with_capacity(x_grid.len() * r_grid.len());
        let (mut min_ratio, mut max_ratio) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in x_grid {
            let px = self.density(x);
            for &r in r_grid {
                let mass = self.ball_mass(x, r);
                let ratio = mass / (px * r.powi(d));
                // 1e-12 relative slack for rounding in the survival differences
                let pass = ratio * theta >= 1.0 - 1e-12 && ratio <= theta * (1.0 + 1e-12);
                min_ratio = min_ratio.min(ratio);
                max_ratio = max_ratio.max(ratio);
                cells.push(LocalMassCell {
                    x: x.clone(),
                    r,
                    ratio,
                    pass,
                });
            }
        }
        LocalMassReport {
            theta,
            passed: cells.iter().all(|c| c.pass),
            failures: cells.iter().filter(|c| !c.pass).count(),
            min_ratio,
            max_ratio,
            cells,
        }
    }
}

fn pareto_inverse<R: Rng + ?Sized>(rng: &mut R, alpha: f64, sigma: f64) -> f64 {
    let u: f64 = rng.random();
    // (1 - u)^(-1/alpha) - 1, computed without cancellation near u = 0
    sigma * (-(-u).ln_1p() / alpha).exp_m1()
}

fn seed_from_point(x: &[f64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for v in x {
        h ^= v.to_bits();
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9).rotate_left(31);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMassCell {
    pub x: Vec<f64>,
    pub r: f64,
    /// `P{B(x, r)} / (p(x) r^d)`
    #[serde(with = "crate::serde_f64")]
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMassReport {
    pub theta: f64,
    pub passed: bool,
    pub failures: usize,
    #[serde(with = "crate::serde_f64")]
    pub min_ratio: f64,
    #[serde(with = "crate::serde_f64")]
    pub max_ratio: f64,
    pub cells: Vec<LocalMassCell>,
}

/// Integrability indices `gamma* = gamma*(P, Q)` and `s* = gamma*(Q, Q)`.
/// Infinite values are represented by `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormIndices {
    #[serde(with = "crate::serde_f64")]
    pub gamma_star: f64,
    #[serde(with = "crate::serde_f64")]
    pub s_star: f64,
}

fn self_index(q: &DistributionFamily) -> f64 {
    match *q {
        DistributionFamily::Pareto { alpha, .. }
        | DistributionFamily::ProductPareto { alpha, .. } => alpha / (alpha + 1.0),
        DistributionFamily::Exponential { .. } => 1.0,
        DistributionFamily::Uniform { .. } => f64::INFINITY,
        DistributionFamily::LogPareto { b, .. } => b / (b + 1.0),
    }
}

/// Closed-form `(gamma*, s*)` for the supported source/target pairs.
pub fn closed_form_indices(
    p: &DistributionFamily,
    q: &DistributionFamily,
) -> Result<ClosedFormIndices> {
    use DistributionFamily as D;
    let gamma_star = match (p, q) {
        (D::Pareto { alpha: ap, .. }, D::Pareto { alpha: aq, .. }) => aq / (ap + 1.0),
        (
            D::ProductPareto {
                alpha: ap, d: dp, ..
            },
            D::ProductPareto {
                alpha: aq, d: dq, ..
            },
        ) if dp == dq => aq / (ap + 1.0),
        (D::Exponential { lambda: lp }, D::Exponential { lambda: lq }) => lq / lp,
        (D::Uniform { a: pa, b: pb }, D::Uniform { a: qa, b: qb }) if pa <= qa && qb <= pb => {
            f64::INFINITY
        }
        (D::Pareto { .. }, D::Exponential { .. }) => f64::INFINITY,
        (D::LogPareto { b: bp, .. }, D::LogPareto { b: bq, .. }) => bq / (bp + 1.0),
        _ => return Err(Error::NoClosedForm),
    };
    Ok(ClosedFormIndices {
        gamma_star,
        s_star: self_index(q),
    })
}

/// A regression function with a declared Hölder-ball membership
/// `||f||_inf + |f|_beta <= l`, valid on `domain` (every coordinate in
/// `[lo, hi]`) or on all of R^d when `domain` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HolderFunction {
    Zero,
    Constant {
        value: f64,
    },
    /// `x_1 (1 - x_1)`, declared on `[0, 1]^d`.
    Parabola,
    /// `amplitude * sin(frequency * x_1)`.
    Sine {
        amplitude: f64,
        frequency: f64,
    },
    Bumps(BumpEnsemble),
}

impl HolderFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            HolderFunction::Zero => 0.0,
            HolderFunction::Constant { value } => *value,
            HolderFunction::Parabola => x[0] * (1.0 - x[0]),
            HolderFunction::Sine {
                amplitude,
                frequency,
            } => amplitude * (frequency * x[0]).sin(),
            HolderFunction::Bumps(b) => b.eval(x),
        }
    }

    /// Declared Hölder-ball radius.
    pub fn l(&self) -> f64 {
        match self {
            HolderFunction::Zero => 1.0,
            HolderFunction::Constant { value } => value.abs().max(f64::MIN_POSITIVE),
            HolderFunction::Parabola => 1.25,
            HolderFunction::Sine {
                amplitude,
                frequency,
            } => amplitude.abs() * (1.0 + frequency.abs()),
            HolderFunction::Bumps(b) => b.declared_l(),
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            HolderFunction::Bumps(b) => b.beta,
            _ => 1.0,
        }
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            HolderFunction::Parabola => Some((0.0, 1.0)),
            _ => None,
        }
    }
}

/// Sum of disjoint triangular bumps `b_i L h^beta (1 - |x - z_i| / h)_+`
/// centred on a `2h`-spaced packing of `[a, 2a]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpEnsemble {
    pub a: f64,
    pub h: f64,
    pub l: f64,
    pub beta: f64,
    pub dim: usize,
    pub bits: Vec<bool>,
}

impl BumpEnsemble {
    /// Number of centres per axis.
    pub fn per_axis(&self) -> usize {
        (self.a / (2.0 * self.h)).floor() as usize
    }

    pub fn len(&self) -> usize {
        self.per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        let per = self.per_axis();
        let mut rest = i;
        (0..self.dim)
            .map(|_| {
                let j = rest % per;
                rest /= per;
                self.a + self.h + 2.0 * self.h * j as f64
            })
            .collect()
    }

    /// Height of a single bump at its centre.
    pub fn peak(&self) -> f64 {
        self.l * self.h.powf(self.beta)
    }

    /// Value of the `i`-th bump (ignoring its bit).
    pub fn bump(&self, i: usize, x: &[f64]) -> f64 {
        let z = self.center(i);
        let u = squared_distance(x, &z).sqrt() / self.h;
        self.peak() * (1.0 - u).max(0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        // supports are disjoint, so only the cell containing x can contribute
        let per = self.per_axis();
        let mut idx = 0;
        let mut stride = 1;
        for &xi in x.iter().take(self.dim) {
            let t = (xi - self.a) / (2.0 * self.h);
            if !(0.0..per as f64).contains(&t) {
                return 0.0;
            }
            idx += (t.floor() as usize).min(per - 1) * stride;
            stride *= per;
        }
        if self.bits[idx] {
            self.bump(idx, x)
        } else {
            0.0
        }
    }

    /// A radius `L'` with `||f_b||_inf + |f_b|_beta <= L'`: each bump has
    /// seminorm at most `L`, and a pair of points in two different bumps
    /// picks up at most twice that.
    pub fn declared_l(&self) -> f64 {
        self.l * (self.h.powf(self.beta) + 2.0)
    }
}

/// Additive noise law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Gaussian { sigma_e: f64 },
}

impl NoiseSpec {
    pub fn gaussian(sigma_e: f64) -> Result<Self> {
        if !(sigma_e.is_finite() && sigma_e >= 0.0) {
            return Err(Error::param(
                "sigma_e",
                format!("must be nonnegative, got {sigma_e}"),
            ));
        }
        Ok(NoiseSpec::Gaussian { sigma_e })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma_e: 0.0 } => 0.0,
            NoiseSpec::Gaussian { sigma_e } => Normal::new(0.0, sigma_e)
                .expect("validated standard deviation")
                .sample(rng),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma_e } => sigma_e * sigma_e,
        }
    }

    /// Sub-exponential parameters `(alpha, nu)`; a centred Gaussian satisfies
    /// the moment-generating bound with `nu = sigma_e` for any `alpha`.
    pub fn sub_exponential(&self) -> (f64, f64) {
        match *self {
            NoiseSpec::Gaussian { sigma_e } => (sigma_e, sigma_e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};

    fn integral_of_density(d: &DistributionFamily) -> f64 {
        let (lo, hi) = d.support_1d().unwrap();
        if hi.is_finite() {
            integrate(|x| d.density(&[x]), lo, hi, QuadOptions::default()).value
        } else {
            integrate_to_infinity(|x| d.ln_density_1d(x).exp(), lo, TailOptions::default()).value
        }
    }

    fn all_1d() -> Vec<DistributionFamily> {
        vec![
            DistributionFamily::pareto(1.0, 1.0).unwrap(),
            DistributionFamily::pareto(3.0, 0.5).unwrap(),
            DistributionFamily::exponential(2.0).unwrap(),
            DistributionFamily::uniform(-1.0, 2.0).unwrap(),
            DistributionFamily::log_pareto(1.0, 2.0).unwrap(),
            DistributionFamily::log_pareto(1.0, 0.5).unwrap(),
            DistributionFamily::log_pareto(1.0, 0.0).unwrap(),
        ]
    }

    #[test]
    fn density_examples() {
        assert_eq!(
            DistributionFamily::pareto(1.0, 1.0)
                .unwrap()
                .density(&[0.0]),
            1.0
        );
        assert_eq!(
            DistributionFamily::exponential(2.0)
                .unwrap()
                .density(&[0.0]),
            2.0
        );
        assert_eq!(
            DistributionFamily::uniform(0.0, 1.0)
                .unwrap()
                .density(&[2.0]),
            0.0
        );
        assert_eq!(
            DistributionFamily::pareto(1.0, 1.0)
                .unwrap()
                .density(&[-1e-9]),
            0.0
        );
    }

    #[test]
    fn densities_integrate_to_one() {
        for d in all_1d() {
            let total = integral_of_density(&d);
            assert!((total - 1.0).abs() <= 1e-6, "{d:?}: {total}");
        }
    }

    #[test]
    fn log_pareto_without_log_factor_matches_power_law() {
        // c = 0: density a 2^a x^-(a+1)
        let d = DistributionFamily::log_pareto(1.5, 0.0).unwrap();
        let exact = 1.5 * 2f64.powf(1.5) * 3f64.powf(-2.5);
        assert!((d.density(&[3.0]) - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn density_bound_dominates_grid() {
        for d in all_1d() {
            let (lo, hi) = d.support_1d().unwrap();
            let hi = if hi.is_finite() { hi } else { lo + 50.0 };
            for i in 0..=1000 {
                let x = lo + (hi - lo) * i as f64 / 1000.0;
                assert!(
                    d.density(&[x]) <= d.density_bound() * (1.0 + 1e-12),
                    "{d:?} at {x}"
                );
            }
        }
    }

    #[test]
    fn ball_mass_examples() {
        let u = DistributionFamily::uniform(0.0, 1.0).unwrap();
        assert!((u.ball_mass(&[0.5], 0.2) - 0.4).abs() < 1e-15);
        let e = DistributionFamily::exponential(1.0).unwrap();
        assert_eq!(e.ball_mass(&[0.3], 0.0), 0.0);
        assert!((e.ball_mass(&[0.0], 1.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn zeta_examples() {
        let u = DistributionFamily::uniform(0.0, 1.0).unwrap();
        assert!((u.zeta(&[0.5], 0.2).unwrap() - 0.1).abs() < 1e-10);
        assert!((u.zeta(&[0.5], 1.0).unwrap() - 0.5).abs() < 1e-10);
        let e = DistributionFamily::exponential(1.0).unwrap();
        assert!((e.zeta(&[0.0], 0.5).unwrap() - 2f64.ln()).abs() < 1e-10);
        assert!(u.zeta(&[0.5], 0.0).is_err());
        assert!(u.zeta(&[0.5], 1.5).is_err());
    }

    #[test]
    fn zeta_is_generalized_inverse() {
        for d in all_1d() {
            let (lo, _) = d.support_1d().unwrap();
            for x in [lo, lo + 0.3, lo + 2.0] {
                for h in [1e-3, 0.05, 0.3, 0.7] {
                    let z = d.zeta(&[x], h).unwrap();
                    let at = d.ball_mass(&[x], z);
                    assert!(at >= h && at <= h + 1e-9, "{d:?} x={x} h={h}: {at}");
                    assert!(d.ball_mass(&[x], z * (1.0 - 1e-6)) < h);
                }
            }
        }
    }

    #[test]
    fn local_mass_examples() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.4]).collect();
        let rs: Vec<f64> = (1..=20).map(|j| j as f64 / 20.0).collect();
        for (alpha, sigma) in [(1.0, 1.0), (2.5, 0.5)] {
            let p = DistributionFamily::pareto(alpha, sigma).unwrap();
            let theta = 2.0 * (1.0 + 1.0 / sigma).powf(alpha + 1.0);
            assert!(p.local_mass_check(theta, &xs, &rs).passed);
        }
        for lambda in [1.0, 2.0, 3.0] {
            let e = DistributionFamily::exponential(lambda).unwrap();
            assert!(e.local_mass_check(lambda.exp(), &xs, &rs).passed);
        }
        // for small rates the interior ratio near r = 1 exceeds e^lambda
        let e = DistributionFamily::exponential(0.5).unwrap();
        let report = e.local_mass_check(0.5f64.exp(), &xs, &rs);
        assert!(!report.passed);
        assert!((report.max_ratio - 2.0 * 0.5f64.sinh() / 0.5).abs() < 1e-9);
        assert!(
            e.local_mass_check(e.local_mass_theta().unwrap(), &xs, &rs)
                .passed
        );
        let e = DistributionFamily::exponential(1.0).unwrap();
        let report = e.local_mass_check(1.01, &xs, &rs);
        assert!(!report.passed);
        assert!(report.max_ratio > 1.01);
    }

    #[test]
    fn closed_form_examples() {
        let par = DistributionFamily::pareto(1.0, 1.0).unwrap();
        let idx = closed_form_indices(&par, &par).unwrap();
        assert_eq!((idx.gamma_star, idx.s_star), (0.5, 0.5));
        let e2 = DistributionFamily::exponential(2.0).unwrap();
        let e1 = DistributionFamily::exponential(1.0).unwrap();
        let idx = closed_form_indices(&e2, &e1).unwrap();
        assert_eq!((idx.gamma_star, idx.s_star), (0.5, 1.0));
        let idx = closed_form_indices(&e1, &e1).unwrap();
        assert_eq!((idx.gamma_star, idx.s_star), (1.0, 1.0));
        let idx = closed_form_indices(&par, &e1).unwrap();
        assert!(idx.gamma_star.is_infinite());
        assert_eq!(
            closed_form_indices(&e1, &par).unwrap_err(),
            Error::NoClosedForm
        );
    }

    #[test]
    fn json_round_trip_and_validation() {
        let d: DistributionFamily =
            serde_json::from_str(r#"{"family": "pareto", "alpha": 1.0, "sigma": 1.0}"#).unwrap();
        assert_eq!(d, DistributionFamily::pareto(1.0, 1.0).unwrap());
        let back: DistributionFamily =
            serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        let err = serde_json::from_str::<DistributionFamily>(
            r#"{"family": "exponential", "lambda": -1}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("lambda"), "{err}");
        let err = serde_json::from_str::<DistributionFamily>(
            r#"{"family": "uniform", "a": 0, "b": 1, "bogus": 2}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn bump_geometry() {
        let b = BumpEnsemble {
            a: 1.0,
            h: 0.1,
            l: 2.0,
            beta: 0.5,
            dim: 1,
            bits: vec![true, false, true, false, true],
        };
        assert_eq!(b.len(), 5);
        let z0 = b.center(0)[0];
        assert!((z0 - 1.1).abs() < 1e-15);
        assert!((b.eval(&[z0]) - 2.0 * 0.1f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.eval(&[b.center(1)[0]]), 0.0);
        assert_eq!(b.eval(&[0.5]), 0.0);
        assert_eq!(b.eval(&[2.5]), 0.0);
    }
}
