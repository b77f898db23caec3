//! One-dimensional quadrature.
//!
//! [`integrate`] is a globally adaptive 7/15-point Gauss–Kronrod rule on a
//! finite interval. [`integrate_to_infinity`] handles `[lo, inf)` for
//! nonnegative integrands: a finite body piece followed by dyadic tail pieces
//! `[M, 2M]`, which is the geometric subdivision of the compactified variable
//! `1 / (1 + x)` towards its singular endpoint. The tail is either summed to
//! negligible size, extrapolated geometrically when consecutive pieces decay
//! at a stable ratio, or declared divergent.

use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    (value, err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (value, err) = gk15(&f, a, b);
    if !value.is_finite() {
        return QuadResult {
            value,
            error: f64::INFINITY,
            converged: false,
        };
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let (mut total, mut total_err) = (value, err);
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return QuadResult {
                value: total,
                error: total_err,
                converged: false,
            };
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval below floating-point resolution
            heap.push(worst);
            return QuadResult {
                value: total,
                error: total_err,
                converged: false,
            };
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return QuadResult {
                value: f64::INFINITY,
                error: f64::INFINITY,
                converged: false,
            };
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.err));
    QuadResult {
        value,
        error,
        converged: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailOptions {
    /// Declares divergence once the accumulated tail exceeds this value.
    pub tail_cutoff: f64,
    /// Relative change below which a capped tail counts as stabilised.
    pub stabilization: f64,
    /// Relative size of the extrapolated remainder at which summation stops.
    pub extrapolation_tol: f64,
    /// Largest tail endpoint before the cap is reached.
    pub max_endpoint: f64,
    pub piece: QuadOptions,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            tail_cutoff: 1e6,
            stabilization: 1e-4,
            extrapolation_tol: 1e-13,
            max_endpoint: 1e300,
            piece: QuadOptions {
                abs_tol: 0.0,
                rel_tol: 1e-12,
                max_intervals: 400,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    /// Number of dyadic tail pieces evaluated.
    pub pieces: usize,
}

impl TailResult {
    fn divergent(pieces: usize) -> Self {
        TailResult {
            value: f64::INFINITY,
            error: f64::INFINITY,
            converged: false,
            pieces,
        }
    }
}

/// Integral of a nonnegative `f` over `[lo, inf)`.
///
/// Divergence is reported (`converged = false`, `value = inf`) when the tail
/// mass exceeds `tail_cutoff`, when a piece is non-finite, or when the tail
/// has not stabilised by the time the endpoint cap is reached.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, lo: f64, opts: TailOptions) -> TailResult {
    let body_end = lo.max(0.0) + 1.0;
    let body = integrate(&f, lo, body_end, opts.piece);
    if !body.value.is_finite() {
        return TailResult::divergent(0);
    }
    let mut quad_err = body.error;
    let mut tail = 0.0;
    let mut prev_piece = f64::NAN;
    let mut ratios = [f64::NAN; 3];
    let mut m = body_end;
    let mut pieces = 0;
    loop {
        let piece = integrate(&f, m, 2.0 * m, opts.piece);
        pieces += 1;
        if !piece.value.is_finite() {
            return TailResult::divergent(pieces);
        }
        quad_err += piece.error;
        tail += piece.value;
        if tail > opts.tail_cutoff {
            return TailResult::divergent(pieces);
        }
        let total = body.value + tail;
        if piece.value == 0.0 {
            return TailResult {
                value: total,
                error: quad_err,
                converged: true,
                pieces,
            };
        }
        ratios.rotate_left(1);
        ratios[2] = piece.value / prev_piece;
        prev_piece = piece.value;

        // geometric remainder estimate once the decay ratio has settled
        let settled = ratios.iter().all(|r| r.is_finite() && *r < 1.0)
            && (ratios[2] - ratios[1]).abs() <= 0.05 * (1.0 - ratios[2])
            && (ratios[1] - ratios[0]).abs() <= 0.05 * (1.0 - ratios[1]);
        let remainder = if settled {
            piece.value * ratios[2] / (1.0 - ratios[2])
        } else {
            f64::NAN
        };
        if settled && remainder <= opts.extrapolation_tol * total.abs() {
            return TailResult {
                value: total + remainder,
                error: quad_err + remainder,
                converged: true,
                pieces,
            };
        }

        m *= 2.0;
        if 2.0 * m > opts.max_endpoint {
            let rel_change = piece.value / total.abs();
            if rel_change < opts.stabilization {
                let (value, extra) = if remainder.is_finite() {
                    (total + remainder, remainder)
                } else {
                    (total, piece.value)
                };
                return TailResult {
                    value,
                    error: quad_err + extra,
                    converged: true,
                    pieces,
                };
            }
            return TailResult::divergent(pieces);
        }
    }
}

/// Integral of a nonnegative `f` over `[lo, hi]`, where `hi` may be infinite.
pub fn integrate_support<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    opts: TailOptions,
) -> TailResult {
    if hi.is_infinite() {
        integrate_to_infinity(f, lo, opts)
    } else {
        let r = integrate(f, lo, hi, opts.piece);
        if !r.value.is_finite() || r.value > opts.tail_cutoff {
            return TailResult::divergent(0);
        }
        TailResult {
            value: r.value,
            error: r.error,
            converged: r.converged,
            pieces: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, QuadOptions::default());
        assert!((r.value - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn kink_and_jump() {
        let r = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, QuadOptions::default());
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-12, "{r:?}");
        let r = integrate(
            |x| if x < 0.4 { 1.0 } else { 0.0 },
            0.0,
            1.0,
            QuadOptions::default(),
        );
        assert!((r.value - 0.4).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, TailOptions::default());
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn slow_power_tail_extrapolates() {
        // int_0^inf (1+x)^-1.1 dx = 10
        let r = integrate_to_infinity(|x: f64| (1.0 + x).powf(-1.1), 0.0, TailOptions::default());
        assert!(r.converged);
        assert!((r.value - 10.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn harmonic_tail_diverges() {
        let r = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x), 0.0, TailOptions::default());
        assert!(!r.converged);
        assert!(r.value.is_infinite());
        let r = integrate_to_infinity(|x: f64| (0.1 * x).exp(), 0.0, TailOptions::default());
        assert!(!r.converged);
    }

    #[test]
    fn log_corrected_tails() {
        // int_2^inf dx / (x log^2 x) = 1 / ln 2 converges, 1 / (x sqrt(log x)) does not
        let conv = integrate_to_infinity(
            |x: f64| 1.0 / (x * x.ln().powi(2)),
            2.0,
            TailOptions::default(),
        );
        assert!(conv.converged, "{conv:?}");
        assert!((conv.value - 1.0 / 2f64.ln()).abs() < 1e-2);
        let div = integrate_to_infinity(
            |x: f64| 1.0 / (x * x.ln().sqrt()),
            2.0,
            TailOptions::default(),
        );
        assert!(!div.converged, "{div:?}");
    }
}
