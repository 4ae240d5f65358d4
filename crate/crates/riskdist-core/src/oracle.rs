//! Brute-force validation engine: deterministic equiprobable-grid
//! discretization of driver-based constructions, empirical quantiles and
//! risk measures over those grids, and the x-side defining integral as an
//! independent cross-check of the quantile-side path.

use crate::dependence::AggregatePosition;
use crate::distortion::Distortion;
use crate::distributions::Distribution;
use crate::quadrature::{self, QuadError};
use crate::risk_measures::{QuadratureConfig, RiskError};

/// A sorted equiprobable-grid discretization of a random variable.
#[derive(Debug, Clone)]
pub struct OracleSample {
    values: Vec<f64>,
    pub construction: String,
}

impl OracleSample {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Discretizes the law of the aggregate onto the midpoint grid
/// `u_k = (k - 0.5) / n`, then sorts. Deterministic; no randomness anywhere.
pub fn grid_sample(pos: &AggregatePosition, n: usize) -> OracleSample {
    assert!(n >= 1, "grid size must be positive");
    let mut values: Vec<f64> = (1..=n)
        .map(|k| {
            let u = (k as f64 - 0.5) / n as f64;
            crate::dependence::aggregate_quantile(pos, u)
        })
        .collect();
    values.sort_unstable_by(f64::total_cmp);
    OracleSample {
        values,
        construction: pos.describe(),
    }
}

/// Discrete spectral form of the distortion measure over a sorted sample:
/// `sum_k s_(k) (g((n-k+1)/n) - g((n-k)/n))`.
///
/// Exact for distortions constant between grid nodes; converges `O(1/n)`
/// for Lipschitz distortions and bounded quantiles. Summation is
/// compensated, so the result is deterministic at any size.
pub fn empirical_rho(g: &Distortion, sample: &OracleSample) -> f64 {
    let s = &sample.values;
    let n = s.len();
    let nf = n as f64;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut g_hi = g.evaluate(1.0); // g((n-k+1)/n) for k = 1
    for (k, value) in s.iter().enumerate() {
        // k is 0-based: this weight spans levels (n-k-1)/n .. (n-k)/n
        let g_lo = g.evaluate((n - k - 1) as f64 / nf);
        let term = value * (g_hi - g_lo);
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        g_hi = g_lo;
    }
    sum
}

/// Which generalized inverse an empirical quantile uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantileSide {
    Left,
    Right,
    Alpha(f64),
}

/// Step-function inverse of the empirical cdf of the sample.
pub fn empirical_quantile(sample: &OracleSample, p: f64, side: QuantileSide) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0,1), got {p}");
    let s = &sample.values;
    let n = s.len();
    let t = n as f64 * p;
    let snapped = {
        let r = t.round();
        if (t - r).abs() < 1e-9 * t.max(1.0) {
            r
        } else {
            t
        }
    };
    let left = s[(snapped.ceil() as usize).max(1).min(n) - 1];
    match side {
        QuantileSide::Left => left,
        QuantileSide::Right => s[(snapped.floor() as usize).min(n - 1)],
        QuantileSide::Alpha(alpha) => {
            let right = s[(snapped.floor() as usize).min(n - 1)];
            (1.0 - alpha) * left + alpha * right
        }
    }
}

/// The defining x-side integral
/// `rho_g[X] = -int_{-inf}^0 (1 - g(Fbar(x))) dx + int_0^inf g(Fbar(x)) dx`,
/// truncated at the tail quantiles and extended outward with geometric
/// refinement. Independent of the quantile-side representation.
pub fn xside_rho(
    g: &Distortion,
    d: &Distribution,
    cfg: &QuadratureConfig,
) -> Result<f64, RiskError> {
    cfg.validate()?;
    let eps = cfg.tail_epsilon;
    let lower = d.quantile_lower_tail(eps);
    let upper = d.quantile_upper_tail(eps);

    // split where g(Fbar(x)) is non-smooth: every distortion breakpoint
    // (jump or kink at level q) maps to x with Fbar(x) = q
    let mut splits: Vec<f64> = g
        .breakpoints()
        .iter()
        .map(|bp| {
            let p = 1.0 - bp;
            if p <= 0.0 || p >= 1.0 {
                f64::NAN
            } else {
                d.quantile_left(p)
            }
        })
        .filter(|x| x.is_finite())
        .collect();
    // probe quantiles so no panel hides the body of the law
    for p in [1e-6, 1e-3, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999] {
        splits.push(d.quantile_left(p));
    }
    splits.push(d.quantile_upper_tail(1e-6));
    match d {
        Distribution::Uniform { a, b } => splits.extend([*a, *b]),
        Distribution::Laplace { location, .. } | Distribution::Logistic { location, .. } => {
            splits.push(*location)
        }
        Distribution::Empirical { samples } if samples.len() <= 4096 => {
            splits.extend(samples.iter().copied())
        }
        _ => {}
    }

    let map_err = |e: QuadError| match e {
        QuadError::NonConvergence {
            partial,
            error_estimate,
            ..
        } => RiskError::NonConvergence {
            partial,
            error_estimate,
        },
        QuadError::Divergent { partial } => RiskError::MeasureNotFinite {
            detail: "defining integral does not contract in the tail".to_string(),
            partial,
        },
    };

    // positive piece: int_0^inf g(Fbar(x)) dx
    let mut total = 0.0;
    if upper > 0.0 {
        let f_pos = |x: f64| g.evaluate(d.sf(x));
        let body = quadrature::integrate_adaptive(
            &f_pos,
            0.0f64.max(lower.min(0.0)),
            upper,
            &splits,
            cfg.abs_tol,
            cfg.rel_tol,
            cfg.max_subdivisions,
        )
        .map_err(map_err)?;
        total += body.value;
        // geometric extension beyond the upper truncation quantile
        total += extend_tail(
            |q| d.quantile_upper_tail(q),
            |x| g.evaluate(d.sf(x)),
            eps,
            cfg,
            total,
        )
        .map_err(map_err)?;
    }

    // negative piece: -int_{-inf}^0 (1 - g(Fbar(x))) dx, written through the
    // cdf so the deep left tail keeps precision
    if lower < 0.0 {
        let f_neg = |x: f64| g.one_minus_eval_near_one(d.cdf(x));
        let body = quadrature::integrate_adaptive(
            &f_neg,
            lower,
            0.0f64.min(upper.max(0.0)),
            &splits,
            cfg.abs_tol,
            cfg.rel_tol,
            cfg.max_subdivisions,
        )
        .map_err(map_err)?;
        total -= body.value;
        let ext = extend_tail(
            |q| d.quantile_lower_tail(q),
            |x| g.one_minus_eval_near_one(d.cdf(x)),
            eps,
            cfg,
            total,
        )
        .map_err(map_err)?;
        total -= ext;
    }
    Ok(total)
}

// Integrates `f` over quantile-mapped geometric shells: between the
// quantiles at tail probabilities eps/2^k and eps/2^{k+1}, until the
// contributions stop mattering. Divergence when shells stop contracting.
fn extend_tail(
    quantile_at: impl Fn(f64) -> f64,
    f: impl Fn(f64) -> f64,
    eps: f64,
    cfg: &QuadratureConfig,
    body_value: f64,
) -> Result<f64, QuadError> {
    const MAX_LEVELS: usize = 1060;
    let mut total = 0.0f64;
    let mut q = eps;
    let mut x_near = quantile_at(q);
    let mut history = [f64::INFINITY; 5];
    let mut small_streak = 0usize;
    for level in 0..MAX_LEVELS {
        let q_next = 0.5 * q;
        if q_next < f64::MIN_POSITIVE {
            break;
        }
        let x_far = quantile_at(q_next);
        if !x_far.is_finite() {
            return Err(QuadError::Divergent {
                partial: body_value + total,
            });
        }
        let (lo, hi) = if x_far >= x_near {
            (x_near, x_far)
        } else {
            (x_far, x_near)
        };
        let (v, _, _) = quadrature::gk15(&|x| f(x), lo, hi);
        total += v;
        let scale = cfg
            .abs_tol
            .max(cfg.rel_tol * (body_value.abs() + total.abs()));
        if v.abs() <= cfg.abs_tol / 16.0 {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(total);
            }
        } else {
            small_streak = 0;
        }
        let oldest = history[level % 5];
        if level >= 48 && oldest.is_finite() && v.abs() >= 0.95 * oldest.abs() && v.abs() > scale {
            return Err(QuadError::Divergent {
                partial: body_value + total,
            });
        }
        history[level % 5] = v;
        q = q_next;
        x_near = x_far;
    }
    Ok(total)
}
