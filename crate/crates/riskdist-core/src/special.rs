//! Special-function kernel: standard normal cdf / quantile and the
//! regularized incomplete beta function with its inverse (Student-t cdf and
//! quantile are built on it).
//!
//! `erf`/`erfc`/`lgamma` come from `libm`; the inverses are implemented here
//! because every closed form downstream routes through them at tolerances
//! the usual crates do not guarantee.

use std::f64::consts::{PI, SQRT_2};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal cdf, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal survival function `1 - Phi(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

// Acklam's rational approximation of the inverse normal cdf.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse standard normal cdf.
///
/// Acklam's rational approximation refined by one Newton step on the
/// erfc-based cdf; absolute error below 1e-14 over (1e-300, 1 - 1e-16).
/// Returns `-inf` at 0 and `inf` at 1.
pub fn norm_quantile(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of [0,1]: {p}");
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let x = acklam(p);
    // One Newton step. The residual is formed against whichever tail the
    // erfc-based cdf evaluates with full relative accuracy.
    let pdf = norm_pdf(x);
    if pdf > 1e-280 {
        if p <= 0.5 {
            return x - (norm_cdf(x) - p) / pdf;
        }
        return x + (norm_sf(x) - (1.0 - p)) / pdf;
    }
    x
}

/// `ln Gamma(x)` for positive `x`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

// Continued fraction for the incomplete beta function (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

// Solve I_x(a, b) = y for y <= 0.5. Newton in log-x space (the root can sit
// at 1e-300 for extreme tails), bracketed with geometric bisection fallback.
fn beta_reg_inv_low(a: f64, b: f64, y: f64) -> f64 {
    debug_assert!(y > 0.0 && y <= 0.5);
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    // Leading-order tail behaviour I_x ~ x^a / (a B(a,b)).
    let mut x = ((y.ln() + a.ln() + ln_beta) / a).exp().clamp(1e-300, 0.75);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let f = beta_reg(a, b, x) - y;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // dI/d(ln x) = x * pdf(x); kept in logs to survive extreme roots.
        let ln_slope = a * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta;
        let step = f / ln_slope.exp();
        let mut next = if step.is_finite() && step.abs() < 500.0 {
            x * (-step).exp()
        } else {
            f64::NAN
        };
        if !next.is_finite() || next <= lo || next >= hi {
            // geometric midpoint, in logs so extreme roots cannot underflow
            next = if lo > 0.0 {
                (0.5 * (lo.ln() + hi.ln())).exp()
            } else {
                0.25 * hi
            };
        }
        if (next - x).abs() <= 1e-16 * x.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Inverse of `I_x(a, b)` in `x` for fixed `(a, b)`: log-space Newton with a
/// bisection safeguard, solved on whichever tail of the symmetry
/// `I_x(a,b) = 1 - I_{1-x}(b,a)` keeps full resolution.
pub fn beta_reg_inv(a: f64, b: f64, y: f64) -> f64 {
    assert!((0.0..=1.0).contains(&y), "probability out of [0,1]: {y}");
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    if y <= 0.5 {
        beta_reg_inv_low(a, b, y)
    } else {
        1.0 - beta_reg_inv_low(b, a, 1.0 - y)
    }
}

/// Student-t density with `nu` degrees of freedom.
pub fn student_pdf(nu: f64, x: f64) -> f64 {
    let ln = ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p();
    ln.exp()
}

/// Student-t cdf with `nu` degrees of freedom.
pub fn student_cdf(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    // x*x overflows past ~1e154; the +nu is negligible out there
    let xx = if x.abs() < 1e150 {
        nu / (nu + x * x)
    } else {
        (nu.ln() - 2.0 * x.abs().ln()).exp()
    };
    let ib = beta_reg(nu / 2.0, 0.5, xx);
    if x > 0.0 {
        1.0 - 0.5 * ib
    } else {
        0.5 * ib
    }
}

/// Lower-tail Student-t quantile: `F^{-1}(q)` for `q <= 0.5`, stable down to
/// the underflow limit of `q`.
pub fn student_quantile_lower(nu: f64, q: f64) -> f64 {
    debug_assert!((0.0..=0.5).contains(&q));
    if q == 0.0 {
        return f64::NEG_INFINITY;
    }
    if q == 0.5 {
        return 0.0;
    }
    // t^2 = nu (1-w)/w with I_w(nu/2, 1/2) = 2q; solve on the side of the
    // symmetry that keeps the small quantity exact.
    let y = 2.0 * q;
    let mut t = if y <= 0.5 {
        let w = beta_reg_inv_low(nu / 2.0, 0.5, y);
        if w == 0.0 {
            return f64::NEG_INFINITY;
        }
        if w < 1e-250 {
            // nu/w can overflow even when t is representable
            -(0.5 * (nu.ln() + (-w).ln_1p() - w.ln())).exp()
        } else {
            -(nu * (1.0 - w) / w).sqrt()
        }
    } else {
        let v = beta_reg_inv_low(0.5, nu / 2.0, 1.0 - y);
        -(nu * v / (1.0 - v)).sqrt()
    };
    // One Newton polish against the cdf's own tail branch.
    let pdf = student_pdf(nu, t);
    if pdf > 1e-280 && t.is_finite() {
        t -= (student_cdf(nu, t) - q) / pdf;
    }
    t
}

/// Student-t quantile with `nu` degrees of freedom.
pub fn student_quantile(nu: f64, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of [0,1]: {p}");
    if p <= 0.5 {
        student_quantile_lower(nu, p)
    } else {
        -student_quantile_lower(nu, 1.0 - p)
    }
}
