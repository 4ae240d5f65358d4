//! Adaptive Gauss-Kronrod quadrature with panel splitting at known
//! non-smooth points, plus geometric refinement toward open endpoints whose
//! integrands may be unbounded (integrably or not).

use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature did not converge after {subdivisions} subdivisions (partial estimate {partial}, error {error_estimate})")]
    NonConvergence {
        partial: f64,
        error_estimate: f64,
        subdivisions: usize,
    },
    #[error("integral diverges at an open endpoint (partial estimate {partial})")]
    Divergent { partial: f64 },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct QuadOutcome {
    pub value: f64,
    pub error_estimate: f64,
    pub subdivisions: usize,
    /// Effective lower truncation of an open-endpoint integral, when the
    /// tail loop refined past the nominal cut.
    pub effective_lo: f64,
    /// Effective distance-to-upper-endpoint truncation, same convention.
    pub effective_hi: f64,
}

// 7-15 Gauss-Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// One GK15 panel: returns (value, error estimate, integral of |f|).
pub fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_gauss = fc * WG[3];
    let mut res_kronrod = fc * WGK[7];
    let mut res_abs = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let sum = f1 + f2;
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * sum;
        }
        res_kronrod += WGK[j] * sum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
    }
    let err = ((res_kronrod - res_gauss) * half).abs();
    (res_kronrod * half, err, res_abs * half.abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

// worst-error-first ordering; ties broken by position for determinism
impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.a == other.a
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error
            .total_cmp(&other.error)
            .then(other.a.total_cmp(&self.a))
    }
}

/// Adaptive GK15 on `[a, b]`, seeded with splits at `split_points`
/// (points outside `(a, b)` are ignored). Deterministic: the final value is
/// a left-to-right compensated sum over panels.
pub fn integrate_adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    split_points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadOutcome, QuadError> {
    if a == b {
        return Ok(QuadOutcome::default());
    }
    let mut edges: Vec<f64> = vec![a];
    edges.extend(split_points.iter().copied().filter(|x| *x > a && *x < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap: BinaryHeap<Panel> = BinaryHeap::new();
    let mut subdivisions = 0usize;
    for w in edges.windows(2) {
        let (v, e, _) = gk15(f, w[0], w[1]);
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
        subdivisions += 1;
    }

    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let total_err: f64 = heap.iter().map(|p| p.error).sum();
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(finish(heap, total_err, subdivisions));
        }
        if subdivisions >= max_subdivisions {
            return Err(QuadError::NonConvergence {
                partial: total,
                error_estimate: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at f64 resolution; freeze it
            let mut frozen = worst;
            frozen.error = 0.0;
            heap.push(frozen);
            continue;
        }
        let (v1, e1, _) = gk15(f, worst.a, mid);
        let (v2, e2, _) = gk15(f, mid, worst.b);
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
}

fn finish(heap: BinaryHeap<Panel>, error: f64, subdivisions: usize) -> QuadOutcome {
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    // compensated left-to-right sum
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for p in &panels {
        let y = p.value - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    QuadOutcome {
        value: sum,
        error_estimate: error,
        subdivisions,
        effective_lo: 0.0,
        effective_hi: 0.0,
    }
}

/// Integrates `h` over `(lo, hi)` inside the unit interval, where the
/// integrand may blow up (integrably) at either open endpoint.
///
/// The core `[max(lo, eps), min(hi, 1 - eps)]` runs through the adaptive
/// rule; toward an open endpoint the integral is extended over geometric
/// panels (`eps/2^k` from below; distance `eps/2^k` from above) until their
/// contributions are negligible. Non-contracting panel sums are reported as
/// divergence.
///
/// `h_lower(q)` evaluates the integrand at small `q`; `h_upper(delta)`
/// evaluates it at `1 - delta` without forming `1 - delta`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_open_unit(
    h: &dyn Fn(f64) -> f64,
    h_lower: &dyn Fn(f64) -> f64,
    h_upper: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    open_lo: bool,
    open_hi: bool,
    split_points: &[f64],
    eps: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadOutcome, QuadError> {
    debug_assert!(lo < hi && eps > 0.0);
    let core_lo = if open_lo { lo.max(eps) } else { lo };
    let core_hi = if open_hi { hi.min(1.0 - eps) } else { hi };
    let mut out = if core_lo < core_hi {
        integrate_adaptive(h, core_lo, core_hi, split_points, abs_tol, rel_tol, max_subdivisions)?
    } else {
        QuadOutcome::default()
    };
    out.effective_lo = if open_lo { core_lo } else { 0.0 };
    out.effective_hi = if open_hi { 1.0 - core_hi } else { 0.0 };

    if open_lo && core_lo > lo {
        let (v, e, eff) = refine_tail(h_lower, core_lo, abs_tol, rel_tol, out.value)?;
        out.value += v;
        out.error_estimate += e;
        out.effective_lo = eff;
    }
    if open_hi && core_hi < hi {
        let (v, e, eff) = refine_tail(h_upper, 1.0 - core_hi, abs_tol, rel_tol, out.value)?;
        out.value += v;
        out.error_estimate += e;
        out.effective_hi = eff;
    }
    Ok(out)
}

// Integrate sum of panels [cut/2^{k+1}, cut/2^k] of `f` (a function of the
// distance to the open endpoint), until contributions stop mattering.
// Returns (value, error estimate, effective cut reached).
fn refine_tail(
    f: &dyn Fn(f64) -> f64,
    cut: f64,
    abs_tol: f64,
    rel_tol: f64,
    body_value: f64,
) -> Result<(f64, f64, f64), QuadError> {
    const MAX_LEVELS: usize = 1060; // down to the subnormal floor
    let mut total = 0.0f64;
    let mut err = 0.0f64;
    let mut hi = cut;
    let mut history: [f64; 5] = [f64::INFINITY; 5];
    let mut small_streak = 0usize;
    for level in 0..MAX_LEVELS {
        let lo = 0.5 * hi;
        if lo < f64::MIN_POSITIVE {
            break;
        }
        let (v, e, _) = gk15(f, lo, hi);
        total += v;
        err += e;
        // stop on the absolute tolerance: the downstream truncation-bound
        // check is absolute, and the remaining mass is of the order of the
        // last panel
        let scale = abs_tol.max(rel_tol * (body_value.abs() + total.abs()));
        if v.abs() <= abs_tol / 16.0 {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok((total, err, lo));
            }
        } else {
            small_streak = 0;
        }
        // divergence: contributions stopped contracting well past the cut
        let oldest = history[level % 5];
        if level >= 48 && oldest.is_finite() && v.abs() >= 0.95 * oldest.abs() && v.abs() > scale {
            return Err(QuadError::Divergent {
                partial: body_value + total,
            });
        }
        history[level % 5] = v;
        hi = lo;
    }
    Ok((total, err, hi))
}
