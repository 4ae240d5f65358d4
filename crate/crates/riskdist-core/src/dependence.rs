//! Comonotonic and counter-monotonic structures: the aggregate quantile
//! along the common driver, numeric dispersive-order certificates, and the
//! pointwise bounds of a Fréchet class.

use thiserror::Error;

use crate::distortion::Distortion;
use crate::distributions::Distribution;
use crate::risk_measures::{rho, QuadratureConfig, RiskError};

#[derive(Debug, Error)]
pub enum DependenceError {
    #[error("an aggregate position needs at least one leg")]
    EmptyPosition,
    #[error("monotonicity of the aggregate quantile not established: {reason}")]
    MonotonicityNotEstablished { reason: String },
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// Whether a leg is driven by the common uniform `U` or by `1 - U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Comonotone,
    Counter,
}

/// A portfolio of marginals, each tagged with its driver direction.
#[derive(Debug, Clone)]
pub struct AggregatePosition {
    legs: Vec<(Distribution, Direction)>,
}

impl AggregatePosition {
    pub fn new(legs: Vec<(Distribution, Direction)>) -> Result<Self, DependenceError> {
        if legs.is_empty() {
            return Err(DependenceError::EmptyPosition);
        }
        Ok(Self { legs })
    }

    /// The classic two-leg counter-monotonic pair: `d1` driven by `U`,
    /// `d2` by `1 - U`.
    pub fn counter_pair(d1: Distribution, d2: Distribution) -> Self {
        Self {
            legs: vec![(d1, Direction::Comonotone), (d2, Direction::Counter)],
        }
    }

    pub fn comonotonic(legs: Vec<Distribution>) -> Result<Self, DependenceError> {
        Self::new(legs.into_iter().map(|d| (d, Direction::Comonotone)).collect())
    }

    pub fn legs(&self) -> &[(Distribution, Direction)] {
        &self.legs
    }

    pub fn describe(&self) -> String {
        self.legs
            .iter()
            .map(|(d, dir)| match dir {
                Direction::Comonotone => format!("+{d}"),
                Direction::Counter => format!("-{d}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Aggregate quantile along the driver:
/// sum of `F_i^{-1}(u)` over comonotone legs plus `F_i^{-1}(1-u)` over
/// counter legs.
pub fn aggregate_quantile(pos: &AggregatePosition, u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0, "driver level must lie in (0,1)");
    pos.legs
        .iter()
        .map(|(d, dir)| match dir {
            Direction::Comonotone => d.quantile_left(u),
            Direction::Counter => d.quantile_upper_tail(u),
        })
        .sum()
}

/// Verdict of a dispersive-order comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersiveOrdering {
    XLeY,
    YLeX,
    Incomparable,
    Equal,
}

impl DispersiveOrdering {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::XLeY => "X <=disp Y",
            Self::YLeX => "Y <=disp X",
            Self::Incomparable => "incomparable",
            Self::Equal => "equal",
        }
    }
}

/// Outcome of a grid (or analytic) dispersive-order check. `grid_size == 0`
/// marks an analytic short-circuit; `clamped` records a grid shrunk to
/// `[1e-6, 1 - 1e-6]` to dodge quantile overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersiveVerdict {
    pub ordering: DispersiveOrdering,
    pub max_violation: f64,
    pub grid_size: usize,
    pub clamped: bool,
}

const DISP_TOL: f64 = 1e-9;

/// Checks `X <=disp Y` (quantile spreads of X never exceed those of Y) on a
/// grid of `grid_n` interior points; a grid certificate, not a proof.
///
/// Normal-normal and Student-Student pairs short-circuit analytically on
/// their parameters; `check_dispersive_on_grid` always runs the grid.
pub fn check_dispersive(dx: &Distribution, dy: &Distribution, grid_n: usize) -> DispersiveVerdict {
    use Distribution::*;
    let analytic = |ordering| DispersiveVerdict {
        ordering,
        max_violation: 0.0,
        grid_size: 0,
        clamped: false,
    };
    match (dx, dy) {
        (Normal { sigma: sx, .. }, Normal { sigma: sy, .. }) => {
            if (sx - sy).abs() <= 1e-12 {
                analytic(DispersiveOrdering::Equal)
            } else if sx < sy {
                analytic(DispersiveOrdering::XLeY)
            } else {
                analytic(DispersiveOrdering::YLeX)
            }
        }
        // lower degrees of freedom spread wider
        (StudentT { nu: nx }, StudentT { nu: ny }) => {
            if (nx - ny).abs() <= 1e-12 {
                analytic(DispersiveOrdering::Equal)
            } else if nx > ny {
                analytic(DispersiveOrdering::XLeY)
            } else {
                analytic(DispersiveOrdering::YLeX)
            }
        }
        _ => check_dispersive_on_grid(dx, dy, grid_n),
    }
}

/// The grid certificate itself: evaluates
/// `delta(u) = F_Y^{-1}(u) - F_X^{-1}(u)` on `u_k = k/(grid_n+1)` and
/// classifies its monotonicity within tolerance `1e-9`.
pub fn check_dispersive_on_grid(
    dx: &Distribution,
    dy: &Distribution,
    grid_n: usize,
) -> DispersiveVerdict {
    assert!(grid_n >= 100, "dispersive grid needs at least 100 points");
    let denom = (grid_n + 1) as f64;
    let clamped = 1.0 / denom < 1e-6;
    let (lo, hi) = if clamped { (1e-6, 1.0 - 1e-6) } else { (0.0, 1.0) };

    let mut max_decrease = 0.0f64; // violation of "delta non-decreasing"
    let mut max_increase = 0.0f64; // violation of "delta non-increasing"
    let mut min_delta = f64::INFINITY;
    let mut max_delta = f64::NEG_INFINITY;
    let mut prev = f64::NAN;
    for k in 1..=grid_n {
        let u = lo + (hi - lo) * k as f64 / denom;
        let delta = dy.quantile_left(u) - dx.quantile_left(u);
        min_delta = min_delta.min(delta);
        max_delta = max_delta.max(delta);
        if !prev.is_nan() {
            max_decrease = max_decrease.max(prev - delta);
            max_increase = max_increase.max(delta - prev);
        }
        prev = delta;
    }

    let (ordering, max_violation) = if max_delta - min_delta <= DISP_TOL {
        (DispersiveOrdering::Equal, max_delta - min_delta)
    } else if max_decrease <= DISP_TOL {
        (DispersiveOrdering::XLeY, max_decrease)
    } else if max_increase <= DISP_TOL {
        (DispersiveOrdering::YLeX, max_increase)
    } else {
        // distance to the nearest conclusive verdict
        (DispersiveOrdering::Incomparable, max_decrease.min(max_increase))
    };
    DispersiveVerdict {
        ordering,
        max_violation,
        grid_size: grid_n,
        clamped,
    }
}

/// Fréchet upper bound `W_n`: the minimum of the marginal cdf values.
pub fn frechet_upper(cdf_values: &[f64]) -> f64 {
    debug_assert!(cdf_values.iter().all(|v| (0.0..=1.0).contains(v)));
    cdf_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Fréchet lower bound `M_n = max(sum F_i - n + 1, 0)`.
pub fn frechet_lower(cdf_values: &[f64]) -> f64 {
    debug_assert!(cdf_values.iter().all(|v| (0.0..=1.0).contains(v)));
    let n = cdf_values.len() as f64;
    (cdf_values.iter().sum::<f64>() - n + 1.0).max(0.0)
}

/// Comonotonic additivity: `rho_g` of a comonotonic sum is the sum of the
/// legs' measures.
pub fn comonotonic_rho(
    g: &Distortion,
    legs: &[Distribution],
    cfg: &QuadratureConfig,
) -> Result<f64, RiskError> {
    let mut total = 0.0;
    for d in legs {
        total += rho(g, d, cfg)?.value;
    }
    Ok(total)
}

/// Left quantile of a two-leg counter-monotonic sum at `p`, valid when the
/// aggregate quantile is certified non-decreasing and continuous.
///
/// The certificate requires strictly increasing marginals, a symmetric
/// counter leg, and the counter leg dispersively no larger than the
/// comonotone leg; otherwise the caller must fall back to the oracle or the
/// root-set machinery.
pub fn counter_sum_quantile(pos: &AggregatePosition, p: f64) -> Result<f64, DependenceError> {
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0,1), got {p}");
    let legs = pos.legs();
    let pair: Option<(&Distribution, &Distribution)> = match legs {
        [(a, Direction::Comonotone), (b, Direction::Counter)] => Some((a, b)),
        [(b, Direction::Counter), (a, Direction::Comonotone)] => Some((a, b)),
        _ => None,
    };
    let (com, counter) = pair.ok_or_else(|| DependenceError::MonotonicityNotEstablished {
        reason: "need exactly one comonotone and one counter leg".to_string(),
    })?;

    let fail = |reason: &str| DependenceError::MonotonicityNotEstablished {
        reason: reason.to_string(),
    };
    if !com.strictly_increasing_on_support() || !counter.strictly_increasing_on_support() {
        return Err(fail("marginal cdf not continuous strictly increasing"));
    }
    if !counter.symmetry_info().is_symmetric {
        return Err(fail("counter leg not symmetric"));
    }
    let verdict = check_dispersive(counter, com, 10_001);
    match verdict.ordering {
        DispersiveOrdering::XLeY | DispersiveOrdering::Equal => Ok(aggregate_quantile(pos, p)),
        other => Err(fail(&format!(
            "dispersive certificate gave {} (max violation {:.3e})",
            other.as_str(),
            verdict.max_violation
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_abs_diff_eq;

    const PHI_INV_95: f64 = 1.6448536269514727;

    fn n(mu: f64, sigma: f64) -> Distribution {
        Distribution::normal(mu, sigma).unwrap()
    }

    #[test]
    fn aggregate_quantile_examples() {
        let hedge = AggregatePosition::counter_pair(n(0.0, 1.0), n(0.0, 1.0));
        for u in [0.1, 0.5, 0.93] {
            assert_abs_diff_eq!(aggregate_quantile(&hedge, u), 0.0, epsilon = 1e-12);
        }
        let pos = AggregatePosition::counter_pair(n(0.0, 2.0), n(0.0, 1.0));
        assert_abs_diff_eq!(aggregate_quantile(&pos, 0.95), PHI_INV_95, epsilon = 1e-12);
        let single = AggregatePosition::comonotonic(vec![
            Distribution::lognormal(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        assert_abs_diff_eq!(aggregate_quantile(&single, 0.5), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn dispersive_paper_orderings() {
        use DispersiveOrdering::*;
        let sq2 = std::f64::consts::SQRT_2;
        // analytic short-circuits
        assert_eq!(check_dispersive(&n(0.0, 1.0), &n(0.0, 2.0), 10_001).ordering, XLeY);
        assert_eq!(
            check_dispersive(
                &Distribution::student_t(5.0).unwrap(),
                &Distribution::student_t(2.0).unwrap(),
                10_001
            )
            .ordering,
            XLeY
        );
        // grid certificates for the cross-family pairs
        let cases = [
            (n(0.0, 1.0), Distribution::laplace(0.0, sq2).unwrap()),
            (n(0.0, 1.0), Distribution::logistic(0.0, 1.0).unwrap()),
            (n(0.0, 1.0), Distribution::student_t(2.0).unwrap()),
            (n(0.0, 1.0), Distribution::student_t(5.0).unwrap()),
        ];
        for (dx, dy) in cases {
            let v = check_dispersive_on_grid(&dx, &dy, 10_001);
            assert_eq!(v.ordering, XLeY, "{dx} vs {dy}: {v:?}");
            assert!(v.max_violation <= 1e-9);
        }
        // grid agrees with the analytic rule on normal pairs
        let v = check_dispersive_on_grid(&n(0.0, 1.0), &n(0.0, 2.0), 10_001);
        assert_eq!(v.ordering, XLeY);
        assert_eq!(v.grid_size, 10_001);
    }

    #[test]
    fn dispersive_shift_invariance_and_equality() {
        use DispersiveOrdering::*;
        for c in [-3.0, 0.0, 7.5] {
            let v = check_dispersive(&n(0.0, 1.0), &n(c, 1.0), 10_001);
            assert_eq!(v.ordering, Equal);
            let v = check_dispersive_on_grid(
                &Distribution::laplace(0.0, 1.0).unwrap(),
                &Distribution::laplace(c, 1.0).unwrap(),
                10_001,
            );
            assert_eq!(v.ordering, Equal);
        }
        // incomparable: crossing spreads (uniform vs normal of similar scale)
        let v = check_dispersive_on_grid(
            &Distribution::uniform(0.0, 1.0).unwrap(),
            &n(0.0, 0.25),
            10_001,
        );
        assert_eq!(v.ordering, Incomparable);
        assert!(v.max_violation > 0.0);
    }

    #[test]
    fn frechet_bounds() {
        assert_abs_diff_eq!(frechet_upper(&[0.3, 0.7]), 0.3, epsilon = 0.0);
        assert_abs_diff_eq!(frechet_upper(&[1.0, 1.0, 1.0]), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(frechet_upper(&[0.5, 0.5]), 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(frechet_lower(&[0.3, 0.7]), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(frechet_lower(&[0.8, 0.9]), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(frechet_lower(&[0.5, 0.5, 0.5]), 0.0, epsilon = 0.0);
    }

    #[test]
    fn frechet_sandwich_on_counter_grid() {
        // empirical copula of the counter-monotonic construction sits
        // between the bounds pointwise on a 50x50 grid
        let n_grid = 50usize;
        let m = 2000usize;
        let d1 = n(0.0, 1.0);
        let d2 = Distribution::logistic(0.0, 1.0).unwrap();
        // counter-monotonic sample (u, 1-u)
        let us: Vec<f64> = (1..=m).map(|k| (k as f64 - 0.5) / m as f64).collect();
        for i in 1..n_grid {
            for j in 1..n_grid {
                let x = d1.quantile_left(i as f64 / n_grid as f64);
                let y = d2.quantile_left(j as f64 / n_grid as f64);
                let joint = us
                    .iter()
                    .filter(|&&u| d1.quantile_left(u) <= x && d2.quantile_upper_tail(u) <= y)
                    .count() as f64
                    / m as f64;
                let (fx, fy) = (d1.cdf(x), d2.cdf(y));
                let tol = 2.0 / n_grid as f64;
                assert!(joint <= frechet_upper(&[fx, fy]) + tol);
                assert!(joint >= frechet_lower(&[fx, fy]) - tol);
            }
        }
    }

    #[test]
    fn comonotonic_rho_examples() {
        let cfg = QuadratureConfig::default();
        let legs = [n(1.0, 1.0), n(2.0, 3.0)];
        assert_abs_diff_eq!(
            comonotonic_rho(&Distortion::Identity, &legs, &cfg).unwrap(),
            3.0,
            epsilon = 1e-8
        );
        // VaR of a comonotonic normal sum: (mu1+mu2) + (s1+s2) PhiInv(p)
        let g = Distortion::var_indicator(0.95).unwrap();
        assert_abs_diff_eq!(
            comonotonic_rho(&g, &legs, &cfg).unwrap(),
            3.0 + 4.0 * PHI_INV_95,
            epsilon = 1e-10
        );
        let g = Distortion::tvar_cap(0.9).unwrap();
        let legs = [
            Distribution::uniform(0.0, 1.0).unwrap(),
            Distribution::uniform(0.0, 1.0).unwrap(),
        ];
        assert_abs_diff_eq!(comonotonic_rho(&g, &legs, &cfg).unwrap(), 1.9, epsilon = 1e-7);
    }

    #[test]
    fn comonotonic_additivity_vs_oracle() {
        let cfg = QuadratureConfig::default();
        let leg_sets: Vec<Vec<Distribution>> = vec![
            vec![Distribution::uniform(0.0, 1.0).unwrap(), n(1.0, 0.5)],
            vec![
                Distribution::lognormal(0.0, 0.5).unwrap(),
                Distribution::uniform(0.0, 2.0).unwrap(),
            ],
        ];
        let distortions = [
            Distortion::Identity,
            Distortion::var_indicator(0.9).unwrap(),
            Distortion::tvar_cap(0.9).unwrap(),
            Distortion::wang_transform(0.5).unwrap(),
        ];
        for legs in &leg_sets {
            let pos = AggregatePosition::comonotonic(legs.clone()).unwrap();
            let sample = oracle::grid_sample(&pos, 1 << 22);
            for g in &distortions {
                let lhs = comonotonic_rho(g, legs, &cfg).unwrap();
                let rhs = oracle::empirical_rho(g, &sample);
                let tol = (1e-6 * lhs.abs()).max(1e-6);
                assert!(
                    (lhs - rhs).abs() <= tol,
                    "{g}: {lhs} vs oracle {rhs} (tol {tol:.1e})"
                );
            }
        }
    }

    #[test]
    fn counter_sum_quantile_certified() {
        // sigma1 > sigma2: monotone aggregate
        let pos = AggregatePosition::counter_pair(n(0.0, 2.0), n(0.0, 1.0));
        assert_abs_diff_eq!(
            counter_sum_quantile(&pos, 0.95).unwrap(),
            PHI_INV_95,
            epsilon = 1e-12
        );
        // identical symmetric pair: perfect hedge at 2 * center
        let pos = AggregatePosition::counter_pair(n(1.5, 1.0), n(1.5, 1.0));
        for p in [0.2, 0.5, 0.77] {
            assert_abs_diff_eq!(counter_sum_quantile(&pos, p).unwrap(), 3.0, epsilon = 1e-12);
        }
        // t2 comonotone vs normal counter (normal <=disp student certified on grid)
        let pos = AggregatePosition::counter_pair(Distribution::student_t(2.0).unwrap(), n(0.0, 1.0));
        let want = crate::special::student_quantile(2.0, 0.99) + crate::special::norm_quantile(0.01);
        assert_abs_diff_eq!(counter_sum_quantile(&pos, 0.99).unwrap(), want, epsilon = 1e-10);
    }

    #[test]
    fn counter_sum_quantile_rejections() {
        // wrong orientation: aggregate would be decreasing
        let pos = AggregatePosition::counter_pair(n(0.0, 1.0), n(0.0, 2.0));
        assert!(matches!(
            counter_sum_quantile(&pos, 0.9),
            Err(DependenceError::MonotonicityNotEstablished { .. })
        ));
        // asymmetric counter leg
        let pos = AggregatePosition::counter_pair(
            n(0.0, 2.0),
            Distribution::lognormal(0.0, 0.2).unwrap(),
        );
        assert!(counter_sum_quantile(&pos, 0.9).is_err());
        // empirical marginal: not strictly increasing
        let pos = AggregatePosition::counter_pair(
            n(0.0, 2.0),
            Distribution::empirical(vec![-1.0, 0.0, 1.0]).unwrap(),
        );
        assert!(counter_sum_quantile(&pos, 0.9).is_err());
    }

    #[test]
    fn certified_aggregate_is_monotone_on_grid() {
        let pairs = [
            (n(0.0, 2.0), n(0.0, 1.0)),
            (Distribution::student_t(2.0).unwrap(), n(0.0, 1.0)),
            (Distribution::laplace(0.0, std::f64::consts::SQRT_2).unwrap(), n(0.0, 1.0)),
        ];
        for (big, small) in pairs {
            let v = check_dispersive(&small, &big, 10_001);
            assert!(matches!(
                v.ordering,
                DispersiveOrdering::XLeY | DispersiveOrdering::Equal
            ));
            let pos = AggregatePosition::counter_pair(big, small);
            let mut prev = f64::NEG_INFINITY;
            for k in 1..=1000 {
                let u = k as f64 / 1001.0;
                let q = aggregate_quantile(&pos, u);
                assert!(q >= prev - 1e-9, "{}: not monotone at u={u}", pos.describe());
                prev = q;
            }
        }
    }

    #[test]
    fn empty_position_rejected() {
        assert!(matches!(
            AggregatePosition::new(vec![]),
            Err(DependenceError::EmptyPosition)
        ));
    }

    #[test]
    fn oversized_grid_is_clamped() {
        // grids finer than 1e-6 at the edge shrink to [1e-6, 1-1e-6]
        let v = check_dispersive_on_grid(
            &n(0.0, 1.0),
            &Distribution::logistic(0.0, 1.0).unwrap(),
            2_000_000,
        );
        assert!(v.clamped);
        assert_eq!(v.ordering, DispersiveOrdering::XLeY);
        let v = check_dispersive_on_grid(&n(0.0, 1.0), &n(0.0, 2.0), 10_001);
        assert!(!v.clamped);
    }
}
