//! Distortion functions as algebraic objects: the closed-form family, duals,
//! mixtures, jump/continuous decomposition, and the left-/right-continuous
//! split that drives the integral representations.

use std::fmt;

use thiserror::Error;

use crate::special;

#[derive(Debug, Error)]
pub enum DistortionError {
    #[error("invalid parameter for {kind}: {message}")]
    InvalidParameter { kind: &'static str, message: String },
    #[error("mixture weights must be non-negative and sum to 1 (got {left} + {right})")]
    BadMixtureWeights { left: f64, right: f64 },
    #[error("unrecognized token `{token}` in distortion spec `{spec}`")]
    Parse { token: String, spec: String },
}

/// A non-decreasing map `[0,1] -> [0,1]` with `g(0) = 0`, `g(1) = 1`.
///
/// Only this closed family is supported; jump detection and the
/// left/right-continuous split are ill-posed for arbitrary monotone
/// functions, and nothing downstream needs more.
#[derive(Debug, Clone, PartialEq)]
pub enum Distortion {
    /// `g(q) = q`, the expectation.
    Identity,
    /// `g(q) = 1(q > 1-p)`: the VaR distortion at level `p`.
    VarIndicator { p: f64 },
    /// `g(q) = min(q / (1-p), 1)`: the TVaR distortion at level `p`.
    TvarCap { p: f64 },
    /// `g(q) = Phi(Phi^-1(q) + Phi^-1(p))`: the Wang Transform at level `p`.
    WangTransform { p: f64 },
    /// Piecewise-linear interpolation of `(q, g(q))` knots. A duplicated
    /// abscissa encodes a jump; the value at the jump is the lower knot,
    /// making the function left-continuous there.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    Dual(Box<Distortion>),
    Mixture {
        left_weight: f64,
        left: Box<Distortion>,
        right_weight: f64,
        right: Box<Distortion>,
    },
}

/// One-sided continuity classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuityClass {
    Continuous,
    LeftContinuous,
    RightContinuous,
    Mixed,
}

/// An atom of a distortion function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub location: f64,
    pub left_limit: f64,
    pub right_limit: f64,
    /// `g` evaluated at the location itself.
    pub value: f64,
}

impl Jump {
    pub fn height(&self) -> f64 {
        self.right_limit - self.left_limit
    }
}

/// Atoms plus the continuous remainder (the distortion minus its jumps).
#[derive(Debug, Clone)]
pub struct JumpSet {
    pub jumps: Vec<Jump>,
    base: Distortion,
}

impl JumpSet {
    /// The continuous remainder at `q`: `g(q)` minus the accumulated jumps.
    pub fn continuous_part(&self, q: f64) -> f64 {
        let mut acc = self.base.evaluate(q);
        for j in &self.jumps {
            if q > j.location {
                acc -= j.height();
            } else if q == j.location {
                acc -= j.value - j.left_limit;
            }
        }
        acc
    }

    /// Total mass carried by the atoms.
    pub fn jump_mass(&self) -> f64 {
        self.jumps.iter().map(Jump::height).sum()
    }
}

impl Distortion {
    pub fn var_indicator(p: f64) -> Result<Self, DistortionError> {
        check_level("var", p)?;
        Ok(Self::VarIndicator { p })
    }

    pub fn tvar_cap(p: f64) -> Result<Self, DistortionError> {
        check_level("tvar", p)?;
        Ok(Self::TvarCap { p })
    }

    pub fn wang_transform(p: f64) -> Result<Self, DistortionError> {
        check_level("wang", p)?;
        Ok(Self::WangTransform { p })
    }

    /// Knots must be sorted in `q`, start at `(0,0)`, end at `(1,1)`, be
    /// non-decreasing in value, and repeat an abscissa at most twice.
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self, DistortionError> {
        let bad = |message: &str| DistortionError::InvalidParameter {
            kind: "pwl",
            message: message.to_string(),
        };
        if knots.len() < 2 {
            return Err(bad("need at least two knots"));
        }
        if knots.first() != Some(&(0.0, 0.0)) || knots.last() != Some(&(1.0, 1.0)) {
            return Err(bad("knots must start at (0,0) and end at (1,1)"));
        }
        for w in knots.windows(2) {
            if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
                return Err(bad("knots must be non-decreasing in q and value"));
            }
        }
        for w in knots.windows(3) {
            if w[0].0 == w[2].0 {
                return Err(bad("an abscissa may repeat at most twice"));
            }
        }
        Ok(Self::PiecewiseLinear { knots })
    }

    pub fn dual_of(inner: Distortion) -> Self {
        Self::Dual(Box::new(inner))
    }

    pub fn mixture(
        left_weight: f64,
        left: Distortion,
        right_weight: f64,
        right: Distortion,
    ) -> Result<Self, DistortionError> {
        check_weights(left_weight, right_weight)?;
        Ok(Self::Mixture {
            left_weight,
            left: Box::new(left),
            right_weight,
            right: Box::new(right),
        })
    }

    /// Evaluates `g(q)` for `q` in `[0, 1]`.
    pub fn evaluate(&self, q: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&q), "q out of [0,1]: {q}");
        match self {
            Self::Identity => q,
            Self::VarIndicator { p } => {
                if q > 1.0 - p {
                    1.0
                } else {
                    0.0
                }
            }
            Self::TvarCap { p } => (q / (1.0 - p)).min(1.0),
            Self::WangTransform { p } => {
                if q <= 0.0 {
                    0.0
                } else if q >= 1.0 {
                    1.0
                } else {
                    special::norm_cdf(special::norm_quantile(q) + special::norm_quantile(*p))
                }
            }
            Self::PiecewiseLinear { knots } => pwl_eval(knots, q),
            Self::Dual(inner) => 1.0 - inner.evaluate(1.0 - q),
            Self::Mixture {
                left_weight,
                left,
                right_weight,
                right,
            } => left_weight * left.evaluate(q) + right_weight * right.evaluate(q),
        }
    }

    /// `1 - g(1 - delta)` evaluated without forming `1 - delta`, so the
    /// upper-tail mass stays accurate for tiny `delta`.
    pub fn one_minus_eval_near_one(&self, delta: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&delta));
        match self {
            Self::Identity => delta,
            Self::VarIndicator { p } => {
                if delta < *p {
                    0.0
                } else {
                    1.0
                }
            }
            Self::TvarCap { p } => {
                if delta <= *p {
                    0.0
                } else {
                    ((delta - p) / (1.0 - p)).min(1.0)
                }
            }
            Self::WangTransform { p } => {
                if delta <= 0.0 {
                    0.0
                } else if delta >= 1.0 {
                    1.0
                } else {
                    // 1 - Phi(Phi^-1(1-d) + c) = Phi(Phi^-1(d) - c)
                    special::norm_cdf(special::norm_quantile(delta) - special::norm_quantile(*p))
                }
            }
            Self::PiecewiseLinear { knots } => {
                // bounded slope at the top segment
                let n = knots.len();
                let (q0, v0) = knots[n - 2];
                if delta <= 1.0 - q0 {
                    let slope = (1.0 - v0) / (1.0 - q0);
                    slope * delta
                } else {
                    1.0 - self.evaluate(1.0 - delta)
                }
            }
            Self::Dual(inner) => inner.evaluate(delta),
            Self::Mixture {
                left_weight,
                left,
                right_weight,
                right,
            } => {
                left_weight * left.one_minus_eval_near_one(delta)
                    + right_weight * right.one_minus_eval_near_one(delta)
            }
        }
    }

    /// The dual distortion `q -> 1 - g(1 - q)`.
    pub fn dual(&self) -> Distortion {
        match self {
            Self::Dual(inner) => (**inner).clone(),
            other => Self::Dual(Box::new(other.clone())),
        }
    }

    /// One-sided continuity of the function.
    pub fn continuity_class(&self) -> ContinuityClass {
        use ContinuityClass::*;
        match self {
            Self::Identity | Self::TvarCap { .. } | Self::WangTransform { .. } => Continuous,
            Self::VarIndicator { .. } => LeftContinuous,
            Self::PiecewiseLinear { knots } => {
                if knots.windows(2).any(|w| w[0].0 == w[1].0) {
                    LeftContinuous
                } else {
                    Continuous
                }
            }
            Self::Dual(inner) => match inner.continuity_class() {
                Continuous => Continuous,
                LeftContinuous => RightContinuous,
                RightContinuous => LeftContinuous,
                Mixed => Mixed,
            },
            Self::Mixture {
                left_weight,
                left,
                right_weight,
                right,
            } => {
                if *left_weight == 0.0 {
                    return right.continuity_class();
                }
                if *right_weight == 0.0 {
                    return left.continuity_class();
                }
                match (left.continuity_class(), right.continuity_class()) {
                    (a, b) if a == b => a,
                    (Continuous, side) | (side, Continuous) => side,
                    _ => Mixed,
                }
            }
        }
    }

    /// Splits `g = c_l g_l + c_r g_r` with `g_l` left-continuous and `g_r`
    /// right-continuous. Degenerate sides carry weight 0 and the identity.
    pub fn decompose(&self) -> Result<(f64, Distortion, f64, Distortion), DistortionError> {
        match self {
            Self::Mixture {
                left_weight,
                left,
                right_weight,
                right,
            } => {
                check_weights(*left_weight, *right_weight)?;
                let (all, alr) = (left.decompose()?, right.decompose()?);
                let (cl1, gl1, cr1, gr1) = all;
                let (cl2, gl2, cr2, gr2) = alr;
                let cl = left_weight * cl1 + right_weight * cl2;
                let cr = left_weight * cr1 + right_weight * cr2;
                let gl = combine(left_weight * cl1, gl1, right_weight * cl2, gl2, cl)?;
                let gr = combine(left_weight * cr1, gr1, right_weight * cr2, gr2, cr)?;
                Ok((cl, gl, cr, gr))
            }
            Self::Dual(inner) => {
                if let Self::Mixture { .. } = **inner {
                    // dual distributes over the mixture and swaps the sides
                    let (cl, gl, cr, gr) = inner.decompose()?;
                    let new_left = if cr > 0.0 { gr.dual() } else { Self::Identity };
                    let new_right = if cl > 0.0 { gl.dual() } else { Self::Identity };
                    Ok((cr, new_left, cl, new_right))
                } else {
                    Ok(split_by_class(self, self.continuity_class()))
                }
            }
            other => Ok(split_by_class(other, other.continuity_class())),
        }
    }

    /// Atoms of the distortion; heights at or below `tol` are merged into
    /// the continuous part. Default `tol` used elsewhere is `1e-12`.
    pub fn jump_set(&self, tol: f64) -> JumpSet {
        assert!(tol > 0.0, "tolerance must be positive");
        let mut jumps = self.raw_jumps();
        jumps.retain(|j| j.height() > tol);
        jumps.sort_by(|a, b| a.location.total_cmp(&b.location));
        // merge atoms that landed on the same location
        let mut merged: Vec<Jump> = Vec::with_capacity(jumps.len());
        for j in jumps {
            match merged.last_mut() {
                Some(last) if last.location == j.location => {
                    last.left_limit = last.left_limit.min(j.left_limit);
                    last.right_limit += j.height();
                    last.value += j.value - j.left_limit;
                }
                _ => merged.push(j),
            }
        }
        JumpSet {
            jumps: merged,
            base: self.clone(),
        }
    }

    fn raw_jumps(&self) -> Vec<Jump> {
        match self {
            Self::Identity | Self::TvarCap { .. } | Self::WangTransform { .. } => Vec::new(),
            Self::VarIndicator { p } => vec![Jump {
                location: 1.0 - p,
                left_limit: 0.0,
                right_limit: 1.0,
                value: 0.0,
            }],
            Self::PiecewiseLinear { knots } => {
                let mut out = Vec::new();
                for w in knots.windows(2) {
                    if w[0].0 == w[1].0 && w[1].1 > w[0].1 {
                        out.push(Jump {
                            location: w[0].0,
                            left_limit: w[0].1,
                            right_limit: w[1].1,
                            value: w[0].1,
                        });
                    }
                }
                out
            }
            Self::Dual(inner) => inner
                .raw_jumps()
                .into_iter()
                .map(|j| Jump {
                    location: 1.0 - j.location,
                    left_limit: 1.0 - j.right_limit,
                    right_limit: 1.0 - j.left_limit,
                    value: 1.0 - j.value,
                })
                .collect(),
            Self::Mixture {
                left_weight,
                left,
                right_weight,
                right,
            } => {
                let scale = |jumps: Vec<Jump>, w: f64, other: &Distortion, ow: f64| {
                    jumps
                        .into_iter()
                        .map(|j| Jump {
                            location: j.location,
                            left_limit: w * j.left_limit + ow * left_limit_of(other, j.location),
                            right_limit: w * j.right_limit + ow * right_limit_of(other, j.location),
                            value: w * j.value + ow * other.evaluate(j.location),
                        })
                        .collect::<Vec<_>>()
                };
                let mut out = scale(left.raw_jumps(), *left_weight, right, *right_weight);
                out.extend(scale(right.raw_jumps(), *right_weight, left, *left_weight));
                // de-duplicate joint locations: keep combined heights once
                out.sort_by(|a, b| a.location.total_cmp(&b.location));
                out.dedup_by(|b, a| {
                    if a.location == b.location {
                        a.left_limit = a.left_limit.min(b.left_limit);
                        a.right_limit = a.right_limit.max(b.right_limit);
                        true
                    } else {
                        false
                    }
                });
                out
            }
        }
    }

    /// Density of the absolutely continuous part, defined a.e. on `(0,1)`.
    pub fn density(&self, q: f64) -> f64 {
        debug_assert!(q > 0.0 && q < 1.0);
        match self {
            Self::Identity => 1.0,
            Self::VarIndicator { .. } => 0.0,
            Self::TvarCap { p } => {
                if q < 1.0 - p {
                    1.0 / (1.0 - p)
                } else {
                    0.0
                }
            }
            Self::WangTransform { p } => {
                // phi(z + c) / phi(z) = exp(-c z - c^2/2), z = Phi^-1(q)
                let c = special::norm_quantile(*p);
                let z = special::norm_quantile(q);
                (-c * z - 0.5 * c * c).exp()
            }
            Self::PiecewiseLinear { knots } => {
                let mut slope = 0.0;
                for w in knots.windows(2) {
                    if w[0].0 < q && q <= w[1].0 {
                        slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                        break;
                    }
                }
                slope
            }
            // the dual's density at q is the inner density at 1-q; the
            // near-one form keeps tiny q from collapsing to 1-q == 1
            Self::Dual(inner) => inner.density_near_one(q),
            Self::Mixture {
                left_weight,
                left,
                right_weight,
                right,
            } => left_weight * left.density(q) + right_weight * right.density(q),
        }
    }

    /// Density at `1 - delta`, evaluated without forming `1 - delta`.
    pub fn density_near_one(&self, delta: f64) -> f64 {
        debug_assert!(delta > 0.0 && delta < 1.0);
        match self {
            Self::Identity => 1.0,
            Self::VarIndicator { .. } => 0.0,
            Self::TvarCap { p } => {
                if delta > *p {
                    1.0 / (1.0 - p)
                } else {
                    0.0
                }
            }
            Self::WangTransform { p } => {
                let c = special::norm_quantile(*p);
                let z = -special::norm_quantile(delta); // Phi^-1(1-delta)
                (-c * z - 0.5 * c * c).exp()
            }
            Self::PiecewiseLinear { knots } => {
                let n = knots.len();
                let (q0, v0) = knots[n - 2];
                if delta < 1.0 - q0 {
                    (1.0 - v0) / (1.0 - q0)
                } else {
                    self.density(1.0 - delta)
                }
            }
            Self::Dual(inner) => inner.density(delta),
            Self::Mixture {
                left_weight,
                left,
                right_weight,
                right,
            } => {
                left_weight * left.density_near_one(delta)
                    + right_weight * right.density_near_one(delta)
            }
        }
    }

    /// Interior points where the continuous density is non-smooth, plus the
    /// atom locations; quadrature splits panels here.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        self.collect_breakpoints(&mut pts);
        pts.retain(|q| *q > 0.0 && *q < 1.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Self::Identity | Self::WangTransform { .. } => {}
            Self::VarIndicator { p } => out.push(1.0 - p),
            Self::TvarCap { p } => out.push(1.0 - p),
            Self::PiecewiseLinear { knots } => out.extend(knots.iter().map(|k| k.0)),
            Self::Dual(inner) => {
                let mut tmp = Vec::new();
                inner.collect_breakpoints(&mut tmp);
                out.extend(tmp.into_iter().map(|q| 1.0 - q));
            }
            Self::Mixture { left, right, .. } => {
                left.collect_breakpoints(out);
                right.collect_breakpoints(out);
            }
        }
    }

    /// Parses the spec grammar: `identity`, `var(p)`, `tvar(p)`, `wang(p)`,
    /// `dual(<spec>)`, `mix(c1,<spec1>,c2,<spec2>)`, `pwl(q1:v1,q2:v2,...)`.
    pub fn parse(spec: &str) -> Result<Self, DistortionError> {
        let s = spec.trim();
        let parse_err = |token: &str| DistortionError::Parse {
            token: token.to_string(),
            spec: s.to_string(),
        };
        if s == "identity" {
            return Ok(Self::Identity);
        }
        let open = s.find('(').ok_or_else(|| parse_err(s))?;
        if !s.ends_with(')') {
            return Err(parse_err(s));
        }
        let name = s[..open].trim();
        let args = &s[open + 1..s.len() - 1];
        let num = |tok: &str| -> Result<f64, DistortionError> {
            tok.trim().parse::<f64>().map_err(|_| parse_err(tok.trim()))
        };
        match name {
            "var" => Self::var_indicator(num(args)?),
            "tvar" => Self::tvar_cap(num(args)?),
            "wang" => Self::wang_transform(num(args)?),
            "dual" => Ok(Self::dual_of(Self::parse(args)?)),
            "mix" => {
                let parts = split_top_level(args);
                if parts.len() != 4 {
                    return Err(parse_err(args));
                }
                Self::mixture(
                    num(parts[0])?,
                    Self::parse(parts[1])?,
                    num(parts[2])?,
                    Self::parse(parts[3])?,
                )
            }
            "pwl" => {
                let mut knots = vec![(0.0, 0.0)];
                for pair in args.split(',') {
                    let (q, v) = pair.split_once(':').ok_or_else(|| parse_err(pair))?;
                    knots.push((num(q)?, num(v)?));
                }
                knots.push((1.0, 1.0));
                knots.dedup();
                Self::piecewise_linear(knots)
            }
            other => Err(parse_err(other)),
        }
    }
}

impl fmt::Display for Distortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::VarIndicator { p } => write!(f, "var({p})"),
            Self::TvarCap { p } => write!(f, "tvar({p})"),
            Self::WangTransform { p } => write!(f, "wang({p})"),
            Self::PiecewiseLinear { knots } => {
                write!(f, "pwl(")?;
                let inner: Vec<String> = knots[1..knots.len() - 1]
                    .iter()
                    .map(|(q, v)| format!("{q}:{v}"))
                    .collect();
                write!(f, "{})", inner.join(","))
            }
            Self::Dual(inner) => write!(f, "dual({inner})"),
            Self::Mixture {
                left_weight,
                left,
                right_weight,
                right,
            } => write!(f, "mix({left_weight},{left},{right_weight},{right})"),
        }
    }
}

fn check_level(kind: &'static str, p: f64) -> Result<(), DistortionError> {
    if p.is_finite() && p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(DistortionError::InvalidParameter {
            kind,
            message: format!("level p must lie in (0,1), got {p}"),
        })
    }
}

fn check_weights(left: f64, right: f64) -> Result<(), DistortionError> {
    if left >= 0.0 && right >= 0.0 && (left + right - 1.0).abs() <= 1e-12 {
        Ok(())
    } else {
        Err(DistortionError::BadMixtureWeights { left, right })
    }
}

fn pwl_eval(knots: &[(f64, f64)], q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    // value at a duplicated abscissa is the lower knot (left-continuous)
    for w in knots.windows(2) {
        let ((q0, v0), (q1, v1)) = (w[0], w[1]);
        if q == q0 {
            return v0;
        }
        if q > q0 && q <= q1 {
            if q0 == q1 {
                return v0;
            }
            return v0 + (v1 - v0) * (q - q0) / (q1 - q0);
        }
    }
    1.0
}

fn left_limit_of(g: &Distortion, q: f64) -> f64 {
    for j in g.raw_jumps() {
        if j.location == q {
            return j.left_limit;
        }
    }
    g.evaluate(q)
}

fn right_limit_of(g: &Distortion, q: f64) -> f64 {
    for j in g.raw_jumps() {
        if j.location == q {
            return j.right_limit;
        }
    }
    g.evaluate(q)
}

fn split_by_class(g: &Distortion, class: ContinuityClass) -> (f64, Distortion, f64, Distortion) {
    match class {
        ContinuityClass::Continuous | ContinuityClass::LeftContinuous => {
            (1.0, g.clone(), 0.0, Distortion::Identity)
        }
        ContinuityClass::RightContinuous => (0.0, Distortion::Identity, 1.0, g.clone()),
        ContinuityClass::Mixed => unreachable!("mixed classes handled by decompose"),
    }
}

// weighted recombination of two same-side parts, renormalized to weight 1
fn combine(
    w1: f64,
    g1: Distortion,
    w2: f64,
    g2: Distortion,
    total: f64,
) -> Result<Distortion, DistortionError> {
    if total <= 0.0 {
        return Ok(Distortion::Identity);
    }
    if w2 <= 0.0 {
        return Ok(g1);
    }
    if w1 <= 0.0 {
        return Ok(g2);
    }
    Distortion::mixture(w1 / total, g1, w2 / total, g2)
}

// split on commas not nested inside parentheses
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}
