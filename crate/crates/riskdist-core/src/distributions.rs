//! Univariate distributions with exact or high-accuracy cdf and quantile
//! functions, the substrate for every risk-measure computation.
//!
//! Quantiles follow the generalized-inverse conventions: the left inverse is
//! `inf {x : F(x) >= p}` (with `inf {} = +inf`), the right inverse
//! `sup {x : F(x) <= p}` (with `sup {} = -inf`). Probability endpoints map to
//! support endpoints where those are attained.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::special;

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("invalid parameter for {kind}: {message}")]
    InvalidParameter { kind: &'static str, message: String },
    #[error("empirical sample must be non-empty and finite")]
    BadSample,
    #[error("generalized inverse undefined: {side} quantile infinite at p={p}")]
    InfiniteQuantile { side: &'static str, p: f64 },
    #[error("unrecognized token `{token}` in distribution spec `{spec}`")]
    Parse { token: String, spec: String },
    #[error("cannot read sample file `{path}`: {source}")]
    SampleIo {
        path: String,
        source: std::io::Error,
    },
}

/// A univariate law. All parametric kinds have continuous strictly
/// increasing cdfs; `Empirical` is the step cdf `#{samples <= x} / n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Normal { mu: f64, sigma: f64 },
    LogNormal { mu: f64, sigma: f64 },
    StudentT { nu: f64 },
    Laplace { location: f64, scale: f64 },
    Logistic { location: f64, scale: f64 },
    Uniform { a: f64, b: f64 },
    Empirical { samples: Vec<f64> },
}

/// Symmetry metadata; `center` is meaningful only when `is_symmetric`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryInfo {
    pub is_symmetric: bool,
    pub center: f64,
}

fn require(ok: bool, kind: &'static str, message: &str) -> Result<(), DistributionError> {
    if ok {
        Ok(())
    } else {
        Err(DistributionError::InvalidParameter {
            kind,
            message: message.to_string(),
        })
    }
}

impl Distribution {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self, DistributionError> {
        require(mu.is_finite() && sigma.is_finite() && sigma > 0.0, "normal", "need finite mu, sigma > 0")?;
        Ok(Self::Normal { mu, sigma })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self, DistributionError> {
        require(mu.is_finite() && sigma.is_finite() && sigma > 0.0, "lognormal", "need finite mu, sigma > 0")?;
        Ok(Self::LogNormal { mu, sigma })
    }

    pub fn student_t(nu: f64) -> Result<Self, DistributionError> {
        require(nu.is_finite() && nu > 0.0, "student", "need nu > 0")?;
        Ok(Self::StudentT { nu })
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self, DistributionError> {
        require(location.is_finite() && scale.is_finite() && scale > 0.0, "laplace", "need finite location, scale > 0")?;
        Ok(Self::Laplace { location, scale })
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self, DistributionError> {
        require(location.is_finite() && scale.is_finite() && scale > 0.0, "logistic", "need finite location, scale > 0")?;
        Ok(Self::Logistic { location, scale })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self, DistributionError> {
        require(a.is_finite() && b.is_finite() && b > a, "uniform", "need finite a < b")?;
        Ok(Self::Uniform { a, b })
    }

    /// Sorts the sample; ties are allowed.
    pub fn empirical(mut samples: Vec<f64>) -> Result<Self, DistributionError> {
        if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
            return Err(DistributionError::BadSample);
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self::Empirical { samples })
    }

    /// Cdf `F(x) = P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal { mu, sigma } => special::norm_cdf((x - mu) / sigma),
            Self::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    special::norm_cdf((x.ln() - mu) / sigma)
                }
            }
            Self::StudentT { nu } => special::student_cdf(*nu, x),
            Self::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Self::Logistic { location, scale } => {
                let z = (x - location) / scale;
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Self::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Self::Empirical { samples } => {
                let n = samples.len();
                let count = samples.partition_point(|&v| v <= x);
                count as f64 / n as f64
            }
        }
    }

    /// Survival function `1 - F(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Self::Normal { mu, sigma } => special::norm_sf((x - mu) / sigma),
            Self::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    special::norm_sf((x.ln() - mu) / sigma)
                }
            }
            Self::StudentT { nu } => special::student_cdf(*nu, -x),
            Self::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    1.0 - 0.5 * z.exp()
                } else {
                    0.5 * (-z).exp()
                }
            }
            Self::Logistic { location, scale } => {
                let z = (x - location) / scale;
                if z <= 0.0 {
                    1.0 / (1.0 + z.exp())
                } else {
                    let e = (-z).exp();
                    e / (1.0 + e)
                }
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    /// Left inverse `F^{-1}(p) = inf {x : F(x) >= p}` on `[0, 1]`.
    ///
    /// `p = 0` gives `-inf`; `p = 1` gives the right support endpoint
    /// (`+inf` when the support is unbounded above).
    pub fn quantile_left(&self, p: f64) -> f64 {
        assert!((0.0..=1.0).contains(&p), "probability out of [0,1]: {p}");
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        if p == 1.0 {
            return match self {
                Self::Uniform { b, .. } => *b,
                Self::Empirical { samples } => *samples.last().unwrap(),
                _ => f64::INFINITY,
            };
        }
        match self {
            Self::Empirical { samples } => {
                let n = samples.len();
                let idx = grid_index_ceil(n, p);
                samples[idx]
            }
            _ => self.quantile_lower_tail_impl(p, false),
        }
    }

    /// Right inverse `F^{-1+}(p) = sup {x : F(x) <= p}` on `[0, 1]`.
    ///
    /// `p = 0` gives the left support endpoint (`-inf` when unbounded
    /// below); `p = 1` gives the right support endpoint.
    pub fn quantile_right(&self, p: f64) -> f64 {
        assert!((0.0..=1.0).contains(&p), "probability out of [0,1]: {p}");
        if p == 1.0 {
            return self.quantile_left(1.0);
        }
        match self {
            Self::Empirical { samples } => {
                let n = samples.len();
                let t = snap(n as f64 * p);
                let idx = (t.floor() as usize).min(n - 1);
                samples[idx]
            }
            Self::LogNormal { .. } if p == 0.0 => 0.0,
            Self::Uniform { a, .. } if p == 0.0 => *a,
            _ if p == 0.0 => f64::NEG_INFINITY,
            _ => self.quantile_lower_tail_impl(p, false),
        }
    }

    /// Generalized alpha-inverse `(1-alpha) F^{-1}(p) + alpha F^{-1+}(p)`.
    ///
    /// Errors when either inverse is infinite at `p`.
    pub fn quantile_alpha(&self, p: f64, alpha: f64) -> Result<f64, DistributionError> {
        assert!((0.0..=1.0).contains(&alpha), "alpha out of [0,1]: {alpha}");
        let left = self.quantile_left(p);
        if !left.is_finite() {
            return Err(DistributionError::InfiniteQuantile { side: "left", p });
        }
        let right = self.quantile_right(p);
        if !right.is_finite() {
            return Err(DistributionError::InfiniteQuantile { side: "right", p });
        }
        Ok((1.0 - alpha) * left + alpha * right)
    }

    // Parametric quantile at probability p in (0, 1). `reflected` asks for
    // F^{-1}(1-p) evaluated without forming 1-p.
    fn quantile_lower_tail_impl(&self, p: f64, reflected: bool) -> f64 {
        debug_assert!(p > 0.0 && p < 1.0);
        match self {
            Self::Normal { mu, sigma } => {
                let z = special::norm_quantile(p);
                if reflected {
                    mu - sigma * z
                } else {
                    mu + sigma * z
                }
            }
            Self::LogNormal { mu, sigma } => {
                let z = special::norm_quantile(p);
                if reflected {
                    (mu - sigma * z).exp()
                } else {
                    (mu + sigma * z).exp()
                }
            }
            Self::StudentT { nu } => {
                let t = special::student_quantile(*nu, p);
                if reflected {
                    -t
                } else {
                    t
                }
            }
            Self::Laplace { location, scale } => {
                let q = if p < 0.5 {
                    scale * (2.0 * p).ln()
                } else {
                    -scale * (2.0 * (1.0 - p)).ln()
                };
                if reflected {
                    location - q
                } else {
                    location + q
                }
            }
            Self::Logistic { location, scale } => {
                let q = scale * (p.ln() - (-p).ln_1p());
                if reflected {
                    location - q
                } else {
                    location + q
                }
            }
            Self::Uniform { a, b } => {
                if reflected {
                    b - (b - a) * p
                } else {
                    a + (b - a) * p
                }
            }
            Self::Empirical { .. } => unreachable!("empirical handled by callers"),
        }
    }

    /// `F^{-1}(q)` for small lower-tail `q`, stable down to the f64 floor.
    /// Intended for quadrature tail refinement; `q` in (0, 1).
    pub(crate) fn quantile_lower_tail(&self, q: f64) -> f64 {
        match self {
            Self::Empirical { .. } => self.quantile_left(q),
            _ => self.quantile_lower_tail_impl(q, false),
        }
    }

    /// `F^{-1}(1 - q)` for small upper-tail `q`, evaluated without forming
    /// `1 - q`; `q` in (0, 1).
    pub(crate) fn quantile_upper_tail(&self, q: f64) -> f64 {
        match self {
            Self::Empirical { samples } => {
                let n = samples.len();
                // index of F^{-1}(1-q): ceil(n(1-q)) - 1 = n - ceil(snap(n q))
                let t = snap(n as f64 * q);
                let k = (t.ceil() as usize).max(1).min(n);
                samples[n - k]
            }
            _ => self.quantile_lower_tail_impl(q, true),
        }
    }

    /// Symmetry metadata. Empirical samples are symmetric when the sorted
    /// sample is reflection-invariant about its midrange within 1e-9.
    pub fn symmetry_info(&self) -> SymmetryInfo {
        match self {
            Self::Normal { mu, .. } => SymmetryInfo { is_symmetric: true, center: *mu },
            Self::StudentT { .. } => SymmetryInfo { is_symmetric: true, center: 0.0 },
            Self::Laplace { location, .. } | Self::Logistic { location, .. } => SymmetryInfo {
                is_symmetric: true,
                center: *location,
            },
            Self::Uniform { a, b } => SymmetryInfo { is_symmetric: true, center: 0.5 * (a + b) },
            Self::LogNormal { .. } => SymmetryInfo { is_symmetric: false, center: f64::NAN },
            Self::Empirical { samples } => {
                let n = samples.len();
                let center = 0.5 * (samples[0] + samples[n - 1]);
                let symmetric = samples
                    .iter()
                    .zip(samples.iter().rev())
                    .all(|(lo, hi)| (lo + hi - 2.0 * center).abs() <= 1e-9);
                SymmetryInfo {
                    is_symmetric: symmetric,
                    center: if symmetric { center } else { f64::NAN },
                }
            }
        }
    }

    /// True when the cdf is continuous and strictly increasing on the
    /// interior of the support: all parametric kinds, never `Empirical`.
    pub fn strictly_increasing_on_support(&self) -> bool {
        !matches!(self, Self::Empirical { .. })
    }

    /// Parses the spec grammar: `normal(mu,sigma)`, `lognormal(mu,sigma)`,
    /// `student(nu)`, `laplace(loc,scale)`, `logistic(loc,scale)`,
    /// `uniform(a,b)`, `empirical(@path.csv)` (one real per line, `#`
    /// comments allowed).
    pub fn parse(spec: &str) -> Result<Self, DistributionError> {
        let s = spec.trim();
        let parse_err = |token: &str| DistributionError::Parse {
            token: token.to_string(),
            spec: s.to_string(),
        };
        let (name, args) = split_call(s).ok_or_else(|| parse_err(s))?;
        let num = |tok: &str| -> Result<f64, DistributionError> {
            tok.trim().parse::<f64>().map_err(|_| parse_err(tok.trim()))
        };
        match name {
            "normal" | "lognormal" | "laplace" | "logistic" | "uniform" => {
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 2 {
                    return Err(parse_err(args));
                }
                let (x, y) = (num(parts[0])?, num(parts[1])?);
                match name {
                    "normal" => Self::normal(x, y),
                    "lognormal" => Self::lognormal(x, y),
                    "laplace" => Self::laplace(x, y),
                    "logistic" => Self::logistic(x, y),
                    _ => Self::uniform(x, y),
                }
            }
            "student" => Self::student_t(num(args)?),
            "empirical" => {
                let path = args.trim();
                let path = path.strip_prefix('@').ok_or_else(|| parse_err(path))?;
                Self::from_csv(Path::new(path))
            }
            other => Err(parse_err(other)),
        }
    }

    /// Loads an empirical sample: one real per line, `#` comments allowed.
    pub fn from_csv(path: &Path) -> Result<Self, DistributionError> {
        let text = std::fs::read_to_string(path).map_err(|source| DistributionError::SampleIo {
            path: path.display().to_string(),
            source,
        })?;
        let mut samples = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v = line.parse::<f64>().map_err(|_| DistributionError::Parse {
                token: line.to_string(),
                spec: path.display().to_string(),
            })?;
            samples.push(v);
        }
        Self::empirical(samples)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Normal { mu, sigma } => write!(f, "normal({mu},{sigma})"),
            Self::LogNormal { mu, sigma } => write!(f, "lognormal({mu},{sigma})"),
            Self::StudentT { nu } => write!(f, "student({nu})"),
            Self::Laplace { location, scale } => write!(f, "laplace({location},{scale})"),
            Self::Logistic { location, scale } => write!(f, "logistic({location},{scale})"),
            Self::Uniform { a, b } => write!(f, "uniform({a},{b})"),
            Self::Empirical { samples } => write!(f, "empirical(n={})", samples.len()),
        }
    }
}

// `name(args)` -> (name, args)
fn split_call(s: &str) -> Option<(&str, &str)> {
    let open = s.find('(')?;
    if !s.ends_with(')') {
        return None;
    }
    Some((s[..open].trim(), &s[open + 1..s.len() - 1]))
}

// n*p with a snap to the nearest integer when within rounding noise, so
// probabilities that are exact multiples of 1/n land on the atom.
fn snap(t: f64) -> f64 {
    let r = t.round();
    if (t - r).abs() < 1e-9 * t.abs().max(1.0) {
        r
    } else {
        t
    }
}

// index of the left quantile in a sorted sample: ceil(n p) - 1
fn grid_index_ceil(n: usize, p: f64) -> usize {
    let t = snap(n as f64 * p);
    (t.ceil() as usize).max(1).min(n) - 1
}
