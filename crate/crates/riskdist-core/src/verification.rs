//! The acceptance matrix: every numbered criterion the engine must satisfy,
//! runnable from the test suite and from the CLI. Each criterion pins its
//! tolerance in code and reports per-cell deviations.

use std::time::Instant;

use crate::decomposition::{
    lognormal_identical_tvar, lognormal_identical_var, lognormal_phi_minimizer, rho_counter_sum,
    tvar_counter_sum, var_counter_sum, wt_counter_sum,
};
use crate::dependence::{check_dispersive_on_grid, AggregatePosition, DispersiveOrdering};
use crate::distortion::Distortion;
use crate::distributions::Distribution;
use crate::oracle::{empirical_rho, grid_sample, xside_rho};
use crate::risk_measures::{rho, QuadratureConfig};
use crate::special;

/// Sizing and filtering for a verification run.
#[derive(Debug, Clone)]
pub struct VerificationConfig {
    /// Oracle grid for the general criteria (default `2^20`).
    pub oracle_n: usize,
    /// Oracle grid for heavy-tailed log-normal checks (default `2^22`).
    pub oracle_n_heavy: usize,
    /// Multiplier applied to oracle-backed tolerances; `1` at the default
    /// grid sizes, larger in quick mode.
    pub tolerance_scale: f64,
    /// Case-insensitive substring filter on criterion names.
    pub only: Option<String>,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            oracle_n: 1 << 20,
            oracle_n_heavy: 1 << 22,
            tolerance_scale: 1.0,
            only: None,
        }
    }
}

impl VerificationConfig {
    /// Quick-mode config: oracle grids of size `n`, with oracle-backed
    /// tolerances loosened by `(2^20 / n)^(3/4)` (so `n = 4096` documents a
    /// 64x loosening).
    pub fn with_oracle_n(n: usize) -> Self {
        let scale = ((1u64 << 20) as f64 / n as f64).powf(0.75).max(1.0);
        Self {
            oracle_n: n,
            oracle_n_heavy: n.saturating_mul(4).min(1 << 22).max(n),
            tolerance_scale: scale,
            only: None,
        }
    }
}

/// One checked cell of a criterion.
#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub cells: Vec<Cell>,
    pub elapsed_seconds: f64,
    pub note: String,
}

impl CriterionOutcome {
    pub fn failed_cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| !c.passed)
    }

    /// `criterion NN PASS/FAIL name -- cells, worst ratio, time` one-liner.
    pub fn summary_line(&self) -> String {
        let failed = self.failed_cells().count();
        let worst = self
            .cells
            .iter()
            .map(|c| c.deviation / c.tolerance)
            .fold(0.0f64, f64::max);
        format!(
            "criterion {:02} {} {} -- {} cells ({} failed), worst dev/tol {:.3}, {:.1}s{}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cells.len(),
            failed,
            worst,
            self.elapsed_seconds,
            if self.note.is_empty() {
                String::new()
            } else {
                format!(" [{}]", self.note)
            }
        )
    }
}

fn outcome(id: usize, name: &'static str, cells: Vec<Cell>, start: Instant, note: String) -> CriterionOutcome {
    CriterionOutcome {
        id,
        name,
        passed: cells.iter().all(|c| c.passed),
        cells,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        note,
    }
}

fn cell(label: String, deviation: f64, tolerance: f64) -> Cell {
    Cell {
        label,
        deviation,
        tolerance,
        passed: deviation <= tolerance,
    }
}

fn n(mu: f64, sigma: f64) -> Distribution {
    Distribution::normal(mu, sigma).unwrap()
}

fn ln(mu: f64, sigma: f64) -> Distribution {
    Distribution::lognormal(mu, sigma).unwrap()
}

fn t(nu: f64) -> Distribution {
    Distribution::student_t(nu).unwrap()
}

// the distortion matrix shared by the oracle criteria
fn distortion_matrix() -> Vec<(String, Distortion)> {
    let mut out = Vec::new();
    for p in [0.5, 0.9, 0.95, 0.99] {
        let var = Distortion::var_indicator(p).unwrap();
        let tvar = Distortion::tvar_cap(p).unwrap();
        let wang = Distortion::wang_transform(p).unwrap();
        out.push((format!("var({p})"), var.clone()));
        out.push((format!("tvar({p})"), tvar.clone()));
        out.push((format!("wang({p})"), wang.clone()));
        out.push((format!("dual(var({p}))"), var.dual()));
        out.push((format!("dual(tvar({p}))"), tvar.dual()));
        out.push((format!("dual(wang({p}))"), wang.dual()));
    }
    out
}

fn counter_pairs() -> Vec<(&'static str, Distribution, Distribution)> {
    vec![
        ("N(0,2)&N(0,1)", n(0.0, 2.0), n(0.0, 1.0)),
        ("t2&t5", t(2.0), t(5.0)),
        (
            "Laplace(0,sqrt2)&N(0,1)",
            Distribution::laplace(0.0, std::f64::consts::SQRT_2).unwrap(),
            n(0.0, 1.0),
        ),
        (
            "Logistic(0,1)&N(0,1)",
            Distribution::logistic(0.0, 1.0).unwrap(),
            n(0.0, 1.0),
        ),
    ]
}

/// Criterion 1: the main decomposition against the grid oracle over the full
/// pair x distortion x level matrix, `|theorem - oracle| <=
/// max(1e-4 |value|, 1e-5)`, runtime capped at 60 s.
pub fn criterion_1(vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let mut cells = Vec::new();
    for (pair_name, d1, d2) in counter_pairs() {
        let pos = AggregatePosition::counter_pair(d1.clone(), d2.clone());
        let sample = grid_sample(&pos, vcfg.oracle_n);
        for (g_name, g) in distortion_matrix() {
            let label = format!("{pair_name} {g_name}");
            match rho_counter_sum(&g, &d1, &d2, &cfg) {
                Ok(out) => {
                    let oracle_value = empirical_rho(&g, &sample);
                    let tol = (1e-4 * out.result.value.abs()).max(1e-5) * vcfg.tolerance_scale;
                    cells.push(cell(label, (out.result.value - oracle_value).abs(), tol));
                }
                Err(e) => cells.push(cell(format!("{label}: {e}"), f64::INFINITY, 1.0)),
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    cells.push(cell(format!("runtime {elapsed:.1}s"), elapsed, 60.0));
    outcome(
        1,
        "main theorem vs grid oracle",
        cells,
        start,
        format!("oracle n = {}", vcfg.oracle_n),
    )
}

/// Criterion 2: comonotonic additivity against the oracle on
/// normal / uniform / log-normal leg mixes, agreement within `1e-5`
/// relative over the same distortion matrix.
pub fn criterion_2(vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let leg_sets: Vec<(&str, Vec<Distribution>)> = vec![
        ("N(3,1)+N(2,0.5)", vec![n(3.0, 1.0), n(2.0, 0.5)]),
        (
            "U(1,2)+U(0,2)",
            vec![
                Distribution::uniform(1.0, 2.0).unwrap(),
                Distribution::uniform(0.0, 2.0).unwrap(),
            ],
        ),
        (
            "LN(0,0.5)+U(0,2)+N(1,1)",
            vec![
                ln(0.0, 0.5),
                Distribution::uniform(0.0, 2.0).unwrap(),
                n(1.0, 1.0),
            ],
        ),
        ("LN(0.2,0.8)+LN(0,0.5)", vec![ln(0.2, 0.8), ln(0.0, 0.5)]),
    ];
    let mut cells = Vec::new();
    for (set_name, legs) in &leg_sets {
        let pos = AggregatePosition::comonotonic(legs.clone()).unwrap();
        let sample = grid_sample(&pos, vcfg.oracle_n_heavy);
        for (g_name, g) in distortion_matrix() {
            let label = format!("{set_name} {g_name}");
            let mut lhs = 0.0;
            let mut err = None;
            for d in legs {
                match rho(&g, d, &cfg) {
                    Ok(r) => lhs += r.value,
                    Err(e) => {
                        err = Some(e);
                        break;
                    }
                }
            }
            if let Some(e) = err {
                cells.push(cell(format!("{label}: {e}"), f64::INFINITY, 1.0));
                continue;
            }
            let rhs = empirical_rho(&g, &sample);
            let rel = ((lhs - rhs) / lhs).abs();
            cells.push(cell(label, rel, 1e-5 * vcfg.tolerance_scale));
        }
    }
    outcome(
        2,
        "comonotonic additivity vs oracle",
        cells,
        start,
        format!("oracle n = {}", vcfg.oracle_n_heavy),
    )
}

/// Criterion 3: the closed VaR / TVaR / Wang decompositions equal the
/// generic theorem path under the matching distortions, to 1e-8 absolute.
pub fn criterion_3(_vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let mut cells = Vec::new();
    for (pair_name, d1, d2) in counter_pairs() {
        for p in [0.5, 0.9, 0.95, 0.99] {
            let checks: [(&str, Result<f64, _>, Distortion); 3] = [
                (
                    "var",
                    var_counter_sum(&d1, &d2, p).map(|o| o.result.value),
                    Distortion::var_indicator(p).unwrap(),
                ),
                (
                    "tvar",
                    tvar_counter_sum(&d1, &d2, p, &cfg).map(|o| o.result.value),
                    Distortion::tvar_cap(p).unwrap(),
                ),
                (
                    "wang",
                    wt_counter_sum(&d1, &d2, p, &cfg).map(|o| o.result.value),
                    Distortion::wang_transform(p).unwrap(),
                ),
            ];
            for (kind, closed, g) in checks {
                let label = format!("{pair_name} {kind}({p})");
                match (closed, rho_counter_sum(&g, &d1, &d2, &cfg)) {
                    (Ok(a), Ok(b)) => cells.push(cell(label, (a - b.result.value).abs(), 1e-8)),
                    (a, b) => cells.push(cell(
                        format!("{label}: {:?} / {:?}", a.err(), b.err()),
                        f64::INFINITY,
                        1.0,
                    )),
                }
            }
        }
    }
    outcome(3, "closed corollaries vs theorem path", cells, start, String::new())
}

/// Criterion 4: identical log-normal VaR closed form vs the oracle on the
/// (mu, sigma, p) grid at 1e-4 relative, plus the pinned
/// `5.37329 +- 1e-4` spot value.
pub fn criterion_4(vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    let mut cells = Vec::new();
    for mu in [0.0, 0.5] {
        for sigma in [0.5, 1.0, 1.5] {
            let d = ln(mu, sigma);
            let pos = AggregatePosition::counter_pair(d.clone(), d.clone());
            let sample = grid_sample(&pos, vcfg.oracle_n_heavy);
            for p in [0.9, 0.95, 0.99] {
                let closed = lognormal_identical_var(mu, sigma, p);
                let g = Distortion::var_indicator(p).unwrap();
                let oracle_value = empirical_rho(&g, &sample);
                let rel = ((closed - oracle_value) / closed).abs();
                cells.push(cell(
                    format!("LN({mu},{sigma}) p={p}"),
                    rel,
                    1e-4 * vcfg.tolerance_scale,
                ));
            }
        }
    }
    cells.push(cell(
        "pinned value at (0,1,0.9)".to_string(),
        (lognormal_identical_var(0.0, 1.0, 0.9) - 5.37329).abs(),
        1e-4,
    ));
    outcome(
        4,
        "log-normal identical VaR closed form",
        cells,
        start,
        format!("oracle n = {}", vcfg.oracle_n_heavy),
    )
}

/// Criterion 5: identical log-normal TVaR closed form vs the oracle at
/// 5e-4 relative on the same grid.
pub fn criterion_5(vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    let mut cells = Vec::new();
    for mu in [0.0, 0.5] {
        for sigma in [0.5, 1.0, 1.5] {
            let d = ln(mu, sigma);
            let pos = AggregatePosition::counter_pair(d.clone(), d.clone());
            let sample = grid_sample(&pos, vcfg.oracle_n_heavy);
            for p in [0.9, 0.95, 0.99] {
                let closed = lognormal_identical_tvar(mu, sigma, p);
                let g = Distortion::tvar_cap(p).unwrap();
                let oracle_value = empirical_rho(&g, &sample);
                let rel = ((closed - oracle_value) / closed).abs();
                cells.push(cell(
                    format!("LN({mu},{sigma}) p={p}"),
                    rel,
                    5e-4 * vcfg.tolerance_scale,
                ));
            }
        }
    }
    outcome(
        5,
        "log-normal identical TVaR closed form",
        cells,
        start,
        format!("oracle n = {}", vcfg.oracle_n_heavy),
    )
}

/// Criterion 6: the closed-form minimizer of the log-normal aggregate
/// quantile vs a grid argmin over 1e5 points, within 2e-5, on 20 fixed
/// pseudo-random parameter tuples.
pub fn criterion_6(_vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    // fixed LCG so the tuples are random-but-frozen
    let mut state: u64 = 0x243F6A8885A308D3;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut cells = Vec::new();
    const M: usize = 100_000;
    for i in 0..20 {
        let mu1 = -1.0 + 2.0 * next();
        let s1 = 0.3 + 1.7 * next();
        let mu2 = -1.0 + 2.0 * next();
        let s2 = 0.3 + 1.7 * next();
        let u_closed = lognormal_phi_minimizer(mu1, s1, mu2, s2);
        let phi = |u: f64| {
            let z = special::norm_quantile(u);
            (mu1 + s1 * z).exp() + (mu2 - s2 * z).exp()
        };
        let mut best_u = 0.0;
        let mut best = f64::INFINITY;
        for k in 1..=M {
            let u = k as f64 / (M + 1) as f64;
            let v = phi(u);
            if v < best {
                best = v;
                best_u = u;
            }
        }
        cells.push(cell(
            format!("tuple {i}: ({mu1:.3},{s1:.3},{mu2:.3},{s2:.3})"),
            (u_closed - best_u).abs(),
            2e-5,
        ));
    }
    outcome(6, "aggregate-minimizer closed form vs grid argmin", cells, start, String::new())
}

/// Criterion 7: the six dispersive orderings certified on 10,001-point
/// grids with violations at most 1e-9.
pub fn criterion_7(_vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    use DispersiveOrdering::*;
    let sq2 = std::f64::consts::SQRT_2;
    let cases: Vec<(&str, Distribution, Distribution, DispersiveOrdering)> = vec![
        ("normal sigma1<sigma2", n(0.0, 1.0), n(0.0, 2.0), XLeY),
        ("normal sigma1>=sigma2", n(0.0, 2.0), n(0.0, 1.0), YLeX),
        ("student nu 5 vs 2", t(5.0), t(2.0), XLeY),
        ("normal vs student(3)", n(0.0, 1.0), t(3.0), XLeY),
        (
            "normal vs laplace(0,sqrt2)",
            n(0.0, 1.0),
            Distribution::laplace(0.0, sq2).unwrap(),
            XLeY,
        ),
        (
            "normal vs logistic(0,1)",
            n(0.0, 1.0),
            Distribution::logistic(0.0, 1.0).unwrap(),
            XLeY,
        ),
    ];
    let mut cells = Vec::new();
    for (name, dx, dy, want) in cases {
        let v = check_dispersive_on_grid(&dx, &dy, 10_001);
        let dev = if v.ordering == want { v.max_violation } else { f64::INFINITY };
        cells.push(cell(format!("{name} -> {}", v.ordering.as_str()), dev, 1e-9));
    }
    outcome(7, "dispersive-order certificates", cells, start, String::new())
}

/// Criterion 8: quantile-side vs x-side representation of `rho_g` within
/// 1e-6 relative (absolute floor 1e-7 where the value crosses zero) over
/// the marginal x distortion matrix.
pub fn criterion_8(_vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let marginals = [
        n(0.0, 2.0),
        n(0.0, 1.0),
        t(2.0),
        t(5.0),
        Distribution::laplace(0.0, std::f64::consts::SQRT_2).unwrap(),
        Distribution::logistic(0.0, 1.0).unwrap(),
    ];
    let mut cells = Vec::new();
    for d in &marginals {
        for (g_name, g) in distortion_matrix() {
            let label = format!("{d} {g_name}");
            match (rho(&g, d, &cfg), xside_rho(&g, d, &cfg)) {
                (Ok(a), Ok(b)) => {
                    let tol = (1e-6 * a.value.abs()).max(1e-7);
                    cells.push(cell(label, (a.value - b).abs(), tol));
                }
                (a, b) => cells.push(cell(
                    format!("{label}: {:?} / {:?}", a.err(), b.err()),
                    f64::INFINITY,
                    1.0,
                )),
            }
        }
    }
    outcome(8, "quantile-side vs x-side representation", cells, start, String::new())
}

/// Criterion 9: dual involution, decomposition exactness, and the endpoint
/// laws, all to 1e-12 on 1e4-point grids, for every distortion kind.
pub fn criterion_9(_vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    let family: Vec<(String, Distortion)> = vec![
        ("identity".into(), Distortion::Identity),
        ("var(0.95)".into(), Distortion::var_indicator(0.95).unwrap()),
        ("tvar(0.9)".into(), Distortion::tvar_cap(0.9).unwrap()),
        ("wang(0.7)".into(), Distortion::wang_transform(0.7).unwrap()),
        (
            "pwl".into(),
            Distortion::piecewise_linear(vec![(0.0, 0.0), (0.3, 0.5), (1.0, 1.0)]).unwrap(),
        ),
        (
            "pwl-jump".into(),
            Distortion::piecewise_linear(vec![(0.0, 0.0), (0.4, 0.2), (0.4, 0.6), (1.0, 1.0)])
                .unwrap(),
        ),
        ("dual(var(0.9))".into(), Distortion::var_indicator(0.9).unwrap().dual()),
        ("dual(wang(0.9))".into(), Distortion::wang_transform(0.9).unwrap().dual()),
        (
            "mix".into(),
            Distortion::mixture(
                0.4,
                Distortion::var_indicator(0.9).unwrap(),
                0.6,
                Distortion::var_indicator(0.8).unwrap().dual(),
            )
            .unwrap(),
        ),
    ];
    let mut cells = Vec::new();
    for (name, g) in &family {
        let gg = g.dual().dual();
        let (cl, gl, cr, gr) = g.decompose().unwrap();
        let mut worst_dual = 0.0f64;
        let mut worst_split = 0.0f64;
        for k in 0..=10_000 {
            let q = k as f64 / 10_000.0;
            let v = g.evaluate(q);
            worst_dual = worst_dual.max((gg.evaluate(q) - v).abs());
            worst_split = worst_split.max((cl * gl.evaluate(q) + cr * gr.evaluate(q) - v).abs());
        }
        cells.push(cell(format!("{name} dual involution"), worst_dual, 1e-12));
        cells.push(cell(format!("{name} decomposition"), worst_split, 1e-12));
        let endpoints = g.evaluate(0.0).abs().max((g.evaluate(1.0) - 1.0).abs());
        cells.push(cell(format!("{name} endpoints"), endpoints, 1e-12));
    }
    outcome(9, "distortion algebra exactness", cells, start, String::new())
}

/// Criterion 10: identical symmetric marginals hedge to twice the center,
/// `rho_counter_sum(g, N(c,s), N(c,s)) = 2c +- 1e-8`, for the whole
/// distortion family and several centers and scales.
pub fn criterion_10(_vcfg: &VerificationConfig) -> CriterionOutcome {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let mut cells = Vec::new();
    for c in [-1.0, 0.0, 3.0] {
        for sigma in [0.5, 2.0] {
            let d = n(c, sigma);
            for (g_name, g) in distortion_matrix() {
                match rho_counter_sum(&g, &d, &d, &cfg) {
                    Ok(out) => cells.push(cell(
                        format!("N({c},{sigma}) {g_name}"),
                        (out.result.value - 2.0 * c).abs(),
                        1e-8,
                    )),
                    Err(e) => cells.push(cell(
                        format!("N({c},{sigma}) {g_name}: {e}"),
                        f64::INFINITY,
                        1.0,
                    )),
                }
            }
        }
    }
    outcome(10, "identical-symmetric hedge", cells, start, String::new())
}

type CriterionFn = fn(&VerificationConfig) -> CriterionOutcome;

const CRITERIA: [(usize, &str, CriterionFn); 10] = [
    (1, "main theorem vs grid oracle", criterion_1),
    (2, "comonotonic additivity vs oracle", criterion_2),
    (3, "closed corollaries vs theorem path", criterion_3),
    (4, "log-normal identical VaR closed form", criterion_4),
    (5, "log-normal identical TVaR closed form", criterion_5),
    (6, "aggregate-minimizer closed form vs grid argmin", criterion_6),
    (7, "dispersive-order certificates", criterion_7),
    (8, "quantile-side vs x-side representation", criterion_8),
    (9, "distortion algebra exactness", criterion_9),
    (10, "identical-symmetric hedge", criterion_10),
];

/// Runs every criterion matching the filter, in order.
pub fn run_all(vcfg: &VerificationConfig) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .filter(|(_, name, _)| match &vcfg.only {
            Some(f) => name.to_lowercase().contains(&f.to_lowercase()),
            None => true,
        })
        .map(|(_, _, f)| f(vcfg))
        .collect()
}
