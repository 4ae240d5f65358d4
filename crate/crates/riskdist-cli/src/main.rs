//! `riskdist`: distortion risk measures of single risks and of
//! comonotonic / counter-monotonic sums.
//!
//! Exit codes: 0 success, 1 spec parse failure, 2 numerical error,
//! 3 no theorem path under `--method theorem`, 4 inconclusive dispersive
//! comparison. Data goes to stdout, diagnostics to stderr.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::{emit, sig12, Format, Record, Rows};
use riskdist_core::{
    check_dispersive, decompose_auto, grid_sample, lognormal_identical_rho,
    lognormal_identical_tvar, lognormal_identical_var, tvar_counter_sum, var_counter_sum,
    wt_counter_sum, AggregatePosition, DecompositionError, DispersiveOrdering, Distortion,
    Distribution, PathChoice, QuadratureConfig,
};

const EXIT_PARSE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_NO_THEOREM: u8 = 3;
const EXIT_INCOMPARABLE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "riskdist",
    about = "Distortion risk measures of counter-monotonic and comonotonic sums",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputOpts {
    /// Output format
    #[arg(long, default_value = "table")]
    format: Format,
    /// Write output to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute rho_g of a single distribution
    Measure {
        /// Distribution spec, e.g. "normal(0,1)" or "empirical(@s.csv)"
        #[arg(long)]
        dist: String,
        /// Distortion spec, e.g. "tvar(0.95)" or "dual(var(0.9))"
        #[arg(long)]
        g: String,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Decompose rho_g of the counter-monotonic sum of two risks
    Decompose {
        #[arg(long)]
        d1: String,
        #[arg(long)]
        d2: String,
        #[arg(long)]
        g: String,
        /// Computation path: auto, theorem, lognormal, or oracle
        #[arg(long, default_value = "auto")]
        method: String,
        /// Cross-check the value against the grid oracle
        #[arg(long)]
        verify: bool,
        /// Oracle grid size (also via RISKDIST_ORACLE_N)
        #[arg(long)]
        n: Option<usize>,
        /// Alpha for generalized quantiles on the log-normal path
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Compare two risks in the dispersive order
    Dispersive {
        #[arg(long)]
        d1: String,
        #[arg(long)]
        d2: String,
        /// Number of interior grid points
        #[arg(long, default_value_t = 10_001)]
        grid_n: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Run the acceptance matrix and report pass/fail per criterion
    Verify {
        /// Only run criteria whose name contains this substring
        #[arg(long)]
        only: Option<String>,
        /// Oracle grid size; below the default, tolerances are loosened by
        /// (2^20 / n)^(3/4) and the scaling is reported
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Tabulate VaR / TVaR / WT of a counter-monotonic pair across levels
    Table {
        #[arg(long)]
        d1: String,
        #[arg(long)]
        d2: String,
        /// Comma-separated probability levels
        #[arg(long)]
        levels: String,
        /// Oracle grid size for pairs outside the closed-form paths
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        output: OutputOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type CmdResult = Result<(), (u8, String)>;

fn parse_dist(spec: &str) -> Result<Distribution, (u8, String)> {
    Distribution::parse(spec).map_err(|e| (EXIT_PARSE, e.to_string()))
}

fn parse_distortion(spec: &str) -> Result<Distortion, (u8, String)> {
    Distortion::parse(spec).map_err(|e| (EXIT_PARSE, e.to_string()))
}

fn parse_level(tok: &str) -> Result<f64, (u8, String)> {
    let p: f64 = tok
        .trim()
        .parse()
        .map_err(|_| (EXIT_PARSE, format!("unrecognized level token `{}`", tok.trim())))?;
    if !(0.0 < p && p < 1.0) {
        return Err((EXIT_PARSE, format!("level must lie in (0,1), got `{p}`")));
    }
    Ok(p)
}

fn oracle_n(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("RISKDIST_ORACLE_N")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1 << 20)
}

fn write_out(content: &str, out: Option<&PathBuf>) -> CmdResult {
    emit(content, out.map(|p| p.as_path()))
        .map_err(|e| (EXIT_NUMERIC, format!("cannot write output: {e}")))
}

fn run(cli: Cli) -> CmdResult {
    let cfg = QuadratureConfig::default();
    match cli.command {
        Command::Measure { dist, g, output } => {
            let d = parse_dist(&dist)?;
            let g = parse_distortion(&g)?;
            let result =
                riskdist_core::rho(&g, &d, &cfg).map_err(|e| (EXIT_NUMERIC, e.to_string()))?;
            let mut rec = Record::new("measure");
            rec.text("dist", &d.to_string())
                .text("g", &g.to_string())
                .number("value", result.value)
                .text("method", result.method.as_str())
                .diagnostics(&result.diagnostics);
            write_out(&rec.render(output.format), output.out.as_ref())
        }
        Command::Decompose {
            d1,
            d2,
            g,
            method,
            verify,
            n,
            alpha,
            output,
        } => {
            let dist1 = parse_dist(&d1)?;
            let dist2 = parse_dist(&d2)?;
            let g = parse_distortion(&g)?;
            let choice = match method.as_str() {
                "auto" => PathChoice::Auto,
                "theorem" => PathChoice::Theorem,
                "lognormal" => PathChoice::LogNormal,
                "oracle" => PathChoice::Oracle,
                other => {
                    return Err((EXIT_PARSE, format!("unknown method `{other}`")));
                }
            };
            let n = oracle_n(n);
            let out =
                decompose_auto(&g, &dist1, &dist2, choice, &cfg, n, alpha).map_err(|e| match e {
                DecompositionError::HypothesisFailed { .. } => (EXIT_NO_THEOREM, e.to_string()),
                DecompositionError::NoPathApplies { .. }
                | DecompositionError::NotLogNormal => (EXIT_NO_THEOREM, e.to_string()),
                other => (EXIT_NUMERIC, other.to_string()),
            })?;

            let mut rec = Record::new("decompose");
            rec.text("d1", &dist1.to_string())
                .text("d2", &dist2.to_string())
                .text("g", &g.to_string())
                .number("value", out.result.value)
                .text("method", out.result.method.as_str())
                .text("branch", &out.branch);
            if let Some((a, b)) = out.addends {
                rec.number("addend1", a).number("addend2", b);
            }
            if let Some(report) = &out.report {
                rec.text("applicability", &report.to_string());
            }
            if verify {
                let pos = AggregatePosition::counter_pair(dist1.clone(), dist2.clone());
                let sample = grid_sample(&pos, n);
                let oracle_value = riskdist_core::empirical_rho(&g, &sample);
                rec.number("oracle_value", oracle_value)
                    .number("oracle_delta", (out.result.value - oracle_value).abs());
            }
            rec.diagnostics(&out.result.diagnostics);
            write_out(&rec.render(output.format), output.out.as_ref())
        }
        Command::Dispersive {
            d1,
            d2,
            grid_n,
            output,
        } => {
            let dist1 = parse_dist(&d1)?;
            let dist2 = parse_dist(&d2)?;
            let v = check_dispersive(&dist1, &dist2, grid_n);
            let mut rec = Record::new("dispersive");
            rec.text("d1", &dist1.to_string())
                .text("d2", &dist2.to_string())
                .text("ordering", v.ordering.as_str())
                .number("max_violation", v.max_violation)
                .number("grid_size", v.grid_size as f64)
                .text("clamped", if v.clamped { "true" } else { "false" });
            write_out(&rec.render(output.format), output.out.as_ref())?;
            if v.ordering == DispersiveOrdering::Incomparable {
                return Err((
                    EXIT_INCOMPARABLE,
                    "dispersive comparison is inconclusive".to_string(),
                ));
            }
            Ok(())
        }
        Command::Verify { only, n, output } => {
            let mut vcfg = match n {
                Some(n) => riskdist_core::verification::VerificationConfig::with_oracle_n(n),
                None => riskdist_core::verification::VerificationConfig::default(),
            };
            vcfg.only = only;
            if vcfg.tolerance_scale > 1.0 {
                eprintln!(
                    "quick mode: oracle n = {}, oracle tolerances loosened {:.0}x",
                    vcfg.oracle_n, vcfg.tolerance_scale
                );
            }
            let outcomes = riskdist_core::verification::run_all(&vcfg);
            let mut rows = Rows {
                headers: vec![
                    "criterion".into(),
                    "status".into(),
                    "name".into(),
                    "cells".into(),
                    "failed".into(),
                    "worst_dev_over_tol".into(),
                    "seconds".into(),
                ],
                rows: Vec::new(),
            };
            for o in &outcomes {
                let worst = o
                    .cells
                    .iter()
                    .map(|c| c.deviation / c.tolerance)
                    .fold(0.0f64, f64::max);
                rows.rows.push(vec![
                    o.id.to_string(),
                    if o.passed { "PASS".into() } else { "FAIL".into() },
                    o.name.to_string(),
                    o.cells.len().to_string(),
                    o.failed_cells().count().to_string(),
                    format!("{worst:.3}"),
                    format!("{:.1}", o.elapsed_seconds),
                ]);
            }
            for o in &outcomes {
                eprintln!("{}", o.summary_line());
                for cell in o.failed_cells().take(16) {
                    eprintln!(
                        "    FAIL {}: deviation {:.6e} > tolerance {:.6e}",
                        cell.label, cell.deviation, cell.tolerance
                    );
                }
            }
            write_out(&rows.render(output.format), output.out.as_ref())?;
            if outcomes.iter().all(|o| o.passed) {
                Ok(())
            } else {
                Err((EXIT_NUMERIC, "verification criteria failed".to_string()))
            }
        }
        Command::Table {
            d1,
            d2,
            levels,
            n,
            output,
        } => {
            let dist1 = parse_dist(&d1)?;
            let dist2 = parse_dist(&d2)?;
            let levels = levels
                .split(',')
                .map(parse_level)
                .collect::<Result<Vec<f64>, _>>()?;
            let n = oracle_n(n);
            let table = build_pair_table(&dist1, &dist2, &levels, n, &cfg)?;
            write_out(&table.render(output.format), output.out.as_ref())
        }
    }
}

fn build_pair_table(
    d1: &Distribution,
    d2: &Distribution,
    levels: &[f64],
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<Rows, (u8, String)> {
    let mut rows = Rows {
        headers: vec![
            "p".into(),
            "var_sum".into(),
            "var_add1".into(),
            "var_add2".into(),
            "tvar_sum".into(),
            "tvar_add1".into(),
            "tvar_add2".into(),
            "wt_sum".into(),
            "wt_add1".into(),
            "wt_add2".into(),
            "branch".into(),
        ],
        rows: Vec::new(),
    };
    let identical_ln = match (d1, d2) {
        (
            Distribution::LogNormal { mu: m1, sigma: s1 },
            Distribution::LogNormal { mu: m2, sigma: s2 },
        ) if (m1 - m2).abs() <= 1e-12 && (s1 - s2).abs() <= 1e-12 => Some((*m1, *s1)),
        _ => None,
    };

    for &p in levels {
        let mut row: Vec<String> = vec![sig12(p)];
        if let Ok(v) = var_counter_sum(d1, d2, p) {
            // theorem path: all three closed decompositions
            let t = tvar_counter_sum(d1, d2, p, cfg)
                .map_err(|e| (EXIT_NUMERIC, e.to_string()))?;
            let w = wt_counter_sum(d1, d2, p, cfg).map_err(|e| (EXIT_NUMERIC, e.to_string()))?;
            for out in [&v, &t, &w] {
                row.push(sig12(out.result.value));
                row.push(sig12(out.addends.0));
                row.push(sig12(out.addends.1));
            }
            row.push("theorem".into());
        } else if let Some((mu, sigma)) = identical_ln {
            let z = riskdist_core::special::norm_quantile(0.5 * (1.0 - p));
            let var_lo = (mu + sigma * z).exp();
            let var_hi = (mu - sigma * z).exp();
            row.push(sig12(lognormal_identical_var(mu, sigma, p)));
            row.push(sig12(var_lo));
            row.push(sig12(var_hi));
            row.push(sig12(lognormal_identical_tvar(mu, sigma, p)));
            row.push(String::new());
            row.push(String::new());
            let g = Distortion::wang_transform(p).map_err(|e| (EXIT_PARSE, e.to_string()))?;
            let wt = lognormal_identical_rho(&g, mu, sigma, cfg)
                .map_err(|e| (EXIT_NUMERIC, e.to_string()))?;
            row.push(sig12(wt));
            row.push(String::new());
            row.push(String::new());
            row.push("lognormal".into());
        } else {
            // oracle fallback: sums only
            let pos = AggregatePosition::counter_pair(d1.clone(), d2.clone());
            let sample = grid_sample(&pos, n);
            for g in [
                Distortion::var_indicator(p),
                Distortion::tvar_cap(p),
                Distortion::wang_transform(p),
            ] {
                let g = g.map_err(|e| (EXIT_PARSE, e.to_string()))?;
                row.push(sig12(riskdist_core::empirical_rho(&g, &sample)));
                row.push(String::new());
                row.push(String::new());
            }
            row.push(format!("oracle(n={n})"));
        }
        rows.rows.push(row);
    }
    Ok(rows)
}
