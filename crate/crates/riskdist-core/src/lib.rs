//! Distortion risk measures of single risks and of comonotonic /
//! counter-monotonic sums.
//!
//! The crate computes `rho_g[X]` for a closed family of distortion
//! functions and univariate distributions, evaluates the decomposition
//! `rho_g[S-] = rho_g[X1] + rho_gbar[X2]` of a counter-monotonic sum with
//! all applicability checks (symmetry, strictly increasing cdfs, dispersive
//! order), the closed-form corollaries for VaR / TVaR / Wang Transform,
//! the log-normal machinery with U-shaped aggregate quantiles, and an
//! independent brute-force grid oracle used to validate every closed form.

pub mod decomposition;
pub mod dependence;
pub mod distortion;
pub mod distributions;
pub mod oracle;
pub mod quadrature;
pub mod risk_measures;
pub mod special;
pub mod verification;

pub use decomposition::{
    decompose_auto, lognormal_identical_rho, lognormal_identical_tvar, lognormal_identical_var,
    lognormal_phi_minimizer, lognormal_root_set, lognormal_tvar_counter, lognormal_var_counter,
    mixed_normal_portfolio_rho, rho_counter_sum, tvar_counter_sum, var_counter_sum,
    wt_counter_sum, ApplicabilityReport, AutoOutcome, DecompositionError, DecompositionOutcome,
    Orientation, PathChoice, RootPair,
};
pub use dependence::{
    aggregate_quantile, check_dispersive, check_dispersive_on_grid, comonotonic_rho,
    counter_sum_quantile, frechet_lower, frechet_upper, AggregatePosition, DependenceError,
    Direction, DispersiveOrdering, DispersiveVerdict,
};
pub use distortion::{ContinuityClass, Distortion, DistortionError, Jump, JumpSet};
pub use distributions::{Distribution, DistributionError, SymmetryInfo};
pub use oracle::{
    empirical_quantile, empirical_rho, grid_sample, xside_rho, OracleSample, QuantileSide,
};
pub use risk_measures::{
    ltvar, rho, tvar, var, wang_measure, MeasureResult, Method, QuadratureConfig, RiskError,
};
