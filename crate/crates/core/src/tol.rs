//! Tolerances shared across the crate.
//!
//! Identity checks are sup-norm residuals. Inputs are usually hand-entered
//! decimals, so residuals of valid data sit at rounding level.

/// Default tolerance for hypothesis and completion identities.
pub const IDENTITY: f64 = 1e-9;

/// Sup-norm bound on the relative change of the column scaling between sweeps.
pub const SCALING_TOL: f64 = 1e-12;

/// Sweep budget for the product-form iteration.
pub const SCALING_MAX_ITER: usize = 100_000;

/// A scaling vector whose max/min ratio exceeds this has diverged.
pub const SCALING_BLOWUP: f64 = 1e12;

/// Sweeps without a new minimal change before the iteration is declared stuck.
pub const SCALING_STALL: usize = 1000;

/// Residual allowed on LP witnesses.
pub const LP_FEASIBILITY: f64 = 1e-9;

/// `bᵗy` must be at most minus this for a certificate to count.
pub const LP_CERTIFICATE_MARGIN: f64 = 1e-9;

/// Smallest admissible simplex pivot.
pub const LP_PIVOT: f64 = 1e-11;

/// Power-iteration stopping tolerance for Perron-Frobenius data.
pub const POWER_TOL: f64 = 1e-14;

pub const POWER_MAX_ITER: usize = 1_000_000;

/// Default horizon for quasi-stationarity reports.
pub const QSD_HORIZON: usize = 50;

/// Minimum trace length for a statistical verdict.
pub const MIN_TRACE: usize = 100_000;

/// Number of binomial standard errors tolerated per transition entry.
pub const SIGMA_BAND: f64 = 3.0;

/// Entries with `π(a)P(a,b)` below this are not checked individually.
pub const MIN_JOINT_MASS: f64 = 1e-3;

/// Chi-square significance level for the renewal-gap test.
pub const CHI_SQUARE_LEVEL: f64 = 0.01;

/// Total-variation bound for the law of the chain at renewal times.
pub const RENEWAL_TV: f64 = 0.01;
