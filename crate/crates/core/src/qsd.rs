//! Quasi-stationarity of the two killed chains, evaluated from matrix powers.
//!
//! Started from `π̂_I` and killed on entering `E`, the chain survives `n`
//! steps with probability `π(I)^n`, exits with law `π̂_E`, and the exit state
//! is independent of the exit time. The mirror statements hold on `E` with
//! `π(E)` and `π̂_I`. Every residual here is exact arithmetic on a valid
//! completion, so the reports double as validators.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::linalg::{normalized, sup_dist};
use crate::model::CompletedChain;
use crate::{tol, Error, Result};

/// Steps over which conditional invariance is checked.
const CONDITIONAL_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Visible,
    Hidden,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QsdReport {
    pub side: Side,
    pub horizon: usize,
    /// `ρ`, the per-step survival probability.
    pub rho: f64,
    /// `P(τ > n)` for `n = 0..=horizon`.
    pub survival: Vec<f64>,
    /// `sup_n |P(τ > n) − ρ^n|`.
    pub geometric_residual: f64,
    #[serde(with = "crate::serde_matrix::vector")]
    pub exit_law: Array1<f64>,
    /// Sup distance from `exit_law` to the normalized weights of the other side.
    pub exit_law_residual: f64,
    /// `sup_{s, 1 ≤ n ≤ horizon} |P(X_τ = s, τ = n) − exit_law(s) P(τ = n)|`.
    pub independence_residual: f64,
    /// `sup_{n ≤ min(20, horizon)} |π̂ᵗ P^n / ρ^n − π̂ᵗ|`.
    pub conditional_residual: f64,
}

impl QsdReport {
    pub fn max_residual(&self) -> f64 {
        self.geometric_residual
            .max(self.exit_law_residual)
            .max(self.independence_residual)
            .max(self.conditional_residual)
    }
}

fn report(
    side: Side,
    start: ArrayView1<f64>,
    block: ArrayView2<f64>,
    exits: ArrayView2<f64>,
    rho: f64,
    exit_law: Array1<f64>,
    target: ArrayView1<f64>,
    horizon: usize,
) -> QsdReport {
    let mut survival = Vec::with_capacity(horizon + 1);
    let mut geometric_residual = 0.0f64;
    let mut independence_residual = 0.0f64;
    let mut conditional_residual = 0.0f64;

    // x = π̂ᵗ P_block^n
    let mut x = start.to_owned();
    for n in 0..=horizon {
        let alive = x.sum();
        survival.push(alive);
        let rho_n = rho.powi(n as i32);
        geometric_residual = geometric_residual.max((alive - rho_n).abs());
        if n <= CONDITIONAL_STEPS {
            conditional_residual = conditional_residual.max(sup_dist(x.mapv(|v| v / rho_n).view(), start));
        }
        if n == horizon {
            break;
        }
        // Killed exactly at step n + 1.
        let joint = x.dot(&exits);
        let p_exit = joint.sum();
        for (j, l) in joint.iter().zip(&exit_law) {
            independence_residual = independence_residual.max((j - l * p_exit).abs());
        }
        x = x.dot(&block);
    }

    QsdReport {
        side,
        horizon,
        rho,
        survival,
        geometric_residual,
        exit_law_residual: sup_dist(exit_law.view(), target),
        exit_law,
        independence_residual,
        conditional_residual,
    }
}

fn require_visible(chain: &CompletedChain) -> Result<usize> {
    match chain.states().n_visible() {
        0 => Err(Error::spec("quasi-stationarity reports need at least one visible state")),
        n => Ok(n),
    }
}

/// The chain started from `π̂_I` and killed on entering `E`.
pub fn qsd_report_visible(chain: &CompletedChain, horizon: usize) -> Result<QsdReport> {
    let ni = require_visible(chain)?;
    let p = chain.full_matrix();
    let rho = chain.visible_mass();
    let pihat_i = chain.pihat_i();
    let p_ie = p.slice(s![..ni, ni..]);
    // Σ_n π̂ᵗ P_II^{n−1} P_IE = π̂ᵗ P_IE / (1 − π(I)) once π̂_I is quasi-stationary.
    let exit_law = pihat_i.dot(&p_ie).mapv(|v| v / (1.0 - rho));
    Ok(report(
        Side::Visible,
        pihat_i.view(),
        p.slice(s![..ni, ..ni]),
        p_ie,
        rho,
        exit_law,
        chain.pihat_e().view(),
        horizon,
    ))
}

/// The chain started from `π̂_E` and killed on entering `I`.
pub fn qsd_report_hidden(chain: &CompletedChain, horizon: usize) -> Result<QsdReport> {
    let ni = require_visible(chain)?;
    let p = chain.full_matrix();
    let rho = chain.hidden_mass();
    let pihat_e = chain.pihat_e();
    let p_ei = p.slice(s![ni.., ..ni]);
    let exit_law = pihat_e.dot(&p_ei).mapv(|v| v / (1.0 - rho));
    Ok(report(
        Side::Hidden,
        pihat_e.view(),
        p.slice(s![ni.., ni..]),
        p_ei,
        rho,
        exit_law,
        chain.pihat_i().view(),
        horizon,
    ))
}

/// Both reports at the default horizon.
pub fn qsd_reports(chain: &CompletedChain) -> Result<[QsdReport; 2]> {
    Ok([
        qsd_report_visible(chain, tol::QSD_HORIZON)?,
        qsd_report_hidden(chain, tol::QSD_HORIZON)?,
    ])
}

/// Exit law from the series `Σ_{n ≥ 1} π̂ᵗ P^{n−1} X`, truncated once the
/// surviving mass drops below `1e-16`. A cross-check on the closed form.
pub fn exit_law_series(start: &Array1<f64>, block: &Array2<f64>, exits: &Array2<f64>) -> Array1<f64> {
    let mut x = normalized(start.view());
    let mut acc = Array1::zeros(exits.ncols());
    for _ in 0..100_000 {
        acc += &x.dot(exits);
        x = x.dot(block);
        if x.sum() < 1e-16 {
            break;
        }
    }
    acc
}
