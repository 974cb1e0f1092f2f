//! Maximum-entropy completions of the hidden block.
//!
//! With `P̂ = π(E)⁻¹ P_EE`, maximizing the entropy of the whole chain is the
//! same as maximizing the entropy rate of `P̂` under its prescribed stationary
//! law `π̂_E`. Without support constraints the optimum is Bernoulli. Under a
//! communication matrix `L` it has product form `P̂(d,e) = α(d) β(e)` on the
//! edges of `L`, where
//!
//! ```text
//! β(e) = π̂(e) / Σ_{d: L(d,e)=1} π̂(d) α(d),      α(d) = 1 / Σ_{c: L(d,c)=1} β(c).
//! ```
//!
//! Iterating the `β` equation is Sinkhorn scaling of the joint law
//! `M(d,e) = π̂(d) P̂(d,e)` toward the marginals `(π̂, π̂)` on the support of `L`.

use std::fmt;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::entropy::entropy_rate;
use crate::feasibility::{build_system, solve_feasibility};
use crate::linalg::{is_irreducible, normalized, row_sums, row_times, sup_dist};
use crate::model::{derive_quantities, CompletedChain, CompletionMode, PartialChainSpec};
use crate::{tol, Error, Result};

/// `P_EE(d, e) = π_E(e)`: every hidden row restarts from the hidden stationary law.
pub fn complete_bernoulli(spec: &PartialChainSpec) -> Result<CompletedChain> {
    let d = derive_quantities(spec)?;
    let p_hat = bernoulli_block(&d.pihat_e);
    CompletedChain::build(spec, hidden_block(d.pi_e_mass, &p_hat), CompletionMode::Bernoulli, tol::IDENTITY)
}

/// `1 π̂ᵗ`.
pub fn bernoulli_block(pihat: &Array1<f64>) -> Array2<f64> {
    let n = pihat.len();
    Array2::from_shape_fn((n, n), |(_, e)| pihat[e])
}

/// `P_EE = π(E) · P̂`.
pub fn hidden_block(row_mass: f64, p_hat: &Array2<f64>) -> Array2<f64> {
    p_hat.mapv(|x| row_mass * x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedOptions {
    /// Bound on the sup-norm relative change of `β` between sweeps.
    pub tol: f64,
    pub max_iter: usize,
    /// Hidden index `e₀` pinned to `β(e₀) = 1`.
    pub anchor: usize,
}

impl Default for ConstrainedOptions {
    fn default() -> Self {
        ConstrainedOptions {
            tol: tol::SCALING_TOL,
            max_iter: tol::SCALING_MAX_ITER,
            anchor: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    /// `max β / min β` exceeded the blow-up bound.
    ScalingBlowup,
    /// No new minimal change for the stall window.
    Stagnation,
    MaxIterations,
    /// Converged scalings whose matrix still misses the constraints.
    Residual,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Divergence::ScalingBlowup => "scalings blew up",
            Divergence::Stagnation => "iterate change stagnated",
            Divergence::MaxIterations => "iteration budget exhausted",
            Divergence::Residual => "constraint residual too large",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Telemetry {
    pub iterations: usize,
    /// Sup-norm violation of the row-sum and stationarity constraints of `P̂`.
    pub residual: f64,
}

/// Product-form maximum-entropy solution on one labyrinth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxentSolution {
    #[serde(with = "crate::serde_matrix::matrix")]
    pub p_hat: Array2<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub alpha: Array1<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub beta: Array1<f64>,
    pub anchor_index: usize,
    #[serde(rename = "entropy_hZ")]
    pub entropy_hz: f64,
    #[serde(rename = "entropy_Hprime")]
    pub entropy_hprime: f64,
    pub telemetry: Telemetry,
}

impl MaxentSolution {
    pub fn iterations(&self) -> usize {
        self.telemetry.iterations
    }

    pub fn residual(&self) -> f64 {
        self.telemetry.residual
    }

    /// `max |P̂(d,e) − α(d)β(e)|` over the edges of `comm`.
    pub fn product_form_gap(&self, comm: &Array2<f64>) -> f64 {
        comm.indexed_iter()
            .map(|((d, e), &l)| {
                let want = if l == 1.0 { self.alpha[d] * self.beta[e] } else { 0.0 };
                (self.p_hat[[d, e]] - want).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Row-sum and stationarity residual of a candidate `P̂`.
pub fn constraint_residual(p_hat: &Array2<f64>, pihat: &Array1<f64>) -> f64 {
    let rows = row_sums(p_hat.view()).iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    let stat = sup_dist(row_times(pihat.view(), p_hat.view()).view(), pihat.view());
    rows.max(stat)
}

fn product(alpha: &Array1<f64>, beta: &Array1<f64>, comm: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn(comm.dim(), |(d, e)| {
        if comm[[d, e]] == 1.0 {
            alpha[d] * beta[e]
        } else {
            0.0
        }
    })
}

fn alpha_of(beta: &Array1<f64>, comm: &Array2<f64>) -> Array1<f64> {
    Array1::from_shape_fn(beta.len(), |d| {
        let s: f64 = (0..beta.len()).filter(|&c| comm[[d, c]] == 1.0).map(|c| beta[c]).sum();
        1.0 / s
    })
}

/// Solves the product-form equations for stationary law `pihat` on the support of `comm`.
///
/// `row_mass` is `π(E)`; it only enters the reported `H'`.
pub fn solve_product_form(
    pihat: &Array1<f64>,
    comm: &Array2<f64>,
    row_mass: f64,
    opts: &ConstrainedOptions,
) -> Result<MaxentSolution> {
    let n = pihat.len();
    if comm.dim() != (n, n) {
        return Err(Error::dim(format!("L is {:?}, expected {n}x{n}", comm.dim())));
    }
    if opts.anchor >= n {
        return Err(Error::dim(format!("anchor {} outside 0..{n}", opts.anchor)));
    }
    if pihat.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::spec("the hidden stationary law must be strictly positive"));
    }
    if !is_irreducible(comm) {
        return Err(Error::Reducible { what: "communication matrix L" });
    }

    let mut beta = Array1::<f64>::ones(n);
    let mut best_change = f64::INFINITY;
    let mut stalled = 0;
    let mut outcome = Err(Divergence::MaxIterations);
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        let alpha = alpha_of(&beta, comm);
        let mut next = Array1::from_shape_fn(n, |e| {
            let inflow: f64 = (0..n).filter(|&d| comm[[d, e]] == 1.0).map(|d| pihat[d] * alpha[d]).sum();
            pihat[e] / inflow
        });
        let pin = next[opts.anchor];
        next.mapv_inplace(|x| x / pin);

        let change = next.iter().zip(&beta).fold(0.0f64, |m, (a, b)| m.max((a / b - 1.0).abs()));
        beta = next;

        let (lo, hi) = beta.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if !(hi / lo <= tol::SCALING_BLOWUP) {
            outcome = Err(Divergence::ScalingBlowup);
            break;
        }
        if change <= opts.tol {
            outcome = Ok(());
            break;
        }
        if change < best_change {
            best_change = change;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= tol::SCALING_STALL {
                outcome = Err(Divergence::Stagnation);
                break;
            }
        }
    }

    let alpha = alpha_of(&beta, comm);
    let p_hat = product(&alpha, &beta, comm);
    let residual = constraint_residual(&p_hat, pihat);
    let outcome = outcome.and_then(|()| {
        if residual <= tol::IDENTITY {
            Ok(())
        } else {
            Err(Divergence::Residual)
        }
    });

    if let Err(reason) = outcome {
        return Err(classify_divergence(pihat, comm, &p_hat, reason, iterations, residual));
    }

    if let Some(((d, e), _)) = comm.indexed_iter().find(|&((d, e), &l)| l == 1.0 && p_hat[[d, e]] == 0.0) {
        return Err(Error::DegenerateSupport { row: d, col: e, iterations });
    }

    let entropy_hz = entropy_rate(p_hat.view(), pihat.view());
    let block = hidden_block(row_mass, &p_hat);
    let entropy_hprime = entropy_rate(block.view(), pihat.mapv(|x| row_mass * x).view());

    Ok(MaxentSolution {
        p_hat,
        alpha,
        beta,
        anchor_index: opts.anchor,
        entropy_hz,
        entropy_hprime,
        telemetry: Telemetry { iterations, residual },
    })
}

/// A stalled scaling either means the support admits no completion at all, or
/// only completions with forced zeros on some allowed edges. The LP tells
/// the two apart.
fn classify_divergence(
    pihat: &Array1<f64>,
    comm: &Array2<f64>,
    last: &Array2<f64>,
    reason: Divergence,
    iterations: usize,
    residual: f64,
) -> Error {
    let feasible = build_system(pihat, comm)
        .and_then(|sys| solve_feasibility(&sys))
        .map(|o| o.is_feasible());
    match feasible {
        Ok(true) => {
            let (row, col) = comm
                .indexed_iter()
                .filter(|(_, &l)| l == 1.0)
                .map(|(ix, _)| ix)
                .min_by(|&a, &b| last[a].total_cmp(&last[b]))
                .unwrap_or((0, 0));
            Error::DegenerateSupport { row, col, iterations }
        }
        _ => Error::InfeasibleOrDegenerate {
            reason,
            iterations,
            residual,
        },
    }
}

/// Product-form completion of `spec` under its communication matrix.
pub fn complete_constrained(spec: &PartialChainSpec, opts: &ConstrainedOptions) -> Result<MaxentSolution> {
    let comm = spec
        .comm()
        .ok_or_else(|| Error::spec("constrained completion needs a communication matrix L"))?;
    let d = derive_quantities(spec)?;
    solve_product_form(&d.pihat_e, comm, d.pi_e_mass, opts)
}

/// [`complete_constrained`] assembled into a full chain.
pub fn complete_constrained_chain(
    spec: &PartialChainSpec,
    opts: &ConstrainedOptions,
) -> Result<(CompletedChain, MaxentSolution)> {
    let sol = complete_constrained(spec, opts)?;
    let mass = 1.0 - spec.visible_mass();
    let chain = CompletedChain::build(spec, hidden_block(mass, &sol.p_hat), CompletionMode::Constrained, tol::IDENTITY)?;
    Ok((chain, sol))
}

/// Perron-Frobenius data of `L` and the induced Parry chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParryMeasure {
    #[serde(with = "crate::serde_matrix::matrix")]
    pub p_hat: Array2<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub stationary: Array1<f64>,
    pub lambda: f64,
    pub log_lambda: f64,
    /// Right eigenvector `φ`, summing to one.
    #[serde(with = "crate::serde_matrix::vector")]
    pub right: Array1<f64>,
    /// Left eigenvector `ν`, scaled so `Σ ν(d) φ(d) = 1`.
    #[serde(with = "crate::serde_matrix::vector")]
    pub left: Array1<f64>,
    /// Entropy rate of `p_hat` under `stationary`.
    pub entropy: f64,
    pub iterations: usize,
}

/// Power iteration on `L + I`, which shares eigenvectors with `L` and is primitive.
fn perron_vector(m: &Array2<f64>) -> (Array1<f64>, usize) {
    let n = m.nrows();
    let shifted = m + &Array2::<f64>::eye(n);
    let mut x = Array1::from_elem(n, 1.0 / n as f64);
    let mut iterations = 0;
    for it in 1..=tol::POWER_MAX_ITER {
        iterations = it;
        let next = normalized(shifted.dot(&x).view());
        let change = sup_dist(next.view(), x.view());
        x = next;
        if change <= tol::POWER_TOL {
            break;
        }
    }
    (x, iterations)
}

/// Maximum-entropy chain on the topological Markov shift of `comm`.
pub fn complete_parry(comm: &Array2<f64>) -> Result<ParryMeasure> {
    let n = comm.nrows();
    if comm.ncols() != n {
        return Err(Error::dim("L must be square"));
    }
    if comm.iter().any(|&x| x != 0.0 && x != 1.0) {
        return Err(Error::spec("L must be 0-1 valued"));
    }
    if !is_irreducible(comm) {
        return Err(Error::Reducible { what: "communication matrix L" });
    }
    let (phi, it_r) = perron_vector(comm);
    let (nu, it_l) = perron_vector(&comm.t().to_owned());
    let lambda = nu.dot(&comm.dot(&phi)) / nu.dot(&phi);
    let nu = nu.mapv(|x| x / nu.dot(&phi));

    let p_hat = Array2::from_shape_fn((n, n), |(d, e)| comm[[d, e]] * phi[e] / (lambda * phi[d]));
    let stationary = &nu * &phi;
    let entropy = entropy_rate(p_hat.view(), stationary.view());
    Ok(ParryMeasure {
        p_hat,
        stationary,
        lambda,
        log_lambda: lambda.ln(),
        right: phi,
        left: nu,
        entropy,
        iterations: it_r.max(it_l),
    })
}

/// Matrix with every entry `1/n`.
pub fn complete_uniform(n: usize) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::dim("uniform completion needs at least one state"));
    }
    Ok(Array2::from_elem((n, n), 1.0 / n as f64))
}

/// Completion of a spec without visible states: Parry when `L` is given, uniform otherwise.
pub fn complete_hidden_only(spec: &PartialChainSpec) -> Result<CompletedChain> {
    if !spec.is_hidden_only() {
        return Err(Error::spec("uniform and Parry completions apply only when there are no visible states"));
    }
    let n = spec.states().n_hidden();
    match spec.comm() {
        Some(l) => {
            let parry = complete_parry(l)?;
            CompletedChain::hidden_only(spec, parry.p_hat, parry.stationary, CompletionMode::Parry, tol::IDENTITY)
        }
        None => CompletedChain::hidden_only(
            spec,
            complete_uniform(n)?,
            Array1::from_elem(n, 1.0 / n as f64),
            CompletionMode::Uniform,
            tol::IDENTITY,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::entropy_full;
    use ndarray::array;

    fn fixture(name: &str) -> PartialChainSpec {
        let path = format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
        PartialChainSpec::from_json_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn bernoulli_rows_equal_hidden_weights() {
        let chain = complete_bernoulli(&fixture("desk")).unwrap();
        for row in chain.p_ee().outer_iter() {
            assert!((row[0] - 0.15).abs() < 1e-15);
            assert!((row[1] - 0.25).abs() < 1e-15);
        }
        assert_eq!(chain.mode(), CompletionMode::Bernoulli);
    }

    #[test]
    fn single_hidden_state_bernoulli() {
        let spec = PartialChainSpec::from_json_str(
            r#"{"visible":["x"],"hidden":["h"],"P_II":[[0.5]],"P_IE":[[0.5]],"P_EI":[[0.5]],"pi_I":[0.5]}"#,
        )
        .unwrap();
        let chain = complete_bernoulli(&spec).unwrap();
        assert_eq!(chain.p_ee(), &array![[0.5]]);
        let e = entropy_full(&chain);
        assert!((e.h_x - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn all_ones_recovers_bernoulli() {
        let pihat = array![0.2, 0.3, 0.5];
        let sol = solve_product_form(&pihat, &Array2::ones((3, 3)), 0.4, &Default::default()).unwrap();
        for d in 0..3 {
            assert!((sol.alpha[d] - pihat[0]).abs() < 1e-12);
            for e in 0..3 {
                assert!((sol.p_hat[[d, e]] - pihat[e]).abs() < 1e-12);
            }
        }
        for e in 0..3 {
            assert!((sol.beta[e] - pihat[e] / pihat[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn cycle_with_self_loops() {
        let sol = complete_constrained(&fixture("cycle"), &Default::default()).unwrap();
        let comm = array![[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]];
        assert_eq!(sol.product_form_gap(&comm), 0.0);
        assert!(sol.residual() <= 1e-12);
        assert_eq!(sol.beta[0], 1.0);
        assert!(is_irreducible(&sol.p_hat));
    }

    #[test]
    fn three_state_pattern_diverges() {
        let pihat = array![0.6, 0.25, 0.15];
        let comm = Array2::ones((3, 3)) - Array2::<f64>::eye(3);
        let err = solve_product_form(&pihat, &comm, 0.4, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleOrDegenerate { .. }), "{err}");
        let err = complete_constrained(&fixture("infeasible"), &Default::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleOrDegenerate { .. }), "{err}");
    }

    #[test]
    fn forced_zero_support_is_degenerate() {
        // Column 1 needs all of rows 2 and 3, so the edges 2→3 and 3→2 are forced to zero.
        let pihat = array![0.5, 0.25, 0.25];
        let comm = Array2::ones((3, 3)) - Array2::<f64>::eye(3);
        let opts = ConstrainedOptions { max_iter: 20_000, ..Default::default() };
        match solve_product_form(&pihat, &comm, 0.4, &opts).unwrap_err() {
            Error::DegenerateSupport { row, col, .. } => {
                assert!((row, col) == (1, 2) || (row, col) == (2, 1), "{row},{col}")
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn anchor_does_not_change_the_matrix() {
        let pihat = array![0.25, 0.3, 0.2, 0.25];
        let comm = array![
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, 0.0, 1.0],
            [1.0, 1.0, 0.0, 1.0]
        ];
        let base = solve_product_form(&pihat, &comm, 0.5, &Default::default()).unwrap();
        for anchor in 1..4 {
            let opts = ConstrainedOptions { anchor, ..Default::default() };
            let other = solve_product_form(&pihat, &comm, 0.5, &opts).unwrap();
            assert_eq!(other.beta[anchor], 1.0);
            assert!(sup_dist_m(&base.p_hat, &other.p_hat) < 1e-10);
        }
    }

    fn sup_dist_m(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn reducible_comm_is_rejected() {
        let err = solve_product_form(&array![0.5, 0.5], &array![[1.0, 1.0], [0.0, 1.0]], 0.4, &Default::default())
            .unwrap_err();
        assert!(matches!(err, Error::Reducible { .. }));
        assert!(matches!(complete_parry(&array![[1.0, 1.0], [0.0, 1.0]]), Err(Error::Reducible { .. })));
    }

    #[test]
    fn parry_all_ones() {
        let p = complete_parry(&Array2::ones((2, 2))).unwrap();
        assert!((p.lambda - 2.0).abs() < 1e-12);
        assert!(p.p_hat.iter().all(|&x| (x - 0.5).abs() < 1e-12));
        assert!(p.stationary.iter().all(|&x| (x - 0.5).abs() < 1e-12));
        assert!((p.entropy - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn parry_golden_mean() {
        let p = complete_parry(&array![[1.0, 1.0], [1.0, 0.0]]).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.lambda - golden).abs() < 1e-12);
        assert!((p.entropy - golden.ln()).abs() < 1e-12);
        assert!((p.log_lambda - 0.481_211_825_059_603_4).abs() < 1e-12);
    }

    #[test]
    fn parry_cycle_is_the_shift() {
        let l = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let p = complete_parry(&l).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12);
        assert!(sup_dist_m(&p.p_hat, &l) < 1e-12);
        assert!(p.entropy.abs() < 1e-12);
    }

    #[test]
    fn parry_eigen_residuals() {
        let l = array![[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]];
        let p = complete_parry(&l).unwrap();
        let right = l.dot(&p.right) - p.right.mapv(|x| p.lambda * x);
        let left = p.left.dot(&l) - p.left.mapv(|x| p.lambda * x);
        assert!(right.iter().chain(left.iter()).all(|r| r.abs() <= 1e-10));
        let stat = row_times(p.stationary.view(), p.p_hat.view());
        assert!(sup_dist(stat.view(), p.stationary.view()) <= 1e-10);
        assert!((p.left.dot(&p.right) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_sizes() {
        assert_eq!(complete_uniform(1).unwrap(), array![[1.0]]);
        assert!(complete_uniform(4).unwrap().iter().all(|&x| x == 0.25));
        assert!(matches!(complete_uniform(0), Err(Error::Dimension(_))));
    }

    #[test]
    fn hidden_only_dispatch() {
        let chain = complete_hidden_only(&fixture("hidden_uniform")).unwrap();
        assert_eq!(chain.mode(), CompletionMode::Uniform);
        let chain = complete_hidden_only(&fixture("golden_mean")).unwrap();
        assert_eq!(chain.mode(), CompletionMode::Parry);
        assert!(complete_hidden_only(&fixture("desk")).is_err());
    }

    #[test]
    fn solution_json_has_telemetry() {
        let sol = complete_constrained(&fixture("cycle"), &Default::default()).unwrap();
        let v = serde_json::to_value(&sol).unwrap();
        assert!(v["telemetry"]["iterations"].as_u64().unwrap() > 0);
        assert_eq!(v["p_hat"].as_array().unwrap().len(), 3);
        assert!(v.get("entropy_hZ").is_some());
    }
}
