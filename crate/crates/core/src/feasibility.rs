//! Linear feasibility of the support-constrained completion problem.
//!
//! The unknown stochastic matrix `P̂` on `E` (size `ℓ`) is flattened column
//! by column, `p[t + s·ℓ] = P̂(t, s)` with zero-based `t, s`. Three `ℓ × ℓ²`
//! blocks stack into `D`:
//!
//! * `A(r, t + sℓ) = δ(t, r)`: row sums of `P̂`, right-hand side `1`;
//! * `B(r, t + sℓ) = π̂(t) δ(s, r)`: stationarity, right-hand side `π̂(r)`;
//! * `C(r, t + sℓ) = (1 − L(t, r)) δ(s, r)`: forbidden mass entering `r`, right-hand side `0`.
//!
//! `D p = b, p ≥ 0` is solvable exactly when a completion on the support of
//! `L` exists. Otherwise Farkas' lemma yields `y = (u, v, w)` with `Dᵗy ≥ 0`
//! and `bᵗy < 0`. The `w` part can always be rebuilt from `(u, v)`, so a
//! certificate is checked through
//!
//! * `Σ_r u(r) + π̂(r) v(r) < 0`, and
//! * `u(t) + v(s) π̂(t) ≥ 0` whenever `L(t, s) = 1`.

use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

use crate::linalg::sup_abs;
use crate::lp::{self, LpError, PhaseOne};
use crate::{tol, Error, Result};

/// The stacked system `D p = b` for one `(π̂, L)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub d: Array2<f64>,
    pub b: Array1<f64>,
    pub ell: usize,
    pihat: Array1<f64>,
    comm: Array2<f64>,
}

pub fn build_system(pihat: &Array1<f64>, comm: &Array2<f64>) -> Result<LinearSystem> {
    let ell = pihat.len();
    if comm.dim() != (ell, ell) {
        return Err(Error::dim(format!(
            "L is {}x{}, expected {ell}x{ell}",
            comm.nrows(),
            comm.ncols()
        )));
    }
    if ell == 0 {
        return Err(Error::dim("empty hidden set"));
    }
    let mut d = Array2::zeros((3 * ell, ell * ell));
    for s in 0..ell {
        for t in 0..ell {
            let col = t + s * ell;
            d[[t, col]] = 1.0;
            d[[ell + s, col]] = pihat[t];
            d[[2 * ell + s, col]] = 1.0 - comm[[t, s]];
        }
    }
    let mut b = Array1::zeros(3 * ell);
    b.slice_mut(ndarray::s![..ell]).fill(1.0);
    b.slice_mut(ndarray::s![ell..2 * ell]).assign(pihat);
    Ok(LinearSystem {
        d,
        b,
        ell,
        pihat: pihat.clone(),
        comm: comm.clone(),
    })
}

impl LinearSystem {
    pub fn pihat(&self) -> &Array1<f64> {
        &self.pihat
    }

    pub fn comm(&self) -> &Array2<f64> {
        &self.comm
    }

    /// Flattens `P̂` column by column.
    pub fn encode(&self, p_hat: ArrayView2<f64>) -> Array1<f64> {
        let l = self.ell;
        Array1::from_shape_fn(l * l, |k| p_hat[[k % l, k / l]])
    }

    pub fn decode(&self, p: &Array1<f64>) -> Array2<f64> {
        let l = self.ell;
        Array2::from_shape_fn((l, l), |(t, s)| p[t + s * l])
    }

    /// Sup-norm residuals of row sums, stationarity and forbidden mass of `P̂`.
    pub fn witness_residuals(&self, p_hat: ArrayView2<f64>) -> [f64; 3] {
        let l = self.ell;
        let mut rows = 0.0f64;
        let mut stat = 0.0f64;
        let mut forbidden = 0.0f64;
        for t in 0..l {
            rows = rows.max((p_hat.row(t).sum() - 1.0).abs());
        }
        for s in 0..l {
            let col: f64 = (0..l).map(|t| self.pihat[t] * p_hat[[t, s]]).sum();
            stat = stat.max((col - self.pihat[s]).abs());
            for t in 0..l {
                if self.comm[[t, s]] == 0.0 {
                    forbidden = forbidden.max(p_hat[[t, s]].abs());
                }
            }
        }
        [rows, stat, forbidden]
    }

    pub fn is_witness(&self, p_hat: ArrayView2<f64>, tol: f64) -> bool {
        p_hat.iter().all(|&x| x >= 0.0) && self.witness_residuals(p_hat).iter().all(|&r| r <= tol)
    }

    /// A vertex of the feasible polytope minimizing `Σ cost(t,s) P̂(t,s)`.
    /// `Ok(None)` if the polytope is empty.
    pub fn vertex_minimizing(&self, cost: &Array2<f64>) -> Result<Option<Array2<f64>>> {
        let c = self.encode(cost.view());
        match lp::minimize(self.d.view(), self.b.view(), c.view()) {
            Ok(Some(p)) => Ok(Some(self.clean(&p))),
            Ok(None) => Ok(None),
            Err(e) => Err(lp_failure(e)),
        }
    }

    fn clean(&self, p: &Array1<f64>) -> Array2<f64> {
        let mut m = self.decode(p);
        for ((t, s), x) in m.indexed_iter_mut() {
            if *x < 0.0 || self.comm[[t, s]] == 0.0 && x.abs() <= tol::LP_FEASIBILITY {
                *x = 0.0;
            }
        }
        m
    }
}

fn lp_failure(e: LpError) -> Error {
    match e {
        LpError::PivotLimit => Error::Indeterminate("simplex pivot limit reached".into()),
        LpError::Unbounded => Error::Indeterminate("phase two reported an unbounded ray on a bounded polytope".into()),
    }
}

/// Farkas certificate in `(u, v, w)` form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(with = "crate::serde_matrix::vector")]
    pub u: Array1<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub v: Array1<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub w: Array1<f64>,
}

impl Certificate {
    /// `Σ_r u(r) + π̂(r) v(r)`; negative for a valid certificate.
    pub fn objective(&self, pihat: &Array1<f64>) -> f64 {
        (0..self.u.len()).map(|r| self.u[r] + pihat[r] * self.v[r]).sum()
    }

    /// `u(t) + v(s) π̂(t) ≥ 0` on every allowed edge.
    pub fn allowed_edges_hold(&self, pihat: &Array1<f64>, comm: &Array2<f64>) -> bool {
        comm.indexed_iter()
            .filter(|(_, &l)| l == 1.0)
            .all(|((t, s), _)| self.u[t] + self.v[s] * pihat[t] >= 0.0)
    }

    /// `u(t) + v(s) π̂(t) + w(s)(1 − L(t,s)) ≥ 0` for all `(t, s)`, i.e. `Dᵗy ≥ 0`.
    pub fn all_edges_hold(&self, pihat: &Array1<f64>, comm: &Array2<f64>) -> bool {
        comm.indexed_iter()
            .all(|((t, s), &l)| self.u[t] + self.v[s] * pihat[t] + self.w[s] * (1.0 - l) >= 0.0)
    }

    pub fn is_valid(&self, pihat: &Array1<f64>, comm: &Array2<f64>) -> bool {
        self.objective(pihat) < 0.0 && self.allowed_edges_hold(pihat, comm) && self.all_edges_hold(pihat, comm)
    }

    /// `y = (u, v, w)` as one vector of length `3ℓ`.
    pub fn stacked(&self) -> Array1<f64> {
        ndarray::concatenate![ndarray::Axis(0), self.u, self.v, self.w]
    }
}

/// Rebuilds `w` from `(u, v)`: one unit above `max_t |u(t)| + |v(s)| π̂(t)`.
pub fn reconstruct_w(u: &Array1<f64>, v: &Array1<f64>, pihat: &Array1<f64>) -> Array1<f64> {
    Array1::from_shape_fn(v.len(), |s| {
        (0..u.len())
            .map(|t| u[t].abs() + v[s].abs() * pihat[t])
            .fold(0.0, f64::max)
            + 1.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Infeasible,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Feasible => "feasible",
            Verdict::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityOutcome {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "opt_matrix")]
    pub witness: Option<Array2<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

fn opt_matrix<S: serde::Serializer>(m: &Option<Array2<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => crate::serde_matrix::matrix::serialize(m, s),
        None => s.serialize_none(),
    }
}

impl FeasibilityOutcome {
    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }
}

/// Decides `D p = b, p ≥ 0` with a phase-one simplex.
///
/// The witness is checked against all three constraint families and the
/// certificate against both certificate inequalities before returning;
/// anything that does not verify is reported as [`Error::Indeterminate`].
pub fn solve_feasibility(sys: &LinearSystem) -> Result<FeasibilityOutcome> {
    let l = sys.ell;
    match lp::phase_one(sys.d.view(), sys.b.view()).map_err(lp_failure)? {
        PhaseOne::Feasible { x } => {
            let witness = sys.clean(&x);
            let res = sys.witness_residuals(witness.view());
            if res.iter().any(|&r| r > tol::LP_FEASIBILITY) {
                return Err(Error::Indeterminate(format!(
                    "witness residuals {res:?} exceed {:.0e}",
                    tol::LP_FEASIBILITY
                )));
            }
            Ok(FeasibilityOutcome {
                verdict: Verdict::Feasible,
                witness: Some(witness),
                certificate: None,
            })
        }
        PhaseOne::Infeasible { y, value } => {
            let mut u = y.slice(ndarray::s![..l]).to_owned();
            let mut v = y.slice(ndarray::s![l..2 * l]).to_owned();
            let scale = sup_abs(u.iter().chain(v.iter()));
            if !(scale > 0.0) {
                return Err(Error::Indeterminate(format!(
                    "phase-one value {value:.3e} with a vanishing ray"
                )));
            }
            u.mapv_inplace(|x| x / scale);
            v.mapv_inplace(|x| x / scale);
            // Lift u(t) to the smallest value satisfying every allowed edge, so
            // the inequalities hold exactly in floating point.
            for t in 0..l {
                for s in 0..l {
                    if sys.comm[[t, s]] == 1.0 {
                        let need = -(v[s] * sys.pihat[t]);
                        if u[t] < need {
                            u[t] = need;
                        }
                    }
                }
            }
            let w = reconstruct_w(&u, &v, &sys.pihat);
            let cert = Certificate { u, v, w };
            let obj = cert.objective(&sys.pihat);
            if obj > -tol::LP_CERTIFICATE_MARGIN {
                return Err(Error::Indeterminate(format!(
                    "certificate objective {obj:.3e} is not below -{:.0e} (phase-one value {value:.3e})",
                    tol::LP_CERTIFICATE_MARGIN
                )));
            }
            if !cert.allowed_edges_hold(&sys.pihat, &sys.comm) || !cert.all_edges_hold(&sys.pihat, &sys.comm) {
                return Err(Error::Indeterminate("certificate fails its edge inequalities".into()));
            }
            Ok(FeasibilityOutcome {
                verdict: Verdict::Infeasible,
                witness: None,
                certificate: Some(cert),
            })
        }
    }
}

/// Every hidden state may stay put, which always admits the identity completion.
pub fn diagonal_shortcut(comm: &Array2<f64>) -> bool {
    comm.nrows() == comm.ncols() && comm.diag().iter().all(|&x| x == 1.0)
}
