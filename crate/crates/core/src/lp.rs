//! Dense two-phase simplex for `A x = b, x ≥ 0` with Bland's rule.
//!
//! Only what the feasibility module needs: a phase-one verdict with either a
//! feasible point or a Farkas ray, and a phase-two minimization over the same
//! polytope. Sizes are desk scale (a few hundred columns).

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::tol;

const REDUCED_COST_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug)]
pub(crate) enum PhaseOne {
    Feasible { x: Array1<f64> },
    /// `y` satisfies `Aᵗy ≥ 0` and `bᵗy = -value < 0`.
    Infeasible { y: Array1<f64>, value: f64 },
}

#[derive(Debug, PartialEq)]
pub(crate) enum LpError {
    PivotLimit,
    Unbounded,
}

struct Tableau {
    m: usize,
    /// Structural columns; artificials occupy `n..n + m`.
    n: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    /// Rows found redundant after phase one.
    dead: Vec<bool>,
    /// Original rows multiplied by -1 to make `b ≥ 0`.
    flipped: Vec<bool>,
}

impl Tableau {
    fn new(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Self {
        let (m, n) = a.dim();
        let width = n + m + 1;
        let mut data = vec![0.0; m * width];
        let mut flipped = vec![false; m];
        for i in 0..m {
            let sign = if b[i] < 0.0 {
                flipped[i] = true;
                -1.0
            } else {
                1.0
            };
            let row = &mut data[i * width..(i + 1) * width];
            for j in 0..n {
                row[j] = sign * a[[i, j]];
            }
            row[n + i] = 1.0;
            row[width - 1] = sign * b[i];
        }
        Tableau {
            m,
            n,
            width,
            data,
            basis: (n..n + m).collect(),
            dead: vec![false; m],
            flipped,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.at(r, c);
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        self.data[r * w + c] = 1.0;
        for i in 0..self.m {
            if i == r || self.dead[i] {
                continue;
            }
            let f = self.at(i, c);
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                let v = self.data[r * w + j];
                if v != 0.0 {
                    self.data[i * w + j] -= f * v;
                }
            }
            self.data[i * w + c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced cost `c_j − c_Bᵗ B⁻¹ A_j`.
    fn reduced_cost(&self, cost: &dyn Fn(usize) -> f64, j: usize) -> f64 {
        let mut d = cost(j);
        for i in 0..self.m {
            if !self.dead[i] {
                let cb = cost(self.basis[i]);
                if cb != 0.0 {
                    d -= cb * self.at(i, j);
                }
            }
        }
        d
    }

    /// Runs Bland's rule over columns `0..cols` until optimal.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64, cols: usize) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..cols).find(|&j| {
                !self.basis.contains(&j) && self.reduced_cost(cost, j) < -REDUCED_COST_EPS
            });
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if self.dead[i] || a <= tol::LP_PIVOT {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                        if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, c);
        }
        Err(LpError::PivotLimit)
    }

    fn primal(&self) -> Array1<f64> {
        let mut x = Array1::zeros(self.n);
        for i in 0..self.m {
            if !self.dead[i] && self.basis[i] < self.n {
                x[self.basis[i]] = self.rhs(i).max(0.0);
            }
        }
        x
    }

    fn artificial_sum(&self) -> f64 {
        (0..self.m)
            .filter(|&i| !self.dead[i] && self.basis[i] >= self.n)
            .map(|i| self.rhs(i))
            .sum()
    }

    /// Pivots zero-level artificials out of the basis; rows with no usable
    /// structural entry are redundant and retired.
    fn purge_artificials(&mut self) {
        for i in 0..self.m {
            if self.dead[i] || self.basis[i] < self.n {
                continue;
            }
            let col = (0..self.n)
                .filter(|j| !self.basis.contains(j))
                .max_by(|&a, &b| self.at(i, a).abs().total_cmp(&self.at(i, b).abs()))
                .filter(|&j| self.at(i, j).abs() > tol::LP_PIVOT);
            match col {
                Some(j) => self.pivot(i, j),
                None => self.dead[i] = true,
            }
        }
    }
}

fn phase_one_cost(n: usize) -> impl Fn(usize) -> f64 {
    move |j| if j >= n { 1.0 } else { 0.0 }
}

pub(crate) fn phase_one(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<PhaseOne, LpError> {
    let mut t = Tableau::new(a, b);
    let n = t.n;
    let cost = phase_one_cost(n);
    t.optimize(&cost, n)?;
    let value = t.artificial_sum();
    if value <= tol::LP_FEASIBILITY {
        return Ok(PhaseOne::Feasible { x: t.primal() });
    }
    // Simplex multipliers c_Bᵗ B⁻¹, read off the artificial columns.
    let mut y = Array1::zeros(t.m);
    for r in 0..t.m {
        let mut acc = 0.0;
        for i in 0..t.m {
            if t.basis[i] >= n {
                acc += t.at(i, n + r);
            }
        }
        // Farkas ray is the negated multiplier, mapped back through row flips.
        y[r] = if t.flipped[r] { acc } else { -acc };
    }
    Ok(PhaseOne::Infeasible { y, value })
}

/// Minimizes `cᵗx` over `A x = b, x ≥ 0`. `Ok(None)` when infeasible.
pub(crate) fn minimize(
    a: ArrayView2<f64>,
    b: ArrayView1<f64>,
    c: ArrayView1<f64>,
) -> Result<Option<Array1<f64>>, LpError> {
    let mut t = Tableau::new(a, b);
    let n = t.n;
    t.optimize(&phase_one_cost(n), n)?;
    if t.artificial_sum() > tol::LP_FEASIBILITY {
        return Ok(None);
    }
    t.purge_artificials();
    let cost = |j: usize| if j < n { c[j] } else { 0.0 };
    t.optimize(&cost, n)?;
    Ok(Some(t.primal()))
}
