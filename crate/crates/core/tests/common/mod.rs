//! Fixtures, random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use labyrinth::is_irreducible;
use labyrinth::model::{PartialChainSpec, StateSpace};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PartialChainSpec {
    PartialChainSpec::from_json_str(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sup(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Normalized vector of `Exp(1)` draws (a flat Dirichlet sample).
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let v = Array1::from_shape_fn(n, |_| -(1.0 - rng.random::<f64>()).ln() + 1e-3);
    let s = v.sum();
    v / s
}

/// Random irreducible 0-1 matrix with no empty row; `diagonal` forces ones on the diagonal.
pub fn random_comm(rng: &mut ChaCha8Rng, n: usize, density: f64, diagonal: bool) -> Array2<f64> {
    loop {
        let l = Array2::from_shape_fn((n, n), |(a, b)| {
            if diagonal && a == b || rng.random::<f64>() < density {
                1.0
            } else {
                0.0
            }
        });
        if is_irreducible(&l) && l.rows().into_iter().all(|r| r.sum() > 0.0) {
            return l;
        }
    }
}

/// Random stochastic matrix with strictly positive entries exactly on the support of `l`.
pub fn random_stochastic_on(rng: &mut ChaCha8Rng, l: &Array2<f64>) -> Array2<f64> {
    let mut p = Array2::from_shape_fn(l.dim(), |ix| if l[ix] == 1.0 { 0.1 + rng.random::<f64>() } else { 0.0 });
    for mut row in p.outer_iter_mut() {
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    p
}

/// Stationary law of an irreducible stochastic matrix by a direct linear solve.
pub fn stationary(p: &Array2<f64>) -> Array1<f64> {
    let n = p.nrows();
    let mut a = DMatrix::from_fn(n, n, |r, c| p[[c, r]] - if r == c { 1.0 } else { 0.0 });
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let x = a.lu().solve(&rhs).expect("irreducible chain");
    Array1::from_iter(x.iter().copied())
}

/// Spec with two visible states, `π(I) = 0.6` and prescribed normalized hidden law.
pub fn spec_with_pihat(pihat: &Array1<f64>, comm: Option<Array2<f64>>) -> PartialChainSpec {
    let ne = pihat.len();
    let states = StateSpace::new(
        vec!["i1".into(), "i2".into()],
        (0..ne).map(|e| format!("h{e}")).collect(),
    )
    .unwrap();
    let p_ie = Array2::from_shape_fn((2, ne), |(_, e)| 0.4 * pihat[e]);
    let spec = PartialChainSpec::new(
        states,
        Array2::from_elem((2, 2), 0.3),
        p_ie,
        Array2::from_elem((ne, 2), 0.3),
        Array1::from_elem(2, 0.3),
    )
    .unwrap();
    match comm {
        Some(l) => spec.with_comm(l).unwrap(),
        None => spec,
    }
}

/// Random spec satisfying the exit-law and left-eigenvector hypotheses.
///
/// `P_II = π(I) K` for a random positive stochastic `K` with stationary law
/// `ν`, `π_I = π(I) ν`, and the hidden entries are random positive rows of
/// mass `π(E)`.
pub fn random_spec(rng: &mut ChaCha8Rng, ni: usize, ne: usize) -> PartialChainSpec {
    let mass = 0.3 + 0.5 * rng.random::<f64>();
    let k = random_stochastic_on(rng, &Array2::ones((ni, ni)));
    let nu = stationary(&k);
    let pi_i = nu.mapv(|x| mass * x);
    let p_ii = k.mapv(|x| mass * x);
    let mut p_ie = Array2::zeros((ni, ne));
    for i in 0..ni {
        let row = random_simplex(rng, ne);
        for e in 0..ne {
            p_ie[[i, e]] = (1.0 - mass) * row[e];
        }
    }
    let p_ei = Array2::from_shape_fn((ne, ni), |(_, i)| pi_i[i]);
    let states = StateSpace::new(
        (0..ni).map(|i| format!("v{i}")).collect(),
        (0..ne).map(|e| format!("h{e}")).collect(),
    )
    .unwrap();
    PartialChainSpec::new(states, p_ii, p_ie, p_ei, pi_i).unwrap()
}

/// Hall-type feasibility oracle for the support-constrained problem.
///
/// A matrix `M ≥ 0` on the support of `l` with both marginals `π̂` exists
/// iff `π̂(S) ≤ π̂(N(S))` for every row set `S`, `N(S)` being the columns
/// reachable from `S`. Returns the smallest slack over nonempty proper `S`;
/// the full set always has slack zero and is left out.
pub fn hall_margin(pihat: &Array1<f64>, l: &Array2<f64>) -> f64 {
    let n = pihat.len();
    let mut worst = f64::INFINITY;
    for mask in 1u32..(1 << n) - 1 {
        let rows: Vec<usize> = (0..n).filter(|&t| mask >> t & 1 == 1).collect();
        let supply: f64 = rows.iter().map(|&t| pihat[t]).sum();
        let demand: f64 = (0..n)
            .filter(|&s| rows.iter().any(|&t| l[[t, s]] == 1.0))
            .map(|s| pihat[s])
            .sum();
        worst = worst.min(demand - supply);
    }
    worst
}

/// Entropy rate of `p_hat` under `pihat`, written out independently of the crate.
pub fn entropy_rate(p_hat: &Array2<f64>, pihat: &Array1<f64>) -> f64 {
    let mut h = 0.0;
    for d in 0..pihat.len() {
        for e in 0..pihat.len() {
            let x = p_hat[[d, e]];
            if x > 0.0 {
                h -= pihat[d] * x * x.ln();
            }
        }
    }
    h
}

/// Maximizer of the entropy rate over stochastic `P̂` supported on `l` with
/// stationary law `pihat`, by Newton's method on the joint law
/// `M(d,e) = π̂(d) P̂(d,e)` restricted to the affine set of the marginal
/// constraints. `start` must be a strictly positive feasible `P̂`.
pub fn newton_maxent(pihat: &Array1<f64>, l: &Array2<f64>, start: &Array2<f64>) -> Array2<f64> {
    let n = pihat.len();
    let cells: Vec<(usize, usize)> = l.indexed_iter().filter(|(_, &x)| x == 1.0).map(|(ix, _)| ix).collect();
    let k = cells.len();
    // Row sums for every d and column sums for all but the last e; the
    // dropped equation is implied by the others.
    let rows = 2 * n - 1;
    let mut a = DMatrix::<f64>::zeros(rows, k);
    for (c, &(d, e)) in cells.iter().enumerate() {
        a[(d, c)] = 1.0;
        if e < n - 1 {
            a[(n + e, c)] = 1.0;
        }
    }
    let mut m = DVector::from_iterator(k, cells.iter().map(|&(d, e)| pihat[d] * start[[d, e]]));
    let objective = |m: &DVector<f64>| -m.iter().map(|&x| x * x.ln()).sum::<f64>();

    for _ in 0..200 {
        let g = m.map(|x| -(x.ln() + 1.0));
        // KKT system for the Newton step: H dx + Aᵗλ = −g, A dx = 0, H = −diag(1/m).
        let size = k + rows;
        let mut kkt = DMatrix::<f64>::zeros(size, size);
        for c in 0..k {
            kkt[(c, c)] = -1.0 / m[c];
        }
        kkt.view_mut((0, k), (k, rows)).copy_from(&a.transpose());
        kkt.view_mut((k, 0), (rows, k)).copy_from(&a);
        let mut rhs = DVector::<f64>::zeros(size);
        rhs.rows_mut(0, k).copy_from(&(-&g));
        let sol = kkt.lu().solve(&rhs).expect("nonsingular KKT system");
        let dx = sol.rows(0, k).into_owned();
        let decrement = -g.dot(&dx);
        if decrement.abs() < 1e-28 {
            break;
        }
        let mut t = 1.0;
        let f0 = objective(&m);
        loop {
            let trial = &m + &dx * t;
            if trial.iter().all(|&x| x > 0.0) && objective(&trial) >= f0 + 0.25 * t * g.dot(&dx) {
                m = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                break;
            }
        }
        if t < 1e-20 {
            break;
        }
    }

    let mut p = Array2::zeros((n, n));
    for (c, &(d, e)) in cells.iter().enumerate() {
        p[[d, e]] = m[c] / pihat[d];
    }
    p
}
