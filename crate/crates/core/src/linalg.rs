use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Strong connectivity of the digraph with an edge `a → b` wherever `m[[a, b]] > 0`.
///
/// A single vertex counts as strongly connected; the empty matrix does not.
pub fn is_irreducible(m: &Array2<f64>) -> bool {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return false;
    }
    reaches_all(m.view(), false) && reaches_all(m.view(), true)
}

fn reaches_all(m: ArrayView2<f64>, reverse: bool) -> bool {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for b in 0..n {
            let w = if reverse { m[[b, a]] } else { m[[a, b]] };
            if w > 0.0 && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub(crate) fn sup_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `xᵗ A`.
pub(crate) fn row_times(x: ArrayView1<f64>, a: ArrayView2<f64>) -> Array1<f64> {
    x.dot(&a)
}

pub(crate) fn row_sums(a: ArrayView2<f64>) -> Array1<f64> {
    a.sum_axis(ndarray::Axis(1))
}

/// `v / Σv`.
pub(crate) fn normalized(v: ArrayView1<f64>) -> Array1<f64> {
    let s: f64 = v.sum();
    v.mapv(|x| x / s)
}

/// Sup-norm distance between two equally sized vectors.
pub(crate) fn sup_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Index of the first cumulative weight exceeding `u · Σw`.
///
/// `u` lies in `[0, 1)`. Falls back to the last positive weight when rounding
/// leaves the cumulative sum short of the target.
pub(crate) fn sample_index(weights: ArrayView1<f64>, u: f64) -> usize {
    let total: f64 = weights.sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = k;
            if target < acc {
                return k;
            }
        }
    }
    last
}
