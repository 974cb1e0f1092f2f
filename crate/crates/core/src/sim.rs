//! Reconstruction of the chain from its visible skeleton.
//!
//! The skeleton `Y` moves on `I` by `Q(i,j) = P(i,j) + P(i,E) π̂_I(j)`. Each
//! skeleton step `i → j` is kept as a direct transition with probability
//! `θ(i,j) = P(i,j) / Q(i,j)`; otherwise a hidden excursion is inserted
//! before `j`. The excursion enters `E` at `d` with probability
//! `P(i,d) / P(i,E)`, moves by `π(E)⁻¹ P_EE` and is killed after every step
//! with probability `π(I)`. The spliced process `W` has the law of the
//! completed chain, which [`compare_laws`] checks against the chain itself.
//!
//! Traces are one-sided: `W` starts at time 0 in its stationary law.
//!
//! Random draws come from one ChaCha8 stream in this order: the initial
//! excursion (entry state, then kill/move draws), `Y_0`, and then per
//! skeleton step the `Q` draw, the gate, the entry state and the excursion's
//! kill/move draws.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::linalg::{normalized, row_sums, row_times, sample_index, sup_abs, sup_dist};
use crate::model::{CompletedChain, StateSpace};
use crate::{tol, Error, Result};

/// Visible skeleton kernel and gate probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonKernel {
    pub q: Array2<f64>,
    pub theta: Array2<f64>,
    /// `P(i, E)`.
    pub exit_mass: Array1<f64>,
    /// `P(i, d) / P(i, E)`, zero rows where `P(i, E) = 0`.
    pub entry: Array2<f64>,
    pub pihat_i: Array1<f64>,
}

/// Sup-norm residuals of the identities the skeleton must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkeletonResiduals {
    /// Rows of `Q` sum to one.
    pub stochastic: f64,
    /// `π̂_Iᵗ Q = π̂_Iᵗ`.
    pub stationary: f64,
    /// `Q θ = P_II` entrywise.
    pub kept: f64,
    /// `Q (1 − θ) = P(i,E) π̂_I(j)` entrywise.
    pub diverted: f64,
    /// `Σ_i π̂_I(i) Σ_j Q(i,j)(1 − θ(i,j)) P(i,d)/P(i,E) = π(d)`.
    pub hidden_inflow: f64,
    /// `0 ≤ θ ≤ 1` fails by this much.
    pub theta_range: f64,
}

impl SkeletonResiduals {
    pub fn max(&self) -> f64 {
        [
            self.stochastic,
            self.stationary,
            self.kept,
            self.diverted,
            self.hidden_inflow,
            self.theta_range,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn build_skeleton(chain: &CompletedChain) -> Result<SkeletonKernel> {
    let ni = chain.states().n_visible();
    if ni == 0 {
        return Err(Error::spec("the skeleton needs at least one visible state"));
    }
    let spec = chain.spec();
    let p_ii = spec.p_ii();
    let p_ie = spec.p_ie();
    let exit_mass = spec.exit_mass();
    let pihat_i = chain.pihat_i();
    let q = Array2::from_shape_fn((ni, ni), |(i, j)| p_ii[[i, j]] + exit_mass[i] * pihat_i[j]);
    let theta = Array2::from_shape_fn((ni, ni), |(i, j)| {
        if q[[i, j]] > 0.0 {
            p_ii[[i, j]] / q[[i, j]]
        } else {
            0.0
        }
    });
    let entry = Array2::from_shape_fn(p_ie.dim(), |(i, d)| {
        if exit_mass[i] > 0.0 {
            p_ie[[i, d]] / exit_mass[i]
        } else {
            0.0
        }
    });
    Ok(SkeletonKernel {
        q,
        theta,
        exit_mass,
        entry,
        pihat_i,
    })
}

impl SkeletonKernel {
    pub fn residuals(&self, chain: &CompletedChain) -> SkeletonResiduals {
        let p_ii = chain.spec().p_ii();
        let ni = self.q.nrows();
        let stochastic = sup_abs(row_sums(self.q.view()).mapv(|r| r - 1.0).iter());
        let stationary = sup_dist(row_times(self.pihat_i.view(), self.q.view()).view(), self.pihat_i.view());
        let kept = sup_abs((&self.q * &self.theta - p_ii).iter());
        let diverted_m = &self.q * &self.theta.mapv(|t| 1.0 - t);
        let diverted = sup_abs(
            Array2::from_shape_fn((ni, ni), |(i, j)| diverted_m[[i, j]] - self.exit_mass[i] * self.pihat_i[j]).iter(),
        );
        let to_hidden = row_sums(diverted_m.view());
        let inflow = Array1::from_shape_fn(self.entry.ncols(), |d| {
            (0..ni).map(|i| self.pihat_i[i] * to_hidden[i] * self.entry[[i, d]]).sum::<f64>()
        });
        let pi_e = chain.pi().slice(s![ni..]).to_owned();
        let theta_range = self.theta.iter().fold(0.0f64, |m, &t| m.max(-t).max(t - 1.0));
        SkeletonResiduals {
            stochastic,
            stationary,
            kept,
            diverted,
            hidden_inflow: sup_dist(inflow.view(), pi_e.view()),
            theta_range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    #[serde(rename = "visible-step")]
    VisibleStep,
    #[serde(rename = "excursion")]
    Excursion,
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentKind::VisibleStep => "visible-step",
            SegmentKind::Excursion => "excursion",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub len: usize,
}

/// A trajectory on `I ⊔ E` (combined indices, visible first) with its
/// renewal times and segment layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SpliceTrace {
    pub w: Vec<usize>,
    pub renewal_times: Vec<usize>,
    pub segments: Vec<Segment>,
    pub seed: u64,
    n_visible: usize,
}

impl SpliceTrace {
    /// Renewal times and segments read off a plain state sequence.
    pub fn from_states(w: Vec<usize>, n_visible: usize, seed: u64) -> Self {
        let renewal_times: Vec<usize> = (0..w.len()).filter(|&t| w[t] < n_visible).collect();
        let mut segments = Vec::new();
        let mut t = 0;
        while t < w.len() {
            if w[t] < n_visible {
                segments.push(Segment {
                    kind: SegmentKind::VisibleStep,
                    start: t,
                    len: 1,
                });
                t += 1;
            } else {
                let start = t;
                while t < w.len() && w[t] >= n_visible {
                    t += 1;
                }
                segments.push(Segment {
                    kind: SegmentKind::Excursion,
                    start,
                    len: t - start,
                });
            }
        }
        SpliceTrace {
            w,
            renewal_times,
            segments,
            seed,
            n_visible,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    /// Segment kind at every time.
    pub fn kinds(&self) -> Vec<SegmentKind> {
        let mut out = Vec::with_capacity(self.w.len());
        for seg in &self.segments {
            out.extend(std::iter::repeat_n(seg.kind, seg.len));
        }
        out
    }

    /// CSV with columns `t,state,segment_kind`.
    pub fn write_csv<W: std::io::Write>(&self, states: &StateSpace, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "state", "segment_kind"])?;
        for (t, (&x, kind)) in self.w.iter().zip(self.kinds()).enumerate() {
            wtr.write_record([t.to_string(), states.label(x).to_string(), kind.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, states: &StateSpace, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(states, std::fs::File::create(path)?)
    }

    /// Reads a trace written by [`write_csv`](Self::write_csv). Segments are
    /// rebuilt from the states; the stored kinds are only checked.
    pub fn read_csv<R: std::io::Read>(states: &StateSpace, input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: usize,
            state: String,
            segment_kind: SegmentKind,
        }
        let index: BTreeMap<&str, usize> = (0..states.len()).map(|k| (states.label(k), k)).collect();
        let mut w = Vec::new();
        let mut kinds = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: Row = row?;
            if row.t != w.len() {
                return Err(Error::Simulation(format!("trace row {} has t = {}", w.len(), row.t)));
            }
            let x = *index
                .get(row.state.as_str())
                .ok_or_else(|| Error::Simulation(format!("unknown state {:?} at t = {}", row.state, row.t)))?;
            w.push(x);
            kinds.push(row.segment_kind);
        }
        let trace = SpliceTrace::from_states(w, states.n_visible(), 0);
        if trace.kinds() != kinds {
            return Err(Error::Simulation("segment kinds disagree with the states".into()));
        }
        Ok(trace)
    }

    pub fn from_path(states: &StateSpace, path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(states, std::fs::File::open(path)?)
    }
}

/// Sampling tables shared by both simulators.
struct Tables {
    ni: usize,
    rows: Vec<Array1<f64>>,
}

impl Tables {
    fn draw(&self, row: usize, rng: &mut ChaCha8Rng) -> usize {
        sample_index(self.rows[row].view(), rng.random::<f64>())
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

/// Killed excursion started at hidden index `d`, pushed onto `w` as combined indices.
fn excursion(start: usize, hat: &Tables, kill: f64, rng: &mut ChaCha8Rng, w: &mut Vec<usize>) -> usize {
    let mut d = start;
    let mut len = 1;
    w.push(hat.ni + d);
    while uniform(rng) >= kill {
        d = hat.draw(d, rng);
        w.push(hat.ni + d);
        len += 1;
    }
    len
}

/// Spliced trajectory of length `steps`.
pub fn simulate_splice(chain: &CompletedChain, steps: usize, seed: u64) -> Result<SpliceTrace> {
    let skeleton = build_skeleton(chain)?;
    simulate_splice_with_skeleton(chain, &skeleton, steps, seed)
}

/// As [`simulate_splice`], with a caller-supplied skeleton (e.g. a perturbed `θ`).
pub fn simulate_splice_with_skeleton(
    chain: &CompletedChain,
    skeleton: &SkeletonKernel,
    steps: usize,
    seed: u64,
) -> Result<SpliceTrace> {
    if steps == 0 {
        return Err(Error::Simulation("the number of steps must be at least 1".into()));
    }
    let ni = chain.states().n_visible();
    let ne = chain.states().n_hidden();
    let kill = chain.visible_mass();
    let mass_e = chain.hidden_mass();
    let p_ee = chain.p_ee();
    let hat = Tables {
        ni,
        rows: (0..ne).map(|d| p_ee.row(d).mapv(|x| x / mass_e)).collect(),
    };
    let q = Tables {
        ni,
        rows: (0..ni).map(|i| skeleton.q.row(i).to_owned()).collect(),
    };
    let entry = Tables {
        ni,
        rows: (0..ni).map(|i| skeleton.entry.row(i).to_owned()).collect(),
    };
    let pihat_e = chain.pihat_e();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Vec::with_capacity(steps + 64);
    let mut renewal_times = Vec::new();
    let mut segments = Vec::new();

    // Initial segment: Z' from π̂_E, of which W keeps Z'_1, ..., Z'_{τ'-1}.
    let z0 = sample_index(pihat_e.view(), uniform(&mut rng));
    let mut scratch = Vec::new();
    excursion(z0, &hat, kill, &mut rng, &mut scratch);
    w.extend_from_slice(&scratch[1..]);
    if !w.is_empty() {
        segments.push(Segment {
            kind: SegmentKind::Excursion,
            start: 0,
            len: w.len(),
        });
    }
    let mut y = sample_index(skeleton.pihat_i.view(), uniform(&mut rng));
    renewal_times.push(w.len());
    segments.push(Segment {
        kind: SegmentKind::VisibleStep,
        start: w.len(),
        len: 1,
    });
    w.push(y);

    while w.len() < steps {
        let j = q.draw(y, &mut rng);
        let keep = uniform(&mut rng) < skeleton.theta[[y, j]];
        if !keep {
            if !(skeleton.exit_mass[y] > 0.0) {
                return Err(Error::Simulation(format!(
                    "gate closed at visible state {y}, which has no hidden exits"
                )));
            }
            let d = entry.draw(y, &mut rng);
            let start = w.len();
            let len = excursion(d, &hat, kill, &mut rng, &mut w);
            segments.push(Segment {
                kind: SegmentKind::Excursion,
                start,
                len,
            });
        }
        renewal_times.push(w.len());
        segments.push(Segment {
            kind: SegmentKind::VisibleStep,
            start: w.len(),
            len: 1,
        });
        w.push(j);
        y = j;
    }

    w.truncate(steps);
    renewal_times.retain(|&t| t < steps);
    segments.retain(|seg| seg.start < steps);
    if let Some(last) = segments.last_mut() {
        last.len = last.len.min(steps - last.start);
    }
    Ok(SpliceTrace {
        w,
        renewal_times,
        segments,
        seed,
        n_visible: ni,
    })
}

/// Plain Markov sampling: `X_0 ~ π`, then rows of the full matrix.
pub fn simulate_direct(chain: &CompletedChain, steps: usize, seed: u64) -> Result<Vec<usize>> {
    if steps == 0 {
        return Err(Error::Simulation("the number of steps must be at least 1".into()));
    }
    let p = chain.full_matrix();
    let tables = Tables {
        ni: 0,
        rows: p.outer_iter().map(|r| r.to_owned()).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = sample_index(chain.pi().view(), uniform(&mut rng));
    let mut out = Vec::with_capacity(steps);
    out.push(x);
    for _ in 1..steps {
        x = tables.draw(x, &mut rng);
        out.push(x);
    }
    Ok(out)
}

/// Empirical summaries of a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub steps: usize,
    /// Transition frequencies; rows of unvisited states are zero.
    #[serde(rename = "empirical_P", with = "crate::serde_matrix::matrix")]
    pub empirical_p: Array2<f64>,
    /// Visits to each state that are followed by a transition.
    pub row_counts: Vec<u64>,
    /// `gap → count` over consecutive renewal times.
    pub gap_histogram: BTreeMap<usize, u64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub marginal: Array1<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub visible_marginal_at_renewals: Array1<f64>,
}

pub fn sim_stats(trace: &SpliceTrace, n_states: usize) -> SimStats {
    let ni = trace.n_visible;
    let mut counts = Array2::<f64>::zeros((n_states, n_states));
    let mut row_counts = vec![0u64; n_states];
    for pair in trace.w.windows(2) {
        counts[[pair[0], pair[1]]] += 1.0;
        row_counts[pair[0]] += 1;
    }
    let mut empirical_p = counts;
    for (a, mut row) in empirical_p.outer_iter_mut().enumerate() {
        if row_counts[a] > 0 {
            let n = row_counts[a] as f64;
            row.mapv_inplace(|x| x / n);
        }
    }
    let mut gap_histogram = BTreeMap::new();
    for pair in trace.renewal_times.windows(2) {
        *gap_histogram.entry(pair[1] - pair[0]).or_insert(0) += 1;
    }
    let mut marginal = Array1::<f64>::zeros(n_states);
    for &x in &trace.w {
        marginal[x] += 1.0;
    }
    let total = trace.w.len().max(1) as f64;
    marginal.mapv_inplace(|x| x / total);
    let mut at_renewals = Array1::<f64>::zeros(ni);
    for &t in &trace.renewal_times {
        at_renewals[trace.w[t]] += 1.0;
    }
    let visible_marginal_at_renewals = if trace.renewal_times.is_empty() {
        at_renewals
    } else {
        normalized(at_renewals.view())
    };
    SimStats {
        steps: trace.w.len(),
        empirical_p,
        row_counts,
        gap_histogram,
        marginal,
        visible_marginal_at_renewals,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimVerdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for SimVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimVerdict::Pass => "pass",
            SimVerdict::Fail => "fail",
            SimVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// One statistical check: passes when `statistic ≤ threshold`, except for
/// the chi-square check, which passes when the p-value is at least the level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: &'static str,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

pub mod criteria {
    pub const TRANSITIONS: &str = "empirical transitions";
    pub const GAPS: &str = "renewal gaps geometric";
    pub const RENEWAL_LAW: &str = "visible law at renewals";
    pub const VISIBLE_FRACTION: &str = "visible time fraction";
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub verdict: SimVerdict,
    pub criteria: Vec<Criterion>,
    pub stats: SimStats,
}

impl Comparison {
    pub fn get(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }
}

/// Largest `|P̃(a,b) − P(a,b)| / σ(a,b)` over entries with `π(a)P(a,b) ≥ 1e-3`.
fn transition_check(stats: &SimStats, p: &Array2<f64>, pi: &Array1<f64>) -> Criterion {
    let mut worst = 0.0f64;
    let mut at = (0, 0);
    let mut tested = 0;
    for ((a, b), &pab) in p.indexed_iter() {
        if pi[a] * pab < tol::MIN_JOINT_MASS {
            continue;
        }
        tested += 1;
        let n = stats.row_counts[a] as f64;
        let z = if n == 0.0 {
            f64::INFINITY
        } else {
            let sigma = (pab * (1.0 - pab) / n).sqrt();
            let diff = (stats.empirical_p[[a, b]] - pab).abs();
            if sigma > 0.0 {
                diff / sigma
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        if z > worst {
            worst = z;
            at = (a, b);
        }
    }
    Criterion {
        name: criteria::TRANSITIONS,
        passed: worst <= tol::SIGMA_BAND,
        statistic: worst,
        threshold: tol::SIGMA_BAND,
        detail: format!("{tested} entries tested, worst at ({}, {}) in standard errors", at.0, at.1),
    }
}

/// Pearson chi-square of the gap histogram against `Geometric(ρ)` on `{1, 2, …}`.
/// Bins with expected count below 5 are pooled into the tail.
pub fn geometric_chi_square(histogram: &BTreeMap<usize, u64>, rho: f64) -> (f64, usize, f64) {
    let total: u64 = histogram.values().sum();
    let n = total as f64;
    let q = 1.0 - rho;
    // Largest k with expected count n ρ q^{k-1} ≥ 5; bins 1..k-1 plus a tail {≥ k}.
    let mut k = 1;
    while n * rho * q.powi(k as i32) >= 5.0 {
        k += 1;
    }
    if k < 2 || total == 0 {
        return (0.0, 0, 1.0);
    }
    let mut stat = 0.0;
    for g in 1..k {
        let expected = n * rho * q.powi(g as i32 - 1);
        let observed = *histogram.get(&g).unwrap_or(&0) as f64;
        stat += (observed - expected).powi(2) / expected;
    }
    let expected_tail = n * q.powi(k as i32 - 1);
    let observed_tail: u64 = histogram.range(k..).map(|(_, c)| c).sum();
    stat += (observed_tail as f64 - expected_tail).powi(2) / expected_tail;
    let df = k - 1;
    let p_value = ChiSquared::new(df as f64).map(|d| 1.0 - d.cdf(stat)).unwrap_or(0.0);
    (stat, df, p_value)
}

/// Checks a trace against the law of `chain`.
///
/// Traces shorter than `1e5` steps are reported inconclusive whatever the
/// individual checks say.
pub fn compare_laws(trace: &SpliceTrace, chain: &CompletedChain) -> Result<Comparison> {
    let n = chain.states().len();
    if trace.n_visible != chain.states().n_visible() {
        return Err(Error::dim("trace and chain disagree on the visible states"));
    }
    if let Some(&x) = trace.w.iter().find(|&&x| x >= n) {
        return Err(Error::dim(format!("trace visits state {x}, the chain has {n}")));
    }
    let stats = sim_stats(trace, n);
    let p = chain.full_matrix();
    let rho = chain.visible_mass();

    let mut out = vec![transition_check(&stats, &p, chain.pi())];

    let (chi2, df, p_value) = geometric_chi_square(&stats.gap_histogram, rho);
    out.push(Criterion {
        name: criteria::GAPS,
        passed: p_value >= tol::CHI_SQUARE_LEVEL,
        statistic: p_value,
        threshold: tol::CHI_SQUARE_LEVEL,
        detail: format!("chi-square {chi2:.3} on {df} degrees of freedom"),
    });

    let tv = 0.5
        * stats
            .visible_marginal_at_renewals
            .iter()
            .zip(&chain.pihat_i())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    out.push(Criterion {
        name: criteria::RENEWAL_LAW,
        passed: tv <= tol::RENEWAL_TV,
        statistic: tv,
        threshold: tol::RENEWAL_TV,
        detail: format!("total variation over {} renewals", trace.renewal_times.len()),
    });

    let steps = trace.w.len() as f64;
    let fraction = trace.renewal_times.len() as f64 / steps;
    let sigma = (rho * (1.0 - rho) / steps).sqrt();
    let z = (fraction - rho).abs() / sigma;
    out.push(Criterion {
        name: criteria::VISIBLE_FRACTION,
        passed: z <= tol::SIGMA_BAND,
        statistic: z,
        threshold: tol::SIGMA_BAND,
        detail: format!("fraction {fraction:.6} against {rho:.6}, in standard errors"),
    });

    let verdict = if trace.w.len() < tol::MIN_TRACE {
        SimVerdict::Inconclusive
    } else if out.iter().all(|c| c.passed) {
        SimVerdict::Pass
    } else {
        SimVerdict::Fail
    };
    Ok(Comparison {
        verdict,
        criteria: out,
        stats,
    })
}
