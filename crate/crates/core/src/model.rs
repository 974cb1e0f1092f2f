//! Partially specified chains, their standing hypotheses and completed chains.
//!
//! States are ordered visible first (`I`), then hidden (`E`). Hidden indices
//! used throughout the crate are positions inside `E`, starting at zero.

use std::collections::HashSet;
use std::fmt;

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::{is_irreducible, normalized, row_sums, row_times, sup_abs, sup_dist};
use crate::serde_matrix::from_rows;
use crate::{tol, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    visible: Vec<String>,
    hidden: Vec<String>,
}

impl StateSpace {
    /// Labels must be unique across both sides and `hidden` nonempty.
    ///
    /// An empty `visible` list is the `I = ∅` regime, only usable with the
    /// uniform and Parry completions.
    pub fn new(visible: Vec<String>, hidden: Vec<String>) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::spec("the hidden state list is empty"));
        }
        let mut seen = HashSet::new();
        for label in visible.iter().chain(&hidden) {
            if !seen.insert(label.as_str()) {
                return Err(Error::spec(format!("duplicate state label {label:?}")));
            }
        }
        Ok(StateSpace { visible, hidden })
    }

    pub fn visible(&self) -> &[String] {
        &self.visible
    }

    pub fn hidden(&self) -> &[String] {
        &self.hidden
    }

    pub fn n_visible(&self) -> usize {
        self.visible.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden.len()
    }

    pub fn len(&self) -> usize {
        self.visible.len() + self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Label of a state in the combined `I ⊔ E` ordering.
    pub fn label(&self, index: usize) -> &str {
        let n = self.visible.len();
        if index < n {
            &self.visible[index]
        } else {
            &self.hidden[index - n]
        }
    }

    pub fn hidden_index(&self, label: &str) -> Option<usize> {
        self.hidden.iter().position(|l| l == label)
    }
}

/// The data a partially observed chain provides.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialChainSpec {
    states: StateSpace,
    p_ii: Array2<f64>,
    p_ie: Array2<f64>,
    p_ei: Array2<f64>,
    pi_i: Array1<f64>,
    comm: Option<Array2<f64>>,
    partition: Option<Vec<Vec<usize>>>,
}

impl PartialChainSpec {
    /// Checks shapes, finiteness and nonnegativity. Hypotheses are not checked
    /// here; see [`validate_hypotheses`].
    pub fn new(
        states: StateSpace,
        p_ii: Array2<f64>,
        p_ie: Array2<f64>,
        p_ei: Array2<f64>,
        pi_i: Array1<f64>,
    ) -> Result<Self> {
        let (ni, ne) = (states.n_visible(), states.n_hidden());
        check_shape("P_II", p_ii.dim(), (ni, ni))?;
        check_shape("P_IE", p_ie.dim(), (ni, ne))?;
        check_shape("P_EI", p_ei.dim(), (ne, ni))?;
        if pi_i.len() != ni {
            return Err(Error::dim(format!("pi_I has length {}, expected {ni}", pi_i.len())));
        }
        check_entries("P_II", p_ii.iter())?;
        check_entries("P_IE", p_ie.iter())?;
        check_entries("P_EI", p_ei.iter())?;
        check_entries("pi_I", pi_i.iter())?;
        Ok(PartialChainSpec {
            states,
            p_ii,
            p_ie,
            p_ei,
            pi_i,
            comm: None,
            partition: None,
        })
    }

    /// Attaches the 0-1 communication matrix `L` of the hidden states.
    pub fn with_comm(mut self, comm: Array2<f64>) -> Result<Self> {
        let ne = self.states.n_hidden();
        check_shape("L", comm.dim(), (ne, ne))?;
        if comm.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::spec("L must be 0-1 valued"));
        }
        self.comm = Some(comm);
        Ok(self)
    }

    /// Attaches a labyrinth partition given by hidden labels. Blocks must be
    /// nonempty, disjoint and cover `E`.
    pub fn with_partition(mut self, blocks: Vec<Vec<String>>) -> Result<Self> {
        let ne = self.states.n_hidden();
        let mut owner = vec![None; ne];
        let mut out = Vec::with_capacity(blocks.len());
        for (m, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::spec(format!("partition block {m} is empty")));
            }
            let mut idx = Vec::with_capacity(block.len());
            for label in block {
                let d = self.states.hidden_index(label).ok_or_else(|| {
                    Error::spec(format!("partition block {m} names unknown hidden state {label:?}"))
                })?;
                if let Some(prev) = owner[d] {
                    return Err(Error::spec(format!(
                        "hidden state {label:?} appears in blocks {prev} and {m}"
                    )));
                }
                owner[d] = Some(m);
                idx.push(d);
            }
            out.push(idx);
        }
        if let Some(d) = owner.iter().position(Option::is_none) {
            return Err(Error::spec(format!(
                "partition does not cover hidden state {:?}",
                self.states.hidden[d]
            )));
        }
        self.partition = Some(out);
        Ok(self)
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn p_ii(&self) -> &Array2<f64> {
        &self.p_ii
    }

    pub fn p_ie(&self) -> &Array2<f64> {
        &self.p_ie
    }

    pub fn p_ei(&self) -> &Array2<f64> {
        &self.p_ei
    }

    pub fn pi_i(&self) -> &Array1<f64> {
        &self.pi_i
    }

    pub fn comm(&self) -> Option<&Array2<f64>> {
        self.comm.as_ref()
    }

    /// Blocks as hidden indices, in input order.
    pub fn partition(&self) -> Option<&[Vec<usize>]> {
        self.partition.as_deref()
    }

    pub fn is_hidden_only(&self) -> bool {
        self.states.n_visible() == 0
    }

    /// `π(I)`.
    pub fn visible_mass(&self) -> f64 {
        self.pi_i.sum()
    }

    /// Total probability `P(i, E)` of entering the hidden set from each visible state.
    pub fn exit_mass(&self) -> Array1<f64> {
        row_sums(self.p_ie.view())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<SpecFile>(s)?.try_into()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SpecFile::from(self))?)
    }
}

fn check_shape(name: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(Error::dim(format!(
            "{name} is {}x{}, expected {}x{}",
            got.0, got.1, want.0, want.1
        )));
    }
    Ok(())
}

fn check_entries<'a>(name: &str, mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if values.any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::spec(format!("{name} has a negative or non-finite entry")));
    }
    Ok(())
}

/// State identifier as it appears in JSON: a string or an integer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Text(String),
    Int(i64),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Text(s) => f.write_str(s),
            Label::Int(i) => write!(f, "{i}"),
        }
    }
}

/// On-disk chain specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub visible: Vec<Label>,
    pub hidden: Vec<Label>,
    #[serde(rename = "P_II", default)]
    pub p_ii: Vec<Vec<f64>>,
    #[serde(rename = "P_IE", default)]
    pub p_ie: Vec<Vec<f64>>,
    #[serde(rename = "P_EI", default)]
    pub p_ei: Vec<Vec<f64>>,
    #[serde(rename = "pi_I", default)]
    pub pi_i: Vec<f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub comm: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<Label>>>,
}

impl TryFrom<SpecFile> for PartialChainSpec {
    type Error = Error;

    fn try_from(f: SpecFile) -> Result<Self> {
        let labels = |v: Vec<Label>| v.into_iter().map(|l| l.to_string()).collect::<Vec<_>>();
        let states = StateSpace::new(labels(f.visible), labels(f.hidden))?;
        let (ni, ne) = (states.n_visible(), states.n_hidden());
        let mat = |name: &str, rows: &[Vec<f64>], r: usize, c: usize| -> Result<Array2<f64>> {
            // `[]` stands for any matrix with no entries, e.g. P_EI when I is empty.
            if rows.is_empty() && r * c == 0 {
                return Ok(Array2::zeros((r, c)));
            }
            from_rows(rows, Some(c)).map_err(|e| Error::dim(format!("{name}: {e}")))
        };
        let mut spec = PartialChainSpec::new(
            states,
            mat("P_II", &f.p_ii, ni, ni)?,
            mat("P_IE", &f.p_ie, ni, ne)?,
            mat("P_EI", &f.p_ei, ne, ni)?,
            Array1::from(f.pi_i),
        )?;
        if let Some(l) = f.comm {
            spec = spec.with_comm(mat("L", &l, ne, ne)?)?;
        }
        if let Some(p) = f.partition {
            spec = spec.with_partition(p.into_iter().map(labels).collect())?;
        }
        Ok(spec)
    }
}

impl From<&PartialChainSpec> for SpecFile {
    fn from(s: &PartialChainSpec) -> Self {
        let rows = |m: &Array2<f64>| m.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let labels = |v: &[String]| v.iter().cloned().map(Label::Text).collect::<Vec<_>>();
        SpecFile {
            visible: labels(&s.states.visible),
            hidden: labels(&s.states.hidden),
            p_ii: rows(&s.p_ii),
            p_ie: rows(&s.p_ie),
            p_ei: rows(&s.p_ei),
            pi_i: s.pi_i.to_vec(),
            comm: s.comm.as_ref().map(rows),
            partition: s.partition.as_ref().map(|p| {
                p.iter()
                    .map(|b| b.iter().map(|&d| Label::Text(s.states.hidden[d].clone())).collect())
                    .collect()
            }),
        }
    }
}

/// One named hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Sup-norm residual for numeric identities; `None` for structural checks.
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tol: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub mod checks {
    pub const VISIBLE_ROWS: &str = "visible_rows_stochastic";
    pub const WEIGHTS: &str = "visible_weights";
    pub const EXIT_LAW: &str = "hidden_exit_law";
    pub const LEFT_EIGEN: &str = "visible_left_eigenvector";
    pub const VISIBLE_IRREDUCIBLE: &str = "visible_block_irreducible";
    pub const ENTERS_HIDDEN: &str = "enters_hidden";
    pub const COMM_IRREDUCIBLE: &str = "comm_irreducible";
}

/// Evaluates the standing assumptions on `spec`. Failures are reported, not raised.
pub fn validate_hypotheses(spec: &PartialChainSpec, tol: f64) -> ValidationReport {
    let mut out = Vec::new();
    let numeric = |name, residual: f64, detail: String| Check {
        name,
        passed: residual <= tol,
        residual: Some(residual),
        detail,
    };
    let structural = |name, passed, detail: &str| Check {
        name,
        passed,
        residual: None,
        detail: if passed { String::new() } else { detail.to_string() },
    };

    if !spec.is_hidden_only() {
        let full_rows = row_sums(spec.p_ii.view()) + spec.exit_mass();
        out.push(numeric(
            checks::VISIBLE_ROWS,
            sup_abs(full_rows.mapv(|r| r - 1.0).iter()),
            String::new(),
        ));

        let mass = spec.visible_mass();
        let positive = spec.pi_i.iter().all(|&x| x > 0.0);
        let weights_ok = positive && mass > 0.0 && mass < 1.0;
        out.push(structural(
            checks::WEIGHTS,
            weights_ok,
            &format!("need every pi_I entry > 0 and 0 < sum < 1, got sum {mass}"),
        ));

        // Every row of P_EI must equal pi_I.
        let exit_gap = spec
            .p_ei
            .outer_iter()
            .map(|row| sup_dist(row, spec.pi_i.view()))
            .fold(0.0, f64::max);
        out.push(numeric(checks::EXIT_LAW, exit_gap, String::new()));

        let lhs = row_times(spec.pi_i.view(), spec.p_ii.view());
        let rhs = spec.pi_i.mapv(|x| mass * x);
        out.push(numeric(checks::LEFT_EIGEN, sup_dist(lhs.view(), rhs.view()), String::new()));

        out.push(structural(
            checks::VISIBLE_IRREDUCIBLE,
            is_irreducible(&spec.p_ii),
            "the positive entries of P_II do not form a strongly connected graph",
        ));

        out.push(structural(
            checks::ENTERS_HIDDEN,
            spec.exit_mass().iter().any(|&x| x > 0.0),
            "no visible state has a transition into the hidden set",
        ));
    }

    if let Some(l) = &spec.comm {
        let bad: Vec<usize> = match &spec.partition {
            Some(blocks) => blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| !is_irreducible(&restrict(l, b)))
                .map(|(m, _)| m)
                .collect(),
            None => {
                if is_irreducible(l) {
                    vec![]
                } else {
                    vec![0]
                }
            }
        };
        let detail = if spec.partition.is_some() {
            format!("L restricted to blocks {bad:?} is reducible")
        } else {
            "L is reducible".to_string()
        };
        out.push(structural(checks::COMM_IRREDUCIBLE, bad.is_empty(), &detail));
    }

    ValidationReport { tol, checks: out }
}

/// Square submatrix on the given indices.
pub(crate) fn restrict(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| m[[idx[a], idx[b]]])
}

/// Quantities the hypotheses force on the hidden side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedQuantities {
    /// `π(I)`.
    pub pi_i_mass: f64,
    /// `π(E) = 1 − π(I)`.
    pub pi_e_mass: f64,
    #[serde(with = "crate::serde_matrix::vector")]
    pub pi_e: Array1<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub pihat_i: Array1<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub pihat_e: Array1<f64>,
}

/// `π_E(e) = π(I)⁻¹ Σ_i π(i) P(i,e)` restricted to the hidden columns `cols`.
pub(crate) fn hidden_weights(spec: &PartialChainSpec, cols: &[usize]) -> Result<Array1<f64>> {
    let mass = spec.visible_mass();
    let mut out = Array1::zeros(cols.len());
    for (k, &e) in cols.iter().enumerate() {
        let inflow: f64 = spec
            .pi_i
            .iter()
            .zip(spec.p_ie.column(e))
            .map(|(p, q)| p * q)
            .sum();
        if inflow <= 0.0 {
            return Err(Error::Degenerate {
                state: spec.states.hidden[e].clone(),
            });
        }
        out[k] = inflow / mass;
    }
    Ok(out)
}

/// Derives `π_E`, the masses and both normalized restrictions.
///
/// Assumes the exit-law and left-eigenvector checks of [`validate_hypotheses`] hold.
pub fn derive_quantities(spec: &PartialChainSpec) -> Result<DerivedQuantities> {
    if spec.is_hidden_only() {
        return Err(Error::spec("derived quantities need at least one visible state"));
    }
    let mass = spec.visible_mass();
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::spec(format!("pi(I) = {mass} is outside (0, 1)")));
    }
    let all: Vec<usize> = (0..spec.states.n_hidden()).collect();
    let pi_e = hidden_weights(spec, &all)?;
    Ok(DerivedQuantities {
        pi_i_mass: mass,
        pi_e_mass: 1.0 - mass,
        pihat_e: normalized(pi_e.view()),
        pihat_i: normalized(spec.pi_i.view()),
        pi_e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompletionMode {
    Bernoulli,
    Constrained,
    Parry,
    Uniform,
    External,
}

impl fmt::Display for CompletionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CompletionMode::Bernoulli => "bernoulli",
            CompletionMode::Constrained => "constrained",
            CompletionMode::Parry => "parry",
            CompletionMode::Uniform => "uniform",
            CompletionMode::External => "external",
        };
        f.write_str(s)
    }
}

/// A full chain on `I ⊔ E` obtained by supplying the hidden block.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedChain {
    spec: PartialChainSpec,
    p_ee: Array2<f64>,
    mode: CompletionMode,
    pi: Array1<f64>,
}

impl CompletedChain {
    /// Builds the chain with `π = (π_I, π_E)` and checks every identity at `tol`.
    pub(crate) fn build(
        spec: &PartialChainSpec,
        p_ee: Array2<f64>,
        mode: CompletionMode,
        tol: f64,
    ) -> Result<Self> {
        let ne = spec.states.n_hidden();
        check_shape("P_EE", p_ee.dim(), (ne, ne))?;
        check_entries("P_EE", p_ee.iter())?;
        let pi = if spec.is_hidden_only() {
            return Err(Error::spec("a chain without visible states needs an explicit stationary vector"));
        } else {
            let d = derive_quantities(spec)?;
            ndarray::concatenate![Axis(0), spec.pi_i, d.pi_e]
        };
        let chain = CompletedChain {
            spec: spec.clone(),
            p_ee,
            mode,
            pi,
        };
        chain.verify(tol)?;
        Ok(chain)
    }

    /// Chain on `E` alone (`I = ∅`), where `π(E) = 1`.
    pub(crate) fn hidden_only(
        spec: &PartialChainSpec,
        p_ee: Array2<f64>,
        pi: Array1<f64>,
        mode: CompletionMode,
        tol: f64,
    ) -> Result<Self> {
        let ne = spec.states.n_hidden();
        check_shape("P_EE", p_ee.dim(), (ne, ne))?;
        if pi.len() != ne {
            return Err(Error::dim("stationary vector length differs from |E|"));
        }
        let chain = CompletedChain {
            spec: spec.clone(),
            p_ee,
            mode,
            pi,
        };
        chain.verify(tol)?;
        Ok(chain)
    }

    fn verify(&self, tol: f64) -> Result<()> {
        let failures = self.identity_failures(tol);
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::CompletionInvalid { failures })
        }
    }

    /// Names and residuals of every chain identity that fails at `tol`.
    pub fn identity_failures(&self, tol: f64) -> Vec<String> {
        self.identity_residuals()
            .into_iter()
            .filter(|(_, r)| !(*r <= tol))
            .map(|(name, r)| format!("{name} (residual {r:.3e})"))
            .collect()
    }

    /// Sup-norm residuals of the four identities a completed chain must satisfy.
    pub fn identity_residuals(&self) -> Vec<(&'static str, f64)> {
        let p = self.full_matrix();
        let rows = sup_abs(row_sums(p.view()).mapv(|r| r - 1.0).iter());
        let stat = sup_dist(row_times(self.pi.view(), p.view()).view(), self.pi.view());
        let ni = self.spec.states.n_visible();
        let pi_e = self.pi.slice(s![ni..]);
        let mass_e = self.hidden_mass();
        let hidden_rows = sup_abs(row_sums(self.p_ee.view()).mapv(|r| r - mass_e).iter());
        let hidden_stat = sup_dist(
            row_times(pi_e, self.p_ee.view()).view(),
            pi_e.mapv(|x| mass_e * x).view(),
        );
        vec![
            ("row sums of P", rows),
            ("stationarity of pi", stat),
            ("hidden row sums equal pi(E)", hidden_rows),
            ("pi_E P_EE = pi(E) pi_E", hidden_stat),
        ]
    }

    pub fn spec(&self) -> &PartialChainSpec {
        &self.spec
    }

    pub fn states(&self) -> &StateSpace {
        &self.spec.states
    }

    pub fn p_ee(&self) -> &Array2<f64> {
        &self.p_ee
    }

    pub fn mode(&self) -> CompletionMode {
        self.mode
    }

    /// Stationary vector on `I ⊔ E`.
    pub fn pi(&self) -> &Array1<f64> {
        &self.pi
    }

    /// `π(E) = 1 − π(I)`.
    pub fn hidden_mass(&self) -> f64 {
        1.0 - self.spec.visible_mass()
    }

    pub fn visible_mass(&self) -> f64 {
        self.spec.visible_mass()
    }

    pub fn pihat_i(&self) -> Array1<f64> {
        normalized(self.spec.pi_i.view())
    }

    pub fn pihat_e(&self) -> Array1<f64> {
        let ni = self.spec.states.n_visible();
        normalized(self.pi.slice(s![ni..]))
    }

    /// The full transition matrix, visible states first.
    pub fn full_matrix(&self) -> Array2<f64> {
        let ni = self.spec.states.n_visible();
        let n = self.spec.states.len();
        let mut p = Array2::zeros((n, n));
        p.slice_mut(s![..ni, ..ni]).assign(&self.spec.p_ii);
        p.slice_mut(s![..ni, ni..]).assign(&self.spec.p_ie);
        p.slice_mut(s![ni.., ..ni]).assign(&self.spec.p_ei);
        p.slice_mut(s![ni.., ni..]).assign(&self.p_ee);
        p
    }

}

/// Combines `spec` with a caller-supplied hidden block, tagged `external`.
pub fn assemble(spec: &PartialChainSpec, p_ee: Array2<f64>) -> Result<CompletedChain> {
    assemble_with_tol(spec, p_ee, tol::IDENTITY)
}

pub fn assemble_with_tol(spec: &PartialChainSpec, p_ee: Array2<f64>, tol: f64) -> Result<CompletedChain> {
    CompletedChain::build(spec, p_ee, CompletionMode::External, tol)
}

/// Serialized form of a completed chain.
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport<'a> {
    pub visible: &'a [String],
    pub hidden: &'a [String],
    pub mode: CompletionMode,
    #[serde(rename = "P_EE", with = "crate::serde_matrix::matrix")]
    pub p_ee: Array2<f64>,
    #[serde(rename = "P", with = "crate::serde_matrix::matrix")]
    pub p: Array2<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub pi: Array1<f64>,
}

impl CompletedChain {
    pub fn report(&self) -> ChainReport<'_> {
        ChainReport {
            visible: self.states().visible(),
            hidden: self.states().hidden(),
            mode: self.mode,
            p_ee: self.p_ee.clone(),
            p: self.full_matrix(),
            pi: self.pi.clone(),
        }
    }
}
