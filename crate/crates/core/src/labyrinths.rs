//! Several labyrinths that only communicate through the visible states.
//!
//! With a partition `E = E_1 ⊔ … ⊔ E_k` the hidden block is block diagonal and
//! every block is completed on its own, with stationary law
//! `π̂_m = π_{E_m} / π(E_m)`. Each block's rows sum to the *global* `π(E)`,
//! not to `π(E_m)`: a hidden state leaves `E` with probability `π(I)`
//! whatever labyrinth it sits in.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::entropy::entropy_rate;
use crate::feasibility::{build_system, solve_feasibility, FeasibilityOutcome};
use crate::maxent::{bernoulli_block, hidden_block, solve_product_form, ConstrainedOptions, Telemetry};
use crate::model::{hidden_weights, restrict, CompletedChain, CompletionMode, PartialChainSpec};
use crate::{tol, Error, Result};

/// One labyrinth's completion problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProblem {
    /// Position of the block in the partition.
    pub index: usize,
    /// Hidden indices of the block, in partition order.
    pub hidden: Vec<usize>,
    pub labels: Vec<String>,
    /// `π_{E_m}`.
    pub pi_block: Array1<f64>,
    /// `π_{E_m} / π(E_m)`.
    pub pihat: Array1<f64>,
    /// `L` restricted to the block.
    pub comm: Option<Array2<f64>>,
    /// `π(E)`, shared by all blocks.
    pub row_mass: f64,
}

impl BlockProblem {
    /// `π(E_m)`.
    pub fn block_mass(&self) -> f64 {
        self.pi_block.sum()
    }
}

/// Splits `spec` along its partition; a spec without one is a single block.
pub fn decompose(spec: &PartialChainSpec) -> Result<Vec<BlockProblem>> {
    if spec.is_hidden_only() {
        return Err(Error::spec("labyrinth blocks need at least one visible state"));
    }
    let mass = spec.visible_mass();
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::spec(format!("pi(I) = {mass} is outside (0, 1)")));
    }
    let whole: Vec<Vec<usize>> = vec![(0..spec.states().n_hidden()).collect()];
    let blocks = spec.partition().unwrap_or(&whole);
    blocks
        .iter()
        .enumerate()
        .map(|(index, hidden)| {
            let pi_block = hidden_weights(spec, hidden).map_err(|_| Error::Block {
                block: index,
                source: Box::new(Error::spec("no visible state enters this labyrinth")),
            })?;
            let total = pi_block.sum();
            Ok(BlockProblem {
                index,
                labels: hidden.iter().map(|&e| spec.states().hidden()[e].clone()).collect(),
                pihat: pi_block.mapv(|x| x / total),
                comm: spec.comm().map(|l| restrict(l, hidden)),
                row_mass: 1.0 - mass,
                hidden: hidden.clone(),
                pi_block,
            })
        })
        .collect()
}

/// LP verdict for every block that carries a communication matrix.
pub fn block_feasibility(problems: &[BlockProblem]) -> Result<BTreeMap<usize, FeasibilityOutcome>> {
    let mut out = BTreeMap::new();
    for p in problems {
        if let Some(comm) = &p.comm {
            let outcome = build_system(&p.pihat, comm)
                .and_then(|sys| solve_feasibility(&sys))
                .map_err(|e| Error::Block {
                    block: p.index,
                    source: Box::new(e),
                })?;
            out.insert(p.index, outcome);
        }
    }
    Ok(out)
}

/// Per-block outcome, keyed by block index in [`MultiCompletion`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub labels: Vec<String>,
    pub mode: CompletionMode,
    #[serde(with = "crate::serde_matrix::matrix")]
    pub p_hat: Array2<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub telemetry: Option<Telemetry>,
    /// Entropy rate of `P̂_m` under `π̂_m`.
    pub h_z: f64,
    /// `−Σ_{d,e ∈ E_m} π(d) P(d,e) log P(d,e)`.
    pub h_prime: f64,
}

#[derive(Debug, Clone)]
pub struct MultiCompletion {
    pub chain: CompletedChain,
    pub blocks: BTreeMap<usize, BlockReport>,
}

impl MultiCompletion {
    pub fn block_h_prime_sum(&self) -> f64 {
        self.blocks.values().map(|b| b.h_prime).sum()
    }

    /// `|H'(P_EE) − Σ_m H'_m|`, with the left side computed on the assembled block.
    pub fn additivity_residual(&self) -> f64 {
        let ni = self.chain.states().n_visible();
        let pi_e = self.chain.pi().slice(ndarray::s![ni..]).to_owned();
        let total = entropy_rate(self.chain.p_ee().view(), pi_e.view());
        (total - self.block_h_prime_sum()).abs()
    }
}

/// `H'_m = π(E_m) π(E) (h(Z_m) − log π(E))`.
fn block_h_prime(problem: &BlockProblem, h_z: f64) -> f64 {
    problem.block_mass() * problem.row_mass * (h_z - problem.row_mass.ln())
}

fn solve_block(problem: &BlockProblem, mode: CompletionMode, opts: &ConstrainedOptions) -> Result<BlockReport> {
    let (p_hat, telemetry) = match mode {
        CompletionMode::Bernoulli => (bernoulli_block(&problem.pihat), None),
        CompletionMode::Constrained => {
            let comm = problem
                .comm
                .as_ref()
                .ok_or_else(|| Error::spec("constrained completion needs a communication matrix L"))?;
            let outcome = solve_feasibility(&build_system(&problem.pihat, comm)?)?;
            if let Some(certificate) = outcome.certificate {
                return Err(Error::Infeasible {
                    certificate: Box::new(certificate),
                });
            }
            let sol = solve_product_form(&problem.pihat, comm, problem.row_mass, opts)?;
            (sol.p_hat, Some(sol.telemetry))
        }
        other => return Err(Error::spec(format!("mode {other} does not apply to a single labyrinth"))),
    };
    let h_z = entropy_rate(p_hat.view(), problem.pihat.view());
    Ok(BlockReport {
        labels: problem.labels.clone(),
        mode,
        h_prime: block_h_prime(problem, h_z),
        h_z,
        p_hat,
        telemetry,
    })
}

/// Completes each block with its mode and assembles the block-diagonal `P_EE`.
///
/// `modes[k]` applies to `problems[k]`; problems may come in any order.
pub fn complete_blocks(
    spec: &PartialChainSpec,
    problems: &[BlockProblem],
    modes: &[CompletionMode],
    opts: &ConstrainedOptions,
) -> Result<MultiCompletion> {
    if modes.len() != problems.len() {
        return Err(Error::dim(format!("{} modes for {} blocks", modes.len(), problems.len())));
    }
    let ne = spec.states().n_hidden();
    let mut p_ee = Array2::zeros((ne, ne));
    let mut blocks = BTreeMap::new();
    for (problem, &mode) in problems.iter().zip(modes) {
        let report = solve_block(problem, mode, opts).map_err(|e| Error::Block {
            block: problem.index,
            source: Box::new(e),
        })?;
        let block = hidden_block(problem.row_mass, &report.p_hat);
        for (a, &d) in problem.hidden.iter().enumerate() {
            for (b, &e) in problem.hidden.iter().enumerate() {
                p_ee[[d, e]] = block[[a, b]];
            }
        }
        blocks.insert(problem.index, report);
    }
    let mode = if modes.contains(&CompletionMode::Constrained) {
        CompletionMode::Constrained
    } else {
        CompletionMode::Bernoulli
    };
    let chain = CompletedChain::build(spec, p_ee, mode, tol::IDENTITY)?;
    Ok(MultiCompletion { chain, blocks })
}

/// Constrained where the block has an `L`, Bernoulli otherwise.
pub fn auto_modes(problems: &[BlockProblem]) -> Vec<CompletionMode> {
    problems
        .iter()
        .map(|p| {
            if p.comm.is_some() {
                CompletionMode::Constrained
            } else {
                CompletionMode::Bernoulli
            }
        })
        .collect()
}

/// [`decompose`] followed by [`complete_blocks`] with [`auto_modes`].
pub fn complete_multi(spec: &PartialChainSpec, opts: &ConstrainedOptions) -> Result<MultiCompletion> {
    let problems = decompose(spec)?;
    let modes = auto_modes(&problems);
    complete_blocks(spec, &problems, &modes, opts)
}
