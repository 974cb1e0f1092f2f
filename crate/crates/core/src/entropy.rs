//! Entropy rates of completed chains, with `0 · log 0 = 0`.

use ndarray::{s, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::model::CompletedChain;

/// `p log p`, extended by continuity at zero.
pub fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// `−Σ_a weights(a) Σ_b P(a,b) log P(a,b)`.
///
/// With `weights` the stationary law of `P` this is the entropy rate of the
/// stationary chain.
pub fn entropy_rate(p: ArrayView2<f64>, weights: ArrayView1<f64>) -> f64 {
    -p.outer_iter()
        .zip(weights)
        .map(|(row, &w)| w * row.iter().map(|&x| plogp(x)).sum::<f64>())
        .sum::<f64>()
}

/// Shannon entropy of a probability vector.
pub fn shannon(p: ArrayView1<f64>) -> f64 {
    -p.iter().map(|&x| plogp(x)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    /// Entropy rate of the full chain, computed directly.
    pub h_x: f64,
    /// Entropy rate of the normalized hidden chain `P̂ = π(E)⁻¹ P_EE` under `π̂_E`.
    pub h_z: f64,
    /// `H'(P_EE) = −Σ_{d∈E} π(d) Σ_{e∈E} P(d,e) log P(d,e)`.
    pub h_prime: f64,
    /// `|H' − (π(E)² h(Z) − π(E)² log π(E))|`.
    pub identity_residual: f64,
    /// Visible rows' contribution `−Σ_i π(i) Σ_b P(i,b) log P(i,b)`.
    pub visible_term: f64,
    /// Exit contribution `−π(E) Σ_j π(j) log π(j)`, valid when every hidden row exits with law `π_I`.
    pub exit_term: f64,
    /// `|h_x − (visible_term + exit_term + h_prime)|`.
    pub decomposition_residual: f64,
}

pub fn entropy_full(chain: &CompletedChain) -> EntropyReport {
    let p = chain.full_matrix();
    let pi = chain.pi();
    let h_x = entropy_rate(p.view(), pi.view());

    let ni = chain.states().n_visible();
    let mass_e = chain.hidden_mass();
    let pi_i = pi.slice(s![..ni]);
    let pi_e = pi.slice(s![ni..]);

    let visible_term = entropy_rate(p.slice(s![..ni, ..]), pi_i);
    let exit_term = -mass_e * pi_i.iter().map(|&x| plogp(x)).sum::<f64>();
    let h_prime = entropy_rate(chain.p_ee().view(), pi_e);

    let p_hat = chain.p_ee().mapv(|x| x / mass_e);
    let h_z = entropy_rate(p_hat.view(), chain.pihat_e().view());
    let identity = mass_e * mass_e * h_z - mass_e * mass_e * mass_e.ln();

    EntropyReport {
        h_x,
        h_z,
        h_prime,
        identity_residual: (h_prime - identity).abs(),
        visible_term,
        exit_term,
        decomposition_residual: (h_x - (visible_term + exit_term + h_prime)).abs(),
    }
}
