//! Small hand-checkable cases, one per documented behaviour.

mod common;

use common::*;
use labyrinth::entropy::{entropy_full, entropy_rate as crate_entropy_rate, shannon};
use labyrinth::feasibility::{build_system, diagonal_shortcut, solve_feasibility};
use labyrinth::labyrinths::{complete_multi, decompose};
use labyrinth::maxent::{
    self, bernoulli_block, complete_parry, complete_uniform, solve_product_form, ConstrainedOptions,
};
use labyrinth::model::{assemble, checks, derive_quantities, validate_hypotheses, PartialChainSpec, StateSpace};
use labyrinth::sim::{build_skeleton, compare_laws, sim_stats, simulate_direct, simulate_splice, simulate_splice_with_skeleton, SimVerdict};
use labyrinth::Error;
use ndarray::{array, Array1, Array2};

fn no_loops(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(a, b)| if a == b { 0.0 } else { 1.0 })
}

fn desk() -> PartialChainSpec {
    fixture("desk")
}

fn spec(p_ii: Array2<f64>, p_ie: Array2<f64>, p_ei: Array2<f64>, pi_i: Array1<f64>) -> PartialChainSpec {
    let states = StateSpace::new(
        (0..p_ii.nrows()).map(|i| format!("i{i}")).collect(),
        (0..p_ie.ncols()).map(|e| format!("e{e}")).collect(),
    )
    .unwrap();
    PartialChainSpec::new(states, p_ii, p_ie, p_ei, pi_i).unwrap()
}

mod hypotheses {
    use super::*;

    #[test]
    fn desk_passes_with_zero_residuals() {
        let r = validate_hypotheses(&desk(), 1e-12);
        assert!(r.all_passed());
        assert_eq!(r.get(checks::EXIT_LAW).unwrap().residual, Some(0.0));
        assert_eq!(r.get(checks::LEFT_EIGEN).unwrap().residual, Some(0.0));
    }

    #[test]
    fn one_bad_row_is_reported_with_its_residual() {
        let d = desk();
        let s = spec(d.p_ii().clone(), d.p_ie().clone(), array![[0.3, 0.3], [0.35, 0.25]], d.pi_i().clone());
        let r = validate_hypotheses(&s, 1e-9);
        let c = r.get(checks::EXIT_LAW).unwrap();
        assert!(!c.passed);
        assert!((c.residual.unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(r.failures().count(), 1);
    }
}

mod derived {
    use super::*;

    #[test]
    fn desk_hidden_law() {
        let d = derive_quantities(&desk()).unwrap();
        assert!((d.pi_e[0] - 0.15).abs() < 1e-15 && (d.pi_e[1] - 0.25).abs() < 1e-15);
        assert!((d.pihat_e[0] - 0.375).abs() < 1e-15 && (d.pihat_e[1] - 0.625).abs() < 1e-15);
        assert!((d.pi_e_mass - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_column_is_degenerate() {
        let s = spec(
            array![[0.3, 0.3], [0.3, 0.3]],
            array![[0.4, 0.0], [0.4, 0.0]],
            array![[0.3, 0.3], [0.3, 0.3]],
            array![0.3, 0.3],
        );
        assert!(matches!(derive_quantities(&s), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn single_hidden_state() {
        let s = spec(array![[0.5]], array![[0.5]], array![[0.5]], array![0.5]);
        let d = derive_quantities(&s).unwrap();
        assert_eq!(d.pihat_e, array![1.0]);
        assert!((d.pi_e[0] - 0.5).abs() < 1e-15);
        let chain = maxent::complete_bernoulli(&s).unwrap();
        assert_eq!(chain.p_ee(), &array![[0.5]]);
    }
}

mod completion {
    use super::*;

    #[test]
    fn bernoulli_rows_copy_the_hidden_weights() {
        let chain = maxent::complete_bernoulli(&desk()).unwrap();
        assert_eq!(chain.p_ee(), &array![[0.15, 0.25], [0.15, 0.25]]);
        assert!(chain.identity_failures(1e-12).is_empty());
    }

    #[test]
    fn zero_block_is_rejected() {
        assert!(matches!(assemble(&desk(), Array2::zeros((2, 2))), Err(Error::CompletionInvalid { .. })));
    }

    #[test]
    fn scaled_block_is_rejected() {
        let block = array![[0.15, 0.25], [0.15, 0.25]] * 1.01;
        match assemble(&desk(), block) {
            Err(Error::CompletionInvalid { failures }) => {
                // Row sums are off by 0.01 · π(E) = 0.004.
                assert!(failures.iter().any(|f| f.contains("4.000e-3") || f.contains("4.0e-3") || f.contains("0.004")), "{failures:?}");
            }
            other => panic!("expected CompletionInvalid, got {other:?}"),
        }
    }

    #[test]
    fn fair_coin_has_entropy_log_2() {
        let s = spec(array![[0.5]], array![[0.5]], array![[0.5]], array![0.5]);
        let e = entropy_full(&maxent::complete_bernoulli(&s).unwrap());
        assert!((e.h_x - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn desk_entropy_identity() {
        let e = entropy_full(&maxent::complete_bernoulli(&desk()).unwrap());
        assert!(e.identity_residual <= 1e-12);
    }

    #[test]
    fn permutation_rows_carry_no_entropy() {
        let p = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        assert_eq!(crate_entropy_rate(p.view(), array![0.2, 0.3, 0.5].view()), 0.0);
    }

    #[test]
    fn bernoulli_dominates_random_matrices() {
        let mut rng = rng(148);
        for n in [2, 3, 5] {
            for _ in 0..50 {
                let p = random_stochastic_on(&mut rng, &Array2::ones((n, n)));
                let pihat = stationary(&p);
                let free = entropy_rate(&bernoulli_block(&pihat), &pihat);
                assert!((free - shannon(pihat.view())).abs() < 1e-12);
                assert!(entropy_rate(&p, &pihat) <= free + 1e-12);
            }
        }
    }

    #[test]
    fn all_ones_support_is_bernoulli() {
        let pihat = array![0.2, 0.5, 0.3];
        let sol = solve_product_form(&pihat, &Array2::ones((3, 3)), 0.4, &ConstrainedOptions::default()).unwrap();
        assert!(sup(&sol.p_hat, &bernoulli_block(&pihat)) < 1e-12);
        // The scalings are fixed only up to α ↦ cα, β ↦ β/c; their product is not.
        for d in 0..3 {
            for e in 0..3 {
                assert!((sol.alpha[d] * sol.beta[e] - pihat[e]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_self_loops_and_a_heavy_state_fails() {
        let s = spec_with_pihat(&array![0.6, 0.25, 0.15], Some(no_loops(3)));
        let err = maxent::complete_constrained(&s, &ConstrainedOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleOrDegenerate { .. }), "{err}");
    }
}

mod parry_and_uniform {
    use super::*;

    #[test]
    fn two_by_two_all_ones() {
        let p = complete_parry(&Array2::ones((2, 2))).unwrap();
        assert!((p.lambda - 2.0).abs() < 1e-12);
        assert!(p.p_hat.iter().all(|&x| (x - 0.5).abs() < 1e-12));
        assert!(p.stationary.iter().all(|&x| (x - 0.5).abs() < 1e-12));
        assert!((p.entropy - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn golden_mean() {
        let p = complete_parry(&array![[1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!((p.lambda - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-10);
        assert!((p.entropy - 0.48121).abs() < 1e-5);
    }

    #[test]
    fn cyclic_permutation_is_deterministic() {
        let l = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let p = complete_parry(&l).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12);
        assert!(sup(&p.p_hat, &l) < 1e-12);
        assert!(p.entropy.abs() < 1e-12);
    }

    #[test]
    fn uniform_sizes() {
        assert_eq!(complete_uniform(1).unwrap(), array![[1.0]]);
        assert!(complete_uniform(4).unwrap().iter().all(|&x| x == 0.25));
    }

    #[test]
    fn uniform_beats_random_matrices() {
        let mut rng = rng(175);
        let n = 4;
        let u = complete_uniform(n).unwrap();
        let best = entropy_rate(&u, &Array1::from_elem(n, 0.25));
        for _ in 0..50 {
            let p = random_stochastic_on(&mut rng, &Array2::ones((n, n)));
            assert!(entropy_rate(&p, &stationary(&p)) <= best + 1e-12);
        }
    }
}

mod feasibility {
    use super::*;

    #[test]
    fn system_shape_without_forbidden_edges() {
        let sys = build_system(&array![0.5, 0.5], &Array2::ones((2, 2))).unwrap();
        assert_eq!(sys.d.dim(), (6, 4));
        assert!(sys.d.slice(ndarray::s![4.., ..]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn forbidden_edge_shows_up_once() {
        let sys = build_system(&array![0.5, 0.5], &array![[1.0, 0.0], [1.0, 1.0]]).unwrap();
        // Edge (0, 1) in zero-based indices: mass entering state 1 from state 0.
        let row = sys.d.row(2 * 2 + 1);
        assert_eq!(row.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(row[2], 1.0);
    }

    #[test]
    fn identity_satisfies_the_system() {
        let pihat = array![0.25, 0.25, 0.25, 0.25];
        let sys = build_system(&pihat, &Array2::eye(4)).unwrap();
        let p = sys.encode(Array2::<f64>::eye(4).view());
        let dp = sys.d.dot(&p);
        assert_eq!(dp.slice(ndarray::s![..4]), Array1::<f64>::ones(4));
        assert_eq!(dp.slice(ndarray::s![4..8]), pihat);
    }

    #[test]
    fn infeasible_pattern_gives_certificate() {
        let pihat = array![0.6, 0.25, 0.15];
        let l = no_loops(3);
        let o = solve_feasibility(&build_system(&pihat, &l).unwrap()).unwrap();
        let c = o.certificate.expect("certificate");
        assert!(o.witness.is_none());
        assert!(c.objective(&pihat) < 0.0);
        assert!(c.is_valid(&pihat, &l));
    }

    #[test]
    fn full_diagonal_or_full_support_is_feasible() {
        let mut rng = rng(239);
        for _ in 0..100 {
            let n = 2 + (rand::Rng::random::<u32>(&mut rng) % 7) as usize;
            let l = random_comm(&mut rng, n, 0.2, true);
            let pihat = random_simplex(&mut rng, n);
            let o = solve_feasibility(&build_system(&pihat, &l).unwrap()).unwrap();
            assert!(o.is_feasible());
            let o = solve_feasibility(&build_system(&pihat, &Array2::ones((n, n))).unwrap()).unwrap();
            assert!(o.is_feasible());
        }
    }

    #[test]
    fn diagonal_shortcut_cases() {
        assert!(diagonal_shortcut(&Array2::eye(3)));
        assert!(!diagonal_shortcut(&(no_loops(3))));
    }
}

mod labyrinths {
    use super::*;

    #[test]
    fn single_block_matches_the_global_problem() {
        let s = desk().with_partition(vec![vec!["a".into(), "b".into()]]).unwrap();
        let blocks = decompose(&s).unwrap();
        assert_eq!(blocks.len(), 1);
        let d = derive_quantities(&desk()).unwrap();
        assert!((&blocks[0].pihat - &d.pihat_e).iter().all(|x| x.abs() < 1e-15));
        assert!((blocks[0].row_mass - 0.4).abs() < 1e-15);
    }

    #[test]
    fn singleton_blocks() {
        let s = desk().with_partition(vec![vec!["a".into()], vec!["b".into()]]).unwrap();
        let blocks = decompose(&s).unwrap();
        for b in &blocks {
            assert_eq!(b.pihat, array![1.0]);
            assert!((b.row_mass - 0.4).abs() < 1e-15);
        }
        let multi = complete_multi(&s, &ConstrainedOptions::default()).unwrap();
        assert!(sup(multi.chain.p_ee(), &array![[0.4, 0.0], [0.0, 0.4]]) < 1e-15);
    }

    #[test]
    fn unreached_block_is_structural() {
        let s = spec(
            array![[0.3, 0.3], [0.3, 0.3]],
            array![[0.4, 0.0], [0.4, 0.0]],
            array![[0.3, 0.3], [0.3, 0.3]],
            array![0.3, 0.3],
        )
        .with_partition(vec![vec!["e0".into()], vec!["e1".into()]])
        .unwrap();
        assert!(decompose(&s).is_err());
    }

    #[test]
    fn infeasible_block_is_named() {
        let w = array![0.25, 0.25, 0.3, 0.125, 0.075];
        let mut l = Array2::zeros((5, 5));
        l.slice_mut(ndarray::s![..2, ..2]).fill(1.0);
        l.slice_mut(ndarray::s![2.., 2..]).assign(&(no_loops(3)));
        let labels = |r: std::ops::Range<usize>| r.map(|e| format!("e{e}")).collect::<Vec<_>>();
        let s = spec(
            Array2::from_elem((2, 2), 0.3),
            Array2::from_shape_fn((2, 5), |(_, e)| 0.4 * w[e]),
            Array2::from_elem((5, 2), 0.3),
            array![0.3, 0.3],
        )
        .with_comm(l)
        .unwrap()
        .with_partition(vec![labels(0..2), labels(2..5)])
        .unwrap();
        let err = complete_multi(&s, &ConstrainedOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Block { block: 1, .. }), "{err}");
        assert!(err.to_string().starts_with("block 1"));
    }
}

mod reconstruction {
    use super::*;

    #[test]
    fn desk_skeleton_entries() {
        let chain = maxent::complete_bernoulli(&desk()).unwrap();
        let k = build_skeleton(&chain).unwrap();
        assert!((k.q[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((k.theta[[0, 0]] - 0.6).abs() < 1e-15);
        assert!(k.residuals(&chain).max() <= 1e-12);
    }

    #[test]
    fn entry_law_averages_to_the_hidden_weights() {
        let chain = maxent::complete_bernoulli(&desk()).unwrap();
        let k = build_skeleton(&chain).unwrap();
        assert!(k.residuals(&chain).hidden_inflow <= 1e-12);
        // Per visible state the diverted entry law is P(i,·)/P(i,E); only its
        // average under π̂_I matches π_E. Row 0 of the desk enters (0.5, 0.5).
        let per_state: Vec<f64> = (0..2)
            .map(|d| (0..2).map(|j| k.q[[0, j]] * (1.0 - k.theta[[0, j]]) * k.entry[[0, d]]).sum())
            .collect();
        assert!((per_state[0] - 0.2).abs() < 1e-12 && (per_state[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn state_without_exits_never_diverts() {
        let s = spec(
            array![[0.5, 0.5], [0.1, 0.1]],
            array![[0.0, 0.0], [0.5, 0.3]],
            array![[0.3, 0.3], [0.3, 0.3]],
            array![0.3, 0.3],
        );
        assert!(validate_hypotheses(&s, 1e-12).all_passed());
        let chain = maxent::complete_bernoulli(&s).unwrap();
        let k = build_skeleton(&chain).unwrap();
        assert_eq!(k.q.row(0), s.p_ii().row(0));
        assert!(k.theta.row(0).iter().all(|&t| t == 1.0));
    }

    #[test]
    fn unreachable_hidden_set_is_refused() {
        // With no way into E the hidden states carry no weight, which the
        // completion cannot represent.
        let s = spec(
            array![[0.5, 0.5], [0.5, 0.5]],
            Array2::zeros((2, 2)),
            array![[0.5, 0.5], [0.5, 0.5]],
            array![0.5, 0.5],
        );
        let err = maxent::complete_bernoulli(&s).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)), "{err:?}");
    }

    #[test]
    fn first_state_follows_the_stationary_law() {
        let chain = maxent::complete_bernoulli(&desk()).unwrap();
        let k = build_skeleton(&chain).unwrap();
        let runs = 1_000_000;
        let mut counts = [0u64; 4];
        for seed in 0..runs {
            counts[simulate_splice_with_skeleton(&chain, &k, 1, seed).unwrap().w[0]] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(chain.pi())
            .map(|(&c, p)| (c as f64 / runs as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.005, "TV {tv}");
    }

    #[test]
    fn renewal_gaps_average_one_over_visible_mass() {
        let chain = maxent::complete_bernoulli(&desk()).unwrap();
        let trace = simulate_splice(&chain, 1_000_000, 407).unwrap();
        let gaps: Vec<f64> = trace.renewal_times.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        // Geometric(0.6) on {1, 2, ...}: mean 5/3, variance 10/9.
        let se = (10.0f64 / 9.0 / gaps.len() as f64).sqrt();
        assert!((mean - 5.0 / 3.0).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn direct_sampler_matches_the_matrix() {
        let chain = maxent::complete_bernoulli(&desk()).unwrap();
        let path = simulate_direct(&chain, 1_000_000, 415).unwrap();
        let trace = labyrinth::sim::SpliceTrace::from_states(path, 2, 415);
        let stats = sim_stats(&trace, 4);
        let p = chain.full_matrix();
        for a in 0..4 {
            let n = stats.row_counts[a] as f64;
            for b in 0..4 {
                let sigma = (p[[a, b]] * (1.0 - p[[a, b]]) / n).sqrt();
                assert!((stats.empirical_p[[a, b]] - p[[a, b]]).abs() <= 3.0 * sigma + 1e-12);
            }
        }
    }

    #[test]
    fn determinism_and_tiny_runs() {
        let chain = maxent::complete_bernoulli(&desk()).unwrap();
        assert_eq!(simulate_direct(&chain, 1000, 9).unwrap(), simulate_direct(&chain, 1000, 9).unwrap());
        assert_eq!(simulate_direct(&chain, 1, 9).unwrap().len(), 1);
        assert_eq!(simulate_splice(&chain, 1000, 9).unwrap(), simulate_splice(&chain, 1000, 9).unwrap());
        let short = simulate_splice(&chain, 10, 3).unwrap();
        assert_eq!(compare_laws(&short, &chain).unwrap().verdict, SimVerdict::Inconclusive);
    }
}
