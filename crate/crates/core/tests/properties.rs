//! Property tests over the randomized fixture space.

use bendml_core::cutml::{derive_thresholds, label_datasets, CpiKind, CpmSample};
use bendml_core::forest::roc_auc;
use bendml_core::linsolve::{solve_lp, LinearProgram, LpStatus, Sense};
use bendml_core::synth;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn instance_json_round_trip(seed in 0u64..500) {
        let inst = synth::random_tiny_instance(seed);
        let text = serde_json::to_string(&inst).unwrap();
        let back: bendml_core::Instance = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&inst, &back);
        prop_assert_eq!(text, serde_json::to_string(&back).unwrap());
    }

    #[test]
    fn tree_probabilities_multiply_and_close(seed in 0u64..500) {
        let inst = synth::random_tiny_instance(seed);
        let mut leaf_sum = 0.0;
        for node in inst.tree.iter() {
            let path = inst.ancestors(node.id).unwrap();
            prop_assert_eq!(path.len(), node.stage + 1);
            if inst.is_leaf(node.id) {
                let mut prod = 1.0;
                for pair in path.windows(2) {
                    let parent = inst.node(pair[0]).unwrap();
                    let child = inst.node(pair[1]).unwrap();
                    prod *= child.probability / parent.probability;
                }
                prop_assert!((prod - node.probability).abs() < 1e-9);
                leaf_sum += node.probability;
            }
        }
        prop_assert!((leaf_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lp_strong_duality_on_random_boxes(seed in 0u64..400) {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..6usize);
        let mut lp = LinearProgram::new(n);
        for j in 0..n {
            lp.lower[j] = -rng.random_range(0.0..2.0f64);
            lp.upper[j] = rng.random_range(0.1..3.0f64);
            lp.objective[j] = rng.random_range(-2.0..2.0f64);
        }
        for _ in 0..rng.random_range(1..4usize) {
            let coeffs: Vec<(usize, f64)> =
                (0..n).map(|j| (j, rng.random_range(-2.0..2.0f64))).collect();
            let rhs = rng.random_range(-1.0..4.0f64);
            let sense = if rng.random_bool(0.5) { Sense::Le } else { Sense::Ge };
            lp.push_row(coeffs, sense, rhs);
        }
        let sol = solve_lp(&lp);
        if sol.status == LpStatus::Optimal {
            prop_assert!(lp.infeasibility(&sol.primal) <= 1e-6);
            let mut dual: f64 = sol
                .duals
                .iter()
                .zip(lp.rows.iter())
                .map(|(y, r)| y * r.rhs)
                .sum();
            for j in 0..n {
                dual += sol.reduced_costs[j] * sol.primal[j];
            }
            prop_assert!((sol.objective - dual).abs() <= 1e-6 * (1.0 + sol.objective.abs()));
        }
    }

    #[test]
    fn roc_auc_invariant_under_monotone_transform(
        scores in proptest::collection::vec(0.0f64..1.0, 4..40),
        flips in proptest::collection::vec(any::<bool>(), 4..40),
    ) {
        let n = scores.len().min(flips.len());
        let scores = &scores[..n];
        let labels = &flips[..n];
        let n_pos = labels.iter().filter(|&&l| l).count();
        prop_assume!(n_pos > 0 && n_pos < n);
        let base = roc_auc(scores, labels).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (s * 4.0).exp() + 1.0).collect();
        let after = roc_auc(&transformed, labels).unwrap();
        prop_assert!((base - after).abs() < 1e-12);
    }

    #[test]
    fn labels_monotone_over_random_metric_sets(
        cpms in proptest::collection::vec(-0.5f64..0.5, 8..60),
        n_zeta in 2usize..10,
    ) {
        let samples: Vec<CpmSample> = cpms
            .iter()
            .map(|&c| CpmSample {
                node: 0,
                block: 0,
                iteration: 2,
                cpm_lb: Some(c.abs()),
                cpm_ub: Some(c),
                lb_features: vec![0.0; 6],
                ub_features: vec![0.0; 5],
                single_cut_objective: None,
                lb_before: None,
            })
            .collect();
        for cpi in [CpiKind::Lb, CpiKind::Ub] {
            let values: Vec<f64> = samples.iter().filter_map(|s| s.cpm(cpi)).collect();
            if let Ok(ladder) = derive_thresholds(&values, cpi, n_zeta) {
                let datasets = label_datasets(&samples, &ladder);
                for row in 0..samples.len() {
                    for i in 1..datasets.len() {
                        if datasets[i - 1].rows[row].1 {
                            prop_assert!(datasets[i].rows[row].1);
                        }
                    }
                }
            }
        }
    }
}
