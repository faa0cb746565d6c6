use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_snell::decomposition::{flat_off_check, universal_decompose};
use robust_snell::filtration::{count_rules, enumerate_rules, max_rule, min_rule, AdaptedFamily};
use robust_snell::fixtures::Fixture;
use robust_snell::oracle::crosscheck;
use robust_snell::priors::{bayes_conditional, paste, pure_density, DensityProcess, PriorMode, PriorSet, Selection};
use robust_snell::random::{random_instance, Limits};
use robust_snell::snell::{
    check_optimality_certificate, check_supermartingale_family, extract_optimal_prior, robust_expectation, solve,
    u_alpha, u_star, ALPHA_GRID,
};

const TOL: f64 = 1e-9;

fn small() -> Limits {
    Limits {
        max_selections: 256,
        ..Limits::default()
    }
}

fn instance(seed: u64, mode: PriorMode) -> (Fixture, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_instance(&mut rng, small(), mode);
    (f, rng)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1.0)
}

fn random_selection(f: &Fixture, rng: &mut ChaCha8Rng) -> Selection {
    Selection(
        f.tree
            .nodes()
            .map(|n| {
                let k = f.priors.extremes(n).len();
                if k == 0 {
                    0
                } else {
                    rng.gen_range(0..k)
                }
            })
            .collect(),
    )
}

fn mode_strategy() -> impl Strategy<Value = PriorMode> {
    prop_oneof![Just(PriorMode::Closure), Just(PriorMode::Equivalent)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engine_matches_brute_force(seed in any::<u64>(), mode in mode_strategy()) {
        let (f, _) = instance(seed, mode);
        let rep = crosscheck(&f.tree, &f.payoff, &f.priors).unwrap();
        prop_assert!(rep.max_deviation() <= 1e-9, "deviation {}", rep.max_deviation());
    }

    #[test]
    fn value_dominates_and_is_consistent(seed in any::<u64>()) {
        let (f, _) = instance(seed, PriorMode::Closure);
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        for n in f.tree.nodes() {
            prop_assert!(s.r[n] >= f.payoff[n]);
            prop_assert!(s.r[n] >= s.r_plus[n]);
            prop_assert!(close(s.r[n], f.payoff[n].max(s.r_plus[n])));
            if f.tree.is_terminal(n) {
                prop_assert_eq!(s.r_plus[n], f.payoff[n]);
            }
        }
        prop_assert!(check_supermartingale_family(&f.tree, &s.r, &f.priors, TOL).passed);
    }

    #[test]
    fn enlarging_the_polytope_never_lowers_values(seed in any::<u64>()) {
        let (f, mut rng) = instance(seed, PriorMode::Closure);
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let tree = &f.tree;
        let bigger = f.priors.enlarged(|n| {
            let children = tree.children(n);
            let raw: Vec<f64> = children.iter().map(|_| rng.gen::<f64>() + 0.01).collect();
            let total: f64 = raw.iter().sum();
            vec![children.iter().zip(raw).map(|(&c, x)| x / total / tree.q(c)).collect()]
        });
        let sb = solve(&f.tree, &f.payoff, &bigger).unwrap();
        for n in f.tree.nodes() {
            prop_assert!(sb.r[n] >= s.r[n] - TOL);
            prop_assert!(sb.r_plus[n] >= s.r_plus[n] - TOL);
        }
    }

    #[test]
    fn values_are_positively_homogeneous(seed in any::<u64>(), c in 0.0f64..50.0) {
        let (f, _) = instance(seed, PriorMode::Closure);
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let sc = solve(&f.tree, &f.payoff.scaled(c), &f.priors).unwrap();
        for n in f.tree.nodes() {
            prop_assert!(close(sc.r[n], c * s.r[n]));
            prop_assert!(close(sc.r_plus[n], c * s.r_plus[n]));
        }
    }

    #[test]
    fn power_of_two_scaling_keeps_rules_and_argmax(seed in any::<u64>(), k in -4i32..=6) {
        // Scaling by 2^k is exact in floating point, so every comparison repeats.
        let (f, _) = instance(seed, PriorMode::Closure);
        let c = 2f64.powi(k);
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let sc = solve(&f.tree, &f.payoff.scaled(c), &f.priors).unwrap();
        prop_assert_eq!(&s.stop_region, &sc.stop_region);
        prop_assert_eq!(&s.argmax_extreme, &sc.argmax_extreme);
        for n in f.tree.nodes() {
            prop_assert_eq!(sc.r[n], c * s.r[n]);
        }
    }

    #[test]
    fn value_is_the_smallest_dominating_supermartingale(seed in any::<u64>(), eps in 1e-4f64..1.0) {
        let (f, _) = instance(seed, PriorMode::Closure);
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        for n in f.tree.nodes() {
            let mut lowered = s.r.clone();
            lowered.set(n, s.r[n] - eps);
            let dominates = f.tree.nodes().all(|m| lowered[m] >= f.payoff[m]);
            let supermartingale = check_supermartingale_family(&f.tree, &lowered, &f.priors, 1e-12).passed;
            prop_assert!(!(dominates && supermartingale), "lowering {} kept both properties", f.tree.id(n));
        }
    }

    #[test]
    fn rule_counts_match_enumeration(seed in any::<u64>()) {
        let (f, _) = instance(seed, PriorMode::Closure);
        for v in f.tree.nodes() {
            for strict in [false, true] {
                let rules = enumerate_rules(&f.tree, v, strict).unwrap();
                prop_assert_eq!(rules.len() as u128, count_rules(&f.tree, v, strict));
                prop_assert!(rules.iter().all(|r| r.is_well_formed(&f.tree)));
            }
        }
    }

    #[test]
    fn min_and_max_rules_form_a_lattice(seed in any::<u64>(), i in any::<usize>(), j in any::<usize>()) {
        let (f, _) = instance(seed, PriorMode::Closure);
        let r = f.tree.root();
        let rules = enumerate_rules(&f.tree, r, false).unwrap();
        let a = &rules[i % rules.len()];
        let b = &rules[j % rules.len()];
        let lo = min_rule(&f.tree, a, b).unwrap();
        let hi = max_rule(&f.tree, a, b).unwrap();
        prop_assert!(lo.is_well_formed(&f.tree) && hi.is_well_formed(&f.tree));
        prop_assert_eq!(&lo, &min_rule(&f.tree, b, a).unwrap());
        prop_assert_eq!(&hi, &max_rule(&f.tree, b, a).unwrap());
        prop_assert_eq!(&min_rule(&f.tree, a, a).unwrap(), a);
        prop_assert_eq!(&min_rule(&f.tree, a, &hi).unwrap(), a);
        prop_assert_eq!(&max_rule(&f.tree, a, &lo).unwrap(), a);
        // The earlier rule is stopped wherever the later one is.
        let lo_done = lo.stopped_by(&f.tree);
        for n in hi.stop_nodes() {
            prop_assert!(lo_done[n.index()]);
        }
    }

    #[test]
    fn conditional_value_only_sees_the_stochastic_interval(seed in any::<u64>(), i in any::<usize>()) {
        let (f, mut rng) = instance(seed, PriorMode::Closure);
        let r = f.tree.root();
        let rules = enumerate_rules(&f.tree, r, false).unwrap();
        let rule = &rules[i % rules.len()];
        let z = pure_density(&f.tree, &f.priors, &random_selection(&f, &mut rng)).unwrap();
        let other = pure_density(&f.tree, &f.priors, &random_selection(&f, &mut rng)).unwrap();
        let done = rule.stopped_by(&f.tree);
        let ratio = f
            .tree
            .nodes()
            .map(|n| {
                let src = if done[n.index()] { &other } else { &z };
                src.ratio(n).map(<[f64]>::to_vec)
            })
            .collect();
        let mixed = DensityProcess::from_ratios(&f.tree, ratio).unwrap();
        let g = bayes_conditional(&f.tree, &z, &f.payoff, rule, r).unwrap();
        let gm = bayes_conditional(&f.tree, &mixed, &f.payoff, rule, r).unwrap();
        prop_assert!(close(g, gm));
        prop_assert!(g <= robust_expectation(&f.tree, &f.priors, &f.payoff, rule, r).unwrap() + TOL);
    }

    #[test]
    fn pasted_densities_are_martingales(seed in any::<u64>(), v in 0usize..4, mask in any::<u32>()) {
        let (f, mut rng) = instance(seed, PriorMode::Closure);
        let v = v.min(f.tree.horizon());
        let z1 = pure_density(&f.tree, &f.priors, &random_selection(&f, &mut rng)).unwrap();
        let z2 = pure_density(&f.tree, &f.priors, &random_selection(&f, &mut rng)).unwrap();
        let event: Vec<_> = f.tree.levels()[v]
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> (k % 32) & 1 == 1)
            .map(|(_, &n)| n)
            .collect();
        let p = paste(&f.tree, &z1, &z2, v, &event).unwrap();
        let ones = AdaptedFamily::constant(&f.tree, 1.0);
        for n in f.tree.nodes() {
            prop_assert!(close(p.step_mean(&f.tree, n, &ones), 1.0));
            let expected = if f.tree.time(n) <= v { z1.z(n) } else {
                let anc = (0..f.tree.time(n) - v).fold(n, |m, _| f.tree.parent(m).unwrap());
                let src = if event.contains(&anc) { &z2 } else { &z1 };
                z1.z(anc) * src.z(n) / src.z(anc)
            };
            if expected.is_finite() {
                prop_assert!(close(p.z(n), expected));
            }
        }
    }

    #[test]
    fn u_alpha_is_monotone_and_u_star_attains(seed in any::<u64>(), mode in mode_strategy()) {
        let (f, _) = instance(seed, mode);
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        for v in f.tree.nodes() {
            let rules: Vec<_> = ALPHA_GRID.iter().map(|&a| u_alpha(&f.tree, &s, &f.payoff, v, a).unwrap()).collect();
            for w in rules.windows(2) {
                prop_assert_eq!(&min_rule(&f.tree, &w[0], &w[1]).unwrap(), &w[0]);
            }
            let star = u_star(&f.tree, &s, v);
            prop_assert_eq!(rules.last().unwrap(), &star);
            let value = robust_expectation(&f.tree, &f.priors, &f.payoff, &star, v).unwrap();
            prop_assert!(close(value, s.r[v]));
        }
        if mode == PriorMode::Equivalent {
            let r = f.tree.root();
            let z = extract_optimal_prior(&s, &f.tree, &f.priors, r).unwrap();
            prop_assert!(z.is_strictly_positive());
            let cert = check_optimality_certificate(&f.tree, &f.payoff, &f.priors, &u_star(&f.tree, &s, r), &z).unwrap();
            prop_assert!(cert.optimal);
            prop_assert!(close(cert.value, s.r[r]));
        }
    }

    #[test]
    fn decomposition_reconstructs_the_value(seed in any::<u64>(), mode in mode_strategy()) {
        let (f, _) = instance(seed, mode);
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let d = universal_decompose(&f.tree, &s, &f.priors);
        prop_assert!(d.diagnostics.reconstruction_error <= 1e-9);
        prop_assert!(d.diagnostics.universal_martingale_residual <= 1e-9);
        for n in f.tree.nodes() {
            prop_assert!(close(s.r[n], d.x0 + d.m[n] - d.c[n]));
        }
    }

    #[test]
    fn single_prior_decomposition_is_flat_off_the_stop_region(seed in any::<u64>()) {
        let (f, _) = instance(seed, PriorMode::Closure);
        let single = PriorSet::reference(&f.tree, PriorMode::Closure);
        let s = solve(&f.tree, &f.payoff, &single).unwrap();
        let d = universal_decompose(&f.tree, &s, &single);
        prop_assert!(d.diagnostics.c_increasing);
        prop_assert_eq!(&d.c, &d.a_q);
        prop_assert!(flat_off_check(&d, &f.tree, &u_star(&f.tree, &s, f.tree.root())));
    }
}
