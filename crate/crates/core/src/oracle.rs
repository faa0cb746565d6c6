//! Brute-force ground truth for the value families.
//!
//! Values are computed from their definition: every stopping rule in `S_v`
//! (or `S_{v+}`) is paired with every pure extreme selection on the subtree at
//! `v`, and the largest conditional expected reward is kept. No recursion over
//! the tree is involved, so the results independently check the dynamic
//! programming engine.

use rayon::prelude::*;

use crate::error::Result;
use crate::filtration::{enumerate_rules, AdaptedFamily, EventTree, NodeIdx, StoppingRule};
use crate::priors::{decision_nodes_below, selections_over, PriorSet, Selection};
use crate::snell::{solve, SnellSolution};

/// Optimum found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub value: f64,
    pub best_rule: StoppingRule,
    pub best_selection: Selection,
}

/// `P(n | v)` under a pure selection, for the subtree at `v`.
pub(crate) fn selection_weights(tree: &EventTree, priors: &PriorSet, selection: &Selection, v: NodeIdx) -> Vec<f64> {
    let mut w = vec![0.0; tree.len()];
    w[v.index()] = 1.0;
    for n in tree.subtree(v) {
        if tree.is_terminal(n) {
            continue;
        }
        let d = &priors.extremes(n)[selection.get(n)];
        for (&c, dc) in tree.children(n).iter().zip(d) {
            w[c.index()] = w[n.index()] * tree.q(c) * dc;
        }
    }
    w
}

fn cut_value(cut: &[NodeIdx], w: &[f64], family: &AdaptedFamily) -> f64 {
    cut.iter().map(|&n| w[n.index()] * family[n]).sum()
}

fn search(
    tree: &EventTree,
    family: &AdaptedFamily,
    priors: &PriorSet,
    v: NodeIdx,
    rules: Vec<StoppingRule>,
) -> Result<BruteForce> {
    let nodes = decision_nodes_below(tree, v);
    let selections = selections_over(priors, &nodes, &Selection::first(tree))?;
    let cuts: Vec<Vec<NodeIdx>> = rules.iter().map(StoppingRule::stop_nodes).collect();

    let per_selection: Vec<(f64, usize)> = selections
        .par_iter()
        .map(|s| {
            let w = selection_weights(tree, priors, s, v);
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, cut) in cuts.iter().enumerate() {
                let val = cut_value(cut, &w, family);
                if val > best.0 {
                    best = (val, i);
                }
            }
            best
        })
        .collect();

    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (si, &(val, ri)) in per_selection.iter().enumerate() {
        if val > best.0 {
            best = (val, ri, si);
        }
    }
    Ok(BruteForce {
        value: best.0,
        best_rule: rules[best.1].clone(),
        best_selection: selections[best.2].clone(),
    })
}

/// `R(v)` as the maximum over `S_v` × extreme selections.
pub fn brute_force_value(
    tree: &EventTree,
    payoff: &AdaptedFamily,
    priors: &PriorSet,
    v: NodeIdx,
) -> Result<BruteForce> {
    let rules = enumerate_rules(tree, v, false)?;
    search(tree, payoff, priors, v, rules)
}

/// `R⁺(v)`: as [`brute_force_value`] over strictly later rules.
pub fn brute_force_strict_value(
    tree: &EventTree,
    payoff: &AdaptedFamily,
    priors: &PriorSet,
    v: NodeIdx,
) -> Result<f64> {
    let rules = enumerate_rules(tree, v, true)?;
    Ok(search(tree, payoff, priors, v, rules)?.value)
}

/// `sup_P E^P[family(τ) | v]` for a fixed rule, by enumerating selections.
pub fn enumerated_sup(
    tree: &EventTree,
    priors: &PriorSet,
    family: &AdaptedFamily,
    rule: &StoppingRule,
    v: NodeIdx,
) -> Result<f64> {
    if rule.floor() != v {
        return Err(crate::error::Error::floor(v, rule.floor()));
    }
    Ok(search(tree, family, priors, v, vec![rule.clone()])?.value)
}

/// Node-by-node comparison of the engine against the brute force.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckReport {
    pub max_deviation_r: f64,
    pub max_deviation_r_plus: f64,
    pub brute_r: AdaptedFamily,
    pub brute_r_plus: AdaptedFamily,
    pub solution: SnellSolution,
}

impl CrosscheckReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_deviation_r.max(self.max_deviation_r_plus)
    }

    pub fn nodes_checked(&self) -> usize {
        self.brute_r.len()
    }
}

pub fn crosscheck(tree: &EventTree, payoff: &AdaptedFamily, priors: &PriorSet) -> Result<CrosscheckReport> {
    let solution = solve(tree, payoff, priors)?;
    let mut brute_r = AdaptedFamily::zeros(tree);
    let mut brute_r_plus = AdaptedFamily::zeros(tree);
    let (mut dev_r, mut dev_rp) = (0.0f64, 0.0f64);
    for n in tree.nodes() {
        let r = brute_force_value(tree, payoff, priors, n)?.value;
        let rp = brute_force_strict_value(tree, payoff, priors, n)?;
        brute_r.set(n, r);
        brute_r_plus.set(n, rp);
        dev_r = dev_r.max((solution.r[n] - r).abs());
        dev_rp = dev_rp.max((solution.r_plus[n] - rp).abs());
    }
    Ok(CrosscheckReport {
        max_deviation_r: dev_r,
        max_deviation_r_plus: dev_rp,
        brute_r,
        brute_r_plus,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::expected_value_q;
    use crate::fixtures;
    use crate::priors::{bayes_conditional, extreme_selections, pure_density};

    #[test]
    fn tt1_brute_force() {
        let f = fixtures::tt1();
        let r = f.tree.root();
        let bf = brute_force_value(&f.tree, &f.payoff, &f.priors, r).unwrap();
        assert_eq!(bf.value, 1.5);
        assert_eq!(bf.best_rule, StoppingRule::at_time(&f.tree, r, 1));
        assert_eq!(bf.best_selection.get(r), 0);
        assert_eq!(brute_force_strict_value(&f.tree, &f.payoff, &f.priors, r).unwrap(), 1.5);
    }

    #[test]
    fn tt4_brute_force() {
        let f = fixtures::tt4();
        let r = f.tree.root();
        let bf = brute_force_value(&f.tree, &f.payoff, &f.priors, r).unwrap();
        assert!((bf.value - 2.625).abs() < 1e-12);
        let strict = brute_force_strict_value(&f.tree, &f.payoff, &f.priors, r).unwrap();
        assert!((strict - 2.625).abs() < 1e-12);

        // Single prior: the five rules give 1, 1.5, 1.5, 1.25, 1.75.
        let s = f.single_prior();
        let bf = brute_force_value(&s.tree, &s.payoff, &s.priors, r).unwrap();
        assert!((bf.value - 1.75).abs() < 1e-12);
        let leaf = f.node("dd");
        assert_eq!(
            brute_force_strict_value(&f.tree, &f.payoff, &f.priors, leaf).unwrap(),
            4.0
        );
    }

    #[test]
    fn single_prior_matches_enumerated_classical_value() {
        let f = fixtures::tt4().single_prior();
        let r = f.tree.root();
        let classical = enumerate_rules(&f.tree, r, false)
            .unwrap()
            .iter()
            .map(|rule| expected_value_q(&f.tree, &f.payoff, rule, r).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let bf = brute_force_value(&f.tree, &f.payoff, &f.priors, r).unwrap();
        assert_eq!(bf.value, classical);
    }

    #[test]
    fn brute_force_dominates_every_pair() {
        let f = fixtures::tt4();
        let r = f.tree.root();
        let best = brute_force_value(&f.tree, &f.payoff, &f.priors, r).unwrap().value;
        for rule in enumerate_rules(&f.tree, r, false).unwrap() {
            for s in extreme_selections(&f.tree, &f.priors).unwrap() {
                let z = pure_density(&f.tree, &f.priors, &s).unwrap();
                let g = bayes_conditional(&f.tree, &z, &f.payoff, &rule, r).unwrap();
                assert!(g <= best + 1e-12);
            }
        }
    }

    #[test]
    fn fixture_crosschecks_are_exact() {
        for f in fixtures::all() {
            let rep = crosscheck(&f.tree, &f.payoff, &f.priors).unwrap();
            assert!(rep.max_deviation() < 1e-12, "{}: {}", f.name, rep.max_deviation());
        }
    }
}
