//! Seeded random instances for property and oracle suites.

use rand::Rng;

use crate::filtration::{AdaptedFamily, EventTree, NodeRecord};
use crate::fixtures::Fixture;
use crate::priors::{PriorMode, PriorSet, MAX_SELECTIONS};

/// Shape bounds for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_periods: usize,
    pub max_children: usize,
    pub max_extremes: usize,
    /// Cap on the product of extreme counts (the oracle's selection guard).
    pub max_selections: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_periods: 3,
            max_children: 3,
            max_extremes: 3,
            max_selections: MAX_SELECTIONS,
        }
    }
}

/// Binary tree with `Q = ½` at every branch; ids are up/down paths.
pub fn full_binary_tree(depth: usize) -> EventTree {
    let mut records = vec![NodeRecord::root("r")];
    let mut frontier = vec!["r".to_string()];
    for t in 1..=depth {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for p in &frontier {
            for step in ["u", "d"] {
                let id = if p == "r" {
                    step.to_string()
                } else {
                    format!("{p}{step}")
                };
                records.push(NodeRecord::child(id.clone(), p.clone(), t, 0.5));
                next.push(id);
            }
        }
        frontier = next;
    }
    EventTree::from_records(depth, records).expect("binary tree links")
}

fn random_simplex<R: Rng>(rng: &mut R, k: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| floor + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Random tree, payoff and rectangular prior set within `limits`.
///
/// Branch counts, probabilities, densities and payoffs are all drawn from
/// `rng`; extreme counts are trimmed until the selection product fits.
pub fn random_instance<R: Rng>(rng: &mut R, limits: Limits, mode: PriorMode) -> Fixture {
    let horizon = rng.gen_range(1..=limits.max_periods);
    let mut records = vec![NodeRecord::root("n0")];
    let mut frontier = vec![("n0".to_string(), 0usize)];
    let mut next_id = 1;
    for t in 1..=horizon {
        let mut next = Vec::new();
        for (p, _) in &frontier {
            let k = rng.gen_range(1..=limits.max_children);
            let q = random_simplex(rng, k, 0.2);
            for qj in q {
                let id = format!("n{next_id}");
                next_id += 1;
                records.push(NodeRecord::child(id.clone(), p.clone(), t, qj));
                next.push((id, t));
            }
        }
        frontier = next;
    }
    let tree = EventTree::from_records(horizon, records).expect("random tree links");

    let payoff = AdaptedFamily::from_fn(&tree, |_| {
        if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..10.0)
        }
    });

    let decision: Vec<_> = tree.nodes().filter(|&n| !tree.is_terminal(n)).collect();
    let mut counts: Vec<usize> = decision
        .iter()
        .map(|&n| {
            if tree.children(n).len() == 1 {
                1
            } else {
                rng.gen_range(1..=limits.max_extremes)
            }
        })
        .collect();
    let product = |c: &[usize]| c.iter().fold(1u128, |a, &x| a.saturating_mul(x as u128));
    while product(&counts) > limits.max_selections {
        let i = rng.gen_range(0..counts.len());
        if counts[i] > 1 {
            counts[i] -= 1;
        }
    }

    let floor = if mode == PriorMode::Equivalent { 0.05 } else { 0.0 };
    let mut extremes = vec![Vec::new(); tree.len()];
    for (&n, &count) in decision.iter().zip(&counts) {
        let children = tree.children(n);
        extremes[n.index()] = (0..count)
            .map(|_| {
                let p = random_simplex(rng, children.len(), floor);
                children.iter().zip(p).map(|(&c, pj)| pj / tree.q(c)).collect()
            })
            .collect();
    }
    let priors = PriorSet::from_fn(&tree, mode, |n| extremes[n.index()].clone());
    Fixture {
        name: "random".into(),
        tree,
        payoff,
        priors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::validate_tree;
    use crate::priors::validate_prior_set;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let f = random_instance(&mut rng, Limits::default(), PriorMode::Closure);
            assert!(validate_tree(&f.tree).is_empty());
            assert!(validate_prior_set(&f.tree, &f.priors).is_empty());
            assert!(f.payoff.is_reward());
            assert!(f.priors.selection_count(&f.tree, f.tree.root()) <= MAX_SELECTIONS);
        }
    }

    #[test]
    fn binary_tree_shape() {
        let t = full_binary_tree(3);
        assert_eq!(t.len(), 15);
        assert!(validate_tree(&t).is_empty());
        assert_eq!(t.lookup("udu").map(|n| t.time(n)), Some(3));
    }
}
