//! Canonical small instances.
//!
//! * `TT1`: one period, two equally likely branches, `Y = (1; 2, 0)`.
//! * `TT3`: one period, three equally likely branches, `Y = (0; 2, 0, 1)`.
//! * `TT4`: two-period binary put tree, `S: 4 → (8, 2) → (16, 4, 4, 1)`,
//!   `Y = (5 − S)⁺`, up-density in `{0.5, 1.5}` at every node.

use crate::filtration::{AdaptedFamily, EventTree, NodeIdx, NodeRecord};
use crate::priors::{PriorMode, PriorSet, Selection};

/// A tree with its payoff and prior set.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub tree: EventTree,
    pub payoff: AdaptedFamily,
    pub priors: PriorSet,
}

impl Fixture {
    /// Same instance with the prior class collapsed to `{Q}`.
    pub fn single_prior(&self) -> Fixture {
        Fixture {
            name: format!("{}-single", self.name),
            tree: self.tree.clone(),
            payoff: self.payoff.clone(),
            priors: PriorSet::reference(&self.tree, self.priors.mode()),
        }
    }

    pub fn node(&self, id: &str) -> NodeIdx {
        self.tree
            .lookup(id)
            .unwrap_or_else(|| panic!("fixture {} has no node {id}", self.name))
    }
}

fn payoff_by_id(tree: &EventTree, values: &[(&str, f64)]) -> AdaptedFamily {
    let mut fam = AdaptedFamily::zeros(tree);
    for (id, v) in values {
        fam.set(tree.lookup(id).expect("fixture id"), *v);
    }
    fam
}

pub fn tt1() -> Fixture {
    let tree = EventTree::from_records(
        1,
        vec![
            NodeRecord::root("r"),
            NodeRecord::child("u", "r", 1, 0.5),
            NodeRecord::child("d", "r", 1, 0.5),
        ],
    )
    .expect("tt1 links");
    let payoff = payoff_by_id(&tree, &[("r", 1.0), ("u", 2.0), ("d", 0.0)]);
    let priors = PriorSet::from_fn(&tree, PriorMode::Closure, |_| vec![vec![1.5, 0.5], vec![0.5, 1.5]]);
    Fixture {
        name: "tt1".into(),
        tree,
        payoff,
        priors,
    }
}

pub fn tt3() -> Fixture {
    let third = 1.0 / 3.0;
    let tree = EventTree::from_records(
        1,
        vec![
            NodeRecord::root("r"),
            NodeRecord::child("a", "r", 1, third),
            NodeRecord::child("b", "r", 1, third),
            NodeRecord::child("c", "r", 1, third),
        ],
    )
    .expect("tt3 links");
    let payoff = payoff_by_id(&tree, &[("r", 0.0), ("a", 2.0), ("b", 0.0), ("c", 1.0)]);
    let priors = PriorSet::from_fn(&tree, PriorMode::Closure, |_| {
        vec![vec![1.9, 1.0, 0.1], vec![0.1, 1.0, 1.9]]
    });
    Fixture {
        name: "tt3".into(),
        tree,
        payoff,
        priors,
    }
}

pub fn tt4() -> Fixture {
    let prices = [
        ("r", None, 0, 4.0),
        ("u", Some("r"), 1, 8.0),
        ("d", Some("r"), 1, 2.0),
        ("uu", Some("u"), 2, 16.0),
        ("ud", Some("u"), 2, 4.0),
        ("du", Some("d"), 2, 4.0),
        ("dd", Some("d"), 2, 1.0),
    ];
    let records = prices
        .iter()
        .map(|&(id, parent, t, s)| {
            let rec = match parent {
                None => NodeRecord::root(id),
                Some(p) => NodeRecord::child(id, p, t, 0.5),
            };
            rec.with_state("S", s)
        })
        .collect();
    let tree = EventTree::from_records(2, records).expect("tt4 links");
    let payoff = AdaptedFamily::from_fn(&tree, |n| (5.0 - tree.state(n, "S").unwrap()).max(0.0));
    let priors = PriorSet::from_fn(&tree, PriorMode::Closure, |_| vec![vec![0.5, 1.5], vec![1.5, 0.5]]);
    Fixture {
        name: "tt4".into(),
        tree,
        payoff,
        priors,
    }
}

pub fn all() -> Vec<Fixture> {
    vec![tt1(), tt3(), tt4()]
}

/// TT4 selection using the same up-density at every decision node.
pub fn tt4_select_up(f: &Fixture, d_up: f64) -> Selection {
    Selection(
        f.tree
            .nodes()
            .map(|n| f.priors.extremes(n).iter().position(|d| d[0] == d_up).unwrap_or(0))
            .collect(),
    )
}
