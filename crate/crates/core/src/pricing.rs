//! American knock-in barrier put under drift ambiguity.
//!
//! The price path is unrolled on a binary tree (no recombination), so the
//! barrier flag is an ordinary node state. The payoff
//! `e^{−rt} (K − S_t)⁺ 1{t ≥ τ_H}` is folded into the reward family and the
//! priors are the up-probability interval `[p_lo, p_hi]` expressed as density
//! ratios against the reference `q_up`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{AdaptedFamily, EventTree, NodeIdx, NodeRecord};
use crate::priors::{PriorMode, PriorSet};
use crate::snell::{solve, SnellSolution};

/// Largest number of periods the unrolled tree may have (2^21 − 1 nodes).
pub const MAX_CRR_STEPS: usize = 20;

pub const STATE_PRICE: &str = "S";
pub const STATE_HIT: &str = "hit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierDirection {
    /// Knocked in once `S ≤ H`.
    #[default]
    CrossedBelow,
    /// Knocked in once `S ≥ H`.
    CrossedAbove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrrParams {
    #[serde(rename = "S0")]
    pub s0: f64,
    pub up: f64,
    pub down: f64,
    pub steps: usize,
    /// Continuously compounded rate per period.
    #[serde(default)]
    pub rate: f64,
    #[serde(rename = "K")]
    pub strike: f64,
    #[serde(rename = "H")]
    pub barrier: f64,
    #[serde(default)]
    pub direction: BarrierDirection,
    pub q_up: f64,
    pub ambiguity: [f64; 2],
}

impl CrrParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return fail(format!("S0 = {} must be positive", self.s0));
        }
        if !(self.up > 1.0 && self.up.is_finite()) {
            return fail(format!("up = {} must exceed 1", self.up));
        }
        if !(self.down > 0.0 && self.down < 1.0) {
            return fail(format!("down = {} must lie in (0, 1)", self.down));
        }
        if self.steps == 0 {
            return fail("steps must be at least 1".into());
        }
        if self.steps > MAX_CRR_STEPS {
            return Err(Error::SizeGuard {
                what: "CRR steps",
                actual: self.steps as u128,
                limit: MAX_CRR_STEPS as u128,
            });
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return fail(format!("rate = {} must be nonnegative", self.rate));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return fail(format!("K = {} must be positive", self.strike));
        }
        if !(self.barrier > 0.0 && self.barrier.is_finite()) {
            return fail(format!("H = {} must be positive", self.barrier));
        }
        if !(self.q_up > 0.0 && self.q_up < 1.0) {
            return fail(format!("q_up = {} must lie in (0, 1)", self.q_up));
        }
        let [lo, hi] = self.ambiguity;
        if !(lo > 0.0 && hi < 1.0) {
            return fail(format!("ambiguity [{lo}, {hi}] must lie inside (0, 1)"));
        }
        if lo > hi {
            return fail(format!("ambiguity [{lo}, {hi}] has lo > hi"));
        }
        Ok(())
    }

    fn knocks_in(&self, s: f64) -> bool {
        match self.direction {
            BarrierDirection::CrossedBelow => s <= self.barrier,
            BarrierDirection::CrossedAbove => s >= self.barrier,
        }
    }
}

/// Unrolled binary tree with states `S` and `hit`; ids spell the path
/// (`r`, `u`, `d`, `uu`, ...), up branch first.
pub fn build_crr_barrier_tree(params: &CrrParams) -> Result<EventTree> {
    params.validate()?;
    let root = NodeRecord::root("r")
        .with_state(STATE_PRICE, params.s0)
        .with_state(STATE_HIT, if params.knocks_in(params.s0) { 1.0 } else { 0.0 });
    let mut records = Vec::with_capacity((1usize << (params.steps + 1)) - 1);
    records.push(root);
    let mut frontier = vec![0usize];
    for t in 1..=params.steps {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for &pi in &frontier {
            let (pid, ps, phit) = {
                let p = &records[pi];
                (p.id.clone(), p.states[STATE_PRICE], p.states[STATE_HIT])
            };
            for (step, factor, q) in [("u", params.up, params.q_up), ("d", params.down, 1.0 - params.q_up)] {
                let id = if pid == "r" {
                    step.to_string()
                } else {
                    format!("{pid}{step}")
                };
                let s = ps * factor;
                let hit = if phit == 1.0 || params.knocks_in(s) { 1.0 } else { 0.0 };
                records.push(
                    NodeRecord::child(id, pid.clone(), t, q)
                        .with_state(STATE_PRICE, s)
                        .with_state(STATE_HIT, hit),
                );
                next.push(records.len() - 1);
            }
        }
        frontier = next;
    }
    EventTree::from_records(params.steps, records)
}

fn put_payoff(tree: &EventTree, params: &CrrParams, knock_in: bool) -> Result<AdaptedFamily> {
    let mut values = Vec::with_capacity(tree.len());
    for n in tree.nodes() {
        let s = tree
            .state(n, STATE_PRICE)
            .ok_or_else(|| Error::InvalidInput(format!("node {} has no state {STATE_PRICE}", tree.id(n))))?;
        let hit = if knock_in {
            tree.state(n, STATE_HIT)
                .ok_or_else(|| Error::InvalidInput(format!("node {} has no state {STATE_HIT}", tree.id(n))))?
        } else {
            1.0
        };
        let discount = (-params.rate * tree.time(n) as f64).exp();
        values.push(discount * (params.strike - s).max(0.0) * hit);
    }
    AdaptedFamily::new(tree, values)
}

/// `e^{−rt} (K − S)⁺ · hit`.
pub fn knockin_payoff(tree: &EventTree, params: &CrrParams) -> Result<AdaptedFamily> {
    put_payoff(tree, params, true)
}

/// `e^{−rt} (K − S)⁺`, the same put without the barrier.
pub fn vanilla_payoff(tree: &EventTree, params: &CrrParams) -> Result<AdaptedFamily> {
    put_payoff(tree, params, false)
}

/// Up-probability interval as density extremes `(p/q_up, (1−p)/(1−q_up))`.
pub fn drift_ambiguity_priors(tree: &EventTree, params: &CrrParams) -> Result<PriorSet> {
    let [lo, hi] = params.ambiguity;
    if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
        return Err(Error::InvalidInput(format!(
            "ambiguity [{lo}, {hi}] must lie inside (0, 1)"
        )));
    }
    interval_priors(tree, lo, hi, PriorMode::Closure)
}

/// Binary-node interval generator: the first child is the up move and its
/// reference probability is read from the tree.
pub fn interval_priors(tree: &EventTree, lo: f64, hi: f64, mode: PriorMode) -> Result<PriorSet> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::InvalidPriors(format!(
            "up-probability interval [{lo}, {hi}] is not inside [0, 1]"
        )));
    }
    if let Some(n) = tree
        .nodes()
        .find(|&n| !tree.is_terminal(n) && tree.children(n).len() != 2)
    {
        return Err(Error::InvalidPriors(format!(
            "interval generator needs binary nodes; {} has {} children",
            tree.id(n),
            tree.children(n).len()
        )));
    }
    Ok(PriorSet::from_fn(tree, mode, |n| {
        let q = tree.q(tree.children(n)[0]);
        let ps: &[f64] = if lo == hi { &[lo] } else { &[lo, hi] };
        ps.iter().map(|&p| vec![p / q, (1.0 - p) / (1.0 - q)]).collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    /// Hedging price `sup_P sup_τ E^P[payoff(τ)]`.
    pub h_s: f64,
    pub exercise_boundary: Vec<NodeIdx>,
    /// Per non-terminal node: the maximising up-probability.
    pub optimal_up_probability: Vec<Option<f64>>,
    pub tree: EventTree,
    pub payoff: AdaptedFamily,
    pub priors: PriorSet,
    pub solution: SnellSolution,
}

fn price_with(params: &CrrParams, knock_in: bool) -> Result<PriceReport> {
    let tree = build_crr_barrier_tree(params)?;
    let payoff = put_payoff(&tree, params, knock_in)?;
    let priors = drift_ambiguity_priors(&tree, params)?;
    let solution = solve(&tree, &payoff, &priors)?;
    let optimal_up_probability = tree
        .nodes()
        .map(|n| {
            solution.optimal_density[n.index()]
                .as_ref()
                .map(|d| d[0] * tree.q(tree.children(n)[0]))
        })
        .collect();
    Ok(PriceReport {
        h_s: solution.r[tree.root()],
        exercise_boundary: solution.stop_nodes(),
        optimal_up_probability,
        tree,
        payoff,
        priors,
        solution,
    })
}

/// Knock-in put price under drift ambiguity.
pub fn price(params: &CrrParams) -> Result<PriceReport> {
    price_with(params, true)
}

/// Vanilla American put price under the same ambiguity.
pub fn price_vanilla(params: &CrrParams) -> Result<PriceReport> {
    price_with(params, false)
}
