//! Dominated prior class given by density processes.
//!
//! Each non-terminal node carries a convex polytope of one-step density
//! ratios `d` (one entry per child, `Σ q_c d_c = 1`), listed by its extreme
//! points. The global prior class is the pasting-stable hull: any choice of a
//! point in every node polytope yields a density process `Z` with `Z(root) = 1`
//! and `Z(child) = Z(parent) · d(child)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{AdaptedFamily, EventTree, NodeIdx, StoppingRule, SUM_TOLERANCE};

/// Largest number of pure extreme selections that will be enumerated.
pub const MAX_SELECTIONS: u128 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// Strictly positive densities (priors equivalent to the reference measure).
    Equivalent,
    /// Nonnegative densities; suprema over priors are always attained.
    #[default]
    Closure,
}

/// Per-node extreme points of the one-step density polytopes.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    mode: PriorMode,
    extremes: Vec<Vec<Vec<f64>>>,
}

impl PriorSet {
    /// The singleton `{Q}`: the unit density at every node.
    pub fn reference(tree: &EventTree, mode: PriorMode) -> Self {
        Self::from_fn(tree, mode, |n| vec![vec![1.0; tree.children(n).len()]])
    }

    /// Builds extremes node by node; terminal nodes are skipped.
    pub fn from_fn(tree: &EventTree, mode: PriorMode, mut f: impl FnMut(NodeIdx) -> Vec<Vec<f64>>) -> Self {
        let extremes = tree
            .nodes()
            .map(|n| if tree.is_terminal(n) { Vec::new() } else { f(n) })
            .collect();
        PriorSet { mode, extremes }
    }

    /// Explicit extremes for some nodes; the others default to `{Q}`.
    pub fn with_overrides(
        tree: &EventTree,
        mode: PriorMode,
        overrides: impl IntoIterator<Item = (NodeIdx, Vec<Vec<f64>>)>,
    ) -> Result<Self> {
        let mut set = Self::reference(tree, mode);
        for (n, ext) in overrides {
            if tree.is_terminal(n) {
                return Err(Error::InvalidPriors(format!(
                    "terminal node {} cannot carry densities",
                    tree.id(n)
                )));
            }
            set.extremes[n.index()] = ext;
        }
        Ok(set)
    }

    pub fn mode(&self) -> PriorMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: PriorMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn extremes(&self, n: NodeIdx) -> &[Vec<f64>] {
        &self.extremes[n.index()]
    }

    /// Whether the node's polytope is the single unit density.
    pub fn is_reference_at(&self, n: NodeIdx) -> bool {
        self.extremes[n.index()]
            .iter()
            .all(|d| d.iter().all(|x| (x - 1.0).abs() <= SUM_TOLERANCE))
    }

    /// Total number of pure selections over the subtree at `v`.
    pub fn selection_count(&self, tree: &EventTree, v: NodeIdx) -> u128 {
        tree.subtree(v)
            .into_iter()
            .filter(|&n| !tree.is_terminal(n))
            .fold(1u128, |acc, n| acc.saturating_mul(self.extremes(n).len() as u128))
    }

    /// Polytope obtained by adding extra extreme points at every node.
    pub fn enlarged(&self, mut extra: impl FnMut(NodeIdx) -> Vec<Vec<f64>>) -> Self {
        let extremes = self
            .extremes
            .iter()
            .enumerate()
            .map(|(i, ext)| {
                let mut e = ext.clone();
                if !e.is_empty() {
                    e.extend(extra(NodeIdx::new(i)));
                }
                e
            })
            .collect();
        PriorSet {
            mode: self.mode,
            extremes,
        }
    }
}

/// One violated prior-set invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorIssue {
    NodeCount {
        expected: usize,
        found: usize,
    },
    Empty {
        node: String,
    },
    Dimension {
        node: String,
        extreme: usize,
        len: usize,
        children: usize,
    },
    MartingaleSum {
        node: String,
        extreme: usize,
        sum: f64,
    },
    /// Negative (closure) or non-positive (equivalent) density entry.
    Nonpositive {
        node: String,
        extreme: usize,
        child: usize,
        value: f64,
    },
    /// Equivalent mode: every point of the polytope vanishes on some child.
    NoInteriorPoint {
        node: String,
    },
}

impl PriorIssue {
    /// Issues that make the prior class unusable. A zero entry in equivalent
    /// mode only marks a boundary extreme outside the class; the polytope's
    /// positive part is still a valid (open) density set.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, PriorIssue::Nonpositive { value, .. } if *value == 0.0)
    }
}

impl fmt::Display for PriorIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorIssue::NodeCount { expected, found } => {
                write!(f, "prior set covers {found} nodes, tree has {expected}")
            }
            PriorIssue::Empty { node } => write!(f, "node {node}: no extreme points"),
            PriorIssue::Dimension {
                node,
                extreme,
                len,
                children,
            } => write!(
                f,
                "node {node}: extreme {extreme} has {len} entries for {children} children"
            ),
            PriorIssue::MartingaleSum { node, extreme, sum } => {
                write!(f, "node {node}: extreme {extreme} martingale sum {sum} ≠ 1")
            }
            PriorIssue::Nonpositive {
                node,
                extreme,
                child,
                value,
            } => write!(
                f,
                "node {node}: extreme {extreme} has nonpositive density component {value} at child {child}"
            ),
            PriorIssue::NoInteriorPoint { node } => {
                write!(f, "node {node}: no strictly positive density in the polytope")
            }
        }
    }
}

/// Reports every violated prior-set invariant; an empty list means valid.
pub fn validate_prior_set(tree: &EventTree, priors: &PriorSet) -> Vec<PriorIssue> {
    let mut issues = Vec::new();
    if priors.extremes.len() != tree.len() {
        issues.push(PriorIssue::NodeCount {
            expected: tree.len(),
            found: priors.extremes.len(),
        });
        return issues;
    }
    for n in tree.nodes().filter(|&n| !tree.is_terminal(n)) {
        let node = tree.id(n).to_string();
        let children = tree.children(n);
        let ext = priors.extremes(n);
        if ext.is_empty() {
            issues.push(PriorIssue::Empty { node });
            continue;
        }
        let mut positive_somewhere = vec![false; children.len()];
        for (k, d) in ext.iter().enumerate() {
            if d.len() != children.len() {
                issues.push(PriorIssue::Dimension {
                    node: node.clone(),
                    extreme: k,
                    len: d.len(),
                    children: children.len(),
                });
                continue;
            }
            let sum: f64 = children.iter().zip(d).map(|(&c, x)| tree.q(c) * x).sum();
            if !sum.is_finite() || (sum - 1.0).abs() > SUM_TOLERANCE {
                issues.push(PriorIssue::MartingaleSum {
                    node: node.clone(),
                    extreme: k,
                    sum,
                });
            }
            for (j, &x) in d.iter().enumerate() {
                let bad = match priors.mode {
                    PriorMode::Closure => x < 0.0,
                    PriorMode::Equivalent => x <= 0.0,
                };
                if bad || !x.is_finite() {
                    issues.push(PriorIssue::Nonpositive {
                        node: node.clone(),
                        extreme: k,
                        child: j,
                        value: x,
                    });
                }
                if x > 0.0 {
                    positive_somewhere[j] = true;
                }
            }
        }
        if priors.mode == PriorMode::Equivalent && !positive_somewhere.iter().all(|p| *p) {
            issues.push(PriorIssue::NoInteriorPoint { node });
        }
    }
    issues
}

/// Fails on the first fatal issue.
pub fn ensure_valid_priors(tree: &EventTree, priors: &PriorSet) -> Result<()> {
    let fatal: Vec<String> = validate_prior_set(tree, priors)
        .iter()
        .filter(|i| i.is_fatal())
        .map(ToString::to_string)
        .collect();
    if fatal.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidPriors(fatal.join("; ")))
    }
}

/// One pure extreme-point choice per node (index 0 at terminal nodes).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selection(pub Vec<usize>);

impl Selection {
    pub fn first(tree: &EventTree) -> Self {
        Selection(vec![0; tree.len()])
    }

    pub fn get(&self, n: NodeIdx) -> usize {
        self.0[n.index()]
    }
}

/// An element of the prior class, as a positive (or nonnegative) Q-martingale.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProcess {
    ratio: Vec<Option<Vec<f64>>>,
    z: Vec<f64>,
}

impl DensityProcess {
    /// `Z ≡ 1`, the reference measure itself.
    pub fn reference(tree: &EventTree) -> Self {
        let ratio = tree
            .nodes()
            .map(|n| (!tree.is_terminal(n)).then(|| vec![1.0; tree.children(n).len()]))
            .collect();
        DensityProcess {
            ratio,
            z: vec![1.0; tree.len()],
        }
    }

    /// Cumulates one-step ratios; checks the martingale identity at every node.
    pub fn from_ratios(tree: &EventTree, ratio: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if ratio.len() != tree.len() {
            return Err(Error::InvalidInput("ratio map does not cover the tree".into()));
        }
        let mut z = vec![0.0; tree.len()];
        z[0] = 1.0;
        for n in tree.nodes() {
            if tree.is_terminal(n) {
                continue;
            }
            let r = ratio[n.index()]
                .as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("missing ratio at node {}", tree.id(n))))?;
            let children = tree.children(n);
            if r.len() != children.len() {
                return Err(Error::InvalidInput(format!(
                    "ratio length mismatch at node {}",
                    tree.id(n)
                )));
            }
            let sum: f64 = children.iter().zip(r).map(|(&c, x)| tree.q(c) * x).sum();
            if (sum - 1.0).abs() > 1e-10 || r.iter().any(|x| *x < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "ratio at node {} is not a density (sum {sum})",
                    tree.id(n)
                )));
            }
            for (&c, x) in children.iter().zip(r) {
                z[c.index()] = z[n.index()] * x;
            }
        }
        Ok(DensityProcess { ratio, z })
    }

    pub fn z(&self, n: NodeIdx) -> f64 {
        self.z[n.index()]
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z
    }

    pub fn ratio(&self, n: NodeIdx) -> Option<&[f64]> {
        self.ratio[n.index()].as_deref()
    }

    /// `P(n | v) = Q(n | v) · Z(n) / Z(v)` over the subtree at `v`.
    pub fn conditional_weights(&self, tree: &EventTree, v: NodeIdx) -> Vec<f64> {
        let mut w = vec![0.0; tree.len()];
        w[v.index()] = 1.0;
        for n in tree.subtree(v) {
            if let Some(r) = self.ratio(n) {
                for (&c, x) in tree.children(n).iter().zip(r) {
                    w[c.index()] = w[n.index()] * tree.q(c) * x;
                }
            }
        }
        w
    }

    /// One-step `E^P[family | n]`.
    pub fn step_mean(&self, tree: &EventTree, n: NodeIdx, family: &AdaptedFamily) -> f64 {
        match self.ratio(n) {
            Some(r) => tree
                .children(n)
                .iter()
                .zip(r)
                .map(|(&c, x)| tree.q(c) * x * family[c])
                .sum(),
            None => family[n],
        }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.z.iter().all(|z| *z > 0.0)
    }
}

/// Realises one element of the hull from per-node convex weights over extremes.
pub fn density_process(tree: &EventTree, priors: &PriorSet, weights: &[Option<Vec<f64>>]) -> Result<DensityProcess> {
    if weights.len() != tree.len() {
        return Err(Error::InvalidInput("weights do not cover the tree".into()));
    }
    let mut ratio = vec![None; tree.len()];
    for n in tree.nodes().filter(|&n| !tree.is_terminal(n)) {
        let ext = priors.extremes(n);
        let w = weights[n.index()]
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("missing weights at node {}", tree.id(n))))?;
        if w.len() != ext.len() {
            return Err(Error::InvalidInput(format!(
                "node {}: {} weights for {} extremes",
                tree.id(n),
                w.len(),
                ext.len()
            )));
        }
        let total: f64 = w.iter().sum();
        if w.iter().any(|x| *x < 0.0 || !x.is_finite()) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "node {}: weights must be nonnegative and sum to 1",
                tree.id(n)
            )));
        }
        let k = tree.children(n).len();
        let mut d = vec![0.0; k];
        for (wi, e) in w.iter().zip(ext) {
            for (dj, ej) in d.iter_mut().zip(e) {
                *dj += wi * ej;
            }
        }
        ratio[n.index()] = Some(d);
    }
    DensityProcess::from_ratios(tree, ratio)
}

/// Density process of a pure extreme selection.
pub fn pure_density(tree: &EventTree, priors: &PriorSet, selection: &Selection) -> Result<DensityProcess> {
    let ratio = tree
        .nodes()
        .map(|n| {
            if tree.is_terminal(n) {
                return Ok(None);
            }
            priors
                .extremes(n)
                .get(selection.get(n))
                .cloned()
                .map(Some)
                .ok_or_else(|| Error::InvalidInput(format!("selection out of range at node {}", tree.id(n))))
        })
        .collect::<Result<Vec<_>>>()?;
    DensityProcess::from_ratios(tree, ratio)
}

/// Follows `z1` before time `v`; from `v` on, follows `z2` below the atoms in
/// `event` and `z1` below the others.
pub fn paste(
    tree: &EventTree,
    z1: &DensityProcess,
    z2: &DensityProcess,
    v: usize,
    event: &[NodeIdx],
) -> Result<DensityProcess> {
    if let Some(&bad) = event.iter().find(|&&n| tree.time(n) != v) {
        return Err(Error::InvalidInput(format!(
            "event atom {} is not F_{v}-measurable (time {})",
            tree.id(bad),
            tree.time(bad)
        )));
    }
    let mut in_event = vec![false; tree.len()];
    for &a in event {
        in_event[a.index()] = true;
    }
    // Propagate the event flag from its time-v atoms to their descendants.
    for n in tree.nodes() {
        if tree.time(n) > v {
            if let Some(p) = tree.parent(n) {
                in_event[n.index()] = in_event[p.index()];
            }
        }
    }
    let ratio = tree
        .nodes()
        .map(|n| {
            let src = if tree.time(n) >= v && in_event[n.index()] {
                z2
            } else {
                z1
            };
            src.ratio[n.index()].clone()
        })
        .collect();
    DensityProcess::from_ratios(tree, ratio)
}

/// Node-wise `x·z1 + (1−x)·z2`, with ratios recomputed from the mixture.
pub fn convex_combine(tree: &EventTree, z1: &DensityProcess, z2: &DensityProcess, x: f64) -> Result<DensityProcess> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("mixing weight {x} outside [0, 1]")));
    }
    let z: Vec<f64> = z1.z.iter().zip(&z2.z).map(|(a, b)| x * a + (1.0 - x) * b).collect();
    let ratio = tree
        .nodes()
        .map(|n| {
            let (r1, r2) = (z1.ratio(n)?, z2.ratio(n)?);
            let zn = z[n.index()];
            Some(
                tree.children(n)
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| {
                        if zn > 0.0 {
                            z[c.index()] / zn
                        } else {
                            x * r1[j] + (1.0 - x) * r2[j]
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(DensityProcess { ratio, z })
}

/// `Γ(v | τ, Z) = E^Q[Z_τ Y(τ) | F_v] / Z_v`.
pub fn bayes_conditional(
    tree: &EventTree,
    z: &DensityProcess,
    family: &AdaptedFamily,
    rule: &StoppingRule,
    v: NodeIdx,
) -> Result<f64> {
    if rule.floor() != v {
        return Err(Error::floor(v, rule.floor()));
    }
    if z.z(v) <= 0.0 {
        return Err(Error::UndefinedConditional(v.index()));
    }
    // Accumulate with the one-step ratios so the value only depends on [v, τ].
    let sub = tree.subtree(v);
    let mut acc = vec![0.0; tree.len()];
    for &n in sub.iter().rev() {
        acc[n.index()] = if rule.is_stop(n) {
            family[n]
        } else if tree.is_terminal(n) {
            // Below the cut; never reached.
            0.0
        } else {
            let r = z.ratio(n).expect("non-terminal node without ratio");
            tree.children(n)
                .iter()
                .zip(r)
                .map(|(&c, x)| tree.q(c) * x * acc[c.index()])
                .sum()
        };
    }
    Ok(acc[v.index()])
}

/// Decision nodes of the subtree at `v`, in tree order.
pub(crate) fn decision_nodes_below(tree: &EventTree, v: NodeIdx) -> Vec<NodeIdx> {
    tree.subtree(v).into_iter().filter(|&n| !tree.is_terminal(n)).collect()
}

/// All pure selections that vary only at `nodes`; other entries copy `base`.
/// Mixed-radix order with the last listed node varying fastest.
pub fn selections_over(priors: &PriorSet, nodes: &[NodeIdx], base: &Selection) -> Result<Vec<Selection>> {
    let count = nodes
        .iter()
        .fold(1u128, |acc, &n| acc.saturating_mul(priors.extremes(n).len() as u128));
    if count > MAX_SELECTIONS {
        return Err(Error::SizeGuard {
            what: "extreme selections",
            actual: count,
            limit: MAX_SELECTIONS,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut digits = vec![0usize; nodes.len()];
    loop {
        let mut s = base.clone();
        for (&n, &d) in nodes.iter().zip(&digits) {
            s.0[n.index()] = d;
        }
        out.push(s);
        let mut i = nodes.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < priors.extremes(nodes[i]).len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Every pure per-node extreme choice over the whole tree.
pub fn extreme_selections(tree: &EventTree, priors: &PriorSet) -> Result<Vec<Selection>> {
    let nodes = decision_nodes_below(tree, tree.root());
    selections_over(priors, &nodes, &Selection::first(tree))
}
