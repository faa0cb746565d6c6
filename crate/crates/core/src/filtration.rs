//! Finite filtered probability base.
//!
//! An [`EventTree`] is a non-recombining tree whose nodes are the atoms of the
//! filtration at their time. The reference measure `Q` is given by one-step
//! branch probabilities stored on each child. Adapted families are plain
//! node-indexed vectors and a stopping time is represented by its cut: the set
//! of nodes at which each path first stops.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for float comparisons unless configured otherwise.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Tolerance for probability and density normalisation checks.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Largest number of decision nodes `enumerate_rules` will accept.
pub const MAX_DECISION_NODES: usize = 24;

/// Position of a node inside its [`EventTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIdx(usize);

impl NodeIdx {
    pub fn new(index: usize) -> Self {
        NodeIdx(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Input description of one node, linked by string ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub time: usize,
    pub parent: Option<String>,
    /// Probability of moving from the parent to this node. Ignored at the root.
    pub q: Option<f64>,
    #[serde(default)]
    pub states: BTreeMap<String, f64>,
}

impl NodeRecord {
    pub fn root(id: impl Into<String>) -> Self {
        NodeRecord {
            id: id.into(),
            time: 0,
            parent: None,
            q: None,
            states: BTreeMap::new(),
        }
    }

    pub fn child(id: impl Into<String>, parent: impl Into<String>, time: usize, q: f64) -> Self {
        NodeRecord {
            id: id.into(),
            time,
            parent: Some(parent.into()),
            q: Some(q),
            states: BTreeMap::new(),
        }
    }

    pub fn with_state(mut self, label: impl Into<String>, value: f64) -> Self {
        self.states.insert(label.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub time: usize,
    pub parent: Option<NodeIdx>,
    pub children: Vec<NodeIdx>,
    /// One-step reference probability from the parent (1 at the root).
    pub q: f64,
    pub states: BTreeMap<String, f64>,
}

/// Finite filtered base: nodes stored parents-before-children, level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    horizon: usize,
    nodes: Vec<Node>,
    levels: Vec<Vec<NodeIdx>>,
    ids: HashMap<String, NodeIdx>,
}

/// One violated invariant found by [`validate_tree`].
#[derive(Debug, Clone, PartialEq)]
pub enum TreeIssue {
    ProbabilitySum {
        node: String,
        sum: f64,
    },
    ZeroProbability {
        node: String,
        child: String,
    },
    NegativeProbability {
        node: String,
        child: String,
        q: f64,
    },
    NonFiniteProbability {
        node: String,
        child: String,
    },
    RootTime {
        time: usize,
    },
    ChildTime {
        node: String,
        time: usize,
        parent_time: usize,
    },
    LeafTime {
        node: String,
        time: usize,
        horizon: usize,
    },
    EmptyHorizon,
}

impl fmt::Display for TreeIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeIssue::ProbabilitySum { node, sum } => {
                write!(f, "node {node}: probabilities sum {sum} ≠ 1")
            }
            TreeIssue::ZeroProbability { node, child } => {
                write!(f, "node {node}: zero-probability branch to {child}")
            }
            TreeIssue::NegativeProbability { node, child, q } => {
                write!(f, "node {node}: negative probability {q} to {child}")
            }
            TreeIssue::NonFiniteProbability { node, child } => {
                write!(f, "node {node}: non-finite probability to {child}")
            }
            TreeIssue::RootTime { time } => write!(f, "root time {time} ≠ 0"),
            TreeIssue::ChildTime {
                node,
                time,
                parent_time,
            } => write!(f, "node {node}: time {time} ≠ parent time {parent_time} + 1"),
            TreeIssue::LeafTime { node, time, horizon } => write!(f, "leaf {node}: time {time} ≠ horizon {horizon}"),
            TreeIssue::EmptyHorizon => write!(f, "horizon must be at least 1"),
        }
    }
}

impl EventTree {
    /// Links records by id. Only structural problems (duplicate or dangling
    /// ids, several roots, unreachable nodes) are errors here; probability and
    /// timing invariants are reported by [`validate_tree`].
    pub fn from_records(horizon: usize, records: Vec<NodeRecord>) -> Result<Self> {
        let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.id.as_str(), i).is_some() {
                return Err(Error::InvalidTree(format!("duplicate node id {:?}", r.id)));
            }
        }
        let mut roots = records.iter().enumerate().filter(|(_, r)| r.parent.is_none());
        let root = match (roots.next(), roots.next()) {
            (Some((i, _)), None) => i,
            (None, _) => return Err(Error::InvalidTree("no root node".into())),
            (Some(_), Some((_, r))) => return Err(Error::InvalidTree(format!("second root {:?}", r.id))),
        };
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); records.len()];
        for (i, r) in records.iter().enumerate() {
            if let Some(p) = &r.parent {
                let &pi = by_id
                    .get(p.as_str())
                    .ok_or_else(|| Error::InvalidTree(format!("node {:?}: unknown parent {p:?}", r.id)))?;
                kids[pi].push(i);
            }
        }

        // Breadth-first relabelling; siblings keep their input order.
        let mut order = vec![root];
        let mut head = 0;
        while head < order.len() {
            let n = order[head];
            order.extend(kids[n].iter().copied());
            head += 1;
            if order.len() > records.len() {
                return Err(Error::InvalidTree("cycle detected".into()));
            }
        }
        if order.len() != records.len() {
            return Err(Error::InvalidTree(format!(
                "{} node(s) not reachable from the root",
                records.len() - order.len()
            )));
        }
        let mut new_index = vec![0usize; records.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }

        let mut nodes = Vec::with_capacity(records.len());
        let mut depth = vec![0usize; records.len()];
        let mut levels: Vec<Vec<NodeIdx>> = Vec::new();
        for (new, &old) in order.iter().enumerate() {
            let r = &records[old];
            let parent = r.parent.as_ref().map(|p| NodeIdx(new_index[by_id[p.as_str()]]));
            if let Some(p) = parent {
                depth[new] = depth[p.0] + 1;
            }
            if levels.len() <= depth[new] {
                levels.push(Vec::new());
            }
            levels[depth[new]].push(NodeIdx(new));
            nodes.push(Node {
                id: r.id.clone(),
                time: r.time,
                parent,
                children: kids[old].iter().map(|&c| NodeIdx(new_index[c])).collect(),
                q: if parent.is_some() { r.q.unwrap_or(f64::NAN) } else { 1.0 },
                states: r.states.clone(),
            });
        }
        let ids = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), NodeIdx(i)))
            .collect();
        Ok(EventTree {
            horizon,
            nodes,
            levels,
            ids,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeIdx {
        NodeIdx(0)
    }

    pub fn node(&self, n: NodeIdx) -> &Node {
        &self.nodes[n.0]
    }

    pub fn nodes(&self) -> impl DoubleEndedIterator<Item = NodeIdx> + ExactSizeIterator {
        (0..self.nodes.len()).map(NodeIdx)
    }

    /// Nodes grouped by depth, root level first.
    pub fn levels(&self) -> &[Vec<NodeIdx>] {
        &self.levels
    }

    pub fn children(&self, n: NodeIdx) -> &[NodeIdx] {
        &self.nodes[n.0].children
    }

    pub fn parent(&self, n: NodeIdx) -> Option<NodeIdx> {
        self.nodes[n.0].parent
    }

    pub fn q(&self, n: NodeIdx) -> f64 {
        self.nodes[n.0].q
    }

    pub fn time(&self, n: NodeIdx) -> usize {
        self.nodes[n.0].time
    }

    pub fn id(&self, n: NodeIdx) -> &str {
        &self.nodes[n.0].id
    }

    pub fn state(&self, n: NodeIdx, label: &str) -> Option<f64> {
        self.nodes[n.0].states.get(label).copied()
    }

    pub fn is_terminal(&self, n: NodeIdx) -> bool {
        self.nodes[n.0].children.is_empty()
    }

    pub fn lookup(&self, id: &str) -> Option<NodeIdx> {
        self.ids.get(id).copied()
    }

    /// The node itself and all its descendants, parents before children.
    pub fn subtree(&self, v: NodeIdx) -> Vec<NodeIdx> {
        let mut out = vec![v];
        let mut head = 0;
        while head < out.len() {
            let n = out[head];
            out.extend_from_slice(self.children(n));
            head += 1;
        }
        out
    }

    /// Whether `a` lies on the path from the root to `b` (inclusive).
    pub fn is_ancestor_or_self(&self, a: NodeIdx, b: NodeIdx) -> bool {
        let mut cur = Some(b);
        while let Some(n) = cur {
            if n == a {
                return true;
            }
            if self.depth_le(n, a) {
                return false;
            }
            cur = self.parent(n);
        }
        false
    }

    fn depth_le(&self, n: NodeIdx, a: NodeIdx) -> bool {
        // BFS order: a node never precedes its ancestors.
        n.0 < a.0
    }

    /// `Q(n | v)` for every node of the subtree at `v`, zero elsewhere.
    pub fn conditional_probabilities(&self, v: NodeIdx) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        w[v.0] = 1.0;
        for n in self.subtree(v) {
            for &c in self.children(n) {
                w[c.0] = w[n.0] * self.q(c);
            }
        }
        w
    }

    /// One-step `E^Q[family | n]` for a non-terminal node.
    pub fn step_mean(&self, n: NodeIdx, family: &AdaptedFamily) -> f64 {
        self.children(n).iter().map(|&c| self.q(c) * family[c]).sum()
    }

    /// Number of non-terminal nodes in the subtree at `v`.
    pub fn decision_nodes(&self, v: NodeIdx) -> usize {
        self.subtree(v).into_iter().filter(|&n| !self.is_terminal(n)).count()
    }
}

/// Reports every violated tree invariant; an empty list means the tree is valid.
pub fn validate_tree(tree: &EventTree) -> Vec<TreeIssue> {
    let mut issues = Vec::new();
    if tree.horizon == 0 {
        issues.push(TreeIssue::EmptyHorizon);
    }
    if tree.time(tree.root()) != 0 {
        issues.push(TreeIssue::RootTime {
            time: tree.time(tree.root()),
        });
    }
    for n in tree.nodes() {
        let node = tree.node(n);
        if node.children.is_empty() {
            if node.time != tree.horizon {
                issues.push(TreeIssue::LeafTime {
                    node: node.id.clone(),
                    time: node.time,
                    horizon: tree.horizon,
                });
            }
            continue;
        }
        let mut sum = 0.0;
        for &c in &node.children {
            let child = tree.node(c);
            if child.time != node.time + 1 {
                issues.push(TreeIssue::ChildTime {
                    node: child.id.clone(),
                    time: child.time,
                    parent_time: node.time,
                });
            }
            let q = child.q;
            if !q.is_finite() {
                issues.push(TreeIssue::NonFiniteProbability {
                    node: node.id.clone(),
                    child: child.id.clone(),
                });
            } else if q == 0.0 {
                issues.push(TreeIssue::ZeroProbability {
                    node: node.id.clone(),
                    child: child.id.clone(),
                });
            } else if q < 0.0 {
                issues.push(TreeIssue::NegativeProbability {
                    node: node.id.clone(),
                    child: child.id.clone(),
                    q,
                });
            }
            sum += q;
        }
        if sum.is_finite() && (sum - 1.0).abs() > SUM_TOLERANCE {
            issues.push(TreeIssue::ProbabilitySum {
                node: node.id.clone(),
                sum,
            });
        }
    }
    issues
}

/// Fails with the first violation when the tree is not valid.
pub fn ensure_valid_tree(tree: &EventTree) -> Result<()> {
    let issues = validate_tree(tree);
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidTree(
            issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ))
    }
}

/// A real value on every node of a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedFamily(Vec<f64>);

impl AdaptedFamily {
    pub fn new(tree: &EventTree, values: Vec<f64>) -> Result<Self> {
        if values.len() != tree.len() {
            return Err(Error::InvalidInput(format!(
                "family has {} values for {} nodes",
                values.len(),
                tree.len()
            )));
        }
        Ok(AdaptedFamily(values))
    }

    pub fn from_fn(tree: &EventTree, f: impl FnMut(NodeIdx) -> f64) -> Self {
        AdaptedFamily(tree.nodes().map(f).collect())
    }

    pub fn constant(tree: &EventTree, c: f64) -> Self {
        AdaptedFamily(vec![c; tree.len()])
    }

    pub fn zeros(tree: &EventTree) -> Self {
        Self::constant(tree, 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set(&mut self, n: NodeIdx, value: f64) {
        self.0[n.0] = value;
    }

    pub fn scaled(&self, c: f64) -> Self {
        AdaptedFamily(self.0.iter().map(|x| c * x).collect())
    }

    /// True when every value is finite and nonnegative, as a reward family requires.
    pub fn is_reward(&self) -> bool {
        self.0.iter().all(|x| x.is_finite() && *x >= 0.0)
    }

    pub(crate) fn ensure_reward(&self, tree: &EventTree) -> Result<()> {
        if self.len() != tree.len() {
            return Err(Error::InvalidInput(format!(
                "payoff has {} values for {} nodes",
                self.len(),
                tree.len()
            )));
        }
        match self.0.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidInput(format!(
                "payoff at node {} is {}, must be finite and nonnegative",
                tree.id(NodeIdx(i)),
                self.0[i]
            ))),
        }
    }
}

impl Index<NodeIdx> for AdaptedFamily {
    type Output = f64;

    fn index(&self, n: NodeIdx) -> &f64 {
        &self.0[n.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Stop,
    Continue,
}

/// A stopping time in `S_v` (or `S_{v+}` when `strict`), stored as its cut.
///
/// `stop[n]` is true exactly at the first stopping node of each path from the
/// floor; nodes outside the floor's subtree and nodes past the cut are false.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StoppingRule {
    floor: NodeIdx,
    strict: bool,
    stop: Vec<bool>,
}

impl StoppingRule {
    /// Builds a rule from per-node labels; only the subtree at `floor` is read.
    /// Labels below a stop are ignored.
    pub fn from_labels(tree: &EventTree, floor: NodeIdx, strict: bool, labels: &[Label]) -> Result<Self> {
        if labels.len() != tree.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} nodes",
                labels.len(),
                tree.len()
            )));
        }
        if strict && !tree.is_terminal(floor) && labels[floor.0] == Label::Stop {
            return Err(Error::InvalidInput(format!(
                "strict rule stops at its floor {}",
                tree.id(floor)
            )));
        }
        let mut stop = vec![false; tree.len()];
        let mut stack = vec![floor];
        while let Some(n) = stack.pop() {
            if labels[n.0] == Label::Stop {
                stop[n.0] = true;
            } else if tree.is_terminal(n) {
                return Err(Error::InvalidInput(format!(
                    "terminal node {} reachable without a stop",
                    tree.id(n)
                )));
            } else {
                stack.extend_from_slice(tree.children(n));
            }
        }
        Ok(StoppingRule { floor, strict, stop })
    }

    /// Rule stopping at the given nodes (first hit on each path).
    pub fn from_stop_set(
        tree: &EventTree,
        floor: NodeIdx,
        strict: bool,
        stops: impl IntoIterator<Item = NodeIdx>,
    ) -> Result<Self> {
        let mut labels = vec![Label::Continue; tree.len()];
        for n in stops {
            labels[n.0] = Label::Stop;
        }
        Self::from_labels(tree, floor, strict, &labels)
    }

    /// Deterministic time: stop at time `t` (or at the floor if it is later).
    pub fn at_time(tree: &EventTree, floor: NodeIdx, t: usize) -> Self {
        let t = t.max(tree.time(floor));
        first_entry_rule(tree, |n| tree.time(n) >= t, floor)
    }

    pub fn floor(&self) -> NodeIdx {
        self.floor
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn is_stop(&self, n: NodeIdx) -> bool {
        self.stop[n.0]
    }

    pub fn stop_nodes(&self) -> Vec<NodeIdx> {
        self.stop
            .iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .map(|(i, _)| NodeIdx(i))
            .collect()
    }

    /// For each node: whether the rule has stopped at or before it.
    /// Nodes outside the floor's subtree are reported as not stopped.
    pub fn stopped_by(&self, tree: &EventTree) -> Vec<bool> {
        let mut done = vec![false; tree.len()];
        for n in tree.subtree(self.floor) {
            let inherited = n != self.floor && tree.parent(n).is_some_and(|p| done[p.0]);
            done[n.0] = inherited || self.stop[n.0];
        }
        done
    }

    /// Nodes of the floor's subtree strictly before the stop on their path.
    pub fn continuation_nodes(&self, tree: &EventTree) -> Vec<NodeIdx> {
        let done = self.stopped_by(tree);
        tree.subtree(self.floor).into_iter().filter(|n| !done[n.0]).collect()
    }

    /// Per-node labels over the floor's subtree (STOP on the cut, CONTINUE elsewhere).
    pub fn labels(&self) -> Vec<Label> {
        self.stop
            .iter()
            .map(|&s| if s { Label::Stop } else { Label::Continue })
            .collect()
    }

    /// Exactly one stop on every path from the floor to a leaf.
    pub fn is_well_formed(&self, tree: &EventTree) -> bool {
        fn walk(tree: &EventTree, rule: &StoppingRule, n: NodeIdx, seen: bool) -> bool {
            let here = seen as u8 + rule.stop[n.0] as u8;
            if here > 1 {
                return false;
            }
            if tree.is_terminal(n) {
                return here == 1;
            }
            tree.children(n).iter().all(|&c| walk(tree, rule, c, here == 1))
        }
        let strict_ok = !self.strict || tree.is_terminal(self.floor) || !self.stop[self.floor.0];
        let outside_clear = {
            let inside: std::collections::HashSet<_> = tree.subtree(self.floor).into_iter().collect();
            tree.nodes().all(|n| inside.contains(&n) || !self.stop[n.0])
        };
        strict_ok && outside_clear && walk(tree, self, self.floor, false)
    }
}

/// `Σ_c q_c · value(c)` over the children of `node`.
pub fn step_expectation_q(tree: &EventTree, child_values: &BTreeMap<NodeIdx, f64>, node: NodeIdx) -> Result<f64> {
    if tree.is_terminal(node) {
        return Err(Error::InvalidInput(format!("node {} is terminal", tree.id(node))));
    }
    tree.children(node)
        .iter()
        .map(|c| {
            child_values
                .get(c)
                .map(|v| tree.q(*c) * v)
                .ok_or_else(|| Error::InvalidInput(format!("missing value for child {}", tree.id(*c))))
        })
        .sum()
}

/// `E^Q[family(τ) | v]` by backward accumulation from the rule's cut.
pub fn expected_value_q(tree: &EventTree, family: &AdaptedFamily, rule: &StoppingRule, v: NodeIdx) -> Result<f64> {
    if rule.floor() != v {
        return Err(Error::floor(v, rule.floor()));
    }
    let sub = tree.subtree(v);
    let mut acc = vec![0.0; tree.len()];
    for &n in sub.iter().rev() {
        acc[n.0] = if rule.is_stop(n) {
            family[n]
        } else {
            tree.children(n).iter().map(|&c| tree.q(c) * acc[c.0]).sum()
        };
    }
    Ok(acc[v.0])
}

fn check_pair(a: &StoppingRule, b: &StoppingRule) -> Result<()> {
    if a.floor != b.floor {
        return Err(Error::floor(a.floor, b.floor));
    }
    if a.stop.len() != b.stop.len() {
        return Err(Error::InvalidInput("rules belong to different trees".into()));
    }
    Ok(())
}

fn combine(tree: &EventTree, a: &StoppingRule, b: &StoppingRule, both: bool) -> StoppingRule {
    let da = a.stopped_by(tree);
    let db = b.stopped_by(tree);
    let joined = |n: NodeIdx| if both { da[n.0] && db[n.0] } else { da[n.0] || db[n.0] };
    let mut stop = vec![false; tree.len()];
    for n in tree.subtree(a.floor) {
        let before = n != a.floor && tree.parent(n).is_some_and(&joined);
        stop[n.0] = joined(n) && !before;
    }
    StoppingRule {
        floor: a.floor,
        strict: a.strict && b.strict,
        stop,
    }
}

/// Pathwise minimum `τ₁ ∧ τ₂`.
pub fn min_rule(tree: &EventTree, a: &StoppingRule, b: &StoppingRule) -> Result<StoppingRule> {
    check_pair(a, b)?;
    Ok(combine(tree, a, b, false))
}

/// Pathwise maximum `τ₁ ∨ τ₂`.
pub fn max_rule(tree: &EventTree, a: &StoppingRule, b: &StoppingRule) -> Result<StoppingRule> {
    check_pair(a, b)?;
    let mut r = combine(tree, a, b, true);
    r.strict = a.strict || b.strict;
    Ok(r)
}

/// First node at or after `v` on each path where `predicate` holds; stops at
/// the horizon when it never does.
pub fn first_entry_rule(tree: &EventTree, predicate: impl Fn(NodeIdx) -> bool, v: NodeIdx) -> StoppingRule {
    let mut stop = vec![false; tree.len()];
    let mut stack = vec![v];
    while let Some(n) = stack.pop() {
        if tree.is_terminal(n) || predicate(n) {
            stop[n.0] = true;
        } else {
            stack.extend_from_slice(tree.children(n));
        }
    }
    StoppingRule {
        floor: v,
        strict: false,
        stop,
    }
}

/// Closed-form size of `S_v` (or `S_{v+}`).
pub fn count_rules(tree: &EventTree, v: NodeIdx, strict: bool) -> u128 {
    fn free(tree: &EventTree, n: NodeIdx) -> u128 {
        if tree.is_terminal(n) {
            1
        } else {
            1u128.saturating_add(forced(tree, n))
        }
    }
    fn forced(tree: &EventTree, n: NodeIdx) -> u128 {
        tree.children(n)
            .iter()
            .fold(1u128, |acc, &c| acc.saturating_mul(free(tree, c)))
    }
    if strict && !tree.is_terminal(v) {
        forced(tree, v)
    } else {
        free(tree, v)
    }
}

/// Every element of `S_v` (or `S_{v+}`) exactly once.
///
/// Order: at each node the rule stopping there comes first, then the
/// continuation rules as a mixed-radix product over children (last child
/// varying fastest).
pub fn enumerate_rules(tree: &EventTree, v: NodeIdx, strict: bool) -> Result<Vec<StoppingRule>> {
    let decisions = tree.decision_nodes(v);
    if decisions > MAX_DECISION_NODES {
        return Err(Error::SizeGuard {
            what: "decision nodes",
            actual: decisions as u128,
            limit: MAX_DECISION_NODES as u128,
        });
    }
    let cuts = if strict && !tree.is_terminal(v) {
        continuation_cuts(tree, v)
    } else {
        cuts_at(tree, v)
    };
    Ok(cuts
        .into_iter()
        .map(|cut| {
            let mut stop = vec![false; tree.len()];
            for n in cut {
                stop[n.0] = true;
            }
            StoppingRule { floor: v, strict, stop }
        })
        .collect())
}

fn cuts_at(tree: &EventTree, n: NodeIdx) -> Vec<Vec<NodeIdx>> {
    let mut out = vec![vec![n]];
    if !tree.is_terminal(n) {
        out.extend(continuation_cuts(tree, n));
    }
    out
}

fn continuation_cuts(tree: &EventTree, n: NodeIdx) -> Vec<Vec<NodeIdx>> {
    let mut acc: Vec<Vec<NodeIdx>> = vec![Vec::new()];
    for &c in tree.children(n) {
        let sub = cuts_at(tree, c);
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                sub.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.extend_from_slice(s);
                    p
                })
            })
            .collect();
    }
    acc
}
