//! JSON run configuration.

use std::collections::BTreeMap;

use serde::Deserialize;

use robust_snell::filtration::{ensure_valid_tree, AdaptedFamily, EventTree, NodeIdx, NodeRecord};
use robust_snell::pricing::{build_crr_barrier_tree, interval_priors, knockin_payoff};
use robust_snell::priors::{ensure_valid_priors, PriorMode, PriorSet};
use robust_snell::CrrParams;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tree: Option<TreeConfig>,
    pub crr: Option<CrrParams>,
    pub priors: Option<PriorsConfig>,
    #[serde(default)]
    pub mode: PriorMode,
    pub alphas: Option<Vec<f64>>,
    /// Node id the conditional quantities refer to; defaults to the root.
    pub v: Option<String>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    pub horizon: usize,
    pub nodes: Vec<NodeConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub time: usize,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub states: BTreeMap<String, f64>,
    #[serde(rename = "Y")]
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PriorsConfig {
    NodeExtremes {
        node_extremes: BTreeMap<String, Vec<Vec<f64>>>,
    },
    Interval {
        interval_up_probability: Interval,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Everything a command needs, checked and linked.
#[derive(Debug, Clone)]
pub struct Model {
    pub tree: EventTree,
    pub payoff: AdaptedFamily,
    pub priors: PriorSet,
    pub v: NodeIdx,
    pub alphas: Vec<f64>,
    pub tolerance: f64,
    pub seed: u64,
    pub crr: Option<CrrParams>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config does not parse: {e}")))
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let (tree, payoff) = match (&self.tree, &self.crr) {
            (Some(t), None) => explicit_tree(t)?,
            (None, Some(p)) => {
                let tree = build_crr_barrier_tree(p)?;
                let payoff = knockin_payoff(&tree, p)?;
                (tree, payoff)
            }
            (Some(_), Some(_)) => return Err(invalid("config has both tree and crr; exactly one is allowed")),
            (None, None) => return Err(invalid("config has neither tree nor crr; exactly one is required")),
        };

        let priors = match (&self.priors, &self.crr) {
            (Some(PriorsConfig::NodeExtremes { node_extremes }), _) => {
                let mut overrides = Vec::with_capacity(node_extremes.len());
                for (id, ext) in node_extremes {
                    let n = tree
                        .lookup(id)
                        .ok_or_else(|| invalid(format!("priors name unknown node {id}")))?;
                    overrides.push((n, ext.clone()));
                }
                PriorSet::with_overrides(&tree, self.mode, overrides)?
            }
            (
                Some(PriorsConfig::Interval {
                    interval_up_probability: i,
                }),
                _,
            ) => interval_priors(&tree, i.lo, i.hi, self.mode)?,
            (None, Some(p)) => interval_priors(&tree, p.ambiguity[0], p.ambiguity[1], self.mode)?,
            (None, None) => PriorSet::reference(&tree, self.mode),
        };
        ensure_valid_priors(&tree, &priors)?;

        let v = match &self.v {
            Some(id) => tree
                .lookup(id)
                .ok_or_else(|| invalid(format!("v names unknown node {id}")))?,
            None => tree.root(),
        };
        let alphas = self
            .alphas
            .clone()
            .unwrap_or_else(|| robust_snell::snell::ALPHA_GRID.to_vec());
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(invalid(format!("alpha {a} outside (0, 1]")));
        }
        let tolerance = self.tolerance.unwrap_or(robust_snell::filtration::DEFAULT_TOLERANCE);
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(invalid(format!("tolerance {tolerance} must be finite and nonnegative")));
        }
        Ok(Model {
            tree,
            payoff,
            priors,
            v,
            alphas,
            tolerance,
            seed: self.seed.unwrap_or(0),
            crr: self.crr.clone(),
        })
    }
}

fn explicit_tree(t: &TreeConfig) -> Result<(EventTree, AdaptedFamily), CliError> {
    let records = t
        .nodes
        .iter()
        .map(|n| NodeRecord {
            id: n.id.clone(),
            time: n.time,
            parent: n.parent.clone(),
            q: n.q,
            states: n.states.clone(),
        })
        .collect();
    let tree = EventTree::from_records(t.horizon, records)?;
    ensure_valid_tree(&tree)?;
    let mut values = vec![0.0; tree.len()];
    for n in &t.nodes {
        let idx = tree.lookup(&n.id).expect("linked node");
        values[idx.index()] = n.y;
    }
    let payoff = AdaptedFamily::new(&tree, values)?;
    Ok((tree, payoff))
}
