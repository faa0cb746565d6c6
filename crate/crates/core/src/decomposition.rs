//! Universal supermartingale decomposition on a finite tree.
//!
//! At each non-terminal node the reference Doob increment of the value
//! family, `ΔM^Q(c) = R(c) − E^Q[R | n]`, is split by a `Q`-weighted
//! orthogonal projection onto `L(n) = span{d − 1 : d extreme}`:
//!
//! ```text
//! ΔM^Q = ΔK + ΔM,   ΔK ∈ L(n),   ΔM ⟂ L(n)
//! ΔC   = ΔA^Q − ΔK
//! ```
//!
//! so that `R = X₀ + M − C` holds exactly and `M` has zero conditional mean
//! under every density in the node polytope. `C` is increasing only when the
//! premise diagnostics hold; otherwise the decomposition is still returned
//! together with the failing increments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filtration::{AdaptedFamily, EventTree, NodeIdx, StoppingRule};
use crate::priors::{DensityProcess, PriorSet};
use crate::snell::SnellSolution;

/// Numerical rank cut-off for the density-increment basis.
const RANK_TOLERANCE: f64 = 1e-10;

/// Tolerance for "increasing" and "flat" decisions on `C`.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-10;

/// Limit on vertex candidates examined by the premise check at one node.
const MAX_VERTEX_CANDIDATES: u128 = 200_000;

/// Classical Doob decomposition `family = family(root) + M − A` under one prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Doob {
    pub a: AdaptedFamily,
    pub m: AdaptedFamily,
}

pub fn doob(tree: &EventTree, family: &AdaptedFamily, z: &DensityProcess) -> Result<Doob> {
    let mut a = AdaptedFamily::zeros(tree);
    let mut m = AdaptedFamily::zeros(tree);
    for n in tree.nodes().filter(|&n| !tree.is_terminal(n)) {
        let mean = z.step_mean(tree, n, family);
        let da = family[n] - mean;
        if da < -DECOMPOSITION_TOLERANCE * family[n].abs().max(1.0) {
            return Err(Error::NotSupermartingale {
                node: n.index(),
                excess: -da,
            });
        }
        for &c in tree.children(n) {
            a.set(c, a[n] + da);
            m.set(c, m[n] + family[c] - mean);
        }
    }
    Ok(Doob { a, m })
}

fn q_weights(tree: &EventTree, node: NodeIdx) -> Vec<f64> {
    tree.children(node).iter().map(|&c| tree.q(c)).collect()
}

fn inner(q: &[f64], x: &[f64], y: &[f64]) -> f64 {
    q.iter().zip(x).zip(y).map(|((w, a), b)| w * a * b).sum()
}

/// Orthonormal basis (under `⟨x, y⟩ = Σ q_c x_c y_c`) of the span of the
/// one-step density increments `d − 1` at `node`.
pub fn node_subspace_basis(tree: &EventTree, priors: &PriorSet, node: NodeIdx) -> Vec<Vec<f64>> {
    if tree.is_terminal(node) {
        return Vec::new();
    }
    let q = q_weights(tree, node);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for d in priors.extremes(node) {
        let mut h: Vec<f64> = d.iter().map(|x| x - 1.0).collect();
        // Two Gram-Schmidt passes keep the basis orthogonal to rounding.
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&q, &h, b);
                h.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = inner(&q, &h, &h).sqrt();
        if norm > RANK_TOLERANCE {
            basis.push(h.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Splits a zero-mean one-step increment into its projection on the basis
/// span and the orthogonal remainder.
pub fn kw_project(
    tree: &EventTree,
    node: NodeIdx,
    increment: &[f64],
    basis: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = q_weights(tree, node);
    if increment.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "increment has {} entries for {} children",
            increment.len(),
            q.len()
        )));
    }
    let mean: f64 = q.iter().zip(increment).map(|(w, x)| w * x).sum();
    let scale = increment.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if mean.abs() > 1e-9 * scale {
        return Err(Error::InvalidInput(format!("increment has nonzero Q-mean {mean}")));
    }
    let mut k_part = vec![0.0; q.len()];
    for b in basis {
        let c = inner(&q, increment, b);
        k_part.iter_mut().zip(b).for_each(|(k, y)| *k += c * y);
    }
    let orth = increment.iter().zip(&k_part).map(|(x, k)| x - k).collect();
    Ok((k_part, orth))
}

/// Per-node discrete analogue of the subspace premise.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePremise {
    /// Dimension of `L(n)`.
    pub dimension: usize,
    /// Whether the polytope equals `(1 + L) ∩ {d ≥ 0}`; `None` if too large to decide.
    pub full_slice: Option<bool>,
    /// Whether `λ·L` stays admissible for all scalars `λ` (only if `L = {0}`).
    pub scaling_closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiseReport {
    pub nodes: Vec<Option<NodePremise>>,
    pub holds: bool,
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Vertices of `{1 + Bλ ≥ 0}`: points where `k` coordinates vanish.
fn slice_vertices(basis: &[Vec<f64>], children: usize) -> Option<Vec<Vec<f64>>> {
    let k = basis.len();
    if binomial(children, k) > MAX_VERTEX_CANDIDATES {
        return None;
    }
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for zeros in k_subsets(children, k) {
        let a = DMatrix::from_fn(k, k, |i, j| basis[j][zeros[i]]);
        let rhs = DVector::from_element(k, -1.0);
        let Some(lambda) = a.lu().solve(&rhs) else { continue };
        let d: Vec<f64> = (0..children)
            .map(|c| 1.0 + (0..k).map(|j| basis[j][c] * lambda[j]).sum::<f64>())
            .collect();
        if d.iter().all(|x| x.is_finite() && *x >= -1e-12)
            && !vertices
                .iter()
                .any(|v| v.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-9))
        {
            vertices.push(d);
        }
    }
    Some(vertices)
}

pub fn premise_check(tree: &EventTree, priors: &PriorSet) -> PremiseReport {
    let nodes: Vec<Option<NodePremise>> = tree
        .nodes()
        .map(|n| {
            if tree.is_terminal(n) {
                return None;
            }
            let basis = node_subspace_basis(tree, priors, n);
            let dimension = basis.len();
            let full_slice = if dimension == 0 {
                Some(true)
            } else {
                // The polytope lies inside the slice, so equality holds iff
                // every slice vertex is one of the listed extremes.
                slice_vertices(&basis, tree.children(n).len()).map(|verts| {
                    verts.iter().all(|v| {
                        priors
                            .extremes(n)
                            .iter()
                            .any(|d| d.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-9))
                    })
                })
            };
            Some(NodePremise {
                dimension,
                full_slice,
                scaling_closed: dimension == 0,
            })
        })
        .collect();
    let holds = nodes.iter().flatten().all(|p| p.scaling_closed);
    PremiseReport { nodes, holds }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub c_increasing: bool,
    pub min_delta_c: f64,
    /// `max |E^d[ΔM | n]|` over nodes and extremes.
    pub universal_martingale_residual: f64,
    /// `min ΔA^Q`; negative when `R` is not a `Q`-supermartingale.
    pub min_delta_a_q: f64,
    /// `max |R − (X₀ + M − C)|`.
    pub reconstruction_error: f64,
    pub premise: PremiseReport,
}

/// `R = X₀ + M − C` with the projection parts `K` and the reference
/// compensator `A^Q`. Increment vectors are stored on the child node.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub x0: f64,
    pub m: AdaptedFamily,
    pub c: AdaptedFamily,
    pub k: AdaptedFamily,
    pub a_q: AdaptedFamily,
    pub delta_m: AdaptedFamily,
    pub delta_c: AdaptedFamily,
    pub delta_k: AdaptedFamily,
    pub diagnostics: Diagnostics,
}

pub fn universal_decompose(tree: &EventTree, solution: &SnellSolution, priors: &PriorSet) -> Decomposition {
    let r = &solution.r;
    let zeros = || AdaptedFamily::zeros(tree);
    let (mut m, mut c, mut k, mut a_q) = (zeros(), zeros(), zeros(), zeros());
    let (mut delta_m, mut delta_c, mut delta_k) = (zeros(), zeros(), zeros());
    let mut min_delta_c = f64::INFINITY;
    let mut min_delta_a = f64::INFINITY;
    let mut residual = 0.0f64;

    for n in tree.nodes().filter(|&n| !tree.is_terminal(n)) {
        let children = tree.children(n);
        let mean = tree.step_mean(n, r);
        let da = r[n] - mean;
        min_delta_a = min_delta_a.min(da);
        let mq: Vec<f64> = children.iter().map(|&ch| r[ch] - mean).collect();
        let basis = node_subspace_basis(tree, priors, n);
        let (kp, orth) = kw_project(tree, n, &mq, &basis).expect("reference Doob increment has zero Q-mean");
        for (j, &ch) in children.iter().enumerate() {
            let dc = da - kp[j];
            delta_k.set(ch, kp[j]);
            delta_m.set(ch, orth[j]);
            delta_c.set(ch, dc);
            min_delta_c = min_delta_c.min(dc);
            m.set(ch, m[n] + orth[j]);
            k.set(ch, k[n] + kp[j]);
            c.set(ch, c[n] + dc);
            a_q.set(ch, a_q[n] + da);
        }
        for d in priors.extremes(n) {
            let e: f64 = children
                .iter()
                .zip(d)
                .zip(&orth)
                .map(|((&ch, dj), x)| tree.q(ch) * dj * x)
                .sum();
            residual = residual.max(e.abs());
        }
    }

    let x0 = r[tree.root()];
    let reconstruction_error = tree
        .nodes()
        .map(|n| (r[n] - (x0 + m[n] - c[n])).abs())
        .fold(0.0, f64::max);
    let diagnostics = Diagnostics {
        c_increasing: min_delta_c >= -DECOMPOSITION_TOLERANCE,
        min_delta_c,
        universal_martingale_residual: residual,
        min_delta_a_q: min_delta_a,
        reconstruction_error,
        premise: premise_check(tree, priors),
    };
    Decomposition {
        x0,
        m,
        c,
        k,
        a_q,
        delta_m,
        delta_c,
        delta_k,
        diagnostics,
    }
}

/// Whether `C` stays flat from the rule's floor up to and including its stop
/// nodes.
pub fn flat_off_check(decomposition: &Decomposition, tree: &EventTree, rule: &StoppingRule) -> bool {
    rule.continuation_nodes(tree).into_iter().all(|n| {
        tree.children(n)
            .iter()
            .all(|&ch| decomposition.delta_c[ch].abs() <= DECOMPOSITION_TOLERANCE)
    })
}
