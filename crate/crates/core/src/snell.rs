//! Value family, strict value family, ε-optimal and optimal stopping times.
//!
//! Under a rectangular prior class the best-case value obeys the one-step
//! recursion
//!
//! ```text
//! R(n)  = Y(n)                                  at terminal nodes
//! R⁺(n) = max_d Σ_c q_c d_c R(c)                otherwise
//! R(n)  = max(Y(n), R⁺(n))
//! ```
//!
//! which is what [`solve`] runs. The brute-force definition lives in
//! [`crate::oracle`] and is used to validate it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filtration::{
    ensure_valid_tree, enumerate_rules, first_entry_rule, AdaptedFamily, EventTree, NodeIdx, StoppingRule,
    DEFAULT_TOLERANCE,
};
use crate::oracle::enumerated_sup;
use crate::priors::{
    bayes_conditional, decision_nodes_below, ensure_valid_priors, selections_over, DensityProcess, PriorMode, PriorSet,
    Selection,
};

/// Levels smaller than this are processed serially.
const PAR_LEVEL_MIN: usize = 512;

/// α grid used by the identity checks.
pub const ALPHA_GRID: [f64; 6] = [0.2, 0.4, 0.6, 0.8, 0.95, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SnellSolution {
    pub r: AdaptedFamily,
    pub r_plus: AdaptedFamily,
    /// Lowest-index maximising extreme at each non-terminal node.
    pub argmax_extreme: Vec<Option<usize>>,
    /// Density attaining `R⁺` in the configured mode (`None` if unattained).
    pub optimal_density: Vec<Option<Vec<f64>>>,
    /// Nodes where `R = Y` within tolerance.
    pub stop_region: Vec<bool>,
    pub attained_at: Vec<bool>,
    pub attained: bool,
    pub tolerance: f64,
}

impl SnellSolution {
    pub fn in_stop_region(&self, n: NodeIdx) -> bool {
        self.stop_region[n.index()]
    }

    pub fn stop_nodes(&self) -> Vec<NodeIdx> {
        (0..self.stop_region.len())
            .filter(|&i| self.stop_region[i])
            .map(NodeIdx::new)
            .collect()
    }
}

struct NodeStep {
    r_plus: f64,
    argmax: usize,
    density: Option<Vec<f64>>,
}

fn best_response(tree: &EventTree, priors: &PriorSet, n: NodeIdx, r: &AdaptedFamily) -> NodeStep {
    let children = tree.children(n);
    let ext = priors.extremes(n);
    let values: Vec<f64> = ext
        .iter()
        .map(|d| children.iter().zip(d).map(|(&c, dc)| tree.q(c) * dc * r[c]).sum())
        .collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-12 * best.abs().max(1.0);
    let maximisers: Vec<usize> = (0..values.len()).filter(|&k| values[k] >= best - tie).collect();
    let argmax = maximisers[0];
    let density = match priors.mode() {
        PriorMode::Closure => Some(ext[argmax].clone()),
        PriorMode::Equivalent => {
            if let Some(&k) = maximisers.iter().find(|&&k| ext[k].iter().all(|x| *x > 0.0)) {
                Some(ext[k].clone())
            } else {
                // The maximising face meets {d > 0} iff its barycentre does.
                let m = maximisers.len() as f64;
                let centre: Vec<f64> = (0..children.len())
                    .map(|j| maximisers.iter().map(|&k| ext[k][j]).sum::<f64>() / m)
                    .collect();
                centre.iter().all(|x| *x > 0.0).then_some(centre)
            }
        }
    };
    NodeStep {
        r_plus: best,
        argmax,
        density,
    }
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(1.0)
}

/// Backward induction with the default tolerance.
pub fn solve(tree: &EventTree, payoff: &AdaptedFamily, priors: &PriorSet) -> Result<SnellSolution> {
    solve_with_tolerance(tree, payoff, priors, DEFAULT_TOLERANCE)
}

pub fn solve_with_tolerance(
    tree: &EventTree,
    payoff: &AdaptedFamily,
    priors: &PriorSet,
    tolerance: f64,
) -> Result<SnellSolution> {
    ensure_valid_tree(tree)?;
    payoff.ensure_reward(tree)?;
    ensure_valid_priors(tree, priors)?;
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "tolerance {tolerance} must be finite and nonnegative"
        )));
    }

    let len = tree.len();
    let mut r = payoff.clone();
    let mut r_plus = payoff.clone();
    let mut argmax_extreme = vec![None; len];
    let mut optimal_density = vec![None; len];
    let mut attained_at = vec![true; len];

    for level in tree.levels().iter().rev() {
        let inner: Vec<NodeIdx> = level.iter().copied().filter(|&n| !tree.is_terminal(n)).collect();
        let steps: Vec<NodeStep> = if inner.len() >= PAR_LEVEL_MIN {
            inner.par_iter().map(|&n| best_response(tree, priors, n, &r)).collect()
        } else {
            inner.iter().map(|&n| best_response(tree, priors, n, &r)).collect()
        };
        for (n, step) in inner.into_iter().zip(steps) {
            r_plus.set(n, step.r_plus);
            r.set(n, payoff[n].max(step.r_plus));
            argmax_extreme[n.index()] = Some(step.argmax);
            attained_at[n.index()] = step.density.is_some();
            optimal_density[n.index()] = step.density;
        }
    }

    let stop_region = tree.nodes().map(|n| near(r[n], payoff[n], tolerance)).collect();
    let attained = attained_at.iter().all(|a| *a);
    Ok(SnellSolution {
        r,
        r_plus,
        argmax_extreme,
        optimal_density,
        stop_region,
        attained_at,
        attained,
        tolerance,
    })
}

/// `Γ(v | τ, Z)`: conditional expected reward under the prior with density `Z`.
pub fn gamma(
    tree: &EventTree,
    payoff: &AdaptedFamily,
    z: &DensityProcess,
    rule: &StoppingRule,
    v: NodeIdx,
) -> Result<f64> {
    bayes_conditional(tree, z, payoff, rule, v)
}

/// `U^α(v)`: first entry of `{αR ≤ Y}` at or after `v`.
pub fn u_alpha(
    tree: &EventTree,
    solution: &SnellSolution,
    payoff: &AdaptedFamily,
    v: NodeIdx,
    alpha: f64,
) -> Result<StoppingRule> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1]")));
    }
    let tol = solution.tolerance;
    Ok(first_entry_rule(
        tree,
        |n| {
            let r = solution.r[n];
            alpha * r <= payoff[n] + tol * r.abs().max(1.0)
        },
        v,
    ))
}

/// `U*(v)`: first entry of the stop region `{R = Y}` at or after `v`.
pub fn u_star(tree: &EventTree, solution: &SnellSolution, v: NodeIdx) -> StoppingRule {
    first_entry_rule(tree, |n| solution.in_stop_region(n), v)
}

/// Some density in the node polytope, strictly positive whenever possible.
fn fallback_density(priors: &PriorSet, n: NodeIdx) -> Vec<f64> {
    let ext = priors.extremes(n);
    if let Some(d) = ext.iter().find(|d| d.iter().all(|x| *x > 0.0)) {
        return d.clone();
    }
    let m = ext.len() as f64;
    (0..ext[0].len())
        .map(|j| ext.iter().map(|d| d[j]).sum::<f64>() / m)
        .collect()
}

/// Optimal model for `R(v)`: the maximising density on the continuation
/// region of `U*(v)`, any admissible density elsewhere.
pub fn extract_optimal_prior(
    solution: &SnellSolution,
    tree: &EventTree,
    priors: &PriorSet,
    v: NodeIdx,
) -> Result<DensityProcess> {
    let star = u_star(tree, solution, v);
    let cont = star.continuation_nodes(tree);
    let mut ratio: Vec<Option<Vec<f64>>> = tree
        .nodes()
        .map(|n| (!tree.is_terminal(n)).then(|| fallback_density(priors, n)))
        .collect();
    for n in cont {
        match &solution.optimal_density[n.index()] {
            Some(d) => ratio[n.index()] = Some(d.clone()),
            None => {
                return Err(Error::Unattained {
                    node: n.index(),
                    sup: solution.r_plus[n],
                })
            }
        }
    }
    DensityProcess::from_ratios(tree, ratio)
}

/// `sup_P E^P[family(τ) | v]` by one-step maximisation over extremes.
pub fn robust_expectation(
    tree: &EventTree,
    priors: &PriorSet,
    family: &AdaptedFamily,
    rule: &StoppingRule,
    v: NodeIdx,
) -> Result<f64> {
    if rule.floor() != v {
        return Err(Error::floor(v, rule.floor()));
    }
    let sub = tree.subtree(v);
    let mut acc = vec![0.0; tree.len()];
    for &n in sub.iter().rev() {
        acc[n.index()] = if rule.is_stop(n) {
            family[n]
        } else if tree.is_terminal(n) {
            0.0
        } else {
            let children = tree.children(n);
            priors
                .extremes(n)
                .iter()
                .map(|d| {
                    children
                        .iter()
                        .zip(d)
                        .map(|(&c, dc)| tree.q(c) * dc * acc[c.index()])
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
    }
    Ok(acc[v.index()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupermartingaleReport {
    /// Per node: `max_d E^d[family | n] − family(n)` (zero at terminal nodes).
    pub excess: Vec<f64>,
    pub node_pass: Vec<bool>,
    pub passed: bool,
}

/// One-step check that `family` is a supermartingale under every prior.
pub fn check_supermartingale_family(
    tree: &EventTree,
    family: &AdaptedFamily,
    priors: &PriorSet,
    tolerance: f64,
) -> SupermartingaleReport {
    let excess: Vec<f64> = tree
        .nodes()
        .map(|n| {
            if tree.is_terminal(n) {
                return 0.0;
            }
            let children = tree.children(n);
            let best = priors
                .extremes(n)
                .iter()
                .map(|d| {
                    children
                        .iter()
                        .zip(d)
                        .map(|(&c, dc)| tree.q(c) * dc * family[c])
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            best - family[n]
        })
        .collect();
    let node_pass: Vec<bool> = tree
        .nodes()
        .map(|n| excess[n.index()] <= tolerance * family[n].abs().max(1.0))
        .collect();
    let passed = node_pass.iter().all(|p| *p);
    SupermartingaleReport {
        excess,
        node_pass,
        passed,
    }
}

/// Outcome of the necessary-and-sufficient optimality test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// `R(τ*) = Y(τ*)` on every charged stop node.
    pub cond1: bool,
    /// `R` stopped at `τ*` is a martingale under `P*`.
    pub cond2: bool,
    pub optimal: bool,
    /// `E^{P*}[Y(τ*) | v]`.
    pub value: f64,
    pub r_v: f64,
}

impl Certificate {
    /// The equivalence `optimal ⇔ E^{P*}[Y(τ*)] = R(v)`.
    pub fn equivalence_holds(&self, tolerance: f64) -> bool {
        self.optimal == near(self.value, self.r_v, tolerance)
    }
}

/// Checks the pair `(τ*, Z*)` against a solved instance.
///
/// Both conditions are read almost surely under `P*`: nodes that `Z*` assigns
/// zero conditional mass are skipped (none are in equivalent mode).
pub fn certificate_for(
    tree: &EventTree,
    payoff: &AdaptedFamily,
    solution: &SnellSolution,
    rule: &StoppingRule,
    z_star: &DensityProcess,
) -> Result<Certificate> {
    let v = rule.floor();
    let tol = solution.tolerance;
    let weights = z_star.conditional_weights(tree, v);
    let charged = |n: NodeIdx| weights[n.index()] > 0.0;

    let cond1 = rule
        .stop_nodes()
        .into_iter()
        .filter(|&n| charged(n))
        .all(|n| near(solution.r[n], payoff[n], tol));
    let cond2 = rule
        .continuation_nodes(tree)
        .into_iter()
        .filter(|&n| charged(n))
        .all(|n| near(z_star.step_mean(tree, n, &solution.r), solution.r[n], tol));
    let value = bayes_conditional(tree, z_star, payoff, rule, v)?;
    Ok(Certificate {
        cond1,
        cond2,
        optimal: cond1 && cond2,
        value,
        r_v: solution.r[v],
    })
}

pub fn check_optimality_certificate(
    tree: &EventTree,
    payoff: &AdaptedFamily,
    priors: &PriorSet,
    rule: &StoppingRule,
    z_star: &DensityProcess,
) -> Result<Certificate> {
    let solution = solve(tree, payoff, priors)?;
    certificate_for(tree, payoff, &solution, rule, z_star)
}

/// Both sides of the strict-value identity for one `(v, τ, P)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrictValueCheck {
    /// `E^P[R⁺(τ) | v]`.
    pub lhs: f64,
    /// Sup over `σ ∈ S_{τ+}` and priors that agree with `P` up to `τ`.
    pub pasted_sup: f64,
    /// Sup over `σ ∈ S_{τ+}` with the prior frozen to `P`.
    pub frozen_sup: f64,
}

fn strictly_after(tree: &EventTree, tau: &StoppingRule, sigma: &StoppingRule) -> bool {
    let done = sigma.stopped_by(tree);
    tau.stop_nodes().into_iter().all(|n| {
        if tree.is_terminal(n) {
            n == tau.floor() || tree.parent(n).is_some_and(|p| !done[p.index()])
        } else {
            !done[n.index()]
        }
    })
}

/// Evaluates the strict-value identity by enumeration.
pub fn strict_value_check(
    tree: &EventTree,
    payoff: &AdaptedFamily,
    priors: &PriorSet,
    solution: &SnellSolution,
    tau: &StoppingRule,
    p: &DensityProcess,
) -> Result<StrictValueCheck> {
    let v = tau.floor();
    let lhs = bayes_conditional(tree, p, &solution.r_plus, tau, v)?;

    let sigmas: Vec<StoppingRule> = enumerate_rules(tree, v, false)?
        .into_iter()
        .filter(|s| strictly_after(tree, tau, s))
        .collect();
    let frozen_sup = sigmas
        .iter()
        .map(|s| bayes_conditional(tree, p, payoff, s, v))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    // Priors free on the nodes at or after τ, equal to P before it.
    let done = tau.stopped_by(tree);
    let free: Vec<NodeIdx> = decision_nodes_below(tree, v)
        .into_iter()
        .filter(|n| done[n.index()])
        .collect();
    let mut pasted_sup = f64::NEG_INFINITY;
    for s in selections_over(priors, &free, &Selection::first(tree))? {
        let ratio = tree
            .nodes()
            .map(|n| {
                if done[n.index()] && !tree.is_terminal(n) && tree.is_ancestor_or_self(v, n) {
                    Some(priors.extremes(n)[s.get(n)].clone())
                } else {
                    p.ratio(n).map(<[f64]>::to_vec)
                }
            })
            .collect();
        let z = DensityProcess::from_ratios(tree, ratio)?;
        for sigma in &sigmas {
            pasted_sup = pasted_sup.max(bayes_conditional(tree, &z, payoff, sigma, v)?);
        }
    }
    Ok(StrictValueCheck {
        lhs,
        pasted_sup,
        frozen_sup,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst_deviation: f64,
    pub detail: String,
}

/// Largest `|S_v| × selections(v)` the identity checks will enumerate.
pub const IDENTITY_WORK_LIMIT: u128 = 4096;

/// Verifies the value identities by enumeration on every node.
///
/// * `value = max(reward, strict value)` and dominance,
/// * the strict-value identity with priors pasted after `τ` (and, for the
///   record, the frozen-prior variant, which is not an identity),
/// * `R(v) = sup_P E^P[R(U^α(v)) | v]` over [`ALPHA_GRID`],
/// * `R(v) = sup_P E^P[Y(U*(v)) | v]`.
pub fn verify_value_identities(
    tree: &EventTree,
    payoff: &AdaptedFamily,
    priors: &PriorSet,
    solution: &SnellSolution,
) -> Result<Vec<IdentityCheck>> {
    const TOL: f64 = 1e-10;
    for v in tree.nodes() {
        let work = crate::filtration::count_rules(tree, v, false).saturating_mul(priors.selection_count(tree, v));
        if work > IDENTITY_WORK_LIMIT {
            return Err(Error::SizeGuard {
                what: "rules x selections",
                actual: work,
                limit: IDENTITY_WORK_LIMIT,
            });
        }
    }

    let mut dom = 0.0f64;
    for n in tree.nodes() {
        dom = dom.max((solution.r[n] - payoff[n].max(solution.r_plus[n])).abs());
        dom = dom
            .max(payoff[n] - solution.r[n])
            .max(solution.r_plus[n] - solution.r[n]);
    }

    let (mut pasted_dev, mut frozen_dev) = (0.0f64, 0.0f64);
    let mut frozen_example = None;
    for v in tree.nodes() {
        let nodes = decision_nodes_below(tree, v);
        let selections = selections_over(priors, &nodes, &Selection::first(tree))?;
        for tau in enumerate_rules(tree, v, false)? {
            for s in &selections {
                let p = crate::priors::pure_density(tree, priors, s)?;
                let c = strict_value_check(tree, payoff, priors, solution, &tau, &p)?;
                pasted_dev = pasted_dev.max((c.lhs - c.pasted_sup).abs());
                let fd = (c.lhs - c.frozen_sup).abs();
                if fd > frozen_dev {
                    frozen_dev = fd;
                    frozen_example = Some((tree.id(v).to_string(), c));
                }
            }
        }
    }

    let mut step1 = 0.0f64;
    let mut star = 0.0f64;
    for v in tree.nodes() {
        for alpha in ALPHA_GRID {
            let rule = u_alpha(tree, solution, payoff, v, alpha)?;
            let sup = enumerated_sup(tree, priors, &solution.r, &rule, v)?;
            step1 = step1.max((solution.r[v] - sup).abs());
        }
        let rule = u_star(tree, solution, v);
        let sup = enumerated_sup(tree, priors, payoff, &rule, v)?;
        star = star.max((solution.r[v] - sup).abs());
    }

    let check = |name, dev: f64, detail: String| IdentityCheck {
        name,
        passed: dev <= TOL,
        worst_deviation: dev,
        detail,
    };
    Ok(vec![
        check("value_is_max_of_reward_and_strict_value", dom, String::new()),
        check("strict_value_pasted_priors", pasted_dev, String::new()),
        check(
            "strict_value_frozen_prior",
            frozen_dev,
            frozen_example
                .map(|(id, c)| format!("at {id}: E[R+(tau)] = {} vs frozen sup {}", c.lhs, c.frozen_sup))
                .unwrap_or_default(),
        ),
        check("value_at_u_alpha", step1, String::new()),
        check("u_star_attains_value", star, String::new()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::priors::pure_density;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn tt1_solution() {
        let f = fixtures::tt1();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let r = f.tree.root();
        assert_eq!(s.r[r], 1.5);
        assert_eq!(s.r_plus[r], 1.5);
        assert_eq!(s.argmax_extreme[r.index()], Some(0));
        assert_eq!(s.stop_nodes(), vec![f.node("u"), f.node("d")]);
        assert!(s.attained);
    }

    #[test]
    fn tt4_solution() {
        let f = fixtures::tt4();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        assert!(close(s.r[f.tree.root()], 2.625));
        assert!(close(s.r[f.node("u")], 0.75));
        assert!(close(s.r[f.node("d")], 3.25));
        assert!(s.stop_nodes().iter().all(|&n| f.tree.is_terminal(n)));
        assert_eq!(s.stop_nodes().len(), 4);
        for n in ["r", "u", "d"] {
            assert_eq!(
                f.priors.extremes(f.node(n))[s.argmax_extreme[f.node(n).index()].unwrap()][0],
                0.5
            );
        }
    }

    #[test]
    fn tt4_single_prior_is_classical_snell() {
        let f = fixtures::tt4().single_prior();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        // Classical recursion: R(u) = ½(0 + 1), R(d) = max(3, ½(1 + 4)), R(r) = max(1, ½(R(u) + R(d))).
        let ru = 0.5 * (0.0 + 1.0);
        let rd = f64::max(3.0, 0.5 * (1.0 + 4.0));
        let rr = f64::max(1.0, 0.5 * (ru + rd));
        assert_eq!(s.r[f.node("u")], ru);
        assert_eq!(s.r[f.node("d")], rd);
        assert_eq!(s.r[f.tree.root()], rr);
        assert_eq!(rr, 1.75);
    }

    #[test]
    fn tt3_solution() {
        let f = fixtures::tt3();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        assert!(close(s.r[f.tree.root()], 1.3));
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let f = fixtures::tt1();
        let neg = AdaptedFamily::new(&f.tree, vec![1.0, -1.0, 0.0]).unwrap();
        assert!(matches!(solve(&f.tree, &neg, &f.priors), Err(Error::InvalidInput(_))));
        let bad =
            PriorSet::with_overrides(&f.tree, PriorMode::Closure, [(f.tree.root(), vec![vec![1.6, 0.5]])]).unwrap();
        assert!(matches!(solve(&f.tree, &f.payoff, &bad), Err(Error::InvalidPriors(_))));
    }

    #[test]
    fn gamma_matches_bayes_examples() {
        let f = fixtures::tt1();
        let r = f.tree.root();
        let at1 = StoppingRule::at_time(&f.tree, r, 1);
        let z = pure_density(&f.tree, &f.priors, &Selection::first(&f.tree)).unwrap();
        assert_eq!(gamma(&f.tree, &f.payoff, &z, &at1, r).unwrap(), 1.5);
        let one = DensityProcess::reference(&f.tree);
        assert_eq!(gamma(&f.tree, &f.payoff, &one, &at1, r).unwrap(), 1.0);
    }

    #[test]
    fn u_alpha_examples() {
        let f = fixtures::tt1();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let r = f.tree.root();
        assert_eq!(u_alpha(&f.tree, &s, &f.payoff, r, 0.6).unwrap().stop_nodes(), vec![r]);
        assert_eq!(
            u_alpha(&f.tree, &s, &f.payoff, r, 0.8).unwrap(),
            StoppingRule::at_time(&f.tree, r, 1)
        );
        let u = f.node("u");
        for a in ALPHA_GRID {
            assert_eq!(u_alpha(&f.tree, &s, &f.payoff, u, a).unwrap().stop_nodes(), vec![u]);
        }
        assert!(u_alpha(&f.tree, &s, &f.payoff, r, 0.0).is_err());
        assert!(u_alpha(&f.tree, &s, &f.payoff, r, 1.2).is_err());
    }

    #[test]
    fn u_star_examples() {
        let f = fixtures::tt1();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        assert_eq!(
            u_star(&f.tree, &s, f.tree.root()),
            StoppingRule::at_time(&f.tree, f.tree.root(), 1)
        );
        assert_eq!(
            u_star(&f.tree, &s, f.tree.root()),
            u_alpha(&f.tree, &s, &f.payoff, f.tree.root(), 1.0).unwrap()
        );

        let f4 = fixtures::tt4();
        let s4 = solve(&f4.tree, &f4.payoff, &f4.priors).unwrap();
        assert_eq!(
            u_star(&f4.tree, &s4, f4.tree.root()),
            StoppingRule::at_time(&f4.tree, f4.tree.root(), 2)
        );

        let c = AdaptedFamily::constant(&f4.tree, 3.0);
        let sc = solve(&f4.tree, &c, &f4.priors).unwrap();
        for n in f4.tree.nodes() {
            assert_eq!(u_star(&f4.tree, &sc, n).stop_nodes(), vec![n]);
        }
    }

    #[test]
    fn optimal_prior_examples() {
        let f = fixtures::tt1();
        let r = f.tree.root();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let z = extract_optimal_prior(&s, &f.tree, &f.priors, r).unwrap();
        assert_eq!(z.ratio(r).unwrap(), &[1.5, 0.5]);
        let star = u_star(&f.tree, &s, r);
        assert_eq!(gamma(&f.tree, &f.payoff, &z, &star, r).unwrap(), 1.5);

        let f4 = fixtures::tt4();
        let s4 = solve(&f4.tree, &f4.payoff, &f4.priors).unwrap();
        let z4 = extract_optimal_prior(&s4, &f4.tree, &f4.priors, f4.tree.root()).unwrap();
        for n in ["r", "u", "d"] {
            assert_eq!(z4.ratio(f4.node(n)).unwrap()[0], 0.5);
        }
        let star4 = u_star(&f4.tree, &s4, f4.tree.root());
        assert!(close(
            gamma(&f4.tree, &f4.payoff, &z4, &star4, f4.tree.root()).unwrap(),
            2.625
        ));

        let single = f4.single_prior();
        let ss = solve(&single.tree, &single.payoff, &single.priors).unwrap();
        let z1 = extract_optimal_prior(&ss, &single.tree, &single.priors, single.tree.root()).unwrap();
        assert_eq!(z1, DensityProcess::reference(&single.tree));
    }

    #[test]
    fn equivalent_mode_unattained_supremum() {
        let f = fixtures::tt1();
        let r = f.tree.root();
        // Best extreme (2, 0) sits on the boundary; the other is strictly positive.
        let priors = PriorSet::with_overrides(
            &f.tree,
            PriorMode::Equivalent,
            [(r, vec![vec![2.0, 0.0], vec![1.0, 1.0]])],
        )
        .unwrap();
        let s = solve(&f.tree, &f.payoff, &priors).unwrap();
        assert_eq!(s.r[r], 2.0);
        assert!(!s.attained);
        assert!(matches!(
            extract_optimal_prior(&s, &f.tree, &priors, r),
            Err(Error::Unattained { sup, .. }) if sup == 2.0
        ));
        // The same polytope in closure mode is attained.
        let closure = priors.clone().with_mode(PriorMode::Closure);
        let sc = solve(&f.tree, &f.payoff, &closure).unwrap();
        assert!(sc.attained);
    }

    #[test]
    fn equivalent_mode_face_barycentre() {
        // Both maximisers vanish on some child but their midpoint is interior.
        let f = fixtures::tt3();
        let payoff = AdaptedFamily::constant(&f.tree, 1.0);
        let priors = PriorSet::with_overrides(
            &f.tree,
            PriorMode::Equivalent,
            [(f.tree.root(), vec![vec![3.0, 0.0, 0.0], vec![0.0, 1.5, 1.5]])],
        )
        .unwrap();
        let s = solve(&f.tree, &payoff, &priors).unwrap();
        assert!(s.attained);
        assert_eq!(s.optimal_density[0].as_deref(), Some(&[1.5, 0.75, 0.75][..]));
    }

    #[test]
    fn supermartingale_examples() {
        let f = fixtures::tt4();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        assert!(check_supermartingale_family(&f.tree, &s.r, &f.priors, 1e-12).passed);
        let y = check_supermartingale_family(&f.tree, &f.payoff, &f.priors, 1e-12);
        assert!(!y.passed);
        assert!(!y.node_pass[f.node("d").index()]);
        assert!(close(y.excess[f.node("d").index()], 0.25));
        let c = AdaptedFamily::constant(&f.tree, 2.0);
        assert!(check_supermartingale_family(&f.tree, &c, &f.priors, 1e-12).passed);
    }

    #[test]
    fn certificate_examples() {
        let f = fixtures::tt1();
        let r = f.tree.root();
        let at1 = StoppingRule::at_time(&f.tree, r, 1);
        let at0 = StoppingRule::at_time(&f.tree, r, 0);
        let plus = pure_density(&f.tree, &f.priors, &Selection(vec![0, 0, 0])).unwrap();
        let minus = pure_density(&f.tree, &f.priors, &Selection(vec![1, 0, 0])).unwrap();

        let c = check_optimality_certificate(&f.tree, &f.payoff, &f.priors, &at1, &plus).unwrap();
        assert!(c.optimal && c.cond1 && c.cond2);
        assert!(c.equivalence_holds(1e-9));

        let c = check_optimality_certificate(&f.tree, &f.payoff, &f.priors, &at0, &plus).unwrap();
        assert!(!c.cond1);
        assert!(c.equivalence_holds(1e-9));

        let c = check_optimality_certificate(&f.tree, &f.payoff, &f.priors, &at1, &minus).unwrap();
        assert!(c.cond1 && !c.cond2);
        assert_eq!(c.value, 0.5);
        assert!(c.equivalence_holds(1e-9));
    }

    #[test]
    fn strict_value_identity_on_tt4() {
        let f = fixtures::tt4();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let q = DensityProcess::reference(&f.tree);
        let tau = StoppingRule::at_time(&f.tree, f.tree.root(), 1);
        let c = strict_value_check(&f.tree, &f.payoff, &f.priors, &s, &tau, &q).unwrap();
        assert!(close(c.lhs, 2.0));
        assert!(close(c.pasted_sup, 2.0));
        assert!(close(c.frozen_sup, 1.5));
    }

    #[test]
    fn identities_on_tt4() {
        let f = fixtures::tt4();
        let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
        let checks = verify_value_identities(&f.tree, &f.payoff, &f.priors, &s).unwrap();
        for c in &checks {
            if c.name == "strict_value_frozen_prior" {
                assert!(!c.passed);
            } else {
                assert!(c.passed && c.worst_deviation < 1e-12, "{c:?}");
            }
        }
    }

    #[test]
    fn robust_expectation_matches_enumeration() {
        for f in fixtures::all() {
            let s = solve(&f.tree, &f.payoff, &f.priors).unwrap();
            for v in f.tree.nodes() {
                for rule in enumerate_rules(&f.tree, v, false).unwrap() {
                    let dp = robust_expectation(&f.tree, &f.priors, &f.payoff, &rule, v).unwrap();
                    let en = enumerated_sup(&f.tree, &f.priors, &f.payoff, &rule, v).unwrap();
                    assert!((dp - en).abs() < 1e-12);
                    let en_r = enumerated_sup(&f.tree, &f.priors, &s.r, &rule, v).unwrap();
                    assert!(en_r <= s.r[v] + 1e-12);
                }
            }
        }
    }
}
