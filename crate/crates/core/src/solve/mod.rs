//! Maximum expected utility and optimal policies for deployed diagrams.
//!
//! Each decision observes its informational parents and every earlier
//! decision. That information structure does not in general let decisions be
//! optimized one at a time, so [`solve`] splits the decision sequence: the
//! shortest prefix is searched exhaustively, and for every prefix strategy the
//! remaining decisions are optimized backwards by single-policy updates. The
//! split is chosen so that each remaining decision is extremal (its relevant
//! family is d-separated from the others' families given what it observes),
//! which makes the backward pass exact.
//!
//! [`brute_force`] is an independent oracle that enumerates all deterministic
//! policies and sums the full joint distribution.

mod brute;
mod dsep;
mod factor;

pub use brute::{brute_force, policy_count, DEFAULT_ORACLE_CAP};
pub use dsep::d_separated;
pub use factor::{eliminate, Factor};

use serde::Serialize;
use thiserror::Error;

use crate::deploy::{DeployedDid, NodeId, NodeKind};
use crate::json::{to_json, F17};

/// Upper bound on the number of prefix strategies [`solve`] will search.
pub const SEARCH_LIMIT: u128 = 1 << 22;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("decision `{decision}` observes `{parent}`, which is decided later")]
    NonSolvableInformation { decision: String, parent: String },
    #[error("brute-force oracle would enumerate {count} policies, above the cap of {cap}")]
    OracleTooLarge { count: u128, cap: u64 },
    #[error("exact search needs {count} prefix strategies, above the limit of {limit}")]
    SearchTooLarge { count: u128, limit: u128 },
    #[error("policy does not cover decision `{decision}`")]
    Coverage { decision: String },
}

/// A deterministic decision rule: one option index per joint state of
/// `information` (last entry varying fastest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRule {
    pub node: NodeId,
    pub information: Vec<NodeId>,
    pub choices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    /// In decision order.
    pub rules: Vec<DecisionRule>,
    pub meu: f64,
}

#[derive(Serialize)]
struct RuleReport {
    node: String,
    parents: Vec<String>,
    table: Vec<String>,
}

#[derive(Serialize)]
struct PolicyReport {
    meu: F17,
    decisions: Vec<RuleReport>,
}

impl Policy {
    pub fn rule(&self, node: NodeId) -> Option<&DecisionRule> {
        self.rules.iter().find(|r| r.node == node)
    }

    /// `{meu, decisions: [{node, parents, table}]}`; tables list option labels
    /// per joint parent state.
    pub fn to_json(&self, did: &DeployedDid) -> String {
        let decisions = self
            .rules
            .iter()
            .map(|r| RuleReport {
                node: did.nodes[r.node].name(),
                parents: r.information.iter().map(|&p| did.nodes[p].name()).collect(),
                table: r.choices.iter().map(|&c| did.nodes[r.node].states[c].clone()).collect(),
            })
            .collect();
        to_json(&PolicyReport { meu: F17(self.meu), decisions })
    }
}

/// Values within this (relative) margin are treated as ties; ties go to the
/// lowest option index.
pub(crate) const TIE_EPS: f64 = 1e-12;

pub(crate) fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + TIE_EPS * (1.0 + incumbent.abs())
}

/// Advances a mixed-radix counter (last digit fastest); false on wrap-around.
pub(crate) fn advance(digits: &mut [usize], radices: &[usize]) -> bool {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < radices[k] {
            return true;
        }
        digits[k] = 0;
    }
    false
}

/// Shared view of a deployed diagram for both solvers.
pub(crate) struct Problem<'a> {
    pub did: &'a DeployedDid,
    pub cards: Vec<usize>,
    /// Decisions in order.
    pub order: Vec<NodeId>,
    /// Information set per decision position.
    pub info: Vec<Vec<NodeId>>,
    /// Parents including implicit arcs from earlier decisions.
    pub graph: Vec<Vec<NodeId>>,
}

impl<'a> Problem<'a> {
    pub fn new(did: &'a DeployedDid) -> Result<Self, SolveError> {
        let order = did.decision_order.clone();
        check_information_order(did)?;
        let info = order.iter().map(|&d| did.information_set(d)).collect();
        Ok(Problem { did, cards: did.cardinalities(), order, info, graph: did.extended_parents() })
    }

    pub fn info_states(&self, pos: usize) -> usize {
        self.info[pos].iter().map(|&p| self.cards[p]).product()
    }

    fn options(&self, pos: usize) -> usize {
        self.cards[self.order[pos]]
    }

    fn chance_factor(&self, id: NodeId) -> Factor {
        let node = &self.did.nodes[id];
        match node.kind {
            NodeKind::Chance => {
                let mut scope = node.parents.clone();
                scope.push(id);
                let cards = scope.iter().map(|&v| self.cards[v]).collect();
                Factor::new(scope, cards, node.table.clone())
            }
            NodeKind::Copy { source } => {
                let k = self.cards[id];
                let mut values = vec![0.0; k * k];
                for s in 0..k {
                    values[s * k + s] = 1.0;
                }
                Factor::new(vec![source, id], vec![k, k], values)
            }
            _ => unreachable!("not a chance node"),
        }
    }

    fn utility_factor(&self, id: NodeId) -> Factor {
        let node = &self.did.nodes[id];
        let cards = node.parents.iter().map(|&v| self.cards[v]).collect();
        Factor::new(node.parents.clone(), cards, node.table.clone())
    }

    /// Deterministic rule or, for `None`, the uniform rule.
    fn policy_factor(&self, pos: usize, choices: Option<&[usize]>) -> Factor {
        let d = self.order[pos];
        let k = self.cards[d];
        let mut scope = self.info[pos].clone();
        scope.push(d);
        let cards: Vec<usize> = scope.iter().map(|&v| self.cards[v]).collect();
        let states = self.info_states(pos);
        let values = match choices {
            Some(choices) => {
                let mut values = vec![0.0; states * k];
                for (s, &c) in choices.iter().enumerate() {
                    values[s * k + c] = 1.0;
                }
                values
            }
            None => vec![1.0 / k as f64; states * k],
        };
        Factor::new(scope, cards, values)
    }

    fn ancestors(&self, seeds: &[NodeId]) -> Vec<NodeId> {
        let mut seen = vec![false; self.cards.len()];
        let mut stack = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(self.graph[v].iter().copied());
            }
        }
        (0..seen.len()).filter(|&v| seen[v]).collect()
    }

    /// Sum over value nodes of `Σ P · U` with everything outside `keep`
    /// summed out. `policies[pos]` is the factor of the decision at `pos`;
    /// `skip` (a decision position) contributes no factor.
    fn expected_over(&self, keep: &[NodeId], policies: &[Factor], skip: Option<usize>) -> Vec<f64> {
        let size: usize = keep.iter().map(|&v| self.cards[v]).product();
        let mut total = vec![0.0; size];
        for &u in &self.did.super_value {
            let mut seeds = self.did.nodes[u].parents.clone();
            seeds.extend_from_slice(keep);
            let mut factors = vec![self.utility_factor(u)];
            for v in self.ancestors(&seeds) {
                match self.did.nodes[v].kind {
                    NodeKind::Chance | NodeKind::Copy { .. } => factors.push(self.chance_factor(v)),
                    NodeKind::Decision => {
                        let pos = self.position(v);
                        if Some(pos) != skip {
                            factors.push(policies[pos].clone());
                        }
                    }
                    NodeKind::Value => {}
                }
            }
            let f = eliminate(factors, keep, &self.cards);
            for (t, v) in total.iter_mut().zip(f.values()) {
                *t += v;
            }
        }
        total
    }

    /// Joint distribution of the information set of the decision at `pos`.
    fn info_marginal(&self, pos: usize, policies: &[Factor]) -> Vec<f64> {
        let keep = &self.info[pos];
        let mut factors = Vec::new();
        for v in self.ancestors(keep) {
            match self.did.nodes[v].kind {
                NodeKind::Chance | NodeKind::Copy { .. } => factors.push(self.chance_factor(v)),
                NodeKind::Decision => factors.push(policies[self.position(v)].clone()),
                NodeKind::Value => {}
            }
        }
        eliminate(factors, keep, &self.cards).values().to_vec()
    }

    fn position(&self, d: NodeId) -> usize {
        self.order.iter().position(|&o| o == d).expect("decision in order")
    }

    pub fn expected_utility(&self, policies: &[Factor]) -> f64 {
        self.expected_over(&[], policies, None)[0]
    }

    /// Best option per information state of the decision at `pos`, given the
    /// other decisions' factors.
    fn best_response(&self, pos: usize, policies: &[Factor]) -> Vec<usize> {
        let mut keep = self.info[pos].clone();
        keep.push(self.order[pos]);
        let q = self.expected_over(&keep, policies, Some(pos));
        let k = self.options(pos);
        q.chunks(k)
            .map(|row| {
                let mut best = 0;
                for (a, &v) in row.iter().enumerate().skip(1) {
                    if improves(v, row[best]) {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }

    fn descendants(&self, v: NodeId) -> Vec<bool> {
        let mut children = vec![Vec::new(); self.cards.len()];
        for (id, ps) in self.graph.iter().enumerate() {
            for &p in ps {
                children[p].push(id);
            }
        }
        let mut seen = vec![false; self.cards.len()];
        let mut stack = vec![v];
        while let Some(w) = stack.pop() {
            for &c in &children[w] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    fn family(&self, pos: usize) -> Vec<NodeId> {
        let mut fam = self.info[pos].clone();
        fam.push(self.order[pos]);
        fam
    }

    /// Whether decisions at positions `split..` can be optimized backwards
    /// exactly once those before `split` are fixed.
    fn soluble_from(&self, split: usize) -> bool {
        for j in (split..self.order.len()).rev() {
            let below = self.descendants(self.order[j]);
            let utility: Vec<NodeId> = self.did.super_value.iter().copied().filter(|&u| below[u]).collect();
            if utility.is_empty() {
                continue;
            }
            let fam = self.family(j);
            for i in split..j {
                let other: Vec<NodeId> = self.family(i).into_iter().filter(|v| !fam.contains(v)).collect();
                if !d_separated(&self.graph, &other, &utility, &fam) {
                    return false;
                }
            }
        }
        true
    }

    pub fn rules_from(&self, choices: Vec<Vec<usize>>, meu: f64) -> Policy {
        let rules = choices
            .into_iter()
            .enumerate()
            .map(|(pos, choices)| DecisionRule { node: self.order[pos], information: self.info[pos].clone(), choices })
            .collect();
        Policy { rules, meu }
    }

    pub fn radices(&self, positions: std::ops::Range<usize>) -> Vec<usize> {
        positions
            .flat_map(|pos| std::iter::repeat_n(self.options(pos), self.info_states(pos)))
            .collect()
    }
}

fn ancestors_by_parents(did: &DeployedDid, v: NodeId) -> Vec<bool> {
    let mut seen = vec![false; did.nodes.len()];
    let mut stack = did.nodes[v].parents.clone();
    while let Some(w) = stack.pop() {
        if !seen[w] {
            seen[w] = true;
            stack.extend(did.nodes[w].parents.iter().copied());
        }
    }
    seen
}

/// A decision may not depend, through explicit arcs, on a decision taken after it.
fn check_information_order(did: &DeployedDid) -> Result<(), SolveError> {
    for (k, &d) in did.decision_order.iter().enumerate() {
        let above = ancestors_by_parents(did, d);
        if let Some(&later) = did.decision_order[k + 1..].iter().find(|&&l| above[l]) {
            return Err(SolveError::NonSolvableInformation {
                decision: did.nodes[d].name(),
                parent: did.nodes[later].name(),
            });
        }
    }
    Ok(())
}

/// Globally optimal policy and its MEU under the additive super value node.
pub fn solve(did: &DeployedDid) -> Result<Policy, SolveError> {
    let problem = Problem::new(did)?;
    let n = problem.order.len();
    if n == 0 {
        return Ok(Policy { rules: Vec::new(), meu: problem.expected_utility(&[]) });
    }
    let split = (0..n).find(|&k| problem.soluble_from(k)).unwrap_or(n - 1);

    let radices = problem.radices(0..split);
    let count = radices.iter().try_fold(1u128, |acc, &r| acc.checked_mul(r as u128)).unwrap_or(u128::MAX);
    if count > SEARCH_LIMIT {
        return Err(SolveError::SearchTooLarge { count, limit: SEARCH_LIMIT });
    }

    let mut digits = vec![0usize; radices.len()];
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    loop {
        let mut choices: Vec<Option<Vec<usize>>> = vec![None; n];
        let mut offset = 0;
        for (pos, slot) in choices.iter_mut().enumerate().take(split) {
            let len = problem.info_states(pos);
            *slot = Some(digits[offset..offset + len].to_vec());
            offset += len;
        }
        for pos in (split..n).rev() {
            let factors: Vec<Factor> = (0..n)
                .map(|p| problem.policy_factor(p, choices[p].as_deref()))
                .collect();
            choices[pos] = Some(problem.best_response(pos, &factors));
        }
        let choices: Vec<Vec<usize>> = choices.into_iter().map(|c| c.expect("all decided")).collect();
        let factors: Vec<Factor> = (0..n).map(|p| problem.policy_factor(p, Some(&choices[p]))).collect();
        let eu = problem.expected_utility(&factors);
        if best.as_ref().is_none_or(|(b, _)| improves(eu, *b)) {
            best = Some((eu, choices));
        }
        if !advance(&mut digits, &radices) {
            break;
        }
    }
    let (meu, choices) = best.expect("at least one strategy evaluated");
    Ok(problem.rules_from(choices, meu))
}

/// Expected total utility of following `policy`.
pub fn evaluate_policy(did: &DeployedDid, policy: &Policy) -> Result<f64, SolveError> {
    let problem = Problem::new(did)?;
    let mut factors = Vec::with_capacity(problem.order.len());
    for (pos, &d) in problem.order.iter().enumerate() {
        let missing = || SolveError::Coverage { decision: did.nodes[d].name() };
        let rule = policy.rule(d).ok_or_else(missing)?;
        if rule.information != problem.info[pos]
            || rule.choices.len() != problem.info_states(pos)
            || rule.choices.iter().any(|&c| c >= problem.cards[d])
        {
            return Err(missing());
        }
        factors.push(problem.policy_factor(pos, Some(&rule.choices)));
    }
    Ok(problem.expected_utility(&factors))
}

/// Whether `candidate` agrees with `reference` wherever it matters: at every
/// information state reached with positive probability under `reference`,
/// either both pick the same option or switching `reference` to the
/// candidate's option there loses at most `tol` expected utility.
pub fn policies_agree(did: &DeployedDid, reference: &Policy, candidate: &Policy, tol: f64) -> Result<bool, SolveError> {
    let base = evaluate_policy(did, reference)?;
    evaluate_policy(did, candidate)?;
    let problem = Problem::new(did)?;
    let factors: Vec<Factor> = problem
        .order
        .iter()
        .enumerate()
        .map(|(pos, &d)| problem.policy_factor(pos, Some(&reference.rule(d).expect("checked").choices)))
        .collect();
    for (pos, &d) in problem.order.iter().enumerate() {
        let ours = &reference.rule(d).expect("checked").choices;
        let theirs = &candidate.rule(d).expect("checked").choices;
        let reach = problem.info_marginal(pos, &factors);
        for (state, (&a, &b)) in ours.iter().zip(theirs).enumerate() {
            if a == b || reach[state] <= 0.0 {
                continue;
            }
            let mut swapped = reference.clone();
            let rule = swapped.rules.iter_mut().find(|r| r.node == d).expect("checked");
            rule.choices[state] = b;
            if evaluate_policy(did, &swapped)? < base - tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deploy::deploy;
    use crate::model::parse;

    pub(crate) const ONE_DECISION: &str = "\
tdid 1
master 1
decision D : a b
chance C : s f
value U
arc inst C U
arc inst D U
cpt C @ * : 0.7 0.3
util U @ * | C D : 10 5 0 5
";

    #[test]
    fn one_decision_unobserved_chance() {
        let did = deploy(&parse(ONE_DECISION).unwrap()).unwrap();
        let policy = solve(&did).unwrap();
        assert!((policy.meu - 7.0).abs() < 1e-9);
        assert_eq!(policy.rules[0].choices, vec![0]);
        assert!((evaluate_policy(&did, &policy).unwrap() - 7.0).abs() < 1e-9);

        let mut worse = policy.clone();
        worse.rules[0].choices = vec![1];
        assert!((evaluate_policy(&did, &worse).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn no_chance_nodes_picks_larger_utility() {
        let text = "tdid 1\nmaster 1\ndecision D : a b\nvalue U\narc inst D U\nutil U @ * | D : 1 0\n";
        let did = deploy(&parse(text).unwrap()).unwrap();
        let policy = solve(&did).unwrap();
        assert_eq!(policy.rules[0].choices, vec![0]);
        assert_eq!(policy.meu, 1.0);
    }

    #[test]
    fn signalling_through_an_earlier_decision_is_found() {
        // D1 sees C; D2 sees only D1; utility rewards D2 matching C. The
        // optimum has D1 copy C and D2 copy D1, which backward induction
        // alone cannot discover.
        let text = "\
tdid 1
master 1
chance C : x y
decision D1 : x y
decision D2 : x y
value U
arc inst C D1
arc inst D1 D2
arc inst C U
arc inst D2 U
cpt C @ * : 0.5 0.5
util U @ * | C D2 : 1 0 0 1
";
        let did = deploy(&parse(text).unwrap()).unwrap();
        let policy = solve(&did).unwrap();
        assert!((policy.meu - 1.0).abs() < 1e-12, "meu {}", policy.meu);
        let oracle = brute_force(&did, DEFAULT_ORACLE_CAP).unwrap();
        assert!((oracle.meu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_policy_is_a_coverage_error() {
        let did = deploy(&parse(ONE_DECISION).unwrap()).unwrap();
        let empty = Policy { rules: Vec::new(), meu: 0.0 };
        assert_eq!(
            evaluate_policy(&did, &empty),
            Err(SolveError::Coverage { decision: "D@1".into() })
        );
    }

    #[test]
    fn policy_report_lists_labels() {
        let did = deploy(&parse(ONE_DECISION).unwrap()).unwrap();
        let json = solve(&did).unwrap().to_json(&did);
        assert_eq!(
            json,
            "{\n  \"meu\": 7,\n  \"decisions\": [\n    {\n      \"node\": \"D@1\",\n      \"parents\": [],\n      \"table\": [\n        \"a\"\n      ]\n    }\n  ]\n}\n"
        );
    }
}
