//! Exhaustive policy enumeration with full joint summation.

use super::{advance, improves, Policy, Problem, SolveError};
use crate::deploy::{DeployedDid, NodeId, NodeKind};

pub const DEFAULT_ORACLE_CAP: u64 = 1_000_000;

/// Number of deterministic policies, `Π_d |options_d| ^ |information states_d|`.
/// `None` on overflow.
pub fn policy_count(did: &DeployedDid) -> Option<u128> {
    let cards = did.cardinalities();
    did.decision_order.iter().try_fold(1u128, |acc, &d| {
        let states: usize = did.information_set(d).iter().map(|&p| cards[p]).product();
        let per = (cards[d] as u128).checked_pow(u32::try_from(states).ok()?)?;
        acc.checked_mul(per)
    })
}

enum Step {
    Chance { parents: Vec<NodeId>, table: Vec<f64> },
    Copy { source: NodeId },
    Decision { position: usize, information: Vec<NodeId> },
}

struct Joint<'a> {
    cards: &'a [usize],
    steps: Vec<(NodeId, Step)>,
    utilities: Vec<(Vec<NodeId>, &'a [f64])>,
}

impl Joint<'_> {
    fn index(&self, nodes: &[NodeId], assignment: &[usize]) -> usize {
        nodes.iter().fold(0, |acc, &p| acc * self.cards[p] + assignment[p])
    }

    /// `Σ P(x) U(x)` over completions of `assignment` from step `at` onward.
    fn sum(&self, at: usize, prob: f64, assignment: &mut [usize], choices: &[Vec<usize>]) -> f64 {
        let Some((node, step)) = self.steps.get(at) else {
            let total: f64 = self
                .utilities
                .iter()
                .map(|(parents, table)| table[self.index(parents, assignment)])
                .sum();
            return prob * total;
        };
        match step {
            Step::Chance { parents, table } => {
                let card = self.cards[*node];
                let row = self.index(parents, assignment) * card;
                let mut acc = 0.0;
                for s in 0..card {
                    let p = table[row + s];
                    if p == 0.0 {
                        continue;
                    }
                    assignment[*node] = s;
                    acc += self.sum(at + 1, prob * p, assignment, choices);
                }
                acc
            }
            Step::Copy { source } => {
                assignment[*node] = assignment[*source];
                self.sum(at + 1, prob, assignment, choices)
            }
            Step::Decision { position, information } => {
                assignment[*node] = choices[*position][self.index(information, assignment)];
                self.sum(at + 1, prob, assignment, choices)
            }
        }
    }
}

/// Enumerates every deterministic policy (refusing above `cap`), evaluates
/// each by summing the full joint distribution, and returns the best. Ties keep
/// the earliest policy in enumeration order, which starts from all-lowest options.
pub fn brute_force(did: &DeployedDid, cap: u64) -> Result<Policy, SolveError> {
    let problem = Problem::new(did)?;
    let count = policy_count(did).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(SolveError::OracleTooLarge { count, cap });
    }

    let order = did.topological_order().expect("deployed diagrams are acyclic");
    let steps = order
        .into_iter()
        .filter_map(|id| {
            let node = &did.nodes[id];
            let step = match node.kind {
                NodeKind::Chance => Step::Chance { parents: node.parents.clone(), table: node.table.clone() },
                NodeKind::Copy { source } => Step::Copy { source },
                NodeKind::Decision => {
                    let position = problem.order.iter().position(|&d| d == id).expect("ordered decision");
                    Step::Decision { position, information: problem.info[position].clone() }
                }
                NodeKind::Value => return None,
            };
            Some((id, step))
        })
        .collect();
    let joint = Joint {
        cards: &problem.cards,
        steps,
        utilities: did
            .super_value
            .iter()
            .map(|&u| (did.nodes[u].parents.clone(), did.nodes[u].table.as_slice()))
            .collect(),
    };

    let n = problem.order.len();
    let radices = problem.radices(0..n);
    let mut digits = vec![0usize; radices.len()];
    let mut assignment = vec![0usize; did.nodes.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut choices = Vec::with_capacity(n);
        let mut offset = 0;
        for pos in 0..n {
            let len = problem.info_states(pos);
            choices.push(digits[offset..offset + len].to_vec());
            offset += len;
        }
        let eu = joint.sum(0, 1.0, &mut assignment, &choices);
        if best.as_ref().is_none_or(|(b, _)| improves(eu, *b)) {
            best = Some((eu, digits.clone()));
        }
        if !advance(&mut digits, &radices) {
            break;
        }
    }

    let (meu, digits) = best.expect("at least one policy");
    let mut choices = Vec::with_capacity(n);
    let mut offset = 0;
    for pos in 0..n {
        let len = problem.info_states(pos);
        choices.push(digits[offset..offset + len].to_vec());
        offset += len;
    }
    Ok(problem.rules_from(choices, meu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deploy::deploy;
    use crate::model::parse;

    #[test]
    fn one_decision_oracle_value() {
        let text = "\
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
        let did = deploy(&parse(text).unwrap()).unwrap();
        let policy = brute_force(&did, DEFAULT_ORACLE_CAP).unwrap();
        assert!((policy.meu - 7.0).abs() < 1e-9);
        assert_eq!(policy.rules[0].choices, vec![0]);
    }

    #[test]
    fn constant_utility_without_decisions() {
        let text = "\
tdid 1
master 1
chance C : s f
value U
arc inst C U
cpt C @ * : 0.25 0.75
util U @ * | C : 4 4
";
        let did = deploy(&parse(text).unwrap()).unwrap();
        assert_eq!(policy_count(&did), Some(1));
        assert_eq!(brute_force(&did, DEFAULT_ORACLE_CAP).unwrap().meu, 4.0);
    }

    #[test]
    fn second_decision_observing_first_gives_eight_policies() {
        let text = "\
tdid 1
master 1
decision D1 : a b
decision D2 : a b
value U
arc inst D1 D2
arc inst D2 U
util U @ * | D2 : 0 1
";
        let did = deploy(&parse(text).unwrap()).unwrap();
        assert_eq!(policy_count(&did), Some(8));
        assert_eq!(
            brute_force(&did, 7),
            Err(SolveError::OracleTooLarge { count: 8, cap: 7 })
        );
        assert_eq!(brute_force(&did, 8).unwrap().meu, 1.0);
    }
}
