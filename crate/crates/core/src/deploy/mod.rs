//! Conversion of a condensed model into its deployed form.
//!
//! The deployed form has one node per (variable, master index). Variables
//! indexed at that time become probabilistic (or decision / value) nodes whose
//! parents come from [`resolve_parents`]; the remaining indices become copy
//! nodes that equal the node starting their abstraction group. Barren nodes
//! are pruned and every value node feeds an additive super value node.

mod render;

pub use render::{serialize_deployed, to_dot};

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{validate, ArcKind, CondensedTdid, TimeIndex, TimeSequence, VariableKind, Violation};

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum DeployError {
    #[error("node times {node_times} are not a subset of master {master} sharing its first index")]
    InvalidSequence { master: TimeSequence, node_times: TimeSequence },
    #[error("model is invalid:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

/// One abstraction group: `start` is indexed by the variable, `members` are the
/// master indices represented by it (including `start`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractionGroup {
    pub start: TimeIndex,
    pub members: Vec<TimeIndex>,
}

/// Splits `master` into contiguous groups, each starting at a member of
/// `node_times`; every master index joins the group of the largest node index
/// at or before it.
pub fn partition(master: &TimeSequence, node_times: &TimeSequence) -> Result<Vec<AbstractionGroup>, DeployError> {
    if !node_times.is_subset_of(master) || node_times.first() != master.first() {
        return Err(DeployError::InvalidSequence { master: master.clone(), node_times: node_times.clone() });
    }
    let mut groups: Vec<AbstractionGroup> = Vec::new();
    for &i in master.indices() {
        if node_times.contains(i) {
            groups.push(AbstractionGroup { start: i, members: vec![i] });
        } else {
            groups.last_mut().expect("first index is a group start").members.push(i);
        }
    }
    Ok(groups)
}

/// A deployed variable reference `name@slice`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SliceRef {
    pub name: String,
    pub slice: TimeIndex,
}

impl std::fmt::Display for SliceRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.name, self.slice)
    }
}

/// `π(X_i)`: an instantaneous parent `Y` contributes `Y_i` (a copy node when
/// `i` is not indexed by `Y`); a time-lag parent contributes `Y_j` with
/// `j = max { k in T_Y | k < i }`, or nothing when no such `k` exists.
/// Instantaneous parents come first, then time-lag ones, each by name.
pub fn resolve_parents(model: &CondensedTdid, variable: &str, i: TimeIndex) -> Vec<SliceRef> {
    model
        .parent_roles(variable, i)
        .into_iter()
        .filter_map(|p| {
            let slice = match p.role {
                ArcKind::Instantaneous => i,
                ArcKind::TimeLag => model.variable(&p.name)?.times.latest_before(i)?,
            };
            Some(SliceRef { name: p.name, slice })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Chance,
    Decision,
    Value,
    /// Deterministically equal to `source`, the node starting its group.
    Copy { source: NodeId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceNode {
    pub base: String,
    pub slice: TimeIndex,
    pub kind: NodeKind,
    /// Empty for value nodes.
    pub states: Vec<String>,
    /// CPD / utility parents for chance and value nodes, informational parents
    /// for decisions, the source for copies.
    pub parents: Vec<NodeId>,
    /// Chance: rows over joint parent states with this node's state fastest.
    /// Value: one utility per joint parent state. Empty otherwise.
    pub table: Vec<f64>,
}

impl SliceNode {
    pub fn name(&self) -> String {
        format!("{}@{}", self.base, self.slice)
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn is_decision(&self) -> bool {
        self.kind == NodeKind::Decision
    }

    pub fn is_value(&self) -> bool {
        self.kind == NodeKind::Value
    }
}

/// The deployed dynamic influence diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployedDid {
    pub master: TimeSequence,
    pub nodes: Vec<SliceNode>,
    /// Value nodes summed by the super value node.
    pub super_value: Vec<NodeId>,
    /// Decision nodes in the order they are taken.
    pub decision_order: Vec<NodeId>,
}

pub const SUPER_VALUE_NAME: &str = "super";

impl DeployedDid {
    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name() == name)
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.cardinality()).collect()
    }

    pub fn children(&self) -> Vec<Vec<NodeId>> {
        let mut children = vec![Vec::new(); self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                children[p].push(id);
            }
        }
        children
    }

    /// What decision `d` observes: its informational parents followed by every
    /// earlier decision not already among them.
    pub fn information_set(&self, d: NodeId) -> Vec<NodeId> {
        let mut info = self.nodes[d].parents.clone();
        for &earlier in self.decision_order.iter().take_while(|&&e| e != d) {
            if !info.contains(&earlier) {
                info.push(earlier);
            }
        }
        info
    }

    /// Parents including the implicit arcs from earlier decisions.
    pub fn extended_parents(&self) -> Vec<Vec<NodeId>> {
        (0..self.nodes.len())
            .map(|id| {
                if self.nodes[id].is_decision() {
                    self.information_set(id)
                } else {
                    self.nodes[id].parents.clone()
                }
            })
            .collect()
    }

    /// Topological order over all nodes (earliest slice, then name, first).
    /// `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        topological(&self.nodes, &self.extended_parents())
    }

    /// Arcs as (parent, child) pairs, excluding the super value node.
    pub fn arcs(&self) -> Vec<(NodeId, NodeId)> {
        let mut arcs = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                arcs.push((p, id));
            }
        }
        arcs
    }

    /// Total number of CPD and utility entries; the space complexity of the model.
    pub fn table_entries(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n.kind {
                NodeKind::Copy { .. } => n.cardinality() * n.cardinality(),
                _ => n.table.len(),
            })
            .sum()
    }
}

fn topological(nodes: &[SliceNode], parents: &[Vec<NodeId>]) -> Option<Vec<NodeId>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let n = nodes.len();
    let mut indegree: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (id, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(id);
        }
    }
    let key = |id: NodeId| Reverse((nodes[id].slice, nodes[id].base.clone(), id));
    let mut ready: BinaryHeap<_> = (0..n).filter(|&id| indegree[id] == 0).map(key).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, _, id))) = ready.pop() {
        order.push(id);
        for &c in &children[id] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(key(c));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Deploys a valid model: replicate over the master sequence, wire parents,
/// add copies, prune barren nodes and attach the super value node.
pub fn deploy(model: &CondensedTdid) -> Result<DeployedDid, DeployError> {
    Ok(eliminate_barren(&deploy_unpruned(model)?))
}

/// Deployment without barren-node elimination.
pub fn deploy_unpruned(model: &CondensedTdid) -> Result<DeployedDid, DeployError> {
    let violations = validate(model);
    if !violations.is_empty() {
        return Err(DeployError::Invalid(violations));
    }

    let mut nodes = Vec::new();
    let mut ids: HashMap<(&str, TimeIndex), NodeId> = HashMap::new();
    for &slice in model.master.indices() {
        for var in &model.variables {
            let indexed = var.times.contains(slice);
            let kind = match var.kind {
                VariableKind::Value if !indexed => continue,
                VariableKind::Value => NodeKind::Value,
                _ if !indexed => NodeKind::Copy { source: usize::MAX },
                VariableKind::Chance => NodeKind::Chance,
                VariableKind::Decision => NodeKind::Decision,
            };
            ids.insert((var.name.as_str(), slice), nodes.len());
            nodes.push(SliceNode {
                base: var.name.clone(),
                slice,
                kind,
                states: var.states.clone(),
                parents: Vec::new(),
                table: Vec::new(),
            });
        }
    }

    for node in nodes.iter_mut() {
        let var = model.variable(&node.base).expect("node from declared variable");
        if let NodeKind::Copy { .. } = node.kind {
            let start = var.times.latest_at_or_before(node.slice).expect("first index shared with master");
            let source = ids[&(var.name.as_str(), start)];
            node.kind = NodeKind::Copy { source };
            node.parents = vec![source];
            continue;
        }
        node.parents = resolve_parents(model, &node.base, node.slice)
            .into_iter()
            .map(|r| ids[&(r.name.as_str(), r.slice)])
            .collect();
        node.table = match node.kind {
            NodeKind::Chance => model
                .cpd_for(&node.base, node.slice)
                .expect("validated coverage")
                .rows
                .concat(),
            NodeKind::Value => model
                .utility_for(&node.base, node.slice)
                .expect("validated coverage")
                .values
                .clone(),
            _ => Vec::new(),
        };
    }

    let mut did = DeployedDid {
        master: model.master.clone(),
        super_value: (0..nodes.len()).filter(|&id| nodes[id].is_value()).collect(),
        nodes,
        decision_order: Vec::new(),
    };
    did.decision_order = decision_order(&did);
    Ok(did)
}

/// Decisions ordered by slice, ties by the order of explicit arcs among them,
/// then by name.
fn decision_order(did: &DeployedDid) -> Vec<NodeId> {
    let parents: Vec<Vec<NodeId>> = did.nodes.iter().map(|n| n.parents.clone()).collect();
    topological(&did.nodes, &parents)
        .expect("validated models deploy to a DAG")
        .into_iter()
        .filter(|&id| did.nodes[id].is_decision())
        .collect()
}

/// Keeps the nodes in `keep` (in their existing order) and renumbers references.
fn restrict(did: &DeployedDid, keep: &[bool]) -> DeployedDid {
    let mut remap = vec![usize::MAX; did.nodes.len()];
    let mut next = 0;
    for (id, &k) in keep.iter().enumerate() {
        if k {
            remap[id] = next;
            next += 1;
        }
    }
    let nodes = did
        .nodes
        .iter()
        .enumerate()
        .filter(|(id, _)| keep[*id])
        .map(|(_, node)| {
            let mut node = node.clone();
            node.parents = node.parents.iter().map(|&p| remap[p]).collect();
            if let NodeKind::Copy { source } = node.kind {
                node.kind = NodeKind::Copy { source: remap[source] };
            }
            node
        })
        .collect();
    let map_all = |ids: &[NodeId]| ids.iter().filter(|&&id| keep[id]).map(|&id| remap[id]).collect();
    DeployedDid {
        master: did.master.clone(),
        nodes,
        super_value: map_all(&did.super_value),
        decision_order: map_all(&did.decision_order),
    }
}

/// Repeatedly removes chance, copy and decision nodes without children until
/// none remain. Value nodes are never removed.
pub fn eliminate_barren(did: &DeployedDid) -> DeployedDid {
    let mut keep = vec![true; did.nodes.len()];
    let mut child_count = vec![0usize; did.nodes.len()];
    for node in &did.nodes {
        for &p in &node.parents {
            child_count[p] += 1;
        }
    }
    let mut pending: Vec<NodeId> = (0..did.nodes.len()).rev().collect();
    while let Some(id) = pending.pop() {
        if !keep[id] || did.nodes[id].is_value() || child_count[id] > 0 {
            continue;
        }
        keep[id] = false;
        for &p in &did.nodes[id].parents {
            child_count[p] -= 1;
            if child_count[p] == 0 {
                pending.push(p);
            }
        }
    }
    restrict(did, &keep)
}

/// Removes copy nodes by pointing their children at the copied node. Tables
/// whose parent list gains a repeated node keep only the consistent entries.
pub fn collapse_copies(did: &DeployedDid) -> DeployedDid {
    let source_of = |id: NodeId| -> NodeId {
        let mut id = id;
        while let NodeKind::Copy { source } = did.nodes[id].kind {
            id = source;
        }
        id
    };
    let mut out = did.clone();
    for node in out.nodes.iter_mut() {
        if matches!(node.kind, NodeKind::Copy { .. }) {
            continue;
        }
        let mapped: Vec<NodeId> = node.parents.iter().map(|&p| source_of(p)).collect();
        if node.is_decision() {
            let mut seen = BTreeSet::new();
            node.parents = mapped.into_iter().filter(|p| seen.insert(*p)).collect();
            continue;
        }
        let cards: Vec<usize> = node.parents.iter().map(|&p| did.nodes[p].cardinality()).collect();
        let own = if node.is_value() { 1 } else { node.cardinality() };
        let (parents, table) = merge_repeated_parents(&mapped, &cards, own, &node.table);
        node.parents = parents;
        node.table = table;
    }
    let keep: Vec<bool> = out.nodes.iter().map(|n| !matches!(n.kind, NodeKind::Copy { .. })).collect();
    restrict(&out, &keep)
}

/// Drops repeated entries of `parents` from a table laid out as joint parent
/// state (last fastest) times `own` trailing entries, keeping the diagonal.
fn merge_repeated_parents(
    parents: &[NodeId],
    cards: &[usize],
    own: usize,
    table: &[f64],
) -> (Vec<NodeId>, Vec<f64>) {
    let mut first_pos: Vec<usize> = Vec::with_capacity(parents.len());
    let mut kept: Vec<NodeId> = Vec::new();
    let mut kept_cards: Vec<usize> = Vec::new();
    for (i, &p) in parents.iter().enumerate() {
        match kept.iter().position(|&k| k == p) {
            Some(pos) => first_pos.push(pos),
            None => {
                first_pos.push(kept.len());
                kept.push(p);
                kept_cards.push(cards[i]);
            }
        }
    }
    if kept.len() == parents.len() {
        return (kept, table.to_vec());
    }
    let joint: usize = kept_cards.iter().product();
    let mut out = Vec::with_capacity(joint * own);
    let mut assignment = vec![0usize; kept.len()];
    for _ in 0..joint {
        let mut row = 0;
        for (i, &pos) in first_pos.iter().enumerate() {
            row = row * cards[i] + assignment[pos];
        }
        out.extend_from_slice(&table[row * own..(row + 1) * own]);
        for k in (0..kept.len()).rev() {
            assignment[k] += 1;
            if assignment[k] < kept_cards[k] {
                break;
            }
            assignment[k] = 0;
        }
    }
    (kept, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    fn seq(v: &[TimeIndex]) -> TimeSequence {
        TimeSequence::new(v.to_vec()).unwrap()
    }

    fn members(groups: &[AbstractionGroup]) -> Vec<Vec<TimeIndex>> {
        groups.iter().map(|g| g.members.clone()).collect()
    }

    #[test]
    fn partition_assigns_largest_start_at_or_before() {
        let groups = partition(&seq(&[1, 2, 3, 4]), &seq(&[1, 3])).unwrap();
        assert_eq!(members(&groups), vec![vec![1, 2], vec![3, 4]]);
        assert_eq!(groups[1].start, 3);

        let groups = partition(&seq(&[1, 2, 3]), &seq(&[1, 2, 3])).unwrap();
        assert_eq!(members(&groups), vec![vec![1], vec![2], vec![3]]);

        let groups = partition(&seq(&[1, 2, 3, 4, 5]), &seq(&[1, 4])).unwrap();
        assert_eq!(members(&groups), vec![vec![1, 2, 3], vec![4, 5]]);
    }

    #[test]
    fn partition_rejects_late_start_and_non_subsets() {
        assert!(partition(&seq(&[1, 2, 3]), &seq(&[2, 3])).is_err());
        assert!(partition(&seq(&[1, 2, 3]), &seq(&[1, 5])).is_err());
    }

    const FIGURE1: &str = include_str!("../../../../fixtures/figure1.tdid");

    #[test]
    fn resolve_parents_uses_most_recent_prior_index() {
        let model = parse(FIGURE1).unwrap();
        let y2 = SliceRef { name: "Y".into(), slice: 2 };
        assert_eq!(resolve_parents(&model, "X", 3), vec![y2]);
        assert_eq!(resolve_parents(&model, "X", 1), vec![]);
        assert_eq!(resolve_parents(&model, "Y", 2), vec![SliceRef { name: "X".into(), slice: 2 }]);
    }

    #[test]
    fn copies_point_at_group_start() {
        let did = deploy(&parse(FIGURE1).unwrap()).unwrap();
        let x2 = did.node_by_name("X@2").unwrap();
        let x1 = did.node_by_name("X@1").unwrap();
        assert_eq!(did.nodes[x2].kind, NodeKind::Copy { source: x1 });
        assert_eq!(did.nodes[x2].parents, vec![x1]);
    }

    #[test]
    fn barren_chain_is_removed_tail_first() {
        let text = "\
tdid 1
master 1
chance A : a b
chance B : a b
chance C : a b
value U
arc inst A B
arc inst C U
cpt A @ * : 0.5 0.5
cpt B @ * | A : 0.5 0.5 , 0.1 0.9
cpt C @ * : 0.3 0.7
util U @ * | C : 1 2
";
        let full = deploy_unpruned(&parse(text).unwrap()).unwrap();
        assert_eq!(full.nodes.len(), 4);
        let pruned = eliminate_barren(&full);
        let names: Vec<String> = pruned.nodes.iter().map(|n| n.name()).collect();
        assert_eq!(names, ["C@1", "U@1"]);
        assert_eq!(pruned.super_value, vec![1]);
        assert_eq!(pruned.nodes[1].parents, vec![0]);
    }

    #[test]
    fn single_slice_deploys_to_condensed_structure() {
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
        let names: Vec<String> = did.nodes.iter().map(|n| n.name()).collect();
        assert_eq!(names, ["D@1", "C@1", "U@1"]);
        assert_eq!(did.nodes[2].parents, vec![1, 0]);
        assert_eq!(did.decision_order, vec![0]);
    }

    #[test]
    fn merge_repeated_parents_keeps_diagonal() {
        // Parents [A, A] (binary), own states 2: rows for (0,0),(0,1),(1,0),(1,1).
        let table = [0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6];
        let (parents, merged) = merge_repeated_parents(&[5, 5], &[2, 2], 2, &table);
        assert_eq!(parents, vec![5]);
        assert_eq!(merged, vec![0.1, 0.9, 0.4, 0.6]);
    }
}
