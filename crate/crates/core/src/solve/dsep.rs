//! d-separation by the reachable-trail ("Bayes ball") procedure.

use std::collections::HashSet;

use crate::deploy::NodeId;

/// Whether every node of `x` is d-separated from every node of `y` given `z`
/// in the DAG described by `parents`. Nodes of `x` inside `z` are ignored.
pub fn d_separated(parents: &[Vec<NodeId>], x: &[NodeId], y: &[NodeId], z: &[NodeId]) -> bool {
    let n = parents.len();
    let mut children = vec![Vec::new(); n];
    for (id, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(id);
        }
    }
    let observed: HashSet<NodeId> = z.iter().copied().collect();

    // Observed nodes and their ancestors: colliders there are open.
    let mut opens_collider = vec![false; n];
    let mut stack: Vec<NodeId> = z.to_vec();
    while let Some(v) = stack.pop() {
        if !opens_collider[v] {
            opens_collider[v] = true;
            stack.extend(parents[v].iter().copied());
        }
    }

    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    enum Dir {
        /// Arrived from a child.
        Up,
        /// Arrived from a parent.
        Down,
    }

    let targets: HashSet<NodeId> = y.iter().copied().collect();
    let mut visited: HashSet<(NodeId, Dir)> = HashSet::new();
    let mut frontier: Vec<(NodeId, Dir)> = x
        .iter()
        .filter(|v| !observed.contains(v))
        .map(|&v| (v, Dir::Up))
        .collect();
    while let Some((v, dir)) = frontier.pop() {
        if !visited.insert((v, dir)) {
            continue;
        }
        let is_observed = observed.contains(&v);
        if !is_observed && targets.contains(&v) {
            return false;
        }
        match dir {
            Dir::Up if !is_observed => {
                frontier.extend(parents[v].iter().map(|&p| (p, Dir::Up)));
                frontier.extend(children[v].iter().map(|&c| (c, Dir::Down)));
            }
            Dir::Up => {}
            Dir::Down => {
                if !is_observed {
                    frontier.extend(children[v].iter().map(|&c| (c, Dir::Down)));
                }
                if opens_collider[v] {
                    frontier.extend(parents[v].iter().map(|&p| (p, Dir::Up)));
                }
            }
        }
    }
    true
}
