use std::fmt::Write as _;

use super::{DeployedDid, NodeKind, SUPER_VALUE_NAME};
use crate::numfmt::g17;

fn names(did: &DeployedDid, ids: &[usize]) -> String {
    ids.iter().map(|&id| did.nodes[id].name()).collect::<Vec<_>>().join(" ")
}

/// Writes the deployed form in the model file syntax. Every node is named
/// `base@slice`, copies are declared with `copy ... ; of <source>`, and the
/// trailing `super` line lists the summed value nodes.
pub fn serialize_deployed(did: &DeployedDid) -> String {
    let mut out = String::new();
    out.push_str("tdid 1\ndeployed\n");
    let master: Vec<String> = did.master.indices().iter().map(|i| i.to_string()).collect();
    let _ = writeln!(out, "master {}", master.join(" "));

    for node in &did.nodes {
        let name = node.name();
        let states = node.states.join(" ");
        let _ = match node.kind {
            NodeKind::Chance => writeln!(out, "chance {name} : {states}"),
            NodeKind::Decision => writeln!(out, "decision {name} : {states}"),
            NodeKind::Value => writeln!(out, "value {name}"),
            NodeKind::Copy { source } => {
                writeln!(out, "copy {name} : {states} ; of {}", did.nodes[source].name())
            }
        };
    }

    let mut arcs: Vec<(String, String)> = did
        .arcs()
        .into_iter()
        .map(|(p, c)| (did.nodes[p].name(), did.nodes[c].name()))
        .collect();
    arcs.sort();
    for (p, c) in arcs {
        let _ = writeln!(out, "arc inst {p} {c}");
    }

    for node in &did.nodes {
        let keyword = match node.kind {
            NodeKind::Chance => "cpt",
            NodeKind::Value => "util",
            _ => continue,
        };
        let _ = write!(out, "{keyword} {}", node.name());
        if !node.parents.is_empty() {
            let _ = write!(out, " | {}", names(did, &node.parents));
        }
        out.push_str(" :");
        if node.is_value() {
            for v in &node.table {
                let _ = write!(out, " {}", g17(*v));
            }
        } else {
            let rows: Vec<String> = node
                .table
                .chunks(node.cardinality())
                .map(|row| row.iter().map(|p| g17(*p)).collect::<Vec<_>>().join(" "))
                .collect();
            let _ = write!(out, " {}", rows.join(" , "));
        }
        out.push('\n');
    }

    if !did.decision_order.is_empty() {
        let _ = writeln!(out, "decision-order {}", names(did, &did.decision_order));
    }
    let _ = writeln!(out, "{SUPER_VALUE_NAME} {}", names(did, &did.super_value));
    out
}

/// Graphviz description: chance nodes as ellipses, decisions as boxes, value
/// nodes as diamonds, copies dashed, one cluster per slice.
pub fn to_dot(did: &DeployedDid) -> String {
    let mut out = String::from("digraph deployed {\n  rankdir=LR;\n");
    for &slice in did.master.indices() {
        let _ = writeln!(out, "  subgraph cluster_{slice} {{\n    label=\"t={slice}\";");
        for node in did.nodes.iter().filter(|n| n.slice == slice) {
            let style = match node.kind {
                NodeKind::Chance => "shape=ellipse",
                NodeKind::Decision => "shape=box",
                NodeKind::Value => "shape=diamond",
                NodeKind::Copy { .. } => "shape=ellipse, style=dashed",
            };
            let _ = writeln!(out, "    \"{}\" [{style}];", node.name());
        }
        out.push_str("  }\n");
    }
    let _ = writeln!(out, "  \"{SUPER_VALUE_NAME}\" [shape=diamond, peripheries=2];");
    for (p, c) in did.arcs() {
        let style = if matches!(did.nodes[c].kind, NodeKind::Copy { .. }) { " [style=dashed]" } else { "" };
        let _ = writeln!(out, "  \"{}\" -> \"{}\"{style};", did.nodes[p].name(), did.nodes[c].name());
    }
    for &v in &did.super_value {
        let _ = writeln!(out, "  \"{}\" -> \"{SUPER_VALUE_NAME}\";", did.nodes[v].name());
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use crate::deploy::{deploy, serialize_deployed, to_dot};
    use crate::model::parse;

    #[test]
    fn deployed_figure_one_declares_copies() {
        let did = deploy(&parse(include_str!("../../../../fixtures/figure1.tdid")).unwrap()).unwrap();
        let text = serialize_deployed(&did);
        assert!(text.contains("copy X@2 : lo hi ; of X@1\n"), "{text}");
        assert!(text.contains("copy X@4 : lo hi ; of X@3\n"));
        assert!(text.contains("arc inst Y@2 X@3\n"));
        assert!(text.contains("cpt X@3 | Y@2 : 0.90000000000000002 0.10000000000000001 , "));
        assert!(text.ends_with("super V@1 V@2 V@3 V@4\n"));
        assert_eq!(text, serialize_deployed(&did.clone()));

        let dot = to_dot(&did);
        assert!(dot.contains("\"X@1\" -> \"X@2\" [style=dashed];"));
        assert!(dot.contains("\"V@4\" -> \"super\";"));
    }
}
