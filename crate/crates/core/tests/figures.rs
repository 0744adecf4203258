//! Structural checks of deployment and abstraction on the bundled fixtures.

use std::collections::BTreeSet;

use tdid::abstraction::{abstract_space, abstract_time, abstract_times, enumerate_abstractions, Lattice};
use tdid::deploy::{deploy, deploy_unpruned, DeployedDid, NodeKind};
use tdid::model::{parse, validate, ArcKind, CondensedTdid, TimeSequence};

fn fixture(name: &str) -> CondensedTdid {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn arc_names(did: &DeployedDid) -> BTreeSet<(String, String)> {
    did.arcs()
        .into_iter()
        .map(|(p, c)| (did.nodes[p].name(), did.nodes[c].name()))
        .collect()
}

fn seq(v: &[u32]) -> TimeSequence {
    TimeSequence::new(v.to_vec()).unwrap()
}

#[test]
fn figure1_copies_and_lag_parent() {
    let did = deploy(&fixture("figure1.tdid")).unwrap();
    let chance: BTreeSet<String> = did
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Chance)
        .map(|n| n.name())
        .collect();
    let expected: BTreeSet<String> = ["X@1", "X@3", "Y@1", "Y@2", "Y@3", "Y@4"].iter().map(|s| s.to_string()).collect();
    assert_eq!(chance, expected);
    for (copy, source) in [("X@2", "X@1"), ("X@4", "X@3")] {
        let id = did.node_by_name(copy).unwrap();
        let NodeKind::Copy { source: s } = did.nodes[id].kind else { panic!("{copy} is not a copy") };
        assert_eq!(did.nodes[s].name(), source);
    }
    let arcs = arc_names(&did);
    for i in 1..=4 {
        assert!(arcs.contains(&(format!("X@{i}"), format!("Y@{i}"))));
    }
    assert!(arcs.contains(&("Y@2".into(), "X@3".into())));
}

/// Every instantaneous arc inside each slice plus every lag arc between
/// adjacent slices, written out from the condensed arc list.
fn replicated_arcs(model: &CondensedTdid) -> BTreeSet<(String, String)> {
    let n = model.master.len() as u32;
    let mut out = BTreeSet::new();
    for arc in &model.arcs {
        for i in 1..=n {
            match arc.kind {
                ArcKind::Instantaneous => out.insert((format!("{}@{i}", arc.src), format!("{}@{i}", arc.dst))),
                ArcKind::TimeLag if i > 1 => out.insert((format!("{}@{}", arc.src, i - 1), format!("{}@{i}", arc.dst))),
                ArcKind::TimeLag => false,
            };
        }
    }
    out
}

#[test]
fn cardiac_full_resolution_replicates_three_slices() {
    let model = fixture("cardiac.tdid");
    let did = deploy_unpruned(&model).unwrap();
    assert_eq!(did.nodes.len(), 7 * 3);
    assert_eq!(arc_names(&did), replicated_arcs(&model));
    let between = arc_names(&did)
        .into_iter()
        .filter(|(p, c)| p.rsplit('@').next() != c.rsplit('@').next())
        .count();
    assert_eq!(between, 4 * 2);
    // The last treatment influences nothing and is pruned.
    assert!(deploy(&model).unwrap().node_by_name("treatment@3").is_none());
}

#[test]
fn dropping_cerebral_damage_removes_its_barren_ancestors() {
    let out = abstract_space(&fixture("cardiac.tdid"), &["CD".to_string()]).unwrap();
    let names: Vec<&str> = out.variables.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ["treatment", "cr", "cbf", "survival"]);
    assert!(out.arcs.iter().all(|a| a.src != "poa" && a.dst != "damage"));
    assert!(validate(&out).is_empty());
}

#[test]
fn coarse_time_grid_leaves_only_copies_in_slice_two() {
    let out = abstract_times(&fixture("cardiac.tdid"), &seq(&[1, 3])).unwrap();
    let unpruned = deploy_unpruned(&out).unwrap();
    let slice2: Vec<&NodeKind> = unpruned.nodes.iter().filter(|n| n.slice == 2).map(|n| &n.kind).collect();
    assert_eq!(slice2.len(), 5);
    assert!(slice2.iter().all(|k| matches!(k, NodeKind::Copy { .. })));
    // Nothing reads the copies, so pruning empties the slice.
    let did = deploy(&out).unwrap();
    assert!(did.nodes.iter().all(|n| n.slice != 2));
    // cr@3 now conditions on the slice-1 nodes.
    let cr3 = &did.nodes[did.node_by_name("cr@3").unwrap()];
    let parents: Vec<String> = cr3.parents.iter().map(|&p| did.nodes[p].name()).collect();
    assert_eq!(parents, ["cr@1", "treatment@1"]);
}

#[test]
fn retime_to_first_index_turns_the_rest_into_copies() {
    let out = abstract_time(&fixture("figure1.tdid"), "X", &seq(&[1])).unwrap();
    let did = deploy_unpruned(&out).unwrap();
    for i in 2..=4 {
        let node = &did.nodes[did.node_by_name(&format!("X@{i}")).unwrap()];
        assert!(matches!(node.kind, NodeKind::Copy { .. }));
    }
}

#[test]
fn abstraction_then_deploy_copies_exactly_the_dropped_indices() {
    let model = fixture("cardiac.tdid");
    for keep in [&[1u32][..], &[1, 3], &[1, 2]] {
        let out = abstract_time(&model, "poa", &seq(keep)).unwrap();
        let did = deploy_unpruned(&out).unwrap();
        for i in 1..=3u32 {
            let node = &did.nodes[did.node_by_name(&format!("poa@{i}")).unwrap()];
            assert_eq!(matches!(node.kind, NodeKind::Copy { .. }), !keep.contains(&i), "poa@{i}");
        }
    }
}

#[test]
fn abstractions_are_idempotent() {
    let model = fixture("cardiac.tdid");
    let once = abstract_space(&model, &["CD".to_string()]).unwrap();
    assert_eq!(abstract_space(&once, &[]).unwrap(), once);
    let timed = abstract_times(&model, &seq(&[1, 3])).unwrap();
    assert_eq!(abstract_times(&timed, &seq(&[1, 3])).unwrap(), timed);
}

#[test]
fn dropping_keeps_tables_of_untouched_variables() {
    let model = fixture("cardiac.tdid");
    let out = abstract_space(&model, &["CD".to_string()]).unwrap();
    for cpd in &out.cpds {
        assert!(model.cpds.contains(cpd));
    }
}

#[test]
fn cardiac_lattice_has_four_valid_variants() {
    let model = fixture("cardiac.tdid");
    let lattice = Lattice::parse(include_str!("../../../fixtures/cardiac.lattice")).unwrap();
    let all = enumerate_abstractions(&model, &lattice).unwrap();
    let labels: Vec<String> = all.iter().map(|a| a.label()).collect();
    assert_eq!(
        labels,
        [
            "time all=1,2,3; space CD=keep",
            "time all=1,2,3; space CD=drop",
            "time all=1,3; space CD=keep",
            "time all=1,3; space CD=drop",
        ]
    );
    assert_eq!(all[0].model, model);
    for a in &all {
        assert!(validate(&a.model).is_empty(), "{}", a.label());
    }
}
