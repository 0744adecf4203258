//! Seeded random models for sweeps and property tests.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::deploy::{deploy_unpruned, NodeKind};
use crate::model::{
    validate, Arc, ArcKind, CondensedTdid, TableIndex, TabularCpd, TemporalVariable, TimeIndex, TimeSequence,
    UtilityTable, VariableKind,
};

/// Bounds for [`random_model`].
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    /// Upper bound on deployed chance, copy and decision nodes (before
    /// barren elimination).
    pub max_nodes: usize,
    pub max_master: TimeIndex,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_nodes: 8, max_master: 3 }
    }
}

fn probability_row<R: Rng>(rng: &mut R) -> Vec<f64> {
    // Sixteenths keep rows exact and make zero entries reasonably common.
    let k: u32 = rng.gen_range(0..=16);
    let p = f64::from(k) / 16.0;
    vec![p, 1.0 - p]
}

fn times<R: Rng>(rng: &mut R, master: &TimeSequence) -> TimeSequence {
    let idx = master.indices();
    let mut out = vec![idx[0]];
    out.extend(idx[1..].iter().copied().filter(|_| rng.gen_bool(0.6)));
    TimeSequence::new(out).expect("subsequence of a valid sequence")
}

fn candidate<R: Rng>(rng: &mut R, limits: &Limits) -> CondensedTdid {
    let n = rng.gen_range(1..=limits.max_master);
    let master = TimeSequence::range(n);
    let per_slice = (limits.max_nodes / n as usize).max(1);
    let count = rng.gen_range(1..=per_slice.min(6));

    let mut model = CondensedTdid::new(master.clone());
    for k in 0..count {
        let decision = rng.gen_bool(0.4);
        let (kind, name, states) = if decision {
            (VariableKind::Decision, format!("D{k}"), ["a", "b"])
        } else {
            (VariableKind::Chance, format!("C{k}"), ["lo", "hi"])
        };
        model.variables.push(TemporalVariable {
            name,
            kind,
            states: states.iter().map(|s| s.to_string()).collect(),
            times: times(rng, &master),
        });
    }
    let values = rng.gen_range(1..=2);
    for k in 0..values {
        model.variables.push(TemporalVariable {
            name: format!("U{k}"),
            kind: VariableKind::Value,
            states: Vec::new(),
            times: times(rng, &master),
        });
    }

    let names: Vec<String> = model.variables[..count].iter().map(|v| v.name.clone()).collect();
    for (j, dst) in names.iter().enumerate() {
        for src in &names[..j] {
            if rng.gen_bool(0.45) {
                model.arcs.push(Arc::new(ArcKind::Instantaneous, src.clone(), dst.clone()));
            }
        }
        if n > 1 {
            for src in &names {
                if rng.gen_bool(0.25) {
                    model.arcs.push(Arc::new(ArcKind::TimeLag, src.clone(), dst.clone()));
                }
            }
        }
    }
    for k in 0..values {
        let value = format!("U{k}");
        let take = rng.gen_range(1..=2.min(count));
        let mut parents: Vec<&String> = names.choose_multiple(rng, take).collect();
        parents.sort();
        for src in parents {
            let kind = if n > 1 && rng.gen_bool(0.2) { ArcKind::TimeLag } else { ArcKind::Instantaneous };
            model.arcs.push(Arc::new(kind, src.clone(), value.clone()));
        }
    }
    // A decision nobody depends on would only be pruned away again.
    for var in &model.variables[..count] {
        if var.kind == VariableKind::Decision && !model.arcs.iter().any(|a| a.src == var.name) {
            let value = format!("U{}", rng.gen_range(0..values));
            model.arcs.push(Arc::new(ArcKind::Instantaneous, var.name.clone(), value));
        }
    }

    for var in model.variables.clone() {
        let first = var.times.first();
        let first_parents = model.parent_roles(&var.name, first);
        let later = var.times.indices().get(1).map(|&i| model.parent_roles(&var.name, i));
        let mut slots = vec![(TableIndex::Stationary, first_parents.clone())];
        if let Some(full) = later.filter(|full| *full != first_parents) {
            slots = vec![(TableIndex::At(first), first_parents), (TableIndex::Stationary, full)];
        }
        for (index, parents) in slots {
            let rows = 1usize << parents.len();
            match var.kind {
                VariableKind::Chance => model.cpds.push(TabularCpd {
                    variable: var.name.clone(),
                    index,
                    parents,
                    rows: (0..rows).map(|_| probability_row(rng)).collect(),
                }),
                VariableKind::Value => model.utilities.push(UtilityTable {
                    variable: var.name.clone(),
                    index,
                    parents,
                    values: (0..rows).map(|_| f64::from(rng.gen_range(-20..=40)) / 4.0).collect(),
                }),
                VariableKind::Decision => {}
            }
        }
    }
    model
}

/// A valid model with binary chance and decision variables whose deployed
/// form has at most `limits.max_nodes` non-value nodes.
pub fn random_model<R: Rng>(rng: &mut R, limits: &Limits) -> CondensedTdid {
    loop {
        let model = candidate(rng, limits);
        if !validate(&model).is_empty() {
            continue;
        }
        let Ok(did) = deploy_unpruned(&model) else { continue };
        let size = did.nodes.iter().filter(|n| !matches!(n.kind, NodeKind::Value)).count();
        if size <= limits.max_nodes {
            return model;
        }
    }
}

/// The same model with variables, arcs and tables listed in a shuffled order.
pub fn shuffle_declarations<R: Rng>(model: &CondensedTdid, rng: &mut R) -> CondensedTdid {
    let mut out = model.clone();
    out.variables.shuffle(rng);
    out.arcs.shuffle(rng);
    out.cpds.shuffle(rng);
    out.utilities.shuffle(rng);
    out
}
