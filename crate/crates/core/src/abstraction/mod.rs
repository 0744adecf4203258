//! Space and temporal abstraction of condensed models.
//!
//! Temporal abstraction shortens a variable's time sequence, so that deployed
//! slices at the removed indices become copies. Space abstraction removes
//! variables together with everything that can no longer influence a value
//! variable. Neither operation invents new probabilities: dropping a variable
//! that a retained CPD conditions on is refused.

mod lattice;

pub use lattice::{
    enumerate_abstractions, Abstraction, Coordinate, Lattice, LatticeError, SpaceChoice, SpaceGroup, TimeDimension,
};

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::model::{validate, CondensedTdid, TableIndex, TimeSequence, VariableKind, Violation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AbstractionError {
    #[error("unknown variable `{name}`")]
    UnknownVariable { name: String },
    #[error("cannot retime `{variable}` to {requested}: not a subsequence of {current} keeping its first index")]
    InvalidRefinement { variable: String, requested: TimeSequence, current: TimeSequence },
    #[error("dropped variables are parents of retained tables that must be re-specified: {}", .cpds.join(", "))]
    Dependency { cpds: Vec<String> },
    #[error("abstraction would remove every value variable")]
    OnlyValueNode,
    #[error("no combination of abstraction choices yields a valid model")]
    NoFeasible,
    #[error("abstracted model is invalid: {}", first_violation(.0))]
    Invalid(Vec<Violation>),
}

fn first_violation(violations: &[Violation]) -> String {
    violations.first().map(ToString::to_string).unwrap_or_default()
}

fn revalidate(model: CondensedTdid) -> Result<CondensedTdid, AbstractionError> {
    let violations = validate(&model);
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(AbstractionError::Invalid(violations))
    }
}

/// Replaces `T_X` by `new_times`, which must be a subsequence of `T_X` with
/// the same first index. Specific tables at removed indices are discarded;
/// remaining tables keep their parent slots, which deployment re-resolves
/// against the new sequences.
pub fn abstract_time(
    model: &CondensedTdid,
    variable: &str,
    new_times: &TimeSequence,
) -> Result<CondensedTdid, AbstractionError> {
    let current = model
        .variable(variable)
        .ok_or_else(|| AbstractionError::UnknownVariable { name: variable.to_string() })?
        .times
        .clone();
    if !new_times.is_subset_of(&current) || new_times.first() != current.first() {
        return Err(AbstractionError::InvalidRefinement {
            variable: variable.to_string(),
            requested: new_times.clone(),
            current,
        });
    }
    let mut out = model.clone();
    retime_in_place(&mut out, variable, new_times);
    revalidate(out)
}

fn retime_in_place(model: &mut CondensedTdid, variable: &str, times: &TimeSequence) {
    let kept = |name: &str, index: TableIndex| match index {
        TableIndex::At(i) => name != variable || times.contains(i),
        TableIndex::Stationary => true,
    };
    model.cpds.retain(|c| kept(&c.variable, c.index));
    model.utilities.retain(|u| kept(&u.variable, u.index));
    if let Some(v) = model.variables.iter_mut().find(|v| v.name == variable) {
        v.times = times.clone();
    }
}

/// Applies `new_times` to every variable, intersected with its own sequence.
/// Fails if some variable would lose its first index.
pub fn abstract_times(model: &CondensedTdid, new_times: &TimeSequence) -> Result<CondensedTdid, AbstractionError> {
    let mut out = model.clone();
    for var in &model.variables {
        let kept: Vec<_> = var.times.indices().iter().copied().filter(|&i| new_times.contains(i)).collect();
        match TimeSequence::new(kept) {
            Ok(times) if times.first() == var.times.first() => retime_in_place(&mut out, &var.name, &times),
            _ => {
                return Err(AbstractionError::InvalidRefinement {
                    variable: var.name.clone(),
                    requested: new_times.clone(),
                    current: var.times.clone(),
                })
            }
        }
    }
    revalidate(out)
}

/// Removes the variables in `drop`, every value variable whose utility
/// depends on one of them, and then every variable left without a directed
/// path to a value variable. Arcs from removed variables into retained
/// decisions are removed (those decisions simply observe less).
pub fn abstract_space(model: &CondensedTdid, drop: &[String]) -> Result<CondensedTdid, AbstractionError> {
    for name in drop {
        if model.variable(name).is_none() {
            return Err(AbstractionError::UnknownVariable { name: name.clone() });
        }
    }
    let mut removed: HashSet<&str> = drop.iter().map(String::as_str).collect();
    for value in model.value_variables() {
        if model.arcs_into(&value.name).any(|a| removed.contains(a.src.as_str())) {
            removed.insert(&value.name);
        }
    }
    if model.value_variables().all(|v| removed.contains(v.name.as_str())) {
        return Err(AbstractionError::OnlyValueNode);
    }

    // Variables with a directed path to a retained value variable.
    let mut relevant: HashSet<&str> = model
        .value_variables()
        .map(|v| v.name.as_str())
        .filter(|n| !removed.contains(n))
        .collect();
    loop {
        let before = relevant.len();
        for arc in &model.arcs {
            if relevant.contains(arc.dst.as_str()) && !removed.contains(arc.src.as_str()) {
                relevant.insert(&arc.src);
            }
        }
        if relevant.len() == before {
            break;
        }
    }

    let mut blocked = BTreeSet::new();
    for cpd in &model.cpds {
        if relevant.contains(cpd.variable.as_str()) && cpd.parents.iter().any(|p| !relevant.contains(p.name.as_str())) {
            blocked.insert((model.variable_position(&cpd.variable), cpd.index, format!("{} @ {}", cpd.variable, cpd.index)));
        }
    }
    if !blocked.is_empty() {
        return Err(AbstractionError::Dependency { cpds: blocked.into_iter().map(|(_, _, s)| s).collect() });
    }

    let mut out = model.clone();
    out.variables.retain(|v| relevant.contains(v.name.as_str()));
    out.arcs
        .retain(|a| relevant.contains(a.src.as_str()) && relevant.contains(a.dst.as_str()));
    out.cpds.retain(|c| relevant.contains(c.variable.as_str()));
    out.utilities.retain(|u| relevant.contains(u.variable.as_str()));
    debug_assert!(out.variables.iter().any(|v| v.kind == VariableKind::Value));
    revalidate(out)
}

/// One step of a command-line abstraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Edit {
    /// `None` retimes every variable.
    Retime { variable: Option<String>, times: TimeSequence },
    Drop(Vec<String>),
}

pub fn apply_edits(model: &CondensedTdid, edits: &[Edit]) -> Result<CondensedTdid, AbstractionError> {
    let mut current = model.clone();
    for edit in edits {
        current = match edit {
            Edit::Retime { variable: Some(name), times } => abstract_time(&current, name, times)?,
            Edit::Retime { variable: None, times } => abstract_times(&current, times)?,
            Edit::Drop(names) => abstract_space(&current, names)?,
        };
    }
    Ok(current)
}

/// Parses `1,3`, `1 3` or `1, 3`.
pub fn parse_sequence(text: &str) -> Option<TimeSequence> {
    let indices = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().ok())
        .collect::<Option<Vec<_>>>()?;
    TimeSequence::new(indices).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    const FIGURE1: &str = include_str!("../../../../fixtures/figure1.tdid");

    fn seq(v: &[u32]) -> TimeSequence {
        TimeSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identity_retime_is_identity() {
        let model = parse(FIGURE1).unwrap();
        let out = abstract_time(&model, "X", &seq(&[1, 3])).unwrap();
        assert_eq!(out, model);
    }

    #[test]
    fn retime_drops_specific_tables() {
        let model = parse(FIGURE1).unwrap();
        let out = abstract_time(&model, "X", &seq(&[1])).unwrap();
        assert_eq!(out.variable("X").unwrap().times, seq(&[1]));
        assert!(out.cpds.iter().all(|c| !(c.variable == "X" && c.index == TableIndex::At(3))));
    }

    #[test]
    fn refinement_and_first_index_changes_are_refused() {
        let model = parse(FIGURE1).unwrap();
        assert!(matches!(
            abstract_time(&model, "X", &seq(&[1, 2])),
            Err(AbstractionError::InvalidRefinement { .. })
        ));
        assert!(matches!(
            abstract_time(&model, "Y", &seq(&[2, 3])),
            Err(AbstractionError::InvalidRefinement { .. })
        ));
        assert!(matches!(
            abstract_time(&model, "Z", &seq(&[1])),
            Err(AbstractionError::UnknownVariable { .. })
        ));
    }

    #[test]
    fn dropping_a_parent_reports_dependent_tables() {
        let model = parse(FIGURE1).unwrap();
        let err = abstract_space(&model, &["X".to_string()]).unwrap_err();
        assert_eq!(err, AbstractionError::Dependency { cpds: vec!["Y @ *".into()] });
    }

    #[test]
    fn dropping_the_only_value_variable_is_refused() {
        let model = parse(FIGURE1).unwrap();
        assert_eq!(abstract_space(&model, &["V".to_string()]), Err(AbstractionError::OnlyValueNode));
    }

    #[test]
    fn leaf_without_children_goes_alone() {
        let text = "\
tdid 1
master 1
chance A : a b
chance L : a b
value U
arc inst A U
arc inst A L
cpt A @ * : 0.5 0.5
cpt L @ * | A : 1 0 , 0 1
util U @ * | A : 1 2
";
        let model = parse(text).unwrap();
        let out = abstract_space(&model, &["L".to_string()]).unwrap();
        assert!(out.variable("L").is_none());
        assert_eq!(out.variables.len(), 2);
        assert_eq!(abstract_space(&model, &[]).unwrap(), abstract_space(&out, &[]).unwrap());
    }

    #[test]
    fn sequence_text_forms() {
        assert_eq!(parse_sequence("1,3"), Some(seq(&[1, 3])));
        assert_eq!(parse_sequence("1 2, 3"), Some(seq(&[1, 2, 3])));
        assert_eq!(parse_sequence("3,1"), None);
        assert_eq!(parse_sequence(""), None);
    }
}
