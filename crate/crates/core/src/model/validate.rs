use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{ArcKind, CondensedTdid, ParentRef, TableIndex, TimeIndex, VariableKind};

/// Row sums and utility entries are checked against this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Cpd,
    Utility,
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableKind::Cpd => "cpt",
            TableKind::Utility => "util",
        })
    }
}

/// One violated model invariant, carrying the offending element.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateVariable { name: String },
    NotSubsetOfMaster { variable: String },
    FirstIndexMismatch { variable: String, first: TimeIndex, master_first: TimeIndex },
    TooFewStates { variable: String, count: usize },
    ValueWithStates { variable: String },
    DuplicateState { variable: String, state: String },
    UnknownArcEndpoint { arc: String, name: String },
    ArcFromValue { arc: String },
    DuplicateArc { arc: String },
    InstantaneousCycle { members: Vec<String> },
    NoValueVariable,
    UnknownTableVariable { table: TableKind, variable: String },
    WrongTableKind { table: TableKind, variable: String, kind: VariableKind },
    UnindexedTime { table: TableKind, variable: String, index: TimeIndex },
    DuplicateTable { table: TableKind, variable: String, index: TableIndex },
    ParentMismatch {
        table: TableKind,
        variable: String,
        index: TimeIndex,
        expected: Vec<ParentRef>,
        found: Vec<ParentRef>,
    },
    RowCount { variable: String, index: TableIndex, expected: usize, found: usize },
    ColumnCount { variable: String, index: TableIndex, row: usize, expected: usize, found: usize },
    ProbabilityOutOfRange { variable: String, index: TableIndex, row: usize, value: f64 },
    RowSum { variable: String, index: TableIndex, row: usize, sum: f64 },
    UtilityCount { variable: String, index: TableIndex, expected: usize, found: usize },
    NonFiniteUtility { variable: String, index: TableIndex, entry: usize },
    MissingTable { table: TableKind, variable: String, index: TimeIndex },
}

fn parents_str(parents: &[ParentRef]) -> String {
    if parents.is_empty() {
        return "(none)".to_string();
    }
    parents.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateVariable { name } => write!(f, "variable `{name}` declared more than once"),
            NotSubsetOfMaster { variable } => {
                write!(f, "time sequence of `{variable}` is not a subset of the master sequence")
            }
            FirstIndexMismatch { variable, first, master_first } => write!(
                f,
                "time sequence of `{variable}` starts at {first}, master starts at {master_first}"
            ),
            TooFewStates { variable, count } => {
                write!(f, "`{variable}` has {count} state(s); at least 2 are required")
            }
            ValueWithStates { variable } => write!(f, "value variable `{variable}` declares states"),
            DuplicateState { variable, state } => {
                write!(f, "`{variable}` lists state `{state}` more than once")
            }
            UnknownArcEndpoint { arc, name } => write!(f, "`{arc}` references undeclared `{name}`"),
            ArcFromValue { arc } => write!(f, "`{arc}` leaves a value variable"),
            DuplicateArc { arc } => write!(f, "`{arc}` declared more than once"),
            InstantaneousCycle { members } => {
                write!(f, "instantaneous arcs form a cycle through {}", members.join(", "))
            }
            NoValueVariable => write!(f, "model has no value variable"),
            UnknownTableVariable { table, variable } => {
                write!(f, "{table} for undeclared variable `{variable}`")
            }
            WrongTableKind { table, variable, kind } => {
                write!(f, "{table} given for {kind} variable `{variable}`")
            }
            UnindexedTime { table, variable, index } => {
                write!(f, "{table} `{variable}` @ {index}: CPD at unindexed time")
            }
            DuplicateTable { table, variable, index } => {
                write!(f, "{table} `{variable}` @ {index} declared more than once")
            }
            ParentMismatch { table, variable, index, expected, found } => write!(
                f,
                "{table} `{variable}` @ {index}: parents are [{}], expected [{}]",
                parents_str(found),
                parents_str(expected)
            ),
            RowCount { variable, index, expected, found } => write!(
                f,
                "cpt `{variable}` @ {index}: {found} row(s), expected {expected}"
            ),
            ColumnCount { variable, index, row, expected, found } => write!(
                f,
                "cpt `{variable}` @ {index}: row {row} has {found} column(s), expected {expected}"
            ),
            ProbabilityOutOfRange { variable, index, row, value } => write!(
                f,
                "cpt `{variable}` @ {index}: row {row} has probability {value} outside [0, 1]"
            ),
            RowSum { variable, index, row, sum } => write!(
                f,
                "cpt `{variable}` @ {index}: row {row} sums to {sum}, not 1"
            ),
            UtilityCount { variable, index, expected, found } => write!(
                f,
                "util `{variable}` @ {index}: {found} entries, expected {expected}"
            ),
            NonFiniteUtility { variable, index, entry } => write!(
                f,
                "util `{variable}` @ {index}: entry {entry} is not finite"
            ),
            MissingTable { table, variable, index } => {
                write!(f, "no {table} covers `{variable}` at time {index}")
            }
        }
    }
}

/// Checks every model invariant and returns all violations found. An empty
/// list means the model can be deployed.
pub fn validate(model: &CondensedTdid) -> Vec<Violation> {
    let mut out = Vec::new();
    check_variables(model, &mut out);
    check_arcs(model, &mut out);
    if !model.variables.iter().any(|v| v.kind == VariableKind::Value) {
        out.push(Violation::NoValueVariable);
    }
    check_cpds(model, &mut out);
    check_utilities(model, &mut out);
    out
}

fn check_variables(model: &CondensedTdid, out: &mut Vec<Violation>) {
    let mut seen = HashSet::new();
    for var in &model.variables {
        if !seen.insert(var.name.as_str()) {
            out.push(Violation::DuplicateVariable { name: var.name.clone() });
        }
        if !var.times.is_subset_of(&model.master) {
            out.push(Violation::NotSubsetOfMaster { variable: var.name.clone() });
        }
        if var.times.first() != model.master.first() {
            out.push(Violation::FirstIndexMismatch {
                variable: var.name.clone(),
                first: var.times.first(),
                master_first: model.master.first(),
            });
        }
        match var.kind {
            VariableKind::Value if !var.states.is_empty() => {
                out.push(Violation::ValueWithStates { variable: var.name.clone() })
            }
            VariableKind::Chance | VariableKind::Decision if var.states.len() < 2 => {
                out.push(Violation::TooFewStates { variable: var.name.clone(), count: var.states.len() })
            }
            _ => {}
        }
        let mut labels = HashSet::new();
        for state in &var.states {
            if !labels.insert(state.as_str()) {
                out.push(Violation::DuplicateState { variable: var.name.clone(), state: state.clone() });
            }
        }
    }
}

fn check_arcs(model: &CondensedTdid, out: &mut Vec<Violation>) {
    let mut seen = HashSet::new();
    let mut inst_edges: HashMap<&str, Vec<&str>> = HashMap::new();
    for arc in &model.arcs {
        let label = arc.to_string();
        let mut endpoints_ok = true;
        for name in [&arc.src, &arc.dst] {
            if model.variable(name).is_none() {
                out.push(Violation::UnknownArcEndpoint { arc: label.clone(), name: name.clone() });
                endpoints_ok = false;
            }
        }
        if let Some(src) = model.variable(&arc.src) {
            if src.kind == VariableKind::Value {
                out.push(Violation::ArcFromValue { arc: label.clone() });
                endpoints_ok = false;
            }
        }
        if !seen.insert((arc.kind, arc.src.as_str(), arc.dst.as_str())) {
            out.push(Violation::DuplicateArc { arc: label });
            continue;
        }
        if endpoints_ok && arc.kind == ArcKind::Instantaneous {
            inst_edges.entry(&arc.src).or_default().push(&arc.dst);
        }
    }
    for members in cyclic_components(model, &inst_edges) {
        out.push(Violation::InstantaneousCycle { members });
    }
}

/// Strongly connected components of the instantaneous subgraph that contain
/// a cycle, listed in variable declaration order.
fn cyclic_components(model: &CondensedTdid, edges: &HashMap<&str, Vec<&str>>) -> Vec<Vec<String>> {
    struct Tarjan<'a> {
        edges: &'a HashMap<&'a str, Vec<&'a str>>,
        index: HashMap<&'a str, usize>,
        low: HashMap<&'a str, usize>,
        stack: Vec<&'a str>,
        on_stack: HashSet<&'a str>,
        next: usize,
        found: Vec<Vec<&'a str>>,
    }

    impl<'a> Tarjan<'a> {
        fn visit(&mut self, v: &'a str) {
            self.index.insert(v, self.next);
            self.low.insert(v, self.next);
            self.next += 1;
            self.stack.push(v);
            self.on_stack.insert(v);
            let edges = self.edges;
            for &w in edges.get(v).map(|e| e.as_slice()).unwrap_or(&[]) {
                if !self.index.contains_key(w) {
                    self.visit(w);
                    let lw = self.low[w];
                    let lv = self.low.get_mut(v).unwrap();
                    *lv = (*lv).min(lw);
                } else if self.on_stack.contains(w) {
                    let iw = self.index[w];
                    let lv = self.low.get_mut(v).unwrap();
                    *lv = (*lv).min(iw);
                }
            }
            if self.low[v] == self.index[v] {
                let mut component = Vec::new();
                loop {
                    let w = self.stack.pop().unwrap();
                    self.on_stack.remove(w);
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                let self_loop = self.edges.get(v).is_some_and(|e| e.contains(&v));
                if component.len() > 1 || self_loop {
                    self.found.push(component);
                }
            }
        }
    }

    let mut tarjan = Tarjan {
        edges,
        index: HashMap::new(),
        low: HashMap::new(),
        stack: Vec::new(),
        on_stack: HashSet::new(),
        next: 0,
        found: Vec::new(),
    };
    for var in &model.variables {
        if !tarjan.index.contains_key(var.name.as_str()) {
            tarjan.visit(&var.name);
        }
    }
    let position = |name: &str| model.variable_position(name).unwrap_or(usize::MAX);
    let mut components: Vec<Vec<String>> = tarjan
        .found
        .into_iter()
        .map(|mut c| {
            c.sort_by_key(|n| position(n));
            c.into_iter().map(str::to_string).collect()
        })
        .collect();
    components.sort_by_key(|c| position(&c[0]));
    components
}

fn joint_states(model: &CondensedTdid, parents: &[ParentRef]) -> Option<usize> {
    parents.iter().try_fold(1usize, |acc, p| {
        let card = model.cardinality(&p.name)?;
        Some(acc * card.max(1))
    })
}

fn check_cpds(model: &CondensedTdid, out: &mut Vec<Violation>) {
    let mut seen = HashSet::new();
    for cpd in &model.cpds {
        let Some(var) = model.variable(&cpd.variable) else {
            out.push(Violation::UnknownTableVariable { table: TableKind::Cpd, variable: cpd.variable.clone() });
            continue;
        };
        if var.kind != VariableKind::Chance {
            out.push(Violation::WrongTableKind {
                table: TableKind::Cpd,
                variable: var.name.clone(),
                kind: var.kind,
            });
            continue;
        }
        if !seen.insert((cpd.variable.as_str(), cpd.index)) {
            out.push(Violation::DuplicateTable {
                table: TableKind::Cpd,
                variable: cpd.variable.clone(),
                index: cpd.index,
            });
            continue;
        }
        if let TableIndex::At(i) = cpd.index {
            if !var.times.contains(i) {
                out.push(Violation::UnindexedTime { table: TableKind::Cpd, variable: var.name.clone(), index: i });
                continue;
            }
        }
        let Some(expected_rows) = joint_states(model, &cpd.parents) else {
            // Unknown parent names surface as parent mismatches during coverage.
            continue;
        };
        if cpd.rows.len() != expected_rows {
            out.push(Violation::RowCount {
                variable: var.name.clone(),
                index: cpd.index,
                expected: expected_rows,
                found: cpd.rows.len(),
            });
        }
        for (r, row) in cpd.rows.iter().enumerate() {
            if row.len() != var.states.len() {
                out.push(Violation::ColumnCount {
                    variable: var.name.clone(),
                    index: cpd.index,
                    row: r,
                    expected: var.states.len(),
                    found: row.len(),
                });
                continue;
            }
            if let Some(&bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                out.push(Violation::ProbabilityOutOfRange {
                    variable: var.name.clone(),
                    index: cpd.index,
                    row: r,
                    value: bad,
                });
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                out.push(Violation::RowSum { variable: var.name.clone(), index: cpd.index, row: r, sum });
            }
        }
    }

    for var in model.variables.iter().filter(|v| v.kind == VariableKind::Chance) {
        for &i in var.times.indices() {
            match model.cpd_for(&var.name, i) {
                None => out.push(Violation::MissingTable { table: TableKind::Cpd, variable: var.name.clone(), index: i }),
                Some(cpd) => {
                    let expected = model.parent_roles(&var.name, i);
                    if cpd.parents != expected {
                        out.push(Violation::ParentMismatch {
                            table: TableKind::Cpd,
                            variable: var.name.clone(),
                            index: i,
                            expected,
                            found: cpd.parents.clone(),
                        });
                    }
                }
            }
        }
    }
}

fn check_utilities(model: &CondensedTdid, out: &mut Vec<Violation>) {
    let mut seen = HashSet::new();
    for util in &model.utilities {
        let Some(var) = model.variable(&util.variable) else {
            out.push(Violation::UnknownTableVariable { table: TableKind::Utility, variable: util.variable.clone() });
            continue;
        };
        if var.kind != VariableKind::Value {
            out.push(Violation::WrongTableKind {
                table: TableKind::Utility,
                variable: var.name.clone(),
                kind: var.kind,
            });
            continue;
        }
        if !seen.insert((util.variable.as_str(), util.index)) {
            out.push(Violation::DuplicateTable {
                table: TableKind::Utility,
                variable: util.variable.clone(),
                index: util.index,
            });
            continue;
        }
        if let TableIndex::At(i) = util.index {
            if !var.times.contains(i) {
                out.push(Violation::UnindexedTime { table: TableKind::Utility, variable: var.name.clone(), index: i });
                continue;
            }
        }
        if let Some(expected) = joint_states(model, &util.parents) {
            if util.values.len() != expected {
                out.push(Violation::UtilityCount {
                    variable: var.name.clone(),
                    index: util.index,
                    expected,
                    found: util.values.len(),
                });
            }
        }
        if let Some(entry) = util.values.iter().position(|v| !v.is_finite()) {
            out.push(Violation::NonFiniteUtility { variable: var.name.clone(), index: util.index, entry });
        }
    }

    for var in model.value_variables() {
        for &i in var.times.indices() {
            match model.utility_for(&var.name, i) {
                None => out.push(Violation::MissingTable {
                    table: TableKind::Utility,
                    variable: var.name.clone(),
                    index: i,
                }),
                Some(util) => {
                    let expected = model.parent_roles(&var.name, i);
                    if util.parents != expected {
                        out.push(Violation::ParentMismatch {
                            table: TableKind::Utility,
                            variable: var.name.clone(),
                            index: i,
                            expected,
                            found: util.parents.clone(),
                        });
                    }
                }
            }
        }
    }
}
