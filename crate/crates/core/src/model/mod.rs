//! Condensed-form time-critical dynamic influence diagrams.
//!
//! A condensed model describes every variable once, together with the time
//! sequence it is indexed by. Instantaneous arcs relate variables inside a
//! slice; time-lag arcs relate a child to the most recent earlier index of its
//! parent. Deployment into a slice-indexed influence diagram lives in
//! [`crate::deploy`].

mod format;
mod validate;

pub(crate) use format::is_identifier;
pub use format::{parse, serialize, ParseError};
pub use validate::{validate, TableKind, Violation};

use std::fmt;

use thiserror::Error;

/// A time index. Indices are positive integers; real-world spacing is metadata.
pub type TimeIndex = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("time sequence is empty")]
    Empty,
    #[error("time index 0 is not allowed; indices are positive")]
    Zero,
    #[error("time sequence is not strictly increasing at {0}")]
    NotIncreasing(TimeIndex),
}

/// A non-empty, strictly increasing list of positive time indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimeSequence(Vec<TimeIndex>);

impl TimeSequence {
    pub fn new(indices: Vec<TimeIndex>) -> Result<Self, SequenceError> {
        if indices.is_empty() {
            return Err(SequenceError::Empty);
        }
        if indices[0] == 0 {
            return Err(SequenceError::Zero);
        }
        for pair in indices.windows(2) {
            if pair[1] <= pair[0] {
                return Err(SequenceError::NotIncreasing(pair[1]));
            }
        }
        Ok(TimeSequence(indices))
    }

    /// `1, 2, ..., n`.
    pub fn range(n: TimeIndex) -> Self {
        assert!(n >= 1, "range needs at least one index");
        TimeSequence((1..=n).collect())
    }

    pub fn indices(&self) -> &[TimeIndex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> TimeIndex {
        self.0[0]
    }

    pub fn contains(&self, i: TimeIndex) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &TimeSequence) -> bool {
        self.0.iter().all(|i| other.contains(*i))
    }

    /// `max { k in self | k < i }`.
    pub fn latest_before(&self, i: TimeIndex) -> Option<TimeIndex> {
        self.0.iter().copied().take_while(|k| *k < i).last()
    }

    /// `max { k in self | k <= i }`.
    pub fn latest_at_or_before(&self, i: TimeIndex) -> Option<TimeIndex> {
        self.0.iter().copied().take_while(|k| *k <= i).last()
    }
}

impl fmt::Display for TimeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "<{}>", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariableKind {
    Chance,
    Decision,
    Value,
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariableKind::Chance => "chance",
            VariableKind::Decision => "decision",
            VariableKind::Value => "value",
        })
    }
}

/// A time-indexed family of variables sharing a name and state space.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalVariable {
    pub name: String,
    pub kind: VariableKind,
    /// Outcome labels for chance nodes, options for decisions, empty for values.
    pub states: Vec<String>,
    pub times: TimeSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArcKind {
    Instantaneous,
    TimeLag,
}

impl ArcKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ArcKind::Instantaneous => "inst",
            ArcKind::TimeLag => "lag",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Arc {
    pub src: String,
    pub dst: String,
    pub kind: ArcKind,
}

impl Arc {
    pub fn new(kind: ArcKind, src: impl Into<String>, dst: impl Into<String>) -> Self {
        Arc { src: src.into(), dst: dst.into(), kind }
    }

    fn sort_key(&self) -> (ArcKind, &str, &str) {
        (self.kind, &self.src, &self.dst)
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "arc {} {} {}", self.kind.keyword(), self.src, self.dst)
    }
}

/// A parent slot in a table: the parent variable and which slice it is read from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParentRef {
    pub name: String,
    pub role: ArcKind,
}

impl ParentRef {
    pub fn inst(name: impl Into<String>) -> Self {
        ParentRef { name: name.into(), role: ArcKind::Instantaneous }
    }

    pub fn lag(name: impl Into<String>) -> Self {
        ParentRef { name: name.into(), role: ArcKind::TimeLag }
    }
}

/// `Y` for an instantaneous parent, `prev(Y)` for a time-lag parent.
impl fmt::Display for ParentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role {
            ArcKind::Instantaneous => f.write_str(&self.name),
            ArcKind::TimeLag => write!(f, "prev({})", self.name),
        }
    }
}

/// Which time indices a table applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableIndex {
    At(TimeIndex),
    /// Applies to every index of the variable without a specific table.
    Stationary,
}

impl fmt::Display for TableIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableIndex::At(i) => write!(f, "{i}"),
            TableIndex::Stationary => f.write_str("*"),
        }
    }
}

/// `p(X_i | parents)` as one row per joint parent state (last parent varies
/// fastest) and one column per child state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCpd {
    pub variable: String,
    pub index: TableIndex,
    pub parents: Vec<ParentRef>,
    pub rows: Vec<Vec<f64>>,
}

/// One utility per joint parent state, last parent fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    pub variable: String,
    pub index: TableIndex,
    pub parents: Vec<ParentRef>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickDuration {
    pub amount: f64,
    pub unit: String,
}

/// The condensed form: master sequence, temporal variables, both arc sets,
/// conditional probability tables and utility tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedTdid {
    pub master: TimeSequence,
    pub variables: Vec<TemporalVariable>,
    pub arcs: Vec<Arc>,
    pub cpds: Vec<TabularCpd>,
    pub utilities: Vec<UtilityTable>,
    pub tick: Option<TickDuration>,
}

impl CondensedTdid {
    pub fn new(master: TimeSequence) -> Self {
        CondensedTdid {
            master,
            variables: Vec::new(),
            arcs: Vec::new(),
            cpds: Vec::new(),
            utilities: Vec::new(),
            tick: None,
        }
    }

    pub fn variable(&self, name: &str) -> Option<&TemporalVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variable_position(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn value_variables(&self) -> impl Iterator<Item = &TemporalVariable> {
        self.variables.iter().filter(|v| v.kind == VariableKind::Value)
    }

    pub fn arcs_into<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Arc> + 'a {
        self.arcs.iter().filter(move |a| a.dst == name)
    }

    /// Parent slots of `variable` at index `i`: instantaneous parents first,
    /// then time-lag parents, each group ordered by parent name. A time-lag
    /// parent is present only if it has an index strictly before `i`.
    pub fn parent_roles(&self, variable: &str, i: TimeIndex) -> Vec<ParentRef> {
        let mut inst: Vec<&str> = Vec::new();
        let mut lag: Vec<&str> = Vec::new();
        for arc in self.arcs_into(variable) {
            match arc.kind {
                ArcKind::Instantaneous => inst.push(&arc.src),
                ArcKind::TimeLag => {
                    let earlier = self
                        .variable(&arc.src)
                        .and_then(|p| p.times.latest_before(i))
                        .is_some();
                    if earlier {
                        lag.push(&arc.src);
                    }
                }
            }
        }
        inst.sort_unstable();
        inst.dedup();
        lag.sort_unstable();
        lag.dedup();
        inst.into_iter()
            .map(ParentRef::inst)
            .chain(lag.into_iter().map(ParentRef::lag))
            .collect()
    }

    /// The CPD governing `variable` at `i`: a specific one if present, else
    /// the stationary one.
    pub fn cpd_for(&self, variable: &str, i: TimeIndex) -> Option<&TabularCpd> {
        let mut stationary = None;
        for cpd in self.cpds.iter().filter(|c| c.variable == variable) {
            match cpd.index {
                TableIndex::At(k) if k == i => return Some(cpd),
                TableIndex::Stationary => stationary = stationary.or(Some(cpd)),
                _ => {}
            }
        }
        stationary
    }

    pub fn utility_for(&self, variable: &str, i: TimeIndex) -> Option<&UtilityTable> {
        let mut stationary = None;
        for util in self.utilities.iter().filter(|u| u.variable == variable) {
            match util.index {
                TableIndex::At(k) if k == i => return Some(util),
                TableIndex::Stationary => stationary = stationary.or(Some(util)),
                _ => {}
            }
        }
        stationary
    }

    /// Number of states of a chance or decision variable.
    pub fn cardinality(&self, name: &str) -> Option<usize> {
        self.variable(name).map(|v| v.states.len())
    }

    /// The same model with arcs sorted by (kind, src, dst) and tables grouped
    /// by variable declaration order, specific indices before `*`.
    pub fn canonical(&self) -> CondensedTdid {
        let mut out = self.clone();
        out.arcs.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let position = |name: &str| self.variable_position(name).unwrap_or(usize::MAX);
        out.cpds.sort_by(|a, b| {
            (position(&a.variable), a.index).cmp(&(position(&b.variable), b.index))
        });
        out.utilities.sort_by(|a, b| {
            (position(&a.variable), a.index).cmp(&(position(&b.variable), b.index))
        });
        out
    }

    /// Structural identity: equal after canonical ordering.
    pub fn structurally_eq(&self, other: &CondensedTdid) -> bool {
        self.canonical() == other.canonical()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_rejects_malformed_input() {
        assert_eq!(TimeSequence::new(vec![]), Err(SequenceError::Empty));
        assert_eq!(TimeSequence::new(vec![0, 1]), Err(SequenceError::Zero));
        assert_eq!(TimeSequence::new(vec![1, 3, 3]), Err(SequenceError::NotIncreasing(3)));
    }

    #[test]
    fn latest_before_is_strict() {
        let seq = TimeSequence::new(vec![1, 3]).unwrap();
        assert_eq!(seq.latest_before(1), None);
        assert_eq!(seq.latest_before(3), Some(1));
        assert_eq!(seq.latest_before(4), Some(3));
        assert_eq!(seq.latest_at_or_before(3), Some(3));
        assert_eq!(seq.latest_at_or_before(2), Some(1));
    }

    #[test]
    fn parent_roles_drop_lag_parents_at_first_index() {
        let mut m = CondensedTdid::new(TimeSequence::range(3));
        for name in ["A", "B", "X"] {
            m.variables.push(TemporalVariable {
                name: name.into(),
                kind: VariableKind::Chance,
                states: vec!["0".into(), "1".into()],
                times: TimeSequence::range(3),
            });
        }
        m.arcs.push(Arc::new(ArcKind::TimeLag, "X", "X"));
        m.arcs.push(Arc::new(ArcKind::Instantaneous, "B", "X"));
        m.arcs.push(Arc::new(ArcKind::Instantaneous, "A", "X"));
        assert_eq!(m.parent_roles("X", 1), vec![ParentRef::inst("A"), ParentRef::inst("B")]);
        assert_eq!(
            m.parent_roles("X", 2),
            vec![ParentRef::inst("A"), ParentRef::inst("B"), ParentRef::lag("X")]
        );
    }
}
