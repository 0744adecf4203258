//! Suites of abstractions described by a small lattice file.
//!
//! ```text
//! time all : 1 2 3 | 1 3
//! space CD : CD
//! space-choices : keep drop
//! ```
//!
//! Every `time` line is one dimension whose options are alternative
//! sequences for a variable (or `all`). Every `space` line is a group of
//! variables that is either kept or dropped as a whole; `space-choices`
//! restricts which of the two options are offered.

use std::fmt;

use thiserror::Error;

use super::{abstract_space, abstract_time, abstract_times, parse_sequence, AbstractionError};
use crate::model::{is_identifier, CondensedTdid, TimeSequence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceChoice {
    Keep,
    Drop,
}

impl fmt::Display for SpaceChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceChoice::Keep => "keep",
            SpaceChoice::Drop => "drop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeDimension {
    /// `None` for `all`.
    pub variable: Option<String>,
    pub options: Vec<TimeSequence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceGroup {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    pub times: Vec<TimeDimension>,
    pub spaces: Vec<SpaceGroup>,
    pub space_choices: Vec<SpaceChoice>,
}

impl Lattice {
    pub fn parse(text: &str) -> Result<Lattice, LatticeError> {
        let mut lattice = Lattice {
            times: Vec::new(),
            spaces: Vec::new(),
            space_choices: vec![SpaceChoice::Keep, SpaceChoice::Drop],
        };
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |message: String| LatticeError::Syntax { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (head, body) = content
                .split_once(':')
                .ok_or_else(|| err("expected `<directive> ... : ...`".into()))?;
            let head: Vec<&str> = head.split_whitespace().collect();
            match head[..] {
                ["time", target] => {
                    let variable = match target {
                        "all" => None,
                        name if is_identifier(name) => Some(name.to_string()),
                        name => return Err(err(format!("`{name}` is not a valid name"))),
                    };
                    let options = body
                        .split('|')
                        .map(|s| parse_sequence(s).ok_or_else(|| err(format!("bad time sequence `{}`", s.trim()))))
                        .collect::<Result<Vec<_>, _>>()?;
                    lattice.times.push(TimeDimension { variable, options });
                }
                ["space", name] => {
                    let members: Vec<String> = body.split_whitespace().map(str::to_string).collect();
                    if members.is_empty() {
                        return Err(err(format!("space group `{name}` is empty")));
                    }
                    lattice.spaces.push(SpaceGroup { name: name.to_string(), members });
                }
                ["space-choices"] => {
                    lattice.space_choices = body
                        .split_whitespace()
                        .map(|c| match c {
                            "keep" => Ok(SpaceChoice::Keep),
                            "drop" => Ok(SpaceChoice::Drop),
                            other => Err(err(format!("unknown space choice `{other}`"))),
                        })
                        .collect::<Result<_, _>>()?;
                    if lattice.space_choices.is_empty() {
                        return Err(err("no space choices".into()));
                    }
                }
                _ => return Err(err(format!("unknown directive `{}`", head.join(" ")))),
            }
        }
        Ok(lattice)
    }
}

/// One coordinate of an abstraction in its lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coordinate {
    Time { variable: Option<String>, times: TimeSequence },
    Space { group: String, choice: SpaceChoice },
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coordinate::Time { variable, times } => {
                let idx: Vec<String> = times.indices().iter().map(|i| i.to_string()).collect();
                write!(f, "time {}={}", variable.as_deref().unwrap_or("all"), idx.join(","))
            }
            Coordinate::Space { group, choice } => write!(f, "space {group}={choice}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    pub coordinates: Vec<Coordinate>,
    pub model: CondensedTdid,
}

impl Abstraction {
    /// Coordinates joined by `; `, e.g. `time all=1,3; space CD=drop`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.coordinates.iter().map(ToString::to_string).collect();
        parts.join("; ")
    }
}

fn realize(model: &CondensedTdid, lattice: &Lattice, coords: &[Coordinate]) -> Result<CondensedTdid, AbstractionError> {
    let mut dropped = Vec::new();
    for (group, coord) in lattice.spaces.iter().zip(&coords[lattice.times.len()..]) {
        if matches!(coord, Coordinate::Space { choice: SpaceChoice::Drop, .. }) {
            dropped.extend(group.members.iter().cloned());
        }
    }
    let mut current = abstract_space(model, &dropped)?;
    for coord in &coords[..lattice.times.len()] {
        let Coordinate::Time { variable, times } = coord else { unreachable!() };
        current = match variable {
            None => abstract_times(&current, times)?,
            Some(name) if current.variable(name).is_some() => abstract_time(&current, name, times)?,
            // Removed by a space choice or as a consequence of one.
            Some(_) => current,
        };
    }
    Ok(current)
}

/// Every combination of lattice choices that yields a valid model, in
/// odometer order: time dimensions first, then space groups, the last one
/// varying fastest. Combinations that fail to abstract are skipped.
pub fn enumerate_abstractions(model: &CondensedTdid, lattice: &Lattice) -> Result<Vec<Abstraction>, AbstractionError> {
    let names = lattice
        .times
        .iter()
        .filter_map(|t| t.variable.as_ref())
        .chain(lattice.spaces.iter().flat_map(|g| g.members.iter()));
    for name in names {
        if model.variable(name).is_none() {
            return Err(AbstractionError::UnknownVariable { name: name.clone() });
        }
    }

    let mut axes: Vec<Vec<Coordinate>> = lattice
        .times
        .iter()
        .map(|t| {
            t.options
                .iter()
                .map(|times| Coordinate::Time { variable: t.variable.clone(), times: times.clone() })
                .collect()
        })
        .collect();
    axes.extend(lattice.spaces.iter().map(|g| {
        lattice
            .space_choices
            .iter()
            .map(|&choice| Coordinate::Space { group: g.name.clone(), choice })
            .collect()
    }));

    let mut out = Vec::new();
    let mut digits = vec![0usize; axes.len()];
    loop {
        let coordinates: Vec<Coordinate> = axes.iter().zip(&digits).map(|(axis, &d)| axis[d].clone()).collect();
        if let Ok(model) = realize(model, lattice, &coordinates) {
            out.push(Abstraction { coordinates, model });
        }
        let radices: Vec<usize> = axes.iter().map(Vec::len).collect();
        if !crate::solve::advance(&mut digits, &radices) {
            break;
        }
    }
    if out.is_empty() {
        return Err(AbstractionError::NoFeasible);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    const FIGURE1: &str = include_str!("../../../../fixtures/figure1.tdid");

    #[test]
    fn empty_lattice_gives_the_original() {
        let model = parse(FIGURE1).unwrap();
        let all = enumerate_abstractions(&model, &Lattice::parse("").unwrap()).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].model, model);
        assert_eq!(all[0].label(), "");
    }

    #[test]
    fn infeasible_options_are_filtered() {
        let model = parse(FIGURE1).unwrap();
        let lattice = Lattice::parse("time X : 1 3 | 1 | 2 3\n").unwrap();
        let all = enumerate_abstractions(&model, &lattice).unwrap();
        let labels: Vec<String> = all.iter().map(Abstraction::label).collect();
        assert_eq!(labels, ["time X=1,3", "time X=1"]);
    }

    #[test]
    fn nothing_feasible_is_an_error() {
        let model = parse(FIGURE1).unwrap();
        let lattice = Lattice::parse("space V : V\nspace-choices : drop\n").unwrap();
        assert_eq!(enumerate_abstractions(&model, &lattice), Err(AbstractionError::NoFeasible));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        assert_eq!(
            Lattice::parse("# c\ntime X : 1 | 3 1\n"),
            Err(LatticeError::Syntax { line: 2, message: "bad time sequence `3 1`".into() })
        );
        assert!(Lattice::parse("space-choices : maybe\n").is_err());
    }
}
