//! Line-oriented text format for condensed models.
//!
//! ```text
//! tdid 1
//! master 1 2 3 4
//! tick 1 minute
//! chance X : lo hi ; times 1 3
//! chance Y : lo hi
//! value V
//! arc inst X Y
//! arc lag Y X
//! arc inst Y V
//! cpt X @ 1 : 0.5 0.5
//! cpt X @ 3 | prev(Y) : 0.9 0.1 , 0.2 0.8
//! cpt Y @ * | X : 0.7 0.3 , 0.4 0.6
//! util V @ * | Y : 0 1
//! ```
//!
//! Names must be declared before they are referenced. `prev(Y)` marks a
//! time-lag parent slot.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::{
    Arc, ArcKind, CondensedTdid, ParentRef, TableIndex, TabularCpd, TemporalVariable, TickDuration,
    TimeIndex, TimeSequence, UtilityTable, VariableKind,
};
use crate::numfmt::g17;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: reference to undeclared variable `{name}`")]
    Undeclared { line: usize, name: String },
    #[error("line {line}: duplicate declaration of {what}")]
    Duplicate { line: usize, what: String },
    #[error("line {line}: CPD at unindexed time {index} for `{name}`")]
    UnindexedTime { line: usize, name: String, index: TimeIndex },
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, message: message.into() }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn identifier(line: usize, token: &str) -> Result<String, ParseError> {
    if is_identifier(token) {
        Ok(token.to_string())
    } else {
        Err(syntax(line, format!("`{token}` is not a valid name")))
    }
}

fn time_index(line: usize, token: &str) -> Result<TimeIndex, ParseError> {
    token
        .parse::<TimeIndex>()
        .map_err(|_| syntax(line, format!("`{token}` is not a time index")))
}

fn sequence<'a>(line: usize, tokens: impl Iterator<Item = &'a str>) -> Result<TimeSequence, ParseError> {
    let indices = tokens.map(|t| time_index(line, t)).collect::<Result<Vec<_>, _>>()?;
    TimeSequence::new(indices).map_err(|e| syntax(line, e.to_string()))
}

fn number(line: usize, token: &str) -> Result<f64, ParseError> {
    token
        .parse::<f64>()
        .map_err(|_| syntax(line, format!("`{token}` is not a number")))
}

struct Parser {
    model: Option<CondensedTdid>,
    arcs: HashSet<(ArcKind, String, String)>,
    tables: HashSet<(bool, String, TableIndex)>,
}

impl Parser {
    fn model(&mut self, line: usize) -> Result<&mut CondensedTdid, ParseError> {
        self.model
            .as_mut()
            .ok_or_else(|| syntax(line, "`master` must precede declarations"))
    }

    fn declared(&mut self, line: usize, name: &str) -> Result<TemporalVariable, ParseError> {
        self.model(line)?
            .variable(name)
            .cloned()
            .ok_or_else(|| ParseError::Undeclared { line, name: name.to_string() })
    }

    fn line(&mut self, line: usize, text: &str) -> Result<(), ParseError> {
        let (keyword, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        let rest = rest.trim();
        match keyword {
            "master" => {
                if self.model.is_some() {
                    return Err(ParseError::Duplicate { line, what: "`master`".into() });
                }
                self.model = Some(CondensedTdid::new(sequence(line, rest.split_whitespace())?));
            }
            "tick" => {
                let tokens: Vec<&str> = rest.split_whitespace().collect();
                let [amount, unit] = tokens[..] else {
                    return Err(syntax(line, "expected `tick <amount> <unit>`"));
                };
                let amount = number(line, amount)?;
                self.model(line)?.tick = Some(TickDuration { amount, unit: unit.to_string() });
            }
            "chance" | "decision" | "value" => self.variable(line, keyword, rest)?,
            "arc" => self.arc(line, rest)?,
            "cpt" | "util" => self.table(line, keyword == "cpt", rest)?,
            "tdid" => return Err(ParseError::Duplicate { line, what: "header".into() }),
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
        Ok(())
    }

    fn variable(&mut self, line: usize, keyword: &str, rest: &str) -> Result<(), ParseError> {
        let kind = match keyword {
            "chance" => VariableKind::Chance,
            "decision" => VariableKind::Decision,
            _ => VariableKind::Value,
        };
        let mut clauses = rest.split(';');
        let head = clauses.next().unwrap_or("").trim();
        let (name, states) = match head.split_once(':') {
            Some((name, states)) => (name.trim(), states.split_whitespace().map(str::to_string).collect()),
            None => (head, Vec::new()),
        };
        if kind != VariableKind::Value && !head.contains(':') {
            return Err(syntax(line, format!("expected `{keyword} <name> : <state> ...`")));
        }
        let name = identifier(line, name)?;
        let mut times = None;
        for clause in clauses {
            let mut tokens = clause.split_whitespace();
            match tokens.next() {
                Some("times") if times.is_none() => times = Some(sequence(line, tokens)?),
                Some("times") => return Err(ParseError::Duplicate { line, what: "`times` clause".into() }),
                _ => return Err(syntax(line, format!("unexpected clause `{}`", clause.trim()))),
            }
        }
        let model = self.model(line)?;
        if model.variable(&name).is_some() {
            return Err(ParseError::Duplicate { line, what: format!("variable `{name}`") });
        }
        let times = times.unwrap_or_else(|| model.master.clone());
        model.variables.push(TemporalVariable { name, kind, states, times });
        Ok(())
    }

    fn arc(&mut self, line: usize, rest: &str) -> Result<(), ParseError> {
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        let [kind, src, dst] = tokens[..] else {
            return Err(syntax(line, "expected `arc inst|lag <src> <dst>`"));
        };
        let kind = match kind {
            "inst" => ArcKind::Instantaneous,
            "lag" => ArcKind::TimeLag,
            other => return Err(syntax(line, format!("unknown arc kind `{other}`"))),
        };
        self.declared(line, src)?;
        self.declared(line, dst)?;
        if !self.arcs.insert((kind, src.to_string(), dst.to_string())) {
            return Err(ParseError::Duplicate { line, what: format!("arc {} {src} {dst}", kind.keyword()) });
        }
        self.model(line)?.arcs.push(Arc::new(kind, src, dst));
        Ok(())
    }

    fn table(&mut self, line: usize, is_cpd: bool, rest: &str) -> Result<(), ParseError> {
        let (head, body) = rest
            .split_once(':')
            .ok_or_else(|| syntax(line, "expected `:` before table entries"))?;
        let (target, parents) = match head.split_once('|') {
            Some((target, parents)) => (target, parents),
            None => (head, ""),
        };
        let target: Vec<&str> = target.split_whitespace().collect();
        let [name, "@", index] = target[..] else {
            return Err(syntax(line, "expected `<name> @ <index|*>`"));
        };
        let variable = self.declared(line, name)?;
        let index = match index {
            "*" => TableIndex::Stationary,
            i => {
                let i = time_index(line, i)?;
                if !variable.times.contains(i) {
                    return Err(ParseError::UnindexedTime { line, name: name.to_string(), index: i });
                }
                TableIndex::At(i)
            }
        };
        let parents = parents
            .split_whitespace()
            .map(|token| {
                let parent = match token.strip_prefix("prev(").and_then(|t| t.strip_suffix(')')) {
                    Some(inner) => ParentRef::lag(inner),
                    None => ParentRef::inst(token),
                };
                self.declared(line, &parent.name)?;
                Ok(parent)
            })
            .collect::<Result<Vec<_>, ParseError>>()?;
        if !self.tables.insert((is_cpd, name.to_string(), index)) {
            let kw = if is_cpd { "cpt" } else { "util" };
            return Err(ParseError::Duplicate { line, what: format!("{kw} {name} @ {index}") });
        }
        let model = self.model(line)?;
        if is_cpd {
            let rows = body
                .split(',')
                .map(|row| row.split_whitespace().map(|t| number(line, t)).collect())
                .collect::<Result<Vec<Vec<f64>>, _>>()?;
            model.cpds.push(TabularCpd { variable: name.to_string(), index, parents, rows });
        } else {
            let values = body
                .split_whitespace()
                .map(|t| number(line, t))
                .collect::<Result<Vec<f64>, _>>()?;
            model.utilities.push(UtilityTable { variable: name.to_string(), index, parents, values });
        }
        Ok(())
    }
}

/// Parses a model file. Structural problems that do not prevent building the
/// model (row sums, cycles, coverage) are left to [`super::validate`].
pub fn parse(text: &str) -> Result<CondensedTdid, ParseError> {
    let mut parser = Parser { model: None, arcs: HashSet::new(), tables: HashSet::new() };
    let mut header_seen = false;
    let mut last_line = 0;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !header_seen {
            if content.split_whitespace().collect::<Vec<_>>() != ["tdid", "1"] {
                return Err(syntax(line, "expected header `tdid 1`"));
            }
            header_seen = true;
            continue;
        }
        parser.line(line, content)?;
    }
    if !header_seen {
        return Err(syntax(last_line.max(1), "expected header `tdid 1`"));
    }
    parser
        .model
        .ok_or_else(|| syntax(last_line.max(1), "missing `master` line"))
}

fn join_seq(seq: &TimeSequence) -> String {
    seq.indices().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn join_parents(parents: &[ParentRef]) -> String {
    parents.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

fn table_head(keyword: &str, name: &str, index: TableIndex, parents: &[ParentRef]) -> String {
    if parents.is_empty() {
        format!("{keyword} {name} @ {index} :")
    } else {
        format!("{keyword} {name} @ {index} | {} :", join_parents(parents))
    }
}

/// Canonical text: variables in declaration order, arcs sorted by
/// (kind, src, dst), numbers with 17 significant digits.
pub fn serialize(model: &CondensedTdid) -> String {
    let model = model.canonical();
    let mut out = String::new();
    out.push_str("tdid 1\n");
    let _ = writeln!(out, "master {}", join_seq(&model.master));
    if let Some(tick) = &model.tick {
        let _ = writeln!(out, "tick {} {}", g17(tick.amount), tick.unit);
    }
    for var in &model.variables {
        let _ = write!(out, "{} {}", var.kind, var.name);
        if var.kind != VariableKind::Value {
            let _ = write!(out, " : {}", var.states.join(" "));
        }
        if var.times != model.master {
            let _ = write!(out, " ; times {}", join_seq(&var.times));
        }
        out.push('\n');
    }
    for arc in &model.arcs {
        let _ = writeln!(out, "{arc}");
    }
    for cpd in &model.cpds {
        let rows: Vec<String> = cpd
            .rows
            .iter()
            .map(|row| row.iter().map(|p| g17(*p)).collect::<Vec<_>>().join(" "))
            .collect();
        let _ = writeln!(
            out,
            "{} {}",
            table_head("cpt", &cpd.variable, cpd.index, &cpd.parents),
            rows.join(" , ")
        );
    }
    for util in &model.utilities {
        let values: Vec<String> = util.values.iter().map(|v| g17(*v)).collect();
        let _ = writeln!(
            out,
            "{} {}",
            table_head("util", &util.variable, util.index, &util.parents),
            values.join(" ")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
tdid 1
master 1
chance C : s f
value U
arc inst C U
cpt C @ * : 0.75 0.25
util U @ * | C : 10 0
";

    #[test]
    fn minimal_file_parses_to_two_variables() {
        let model = parse(MINIMAL).unwrap();
        assert_eq!(model.variables.len(), 2);
        assert_eq!(model.arcs, vec![Arc::new(ArcKind::Instantaneous, "C", "U")]);
        assert_eq!(model.cpds[0].rows, vec![vec![0.75, 0.25]]);
        assert_eq!(model.utilities[0].values, vec![10.0, 0.0]);
    }

    #[test]
    fn canonical_file_round_trips_byte_for_byte() {
        assert_eq!(serialize(&parse(MINIMAL).unwrap()), MINIMAL);
    }

    #[test]
    fn cpd_at_unindexed_time_is_rejected() {
        let text = "\
tdid 1
master 1 2 3
chance X : a b ; times 1 3
value U
cpt X @ 2 : 0.5 0.5
";
        let err = parse(text).unwrap_err();
        assert_eq!(err, ParseError::UnindexedTime { line: 5, name: "X".into(), index: 2 });
        assert!(err.to_string().contains("CPD at unindexed time"));
    }

    #[test]
    fn undeclared_and_duplicate_names_are_rejected() {
        let undeclared = "tdid 1\nmaster 1\nchance C : a b\narc inst C U\n";
        assert_eq!(parse(undeclared).unwrap_err(), ParseError::Undeclared { line: 4, name: "U".into() });

        let duplicate = "tdid 1\nmaster 1\nchance C : a b\ndecision C : x y\n";
        assert!(matches!(parse(duplicate).unwrap_err(), ParseError::Duplicate { line: 4, .. }));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "# comment\ntdid 1\nmaster 1 2\nchance X a b\n";
        assert!(matches!(parse(text).unwrap_err(), ParseError::Syntax { line: 4, .. }));
        assert!(matches!(parse("tdid 2\n").unwrap_err(), ParseError::Syntax { line: 1, .. }));
        assert!(matches!(parse("tdid 1\nmaster 2 1\n").unwrap_err(), ParseError::Syntax { line: 2, .. }));
    }

    #[test]
    fn serialization_sorts_arcs_and_marks_lag_parents() {
        let text = "\
tdid 1
master 1 2 3 4
chance X : lo hi ; times 1 3
chance Y : lo hi
value V
arc inst Y V
arc lag Y X
arc inst X Y
cpt X @ 3 | prev(Y) : 0.9 0.1 , 0.2 0.8
cpt X @ 1 : 0.5 0.5
cpt Y @ * | X : 0.7 0.3 , 0.4 0.6
util V @ * | Y : 0 1
";
        let out = serialize(&parse(text).unwrap());
        let arcs: Vec<&str> = out.lines().filter(|l| l.starts_with("arc")).collect();
        assert_eq!(arcs, ["arc inst X Y", "arc inst Y V", "arc lag Y X"]);
        assert!(out.contains("cpt X @ 1 : 0.5 0.5\ncpt X @ 3 | prev(Y) :"));
        assert_eq!(serialize(&parse(&out).unwrap()), out);
    }
}
