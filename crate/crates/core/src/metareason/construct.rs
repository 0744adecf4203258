//! The end-to-end construction pipeline: filter the knowledge base, choose a
//! model by EVC, optionally edit it, then deploy and solve it.

use std::path::Path;

use serde::Serialize;

use super::kb::{load_kb, timed_solve, KbEntry};
use super::{estimate_cost, select, CostModel, EvcCurve, MetaError, SuiteEntry, UrgencyFunction};
use crate::abstraction::{apply_edits, Edit};
use crate::deploy::{deploy, DeployedDid};
use crate::json::{to_json, F17};
use crate::solve::{solve, Policy};

/// Problem requirements. `t0` and `deadline` are in urgency time units;
/// knowledge-base costs are divided by `time_unit` to get there.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub urgency: UrgencyFunction,
    pub t0: f64,
    /// Models costing more than this are discarded.
    pub deadline: Option<f64>,
    /// Models must carry every one of these tags.
    pub tags: Vec<String>,
    /// Costs entries whose manifest has no explicit cost.
    pub cost_model: Option<CostModel>,
    pub time_unit: f64,
    /// Applied to the selected model before it is solved.
    pub edits: Vec<Edit>,
}

impl ProblemSpec {
    pub fn new(urgency: UrgencyFunction, t0: f64) -> Self {
        ProblemSpec { urgency, t0, deadline: None, tags: Vec::new(), cost_model: None, time_unit: 1.0, edits: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    /// Filtered entries in id order; curve indices refer to this list.
    pub suite: Vec<SuiteEntry>,
    pub curve: EvcCurve,
    pub model_id: String,
    pub deployed: DeployedDid,
    pub policy: Policy,
}

#[derive(Serialize)]
struct PointReport {
    t: F17,
    #[serde(rename = "Q")]
    q: F17,
    uc: F17,
    evc: F17,
}

#[derive(Serialize)]
struct CurveReport {
    t0: F17,
    curve: Vec<PointReport>,
}

#[derive(Serialize)]
struct SelectionReport {
    t0: F17,
    curve: Vec<PointReport>,
    t_star: F17,
    model: String,
    meu: F17,
}

fn points(curve: &EvcCurve) -> Vec<PointReport> {
    curve
        .points
        .iter()
        .map(|p| PointReport { t: F17(p.t), q: F17(p.quality), uc: F17(p.comprehensive), evc: F17(p.evc) })
        .collect()
}

impl Selection {
    /// `{t0, curve: [{t, Q, uc, evc}], t_star, model, meu}`.
    pub fn report(&self) -> String {
        to_json(&SelectionReport {
            t0: F17(self.curve.t0),
            curve: points(&self.curve),
            t_star: F17(self.curve.t_star),
            model: self.model_id.clone(),
            meu: F17(self.policy.meu),
        })
    }
}

/// Loads, filters, solves and costs the knowledge base.
fn prepare(spec: &ProblemSpec, kb: &Path) -> Result<(Vec<KbEntry>, Vec<SuiteEntry>), MetaError> {
    if !(spec.time_unit.is_finite() && spec.time_unit > 0.0) {
        return Err(MetaError::CostModel(format!("time unit must be positive, got {}", spec.time_unit)));
    }
    let mut entries: Vec<KbEntry> = load_kb(kb)?
        .into_iter()
        .filter(|e| spec.tags.iter().all(|t| e.suite.tags.contains(t)))
        .collect();
    if entries.is_empty() {
        return Err(MetaError::EmptyKnowledgeBase);
    }

    let measure = matches!(spec.cost_model, Some(CostModel::Measured));
    let results: Vec<Option<Result<(f64, f64), MetaError>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = entries
            .iter()
            .map(|e| {
                let needed = e.suite.quality.is_none() || (measure && e.suite.measured.is_none());
                needed.then(|| scope.spawn(move || timed_solve(&e.suite.id, &e.model)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.map(|h| h.join().expect("solver thread panicked")))
            .collect()
    });
    for (entry, result) in entries.iter_mut().zip(results) {
        if let Some(result) = result {
            let (meu, seconds) = result?;
            entry.suite.quality.get_or_insert(meu);
            entry.suite.measured.get_or_insert(seconds);
        }
    }

    let mut suite = Vec::with_capacity(entries.len());
    for entry in &entries {
        let cost = match (entry.cost, &spec.cost_model) {
            (Some(c), _) => c,
            (None, Some(model)) => estimate_cost(&entry.suite, model)?,
            (None, None) => return Err(MetaError::MissingCost { id: entry.suite.id.clone() }),
        };
        suite.push(SuiteEntry { cost_time: cost / spec.time_unit, ..entry.suite.clone() });
    }

    if let Some(deadline) = spec.deadline {
        let keep: Vec<bool> = suite.iter().map(|e| e.cost_time <= deadline).collect();
        let mut flags = keep.iter();
        entries.retain(|_| *flags.next().unwrap());
        suite.retain(|e| e.cost_time <= deadline);
        if suite.is_empty() {
            return Err(MetaError::InfeasibleDeadline { deadline });
        }
    }
    Ok((entries, suite))
}

/// Runs the whole pipeline and returns the curve, the winner and its policy.
pub fn construct(spec: &ProblemSpec, kb: &Path) -> Result<Selection, MetaError> {
    let (entries, suite) = prepare(spec, kb)?;
    let curve = select(&suite, &spec.urgency, spec.t0)?;
    let winner = &entries[curve.best_model];
    let id = winner.suite.id.clone();
    let model = apply_edits(&winner.model, &spec.edits)
        .map_err(|source| MetaError::Abstraction { id: id.clone(), source })?;
    let deployed = deploy(&model).map_err(|source| MetaError::Deploy { id: id.clone(), source })?;
    let policy = solve(&deployed).map_err(|source| MetaError::Solve { id: id.clone(), source })?;
    Ok(Selection { suite, curve, model_id: id, deployed, policy })
}

/// `{t0, curve}` for the knowledge base, without solving the winner again.
pub fn evc_report(spec: &ProblemSpec, kb: &Path) -> Result<String, MetaError> {
    let (_, suite) = prepare(spec, kb)?;
    let curve = select(&suite, &spec.urgency, spec.t0)?;
    Ok(to_json(&CurveReport { t0: F17(curve.t0), curve: points(&curve) }))
}
