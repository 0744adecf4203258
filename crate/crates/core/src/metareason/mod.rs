//! Choosing how long to deliberate and which abstraction to solve.
//!
//! A suite holds candidate models with their solved quality `u*` and their
//! computation cost. Quality reachable within time `t` is
//! `Q(t) = max { u* : cost <= t }`; the comprehensive value of deliberating
//! for `t` is `Q(t) - u_i(t)` for an urgency function `u_i`; and the value of
//! computation relative to an already committed `t0` is
//! `EVC(t) = [Q(t) - Q(t0)] - [u_i(t) - u_i(t0)]`. Selection maximizes EVC.
//! Costs and urgency are assumed to be in the same (utility) units.

mod construct;
mod kb;

pub use construct::{construct, evc_report, ProblemSpec, Selection};
pub use kb::{calibrate, load_kb, write_entry, KbEntry};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::abstraction::AbstractionError;
use crate::deploy::DeployError;
use crate::model::ParseError;
use crate::solve::SolveError;

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("suite is empty")]
    EmptySuite,
    #[error("no model can be computed within t = {t}")]
    EmptyFeasibleSet { t: f64 },
    #[error("model `{id}` has not been solved")]
    MissingQuality { id: String },
    #[error("model `{id}` has no recorded solve time")]
    MissingMeasurement { id: String },
    #[error("model `{id}` has no cost and no cost model was given")]
    MissingCost { id: String },
    #[error("t = {t} precedes t0 = {t0}")]
    BeforeT0 { t: f64, t0: f64 },
    #[error("invalid urgency: {0}")]
    Urgency(String),
    #[error("invalid cost model: {0}")]
    CostModel(String),
    #[error("knowledge base has no usable models")]
    EmptyKnowledgeBase,
    #[error("no model can be computed before the deadline {deadline}")]
    InfeasibleDeadline { deadline: f64 },
    #[error("{path}: {message}")]
    Manifest { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("model `{id}`: {source}")]
    Deploy { id: String, source: DeployError },
    #[error("model `{id}`: {source}")]
    Solve { id: String, source: SolveError },
    #[error("model `{id}`: {source}")]
    Abstraction { id: String, source: AbstractionError },
}

/// One candidate model of a suite. `cost_time` is the cost used for
/// selection; `measured` is a recorded wall-clock solve time in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub id: String,
    pub quality: Option<f64>,
    pub cost_time: f64,
    pub space_size: u64,
    pub n_intervals: u32,
    pub measured: Option<f64>,
    pub tags: Vec<String>,
}

impl SuiteEntry {
    pub fn solved(id: impl Into<String>, quality: f64, cost_time: f64) -> Self {
        SuiteEntry {
            id: id.into(),
            quality: Some(quality),
            cost_time,
            space_size: 1,
            n_intervals: 1,
            measured: None,
            tags: Vec::new(),
        }
    }
}

/// Inference-related cost of deliberating for `t`. All variants are
/// nondecreasing in `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum UrgencyFunction {
    /// `rate · t`.
    Linear { rate: f64 },
    /// `0` up to and including `deadline`, `penalty` after it.
    Step { deadline: f64, penalty: f64 },
    /// Piecewise-linear through `(t, u)` points, constant beyond both ends.
    Tabulated { points: Vec<(f64, f64)> },
}

impl UrgencyFunction {
    pub fn linear(rate: f64) -> Result<Self, MetaError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(MetaError::Urgency(format!("rate must be finite and >= 0, got {rate}")));
        }
        Ok(UrgencyFunction::Linear { rate })
    }

    pub fn step(deadline: f64, penalty: f64) -> Result<Self, MetaError> {
        if !(deadline.is_finite() && penalty.is_finite() && penalty >= 0.0) {
            return Err(MetaError::Urgency("step needs a finite deadline and a penalty >= 0".into()));
        }
        Ok(UrgencyFunction::Step { deadline, penalty })
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self, MetaError> {
        if points.is_empty() || points.iter().any(|(t, u)| !t.is_finite() || !u.is_finite()) {
            return Err(MetaError::Urgency("table needs at least one finite point".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(MetaError::Urgency("table times must increase".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(MetaError::Urgency("table values must not decrease".into()));
            }
        }
        Ok(UrgencyFunction::Tabulated { points })
    }

    pub fn cost(&self, t: f64) -> f64 {
        match self {
            UrgencyFunction::Linear { rate } => rate * t,
            UrgencyFunction::Step { deadline, penalty } => {
                if t > *deadline {
                    *penalty
                } else {
                    0.0
                }
            }
            UrgencyFunction::Tabulated { points } => {
                let k = points.partition_point(|&(x, _)| x <= t);
                if k == 0 {
                    return points[0].1;
                }
                if k == points.len() {
                    return points[k - 1].1;
                }
                let (x0, y0) = points[k - 1];
                let (x1, y1) = points[k];
                y0 + (y1 - y0) * (t - x0) / (x1 - x0)
            }
        }
    }
}

fn numbers(text: &str, what: &str) -> Result<Vec<f64>, MetaError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| MetaError::Urgency(format!("`{s}` is not a number in {what}"))))
        .collect()
}

/// `linear:<rate>`, `step:<deadline>,<penalty>` or `table:<t>=<u>,<t>=<u>,...`.
impl FromStr for UrgencyFunction {
    type Err = MetaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| MetaError::Urgency(format!("`{s}`: expected <kind>:<parameters>")))?;
        match kind {
            "linear" => match numbers(args, "linear")?[..] {
                [rate] => UrgencyFunction::linear(rate),
                _ => Err(MetaError::Urgency("linear takes one rate".into())),
            },
            "step" => match numbers(args, "step")?[..] {
                [d, p] => UrgencyFunction::step(d, p),
                _ => Err(MetaError::Urgency("step takes a deadline and a penalty".into())),
            },
            "table" => {
                let points = args
                    .split(',')
                    .map(|pair| {
                        let (t, u) = pair
                            .split_once('=')
                            .ok_or_else(|| MetaError::Urgency(format!("`{pair}`: expected t=u")))?;
                        let t = numbers(t, "table")?[0];
                        let u = numbers(u, "table")?[0];
                        Ok((t, u))
                    })
                    .collect::<Result<Vec<_>, MetaError>>()?;
                UrgencyFunction::tabulated(points)
            }
            other => Err(MetaError::Urgency(format!("unknown urgency kind `{other}`"))),
        }
    }
}

impl fmt::Display for UrgencyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UrgencyFunction::Linear { rate } => write!(f, "linear:{rate}"),
            UrgencyFunction::Step { deadline, penalty } => write!(f, "step:{deadline},{penalty}"),
            UrgencyFunction::Tabulated { points } => {
                let parts: Vec<String> = points.iter().map(|(t, u)| format!("{t}={u}")).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

/// How to cost a model that has no explicit cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    /// `alpha · S + beta`, where `S` counts deployed table entries.
    Analytic { alpha: f64, beta: f64 },
    /// The recorded solve time.
    Measured,
}

impl FromStr for CostModel {
    type Err = MetaError;

    /// `measured` or `analytic:<alpha>,<beta>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "measured" {
            return Ok(CostModel::Measured);
        }
        let args = s
            .strip_prefix("analytic:")
            .ok_or_else(|| MetaError::CostModel(format!("`{s}`: expected measured or analytic:<alpha>,<beta>")))?;
        let parsed: Vec<f64> = args
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| MetaError::CostModel(format!("`{x}` is not a number"))))
            .collect::<Result<_, _>>()?;
        match parsed[..] {
            [alpha, beta] if alpha >= 0.0 && beta >= 0.0 => Ok(CostModel::Analytic { alpha, beta }),
            _ => Err(MetaError::CostModel("analytic needs alpha >= 0 and beta >= 0".into())),
        }
    }
}

pub fn estimate_cost(entry: &SuiteEntry, model: &CostModel) -> Result<f64, MetaError> {
    match *model {
        CostModel::Analytic { alpha, beta } => Ok(alpha * entry.space_size as f64 + beta),
        CostModel::Measured => entry.measured.ok_or_else(|| MetaError::MissingMeasurement { id: entry.id.clone() }),
    }
}

/// `u* - C` for one model.
pub fn comprehensive_value(entry: &SuiteEntry) -> Result<f64, MetaError> {
    let quality = entry.quality.ok_or_else(|| MetaError::MissingQuality { id: entry.id.clone() })?;
    Ok(quality - entry.cost_time)
}

/// `Q(t)` and the index of the entry attaining it. Ties prefer the cheaper
/// entry, then the earlier one.
pub fn quality(suite: &[SuiteEntry], t: f64) -> Result<(f64, usize), MetaError> {
    if suite.is_empty() {
        return Err(MetaError::EmptySuite);
    }
    let mut best: Option<(f64, usize)> = None;
    for (k, entry) in suite.iter().enumerate().filter(|(_, e)| e.cost_time <= t) {
        let q = entry.quality.ok_or_else(|| MetaError::MissingQuality { id: entry.id.clone() })?;
        let better = match best {
            None => true,
            Some((bq, bk)) => q > bq || (q == bq && entry.cost_time < suite[bk].cost_time),
        };
        if better {
            best = Some((q, k));
        }
    }
    best.ok_or(MetaError::EmptyFeasibleSet { t })
}

pub fn evc(suite: &[SuiteEntry], urgency: &UrgencyFunction, t0: f64, t: f64) -> Result<f64, MetaError> {
    if t < t0 {
        return Err(MetaError::BeforeT0 { t, t0 });
    }
    let (q0, _) = quality(suite, t0)?;
    let (q, _) = quality(suite, t)?;
    Ok((q - q0) - (urgency.cost(t) - urgency.cost(t0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvcPoint {
    pub t: f64,
    pub quality: f64,
    /// `Q(t) - u_i(t)`.
    pub comprehensive: f64,
    pub evc: f64,
    /// Suite index attaining `Q(t)`.
    pub model: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvcCurve {
    pub t0: f64,
    pub points: Vec<EvcPoint>,
    pub t_star: f64,
    pub best_model: usize,
}

impl EvcCurve {
    pub fn best_point(&self) -> &EvcPoint {
        self.points.iter().find(|p| p.t == self.t_star).expect("t* is a curve point")
    }
}

/// Evaluates EVC at `t0` and at every distinct cost above it; `Q` only
/// changes at costs and urgency never decreases, so the maximum over all
/// `t >= t0` is attained at one of these. Ties go to the smaller `t`.
pub fn select(suite: &[SuiteEntry], urgency: &UrgencyFunction, t0: f64) -> Result<EvcCurve, MetaError> {
    let (q0, _) = quality(suite, t0)?;
    let u0 = urgency.cost(t0);
    let mut candidates: Vec<f64> = suite.iter().map(|e| e.cost_time).filter(|&c| c > t0).collect();
    candidates.push(t0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut points = Vec::with_capacity(candidates.len());
    let mut star = 0;
    for t in candidates {
        let (q, model) = quality(suite, t)?;
        let u = urgency.cost(t);
        let point = EvcPoint { t, quality: q, comprehensive: q - u, evc: (q - q0) - (u - u0), model };
        if point.evc > points.get(star).map_or(f64::NEG_INFINITY, |p: &EvcPoint| p.evc) {
            star = points.len();
        }
        points.push(point);
    }
    let t_star = points[star].t;
    let best_model = points[star].model;
    Ok(EvcCurve { t0, points, t_star, best_model })
}
