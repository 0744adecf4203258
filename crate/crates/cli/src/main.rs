//! `tdid` command-line tool.
//!
//! Exit codes: 0 success, 1 domain error, 2 I/O error, 3 oracle mismatch,
//! 4 resource cap exceeded.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use tdid::abstraction::{apply_edits, parse_sequence, AbstractionError, Edit};
use tdid::deploy::{deploy, serialize_deployed, to_dot, DeployError};
use tdid::metareason::{construct, evc_report, CostModel, MetaError, ProblemSpec, UrgencyFunction};
use tdid::model::{parse, serialize, validate, CondensedTdid};
use tdid::solve::{brute_force, policies_agree, solve, SolveError, DEFAULT_ORACLE_CAP};

const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "tdid", version, about = "Time-critical dynamic influence diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a condensed model; violations go to standard error.
    Validate { path: PathBuf },
    /// Unroll a condensed model into its deployed form.
    Deploy {
        path: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also emit a Graphviz description (to `<out>.dot`, or after the model on stdout).
        #[arg(long)]
        emit_dot: bool,
    },
    /// Print the optimal policy as JSON.
    Solve {
        path: PathBuf,
        /// Cross-check against exhaustive enumeration (cap: TDID_ORACLE_CAP).
        #[arg(long)]
        oracle: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Apply abstraction edits in the order given.
    Abstract {
        path: PathBuf,
        #[command(flatten)]
        edits: EditArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Choose a model from a knowledge base by EVC and solve it.
    Select {
        kb: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        edits: EditArgs,
        /// Write the winner's policy JSON here.
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Print the EVC curve of a knowledge base.
    Evc {
        kb: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
    },
}

#[derive(Args)]
struct EditArgs {
    /// `VAR=1,3` or `all=1,3`.
    #[arg(long, value_name = "VAR=SEQ")]
    retime: Vec<String>,
    /// Comma-separated variables to remove.
    #[arg(long, value_name = "VARS")]
    drop: Vec<String>,
}

#[derive(Args)]
struct ProblemArgs {
    /// `linear:RATE`, `step:DEADLINE,PENALTY` or `table:T=U,...`.
    #[arg(long)]
    urgency: String,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long)]
    deadline: Option<f64>,
    /// Seconds per urgency time unit; knowledge-base costs are divided by it.
    #[arg(long)]
    time_unit: f64,
    /// Keep only entries carrying this tag (repeatable).
    #[arg(long)]
    tag: Vec<String>,
    /// Costs entries without one: `analytic:ALPHA,BETA` or `measured`.
    #[arg(long)]
    cost_model: Option<String>,
}

enum Failure {
    Domain(String),
    Io(String),
    Mismatch(String),
    Cap(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Io(_) => 2,
            Failure::Mismatch(_) => 3,
            Failure::Cap(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Io(m) | Failure::Mismatch(m) | Failure::Cap(m) => m,
        }
    }
}

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::OracleTooLarge { .. } | SolveError::SearchTooLarge { .. } => Failure::Cap(e.to_string()),
            other => domain(other),
        }
    }
}

impl From<DeployError> for Failure {
    fn from(e: DeployError) -> Self {
        domain(e)
    }
}

impl From<AbstractionError> for Failure {
    fn from(e: AbstractionError) -> Self {
        domain(e)
    }
}

impl From<MetaError> for Failure {
    fn from(e: MetaError) -> Self {
        match e {
            MetaError::Io { .. } => Failure::Io(e.to_string()),
            MetaError::Solve { source: SolveError::SearchTooLarge { .. }, .. } => Failure::Cap(e.to_string()),
            other => domain(other),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<CondensedTdid, Failure> {
    parse(&read(path)?).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `--retime` and `--drop` edits in command-line order.
fn ordered_edits(matches: Option<&ArgMatches>, args: &EditArgs) -> Result<Vec<Edit>, Failure> {
    let positions = |id: &str| -> Vec<usize> {
        matches
            .and_then(|m| m.indices_of(id))
            .map(|i| i.collect())
            .unwrap_or_default()
    };
    let mut tagged: Vec<(usize, Edit)> = Vec::new();
    for (pos, text) in positions("retime").into_iter().zip(&args.retime) {
        let (var, seq) = text
            .split_once('=')
            .ok_or_else(|| Failure::Domain(format!("--retime `{text}`: expected VAR=SEQ")))?;
        let times = parse_sequence(seq).ok_or_else(|| Failure::Domain(format!("--retime `{text}`: bad time sequence")))?;
        let variable = (var != "all").then(|| var.to_string());
        tagged.push((pos, Edit::Retime { variable, times }));
    }
    for (pos, text) in positions("drop").into_iter().zip(&args.drop) {
        let names = text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
        tagged.push((pos, Edit::Drop(names)));
    }
    tagged.sort_by_key(|(pos, _)| *pos);
    Ok(tagged.into_iter().map(|(_, e)| e).collect())
}

fn problem_spec(args: &ProblemArgs, edits: Vec<Edit>) -> Result<ProblemSpec, Failure> {
    let urgency: UrgencyFunction = args.urgency.parse().map_err(domain)?;
    let mut spec = ProblemSpec::new(urgency, args.t0);
    spec.deadline = args.deadline;
    spec.time_unit = args.time_unit;
    spec.tags = args.tag.clone();
    spec.cost_model = args
        .cost_model
        .as_deref()
        .map(str::parse::<CostModel>)
        .transpose()
        .map_err(domain)?;
    spec.edits = edits;
    Ok(spec)
}

fn oracle_cap() -> Result<u64, Failure> {
    match std::env::var("TDID_ORACLE_CAP") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Domain(format!("TDID_ORACLE_CAP=`{v}` is not a count"))),
        Err(_) => Ok(DEFAULT_ORACLE_CAP),
    }
}

fn run(command: Command, matches: &ArgMatches) -> Result<(), Failure> {
    match command {
        Command::Validate { path } => {
            let model = load(&path)?;
            let violations = validate(&model);
            if violations.is_empty() {
                return Ok(());
            }
            for v in &violations {
                eprintln!("{v}");
            }
            Err(Failure::Domain(format!("{}: {} violation(s)", path.display(), violations.len())))
        }
        Command::Deploy { path, out, emit_dot } => {
            let did = deploy(&load(&path)?)?;
            let text = serialize_deployed(&did);
            match (&out, emit_dot) {
                (Some(out), true) => {
                    emit(Some(out), &text)?;
                    let mut dot_path = out.clone().into_os_string();
                    dot_path.push(".dot");
                    emit(Some(Path::new(&dot_path)), &to_dot(&did))
                }
                (None, true) => emit(None, &format!("{text}{}", to_dot(&did))),
                (_, false) => emit(out.as_deref(), &text),
            }
        }
        Command::Solve { path, oracle, out } => {
            let did = deploy(&load(&path)?)?;
            let policy = solve(&did)?;
            if oracle {
                let reference = brute_force(&did, oracle_cap()?)?;
                if (reference.meu - policy.meu).abs() > ORACLE_TOLERANCE {
                    return Err(Failure::Mismatch(format!(
                        "MEU {} differs from exhaustive {}",
                        policy.meu, reference.meu
                    )));
                }
                if !policies_agree(&did, &policy, &reference, ORACLE_TOLERANCE)? {
                    return Err(Failure::Mismatch("policy differs from exhaustive optimum".into()));
                }
            }
            emit(out.as_deref(), &policy.to_json(&did))
        }
        Command::Abstract { path, edits, out } => {
            let edits = ordered_edits(matches.subcommand_matches("abstract"), &edits)?;
            let model = apply_edits(&load(&path)?, &edits)?;
            emit(out.as_deref(), &serialize(&model))
        }
        Command::Select { kb, problem, edits, policy_out } => {
            let edits = ordered_edits(matches.subcommand_matches("select"), &edits)?;
            let selection = construct(&problem_spec(&problem, edits)?, &kb)?;
            if let Some(path) = policy_out {
                emit(Some(&path), &selection.policy.to_json(&selection.deployed))?;
            }
            emit(None, &selection.report())
        }
        Command::Evc { kb, problem } => emit(None, &evc_report(&problem_spec(&problem, Vec::new())?, &kb)?),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli.command, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
