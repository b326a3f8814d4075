//! `elicit` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use elicit_core::evaluation::{deferral_curve, recall_at_k, weighted_precision_recall, DEFAULT_ANNOTATOR_ACCURACY};
use elicit_core::{Corpus, DeferralPolicy, ProjectConfig, SessionState};

use crate::export::{render, ExportFormat};
use crate::ingest::{detect_format, ingest, write_corpus, InputFormat};
use crate::lfs::{run_all_lfs, HttpTransport};
use crate::project::{load_project, ProjectError};
use crate::store::{load_state, read_candidates, read_json, write_json, write_jsonl, EventLog, FitArtifact};
use crate::workflow::{fit_project, load_fit, open_session, read_gold};

pub const SYNOPSIS: &str = "usage: elicit <ingest|run-lfs|fit|plan|serve|export|eval|simulate> --config <project.yaml> [--seed N] [--out PATH] [options]";

#[derive(Debug, Parser)]
#[command(name = "elicit", version, about = "Extract variables from documents with ranked, human-validated explanations")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Project file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the project's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout where a command prints a table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Text directory, documents JSONL or chat JSONL.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reads documents and writes them as JSONL.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Runs every labeling function and writes candidates as JSONL.
    RunLfs {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Groups candidates and fits the label model.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        candidates: PathBuf,
        /// Session log whose confirm/reject decisions drive calibration and the refit penalty.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Weight of the validation penalty.
        #[arg(long, default_value_t = elicit_core::schema::DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Loads a fit into the session log (created if missing) and plans deferral.
    Plan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        fit: PathBuf,
        /// Defer the ceil(q*N) least confident items.
        #[arg(long, conflicts_with = "threshold")]
        budget: Option<f64>,
        /// Defer items with confidence below this value.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Serves the validation API over the session log given by --out.
    Serve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Writes the dataset table or provenance.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Csv)]
        format: ExportFormat,
    },
    /// Scores the session's final values against gold labels.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Sweeps deferral budgets with a simulated annotator and writes CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Comma-separated budgets.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        budgets: Vec<f64>,
        /// Probability that a simulated decision is correct.
        #[arg(long, default_value_t = DEFAULT_ANNOTATOR_ACCURACY)]
        accuracy: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<ProjectError> for CliError {
    fn from(e: ProjectError) -> Self {
        data(e)
    }
}

/// Parses `argv` and runs the command, printing errors to stderr.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            eprintln!("{SYNOPSIS}");
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("{SYNOPSIS}");
            }
            e.exit_code()
        }
    }
}

fn read_corpus(args: &CorpusArgs) -> Result<Corpus, CliError> {
    let format = match args.format {
        Some(f) => f,
        None => detect_format(&args.corpus).map_err(data)?,
    };
    ingest(&args.corpus, format).map_err(data)
}

fn project(common: &Common) -> Result<ProjectConfig, CliError> {
    let mut config = load_project(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn require_out(common: &Common) -> Result<&Path, CliError> {
    common.out.as_deref().ok_or_else(|| CliError::Usage("--out is required for this command".into()))
}

fn emit(common: &Common, bytes: &[u8]) -> Result<(), CliError> {
    match &common.out {
        Some(p) => fs::write(p, bytes).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(data),
    }
}

fn session(log: &Path) -> Result<SessionState, CliError> {
    load_state(log).map_err(data)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { common, corpus } => {
            project(&common)?;
            let out = require_out(&common)?;
            let c = read_corpus(&corpus)?;
            write_corpus(&c, out).map_err(data)?;
            println!("{} documents", c.len());
        }
        Command::RunLfs { common, corpus } => {
            let config = project(&common)?;
            let out = require_out(&common)?;
            let c = read_corpus(&corpus)?;
            let run = run_all_lfs(&config, &c, &HttpTransport).map_err(data)?;
            write_jsonl(out, &run.candidates).map_err(data)?;
            if !run.failures.is_empty() {
                let mut name = out.as_os_str().to_owned();
                name.push(".failures.jsonl");
                write_jsonl(Path::new(&name), &run.failures).map_err(data)?;
            }
            println!("{} candidates, {} labeling-function failures", run.candidates.len(), run.failures.len());
        }
        Command::Fit { common, candidates, log, alpha } => {
            let config = project(&common)?;
            let out = require_out(&common)?;
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(CliError::Usage(format!("--alpha must be a non-negative number, got {alpha}")));
            }
            let cands = read_candidates(&candidates).map_err(data)?;
            let state = log.as_deref().map(session).transpose()?;
            let artifact = fit_project(&config, &cands, state.as_ref(), alpha).map_err(data)?;
            write_json(out, &artifact).map_err(data)?;
            for f in &artifact.fits {
                match (&f.fit, &f.error) {
                    (Some(fit), _) => println!("{}: {} rows, weights {:?}", f.variable_id, f.rows, fit.weights),
                    (None, e) => println!("{}: {} rows, no fit ({})", f.variable_id, f.rows, e.as_deref().unwrap_or("")),
                }
            }
        }
        Command::Plan { common, corpus, fit, budget, threshold } => {
            let config = project(&common)?;
            let out = require_out(&common)?;
            let c = read_corpus(&corpus)?;
            let artifact: FitArtifact = read_json(&fit).map_err(data)?;
            let (mut log, mut state) = if out.exists() {
                EventLog::open(out).map_err(data)?
            } else {
                let s = open_session(&config, &c).map_err(data)?;
                (EventLog::create(out, &s.log).map_err(data)?, s)
            };
            let before = state.log.len();
            let alerts = load_fit(&mut state, &artifact).map_err(data)?;
            let policy = match (budget, threshold) {
                (Some(q), _) => Some(DeferralPolicy::Budget(q)),
                (_, Some(t)) => Some(DeferralPolicy::Threshold(t)),
                _ => config.deferral,
            };
            let plan = policy.map(|p| state.plan_deferral(p)).transpose().map_err(data)?;
            log.append_since(&state, before).map_err(data)?;
            println!("{} groups loaded, {alerts} new alerts", artifact.groups.len());
            if let Some(plan) = plan {
                println!("{} items to annotators, {} automatic", plan.human.len(), plan.auto.len());
            }
        }
        Command::Serve { common, corpus, addr } => {
            project(&common)?;
            let out = require_out(&common)?;
            let c = read_corpus(&corpus)?;
            let (log, state) = EventLog::open(out).map_err(data)?;
            let app = crate::server::App::new(c, state, log);
            let rt = tokio::runtime::Runtime::new().map_err(data)?;
            rt.block_on(crate::server::serve(addr, app)).map_err(data)?;
        }
        Command::Export { common, log, format } => {
            project(&common)?;
            emit(&common, &render(&session(&log)?, format))?;
        }
        Command::Eval { common, log, gold } => {
            project(&common)?;
            let state = session(&log)?;
            let gold = read_gold(&gold).map_err(data)?;
            let finals = state.final_values();
            let predictions = gold.iter().map(|g| (g.key(), finals.get(&g.key()).cloned().flatten())).collect();
            let mut report = weighted_precision_recall(&predictions, &gold).map_err(data)?;
            report.timing = Some(elicit_core::evaluation::timing_summary(&state.validations));
            let json = serde_json::to_vec_pretty(&report).expect("reports serialize");
            eprintln!("precision {:.4} recall {:.4} f1 {:.4}", report.precision, report.recall, report.f1);
            emit(&common, &json)?;
        }
        Command::Simulate { common, log, gold, budgets, accuracy } => {
            let config = project(&common)?;
            let state = session(&log)?;
            let gold = read_gold(&gold).map_err(data)?;
            let curve = deferral_curve(&state, &gold, &budgets, accuracy, config.seed).map_err(data)?;
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            for point in &curve {
                w.serialize(point).map_err(data)?;
            }
            eprintln!("recall@k {:.4}", recall_at_k(&state, &gold));
            emit(&common, &w.into_inner().map_err(data)?)?;
        }
    }
    Ok(())
}
