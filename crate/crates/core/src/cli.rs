//! Command-line front end. Every command composes library operations; exit
//! status 0 is success, 1 a domain error (parse, check, evaluation,
//! correlation, invalid scenario) and 2 an I/O or usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::builtins::load_builtin;
use crate::engine::score_trace;
use crate::frontend::{check_od, check_structure, parse_od, CheckedOd, OracleDefinition};
use crate::rank::{
    matrix_from_ranks, mean_scores, rank_solutions, read_ranks, read_scores, score_table, spearman, write_matrix,
    write_ranks, write_scores, RankError, ScoreRow,
};
use crate::scenario::{generate, ScenarioError, ScenarioSpec};
use crate::trace::{json_num, parse_trace, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// Prefix selecting a bundled oracle instead of a file, as in `builtin:listing1`.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Parser)]
#[command(name = "odl", version, about = "Score timed traces against oracle definitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse an oracle definition and, given a trace, type-check it against the trace schema
    Check {
        #[arg(long)]
        od: String,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score one trace
    Score {
        #[arg(long)]
        od: String,
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Score every trace matching a glob; files are named `<solution>__<trace>.jsonl`
    Batch {
        #[arg(long)]
        od: String,
        #[arg(long)]
        traces: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average scores per solution and rank them, best first
    Rank {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spearman correlation of two rankings, or the matrix of several
    Compare {
        #[arg(long = "ranks", required = true, num_args = 1)]
        ranks: Vec<PathBuf>,
        /// Print the matrix even for two rankings
        #[arg(long)]
        matrix: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a trace from a scenario file
    Gen {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
    /// Include every firing in the report
    #[arg(long)]
    log_firings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Machine,
}

#[derive(Debug)]
struct Failure {
    status: i32,
    message: String,
}

impl Failure {
    fn domain(message: impl Into<String>) -> Self {
        Failure {
            status: EXIT_DOMAIN,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            status: EXIT_IO,
            message: message.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_IO;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Check { od, trace } => cmd_check(&od, trace.as_deref(), stdout, stderr),
        Command::Score { od, trace, report } => cmd_score(&od, &trace, &report, stdout),
        Command::Batch { od, traces, out } => cmd_batch(&od, &traces, out.as_deref(), stdout),
        Command::Rank { scores, out } => cmd_rank(&scores, out.as_deref(), stdout),
        Command::Compare { ranks, matrix, out } => cmd_compare(&ranks, matrix, out.as_deref(), stdout),
        Command::Gen { scenario, seed, out } => cmd_gen(&scenario, seed, out.as_deref(), stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.status
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn load_od(spec: &str) -> Result<OracleDefinition, Failure> {
    let (label, source) = match spec.strip_prefix(BUILTIN_PREFIX) {
        Some(name) => (spec.to_string(), load_builtin(name).map_err(|e| Failure::io(e.to_string()))?.to_string()),
        None => (spec.to_string(), read_text(Path::new(spec))?),
    };
    parse_od(&source).map_err(|e| Failure::domain(format!("{label}:{e}")))
}

fn load_trace(path: &Path) -> Result<Trace, Failure> {
    let file = File::open(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    parse_trace(BufReader::new(file)).map_err(|e| {
        let message = format!("{}: {e}", path.display());
        if e.is_io() {
            Failure::io(message)
        } else {
            Failure::domain(message)
        }
    })
}

fn checked(od: &OracleDefinition, label: &str, trace: &Trace) -> Result<CheckedOd, Failure> {
    check_od(od, trace.schema()).map_err(|e| Failure::domain(format!("{label}: {e}")))
}

/// Writes to `out` when given, otherwise to standard output.
fn emit(out: Option<&Path>, stdout: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Outcome {
    let result = match out {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush()
        }),
        None => body(stdout),
    };
    result.map_err(|e| Failure::io(format!("{}: {e}", out.map_or("<stdout>".into(), |p| p.display().to_string()))))
}

fn cmd_check(od_spec: &str, trace: Option<&Path>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let od = load_od(od_spec)?;
    match trace {
        Some(path) => {
            let trace = load_trace(path)?;
            checked(&od, od_spec, &trace)?;
        }
        None => {
            check_structure(&od).map_err(|e| Failure::domain(format!("{od_spec}: {e}")))?;
            let _ = writeln!(stderr, "warning: no trace given; field names and types are unverified");
        }
    }
    emit(None, stdout, |w| {
        writeln!(w, "{od_spec}: ok ({} scoring functions)", od.functions.len())
    })
}

fn cmd_score(od_spec: &str, trace_path: &Path, report: &ReportArgs, stdout: &mut dyn Write) -> Outcome {
    let od = load_od(od_spec)?;
    let trace = load_trace(trace_path)?;
    let od = checked(&od, od_spec, &trace)?;
    let result = score_trace(&od, &trace).map_err(|e| Failure::domain(format!("{}: {e}", trace_path.display())))?;
    let body = match report.report {
        ReportFormat::Text => result.to_text(report.log_firings),
        ReportFormat::Machine => result.to_machine(report.log_firings) + "\n",
    };
    emit(None, stdout, |w| w.write_all(body.as_bytes()))
}

/// Splits `<solution>__<trace>.jsonl` into its two ids.
pub fn split_trace_name(path: &Path) -> Option<(String, String)> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".jsonl")?;
    let (solution, trace) = stem.split_once("__")?;
    (!solution.is_empty() && !trace.is_empty()).then(|| (solution.to_string(), trace.to_string()))
}

fn cmd_batch(od_spec: &str, pattern: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    let od = load_od(od_spec)?;
    let paths = glob::glob(pattern).map_err(|e| Failure::io(format!("bad glob {pattern:?}: {e}")))?;
    let mut jobs = Vec::new();
    for entry in paths {
        let path = entry.map_err(|e| Failure::io(e.to_string()))?;
        let (solution, trace) = split_trace_name(&path).ok_or_else(|| {
            Failure::io(format!(
                "{}: trace files must be named <solution>__<trace>.jsonl",
                path.display()
            ))
        })?;
        jobs.push((solution, trace, path));
    }
    if jobs.is_empty() {
        return Err(Failure::io(format!("no traces match {pattern:?}")));
    }

    let scored: Vec<Result<ScoreRow, Failure>> = jobs
        .par_iter()
        .map(|(solution, trace_id, path)| {
            let trace = load_trace(path)?;
            let od = checked(&od, od_spec, &trace)?;
            let report = score_trace(&od, &trace).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
            Ok(ScoreRow {
                solution: solution.clone(),
                trace: trace_id.clone(),
                score: report.summary,
            })
        })
        .collect();
    // glob yields paths in sorted order, so the reported failure is deterministic
    let mut rows = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| (&a.solution, &a.trace).cmp(&(&b.solution, &b.trace)));
    if let Some(w) = rows.windows(2).find(|w| (&w[0].solution, &w[0].trace) == (&w[1].solution, &w[1].trace)) {
        return Err(Failure::io(format!("duplicate trace {}__{}", w[0].solution, w[0].trace)));
    }
    emit(out, stdout, |w| write_scores(w, &rows))
}

fn rank_failure(path: &Path, e: RankError) -> Failure {
    Failure::domain(format!("{}: {e}", path.display()))
}

fn cmd_rank(scores: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    let file = File::open(scores).map_err(|e| Failure::io(format!("{}: {e}", scores.display())))?;
    let rows = read_scores(BufReader::new(file)).map_err(|e| rank_failure(scores, e))?;
    let means = mean_scores(&score_table(&rows)).map_err(|e| rank_failure(scores, e))?;
    let ranks = rank_solutions(&means);
    emit(out, stdout, |w| write_ranks(w, &ranks))
}

fn cmd_compare(paths: &[PathBuf], matrix: bool, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    if paths.len() < 2 {
        return Err(Failure::io("compare needs at least two --ranks files"));
    }
    let mut ranks = Vec::with_capacity(paths.len());
    for path in paths {
        let file = File::open(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        ranks.push(read_ranks(BufReader::new(file)).map_err(|e| rank_failure(path, e))?);
    }
    if paths.len() == 2 && !matrix {
        let rho = spearman(&ranks[0], &ranks[1]).map_err(|e| Failure::domain(e.to_string()))?;
        return emit(out, stdout, |w| writeln!(w, "{}", json_num(rho)));
    }
    let m = matrix_from_ranks(&ranks).map_err(|e| Failure::domain(e.to_string()))?;
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
        .collect();
    emit(out, stdout, |w| write_matrix(w, &names, &m))
}

fn cmd_gen(scenario: &Path, seed: u64, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    let text = read_text(scenario)?;
    let fail = |e: ScenarioError| Failure::domain(format!("{}: {e}", scenario.display()));
    let spec = ScenarioSpec::from_json(&text).map_err(fail)?;
    let trace = generate(&spec, seed).map_err(fail)?;
    emit(out, stdout, |w| trace.write_to(w))
}
