//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::Signed;
use serde::Serialize;

use crate::analysis::{
    competitive_ratio, dry_run, AnalysisOptions, ConstraintSet, CrReport, SchedulerSpec, Stats,
};
use crate::error::{Error, Result};
use crate::io::{load_constraints, load_scheduler_lts, load_taskset, parse_rational, parse_taskset};
use crate::lts::DEFAULT_STATE_CAP;
use crate::model::Taskset;
use crate::par::{self, Exec};
use crate::schedulers::BuiltinPolicy;

#[derive(Parser, Debug)]
#[command(name = "firmcr", version, about = "Competitive ratio of on-line firm-deadline schedulers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analyze one scheduler on one taskset.
    Analyze(AnalyzeArgs),
    /// Analyze every scheduler on every taskset.
    Batch(BatchArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Table,
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Constraint configuration (JSON).
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Precision of the limit-average search, as p/q.
    #[arg(long, default_value = "1/1000")]
    pub epsilon: String,
    /// Maximum number of states of any constructed LTS or product.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub taskset: PathBuf,
    /// Built-in policy: edf, srt, sp, fifo or td1.
    #[arg(long, conflicts_with = "scheduler_lts", required_unless_present = "scheduler_lts")]
    pub scheduler: Option<String>,
    /// Scheduler given as an explicit LTS (JSON).
    #[arg(long)]
    pub scheduler_lts: Option<PathBuf>,
    /// Report state counts only.
    #[arg(long)]
    pub dry_run: bool,
    /// Write the product graph to this file.
    #[arg(long)]
    pub dump_graph: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// TD1 on the zero-laxity sets C1-C6.
    Td1Table,
    /// EDF, SRT, SP and FIFO on the sets A1-A6.
    ASets,
}

#[derive(Args, Debug)]
pub struct BatchArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Taskset files; rows are named by file stem.
    #[arg(long = "taskset")]
    pub tasksets: Vec<PathBuf>,
    /// Built-in policies (columns); defaults to edf, srt, sp, fifo.
    #[arg(long = "scheduler")]
    pub schedulers: Vec<String>,
    /// Include per-cell wall-clock times.
    #[arg(long)]
    pub timings: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::EmptyTaskset
        | Error::ZeroField { .. }
        | Error::TooManyTasks(_)
        | Error::DeadlineTooLarge { .. }
        | Error::MalformedLts(_) => 2,
        Error::StateExplosion { .. } => 3,
        Error::Unsupported(_) => 4,
        _ => 1,
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    kind: &'a str,
    message: String,
}

fn error_report(e: &Error) -> ErrorReport<'_> {
    ErrorReport {
        kind: e.kind(),
        message: e.to_string(),
    }
}

fn options(c: &CommonArgs) -> Result<AnalysisOptions> {
    let epsilon: BigRational = parse_rational(&c.epsilon)?;
    if !epsilon.is_positive() {
        return Err(Error::Parse("epsilon must be positive".into()));
    }
    Ok(AnalysisOptions {
        state_cap: c.state_cap,
        epsilon,
        exec: if c.jobs == Some(1) { Exec::Sequential } else { Exec::Parallel },
        ..AnalysisOptions::default()
    })
}

fn pooled<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match jobs {
        Some(k) if k > 1 => par::with_threads(k, f),
        _ => f(),
    }
}

fn json_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("reports serialize") + "\n"
}

fn stats_table(s: &Stats) -> String {
    let rows = [
        ("online states", s.online_states),
        ("clairvoyant states", s.clairvoyant_states),
        ("product nodes", s.product_nodes),
        ("product edges", s.product_edges),
        ("candidate SCCs", s.candidate_sccs),
    ];
    let mut out = String::new();
    for (k, v) in rows {
        out += &format!("{k:<20}{v}\n");
    }
    out
}

fn report_table(r: &CrReport) -> String {
    let mut out = format!("{:<20}{}\n", "competitive ratio", r.cr);
    out += &stats_table(&r.stats);
    out += &format!("{:<20}{}\n", "iterations", r.stats.iterations);
    if let Some(w) = &r.witness {
        out += &format!("{:<20}{}\n", "witness releases", w.releases.join(" "));
    }
    if let Some(w) = &r.warning {
        out += &format!("{:<20}{w}\n", "warning");
    }
    out
}

fn analyze(a: &AnalyzeArgs) -> Result<String> {
    let ts = load_taskset(&a.taskset)?;
    let scheduler = match (&a.scheduler, &a.scheduler_lts) {
        (Some(name), _) => SchedulerSpec::Builtin(name.parse()?),
        (None, Some(p)) => SchedulerSpec::Custom(load_scheduler_lts(p)?),
        (None, None) => return Err(Error::Parse("no scheduler given".into())),
    };
    let constraints = match &a.common.constraints {
        Some(p) => load_constraints(p, &ts)?,
        None => ConstraintSet::default(),
    };
    let opts = options(&a.common)?;
    pooled(a.common.jobs, || {
        if a.dry_run {
            let stats = dry_run(&ts, &scheduler, &constraints, &opts)?;
            return Ok(match a.common.format {
                Format::Json => json_line(&serde_json::json!({ "stats": stats })),
                Format::Table => stats_table(&stats),
            });
        }
        let mut analysis = competitive_ratio(&ts, &scheduler, &constraints, &opts)?;
        if let Some(p) = &a.dump_graph {
            std::fs::write(p, analysis.product.dump())?;
        }
        // Timings would make reports differ between identical runs.
        analysis.report.stats.build_ms = None;
        analysis.report.stats.solve_ms = None;
        Ok(match a.common.format {
            Format::Json => json_line(&analysis.report),
            Format::Table => report_table(&analysis.report),
        })
    })
}

const A_SETS: [(&str, &str); 6] = [
    ("A1", include_str!("../data/a1.json")),
    ("A2", include_str!("../data/a2.json")),
    ("A3", include_str!("../data/a3.json")),
    ("A4", include_str!("../data/a4.json")),
    ("A5", include_str!("../data/a5.json")),
    ("A6", include_str!("../data/a6.json")),
];

const C_SETS: [(&str, &str); 6] = [
    ("C1", include_str!("../data/c1.json")),
    ("C2", include_str!("../data/c2.json")),
    ("C3", include_str!("../data/c3.json")),
    ("C4", include_str!("../data/c4.json")),
    ("C5", include_str!("../data/c5.json")),
    ("C6", include_str!("../data/c6.json")),
];

/// Named tasksets and policies of a preset.
pub fn preset(p: Preset) -> (Vec<(String, Taskset)>, Vec<BuiltinPolicy>) {
    let (sets, policies) = match p {
        Preset::Td1Table => (&C_SETS, vec![BuiltinPolicy::Td1]),
        Preset::ASets => (
            &A_SETS,
            vec![BuiltinPolicy::Edf, BuiltinPolicy::Srt, BuiltinPolicy::Sp, BuiltinPolicy::Fifo],
        ),
    };
    let sets = sets
        .iter()
        .map(|(n, text)| (n.to_string(), parse_taskset(text).expect("bundled taskset")))
        .collect();
    (sets, policies)
}

#[derive(Serialize)]
struct Cell {
    scheduler: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    cr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorReport<'static>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_ms: Option<u64>,
}

#[derive(Serialize)]
struct Row {
    taskset: String,
    cells: Vec<Cell>,
}

#[derive(Serialize)]
struct BatchReport {
    schedulers: Vec<String>,
    rows: Vec<Row>,
}

fn batch_table(r: &BatchReport) -> String {
    let text = |c: &Cell| {
        let mut s = match (&c.cr, &c.error) {
            (Some(cr), _) => cr.clone(),
            (None, Some(e)) => format!("error:{}", e.kind),
            (None, None) => "-".into(),
        };
        if let Some(t) = c.time_ms {
            s += &format!(" ({t} ms)");
        }
        s
    };
    let mut grid = vec![std::iter::once("taskset".to_string())
        .chain(r.schedulers.iter().cloned())
        .collect::<Vec<_>>()];
    for row in &r.rows {
        grid.push(std::iter::once(row.taskset.clone()).chain(row.cells.iter().map(text)).collect());
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|j| grid.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &grid {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        out += line.join("  ").trim_end();
        out.push('\n');
    }
    out
}

fn batch(b: &BatchArgs) -> Result<String> {
    let (mut sets, mut policies) = match b.preset {
        Some(p) => preset(p),
        None => (Vec::new(), Vec::new()),
    };
    for path in &b.tasksets {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        sets.push((name, load_taskset(path)?));
    }
    for s in &b.schedulers {
        let p: BuiltinPolicy = s.parse()?;
        if !policies.contains(&p) {
            policies.push(p);
        }
    }
    if policies.is_empty() {
        policies = vec![BuiltinPolicy::Edf, BuiltinPolicy::Srt, BuiltinPolicy::Sp, BuiltinPolicy::Fifo];
    }
    let mut opts = options(&b.common)?;
    // Cells run concurrently; each analysis is sequential inside.
    let exec = opts.exec;
    opts.exec = Exec::Sequential;
    let cells: Vec<(usize, BuiltinPolicy)> = (0..sets.len())
        .flat_map(|i| policies.iter().map(move |&p| (i, p)))
        .collect();
    let run_cell = |&(i, p): &(usize, BuiltinPolicy)| -> Cell {
        let t0 = Instant::now();
        let ts = &sets[i].1;
        let result = match &b.common.constraints {
            Some(path) => load_constraints(path, ts),
            None => Ok(ConstraintSet::default()),
        }
        .and_then(|c| competitive_ratio(ts, &SchedulerSpec::Builtin(p), &c, &opts));
        let time_ms = b.timings.then(|| t0.elapsed().as_millis() as u64);
        match result {
            Ok(a) => Cell {
                scheduler: p.to_string(),
                cr: Some(a.report.cr.to_string()),
                warning: a.report.warning,
                error: None,
                time_ms,
            },
            Err(e) => Cell {
                scheduler: p.to_string(),
                cr: None,
                warning: None,
                error: Some(ErrorReport {
                    kind: e.kind(),
                    message: e.to_string(),
                }),
                time_ms,
            },
        }
    };
    let mut done = pooled(b.common.jobs, || par::map_slice(exec, &cells, run_cell)).into_iter();
    let rows = sets
        .iter()
        .map(|(name, _)| Row {
            taskset: name.clone(),
            cells: done.by_ref().take(policies.len()).collect(),
        })
        .collect();
    let report = BatchReport {
        schedulers: policies.iter().map(|p| p.to_string()).collect(),
        rows,
    };
    Ok(match b.common.format {
        Format::Json => json_line(&report),
        Format::Table => batch_table(&report),
    })
}

/// Runs a parsed command line, writing the report to `out` and errors to
/// `err`. Returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (result, format) = match &cli.command {
        Command::Analyze(a) => (analyze(a), a.common.format),
        Command::Batch(b) => (batch(b), b.common.format),
    };
    match result {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = match format {
                Format::Json => err.write_all(json_line(&serde_json::json!({ "error": error_report(&e) })).as_bytes()),
                Format::Table => writeln!(err, "error ({}): {e}", e.kind()),
            };
            exit_code(&e)
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(name: &str) -> String {
        format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_args(std::iter::once("firmcr").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn analyze_c2_td1() {
        let (code, out, _) = call(&["analyze", "--taskset", &data("c2.json"), "--scheduler", "td1"]);
        assert_eq!(code, 0);
        assert!(out.starts_with(r#"{"cr":"1/2""#), "{out}");
    }

    #[test]
    fn reports_are_byte_stable() {
        let args = ["analyze", "--taskset", &data("a2.json"), "--scheduler", "edf"];
        let (_, a, _) = call(&args);
        let (_, b, _) = call(&args);
        assert_eq!(a, b);
        let (_, c, _) = call(&[&args[..], &["--jobs", "1"]].concat());
        assert_eq!(a, c);
    }

    #[test]
    fn dry_run_has_no_ratio() {
        let (code, out, _) =
            call(&["analyze", "--taskset", &data("a2.json"), "--scheduler", "edf", "--dry-run"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v.get("cr").is_none());
        assert_eq!(v["stats"]["clairvoyant_states"], 3);
    }

    #[test]
    fn constraints_do_not_lower_the_ratio() {
        let base = ["analyze", "--taskset", &data("a2.json"), "--scheduler", "edf"];
        let cr = |out: &str| -> BigRational {
            let v: serde_json::Value = serde_json::from_str(out).unwrap();
            parse_rational(v["cr"].as_str().unwrap()).unwrap()
        };
        let (_, free, _) = call(&base);
        let (code, constrained, _) = call(&[&base[..], &["--constraints", &data("window.json")]].concat());
        assert_eq!(code, 0);
        assert!(cr(&constrained) >= cr(&free));
    }

    #[test]
    fn exit_codes() {
        let (code, _, err) = call(&["analyze", "--taskset", &data("a2.json"), "--scheduler", "dover"]);
        assert_eq!(code, 4);
        assert!(err.contains(r#""kind":"unsupported""#), "{err}");
        let (code, _, _) = call(&["analyze", "--taskset", "/nonexistent.json", "--scheduler", "edf"]);
        assert_eq!(code, 2);
        let (code, _, _) =
            call(&["analyze", "--taskset", &data("a1.json"), "--scheduler", "edf", "--state-cap", "10"]);
        assert_eq!(code, 3);
        let (code, _, _) = call(&["analyze", "--taskset", &data("a2.json")]);
        assert_eq!(code, 2);
        let (code, _, _) =
            call(&["analyze", "--taskset", &data("a2.json"), "--scheduler", "edf", "--epsilon", "0"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn empty_batch() {
        let (code, out, _) = call(&["batch"]);
        assert_eq!(code, 0);
        assert_eq!(out, "{\"schedulers\":[\"edf\",\"srt\",\"sp\",\"fifo\"],\"rows\":[]}\n");
        let (code, out, _) = call(&["batch", "--format", "table"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 1);
    }

    #[test]
    fn batch_reports_cell_failures_and_continues() {
        let (code, out, _) = call(&[
            "batch",
            "--taskset",
            &data("a2.json"),
            "--scheduler",
            "edf",
            "--scheduler",
            "fifo",
            "--state-cap",
            "2",
            "--format",
            "table",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("error:state_explosion"), "{out}");
    }

    #[test]
    fn dump_graph_writes_edges() {
        let path = std::env::temp_dir().join(format!("firmcr-dump-{}.txt", std::process::id()));
        let (code, _, _) = call(&[
            "analyze",
            "--taskset",
            &data("a2.json"),
            "--scheduler",
            "sp",
            "--dump-graph",
            path.to_str().unwrap(),
            "--format",
            "table",
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert!(text.starts_with("initial"));
    }
}
