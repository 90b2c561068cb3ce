use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jcone_cli::{emit_series, exit, run_filtered, AnalysisSpec, CliError, ReportRecord, Scenario, TolSpec};

#[derive(Parser)]
#[command(name = "jcone", version, about = "Cone-field hyperbolicity checks for flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis of the given scenarios.
    Run(RunArgs),
    /// Run only the operator checks (or one given inline).
    Operator(OperatorArgs),
    /// Run only the equilibria analyses.
    Equilibria(RunArgs),
    /// Run only the orbit checks.
    Orbit(RunArgs),
    /// Run only the star checks.
    Star(RunArgs),
    /// Run only the Lyapunov analyses.
    Lyapunov(RunArgs),
    /// Run only the exponent bounds checks.
    Bounds(RunArgs),
    /// Summarize a saved report, or print one of its series.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    scenarios: Vec<PathBuf>,
    /// Restrict to the analysis with this id.
    #[arg(long)]
    only: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenarios run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override integration tolerances, as `RTOL,ATOL`.
    #[arg(long, value_parser = parse_tol)]
    tol_override: Option<TolSpec>,
    /// Write `<scenario>.json` (and series files) into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every series as `<scenario>.<analysis>.tsv`.
    #[arg(long)]
    series: bool,
}

#[derive(Args)]
struct OperatorArgs {
    scenarios: Vec<PathBuf>,
    /// Inline form as JSON rows, e.g. `[[-1,0],[0,1]]`.
    #[arg(long, requires = "operator")]
    form: Option<String>,
    /// Inline operator as JSON rows.
    #[arg(long, requires = "form")]
    operator: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    record: PathBuf,
    /// Print this analysis' series instead of the summary.
    #[arg(long)]
    series: Option<String>,
}

fn parse_tol(s: &str) -> Result<TolSpec, String> {
    let (r, a) = s.split_once(',').ok_or("expected RTOL,ATOL")?;
    let rtol: f64 = r.trim().parse().map_err(|e| format!("rtol: {e}"))?;
    let atol: f64 = a.trim().parse().map_err(|e| format!("atol: {e}"))?;
    if !(rtol > 0.0 && atol > 0.0) {
        return Err("tolerances must be positive".into());
    }
    Ok(TolSpec { rtol, atol })
}

/// Writes to stdout; a closed pipe (`jcone run ... | head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn fail(e: &CliError) -> i32 {
    eprintln!("jcone: {e}");
    exit::USAGE
}

fn write_outputs(record: &ReportRecord, common: &Common) -> Result<(), CliError> {
    let Some(dir) = &common.out else {
        return Ok(());
    };
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(format!("{}.json", record.scenario));
    std::fs::write(&path, record.to_json()).map_err(|e| io(&path, e))?;
    if common.series {
        for a in record.analyses.iter().filter(|a| a.series.is_some()) {
            let path = dir.join(format!("{}.{}.tsv", record.scenario, a.id));
            std::fs::write(&path, emit_series(record, &a.id)?).map_err(|e| io(&path, e))?;
        }
    }
    Ok(())
}

/// Runs the scenarios (up to `jobs` at a time) and prints summaries in input order.
fn run_many(scenarios: Vec<Scenario>, common: &Common, filter: &(dyn Fn(&AnalysisSpec) -> bool + Sync)) -> i32 {
    let jobs = common.jobs.max(1);
    let mut results: Vec<Option<Result<ReportRecord, CliError>>> = vec![None; scenarios.len()];
    for (batch, slots) in scenarios.chunks(jobs).zip(results.chunks_mut(jobs)) {
        std::thread::scope(|s| {
            for (sc, slot) in batch.iter().zip(slots.iter_mut()) {
                s.spawn(move || *slot = Some(run_filtered(sc, filter)));
            }
        });
    }
    let mut code = exit::OK;
    for result in results.into_iter().map(|r| r.expect("every scenario ran")) {
        match result.and_then(|rec| write_outputs(&rec, common).map(|_| rec)) {
            Ok(rec) => {
                emit(&rec.summary());
                if common.out.is_none() {
                    emit(&format!("{}\n", rec.deterministic_payload()));
                }
                if rec.errored {
                    code = code.max(exit::ANALYSIS_ERROR);
                }
            }
            Err(e) => code = code.max(fail(&e)),
        }
    }
    code
}

fn load_all(paths: &[PathBuf], common: &Common) -> Result<Vec<Scenario>, CliError> {
    if paths.is_empty() {
        return Err(CliError::ConfigInvalid("no scenario given".into()));
    }
    paths
        .iter()
        .map(|p| {
            let mut s = Scenario::load(p)?;
            if let Some(seed) = common.seed {
                s.seed = Some(seed);
            }
            if let Some(tol) = common.tol_override {
                s.tolerances = Some(tol);
            }
            Ok(s)
        })
        .collect()
}

fn by_kind(args: RunArgs, kind: Option<&'static str>) -> i32 {
    let scenarios = match load_all(&args.scenarios, &args.common) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let only = args.only.clone();
    let filter = move |a: &AnalysisSpec| kind.map_or(true, |k| a.kind() == k) && only.as_deref().map_or(true, |id| a.id() == id);
    run_many(scenarios, &args.common, &filter)
}

fn inline_operator(form: &str, operator: &str, common: &Common) -> Result<Scenario, CliError> {
    let parse = |s: &str, what: &str| serde_json::from_str::<Vec<Vec<f64>>>(s).map_err(|e| CliError::ConfigInvalid(format!("--{what}: {e}")));
    let form = parse(form, "form")?;
    let operator = parse(operator, "operator")?;
    let n = form.len();
    Ok(Scenario {
        id: "operator".into(),
        description: None,
        seed: Some(common.seed.unwrap_or(0)),
        model: jcone_cli::ModelSpec::Linear { matrix: vec![vec![0.0; n]; n] },
        form: None,
        tolerances: common.tol_override,
        output: None,
        analyses: vec![AnalysisSpec::OperatorCheck { id: "operator".into(), form, operator }],
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(a) => by_kind(a, None),
        Command::Equilibria(a) => by_kind(a, Some("equilibria")),
        Command::Orbit(a) => by_kind(a, Some("orbit-check")),
        Command::Star(a) => by_kind(a, Some("star-check")),
        Command::Lyapunov(a) => by_kind(a, Some("lyapunov")),
        Command::Bounds(a) => by_kind(a, Some("bounds-check")),
        Command::Operator(a) => match (&a.form, &a.operator) {
            (Some(f), Some(o)) => match inline_operator(f, o, &a.common) {
                Ok(s) => run_many(vec![s], &a.common, &|_| true),
                Err(e) => fail(&e),
            },
            _ => by_kind(RunArgs { scenarios: a.scenarios, only: None, common: a.common }, Some("operator-check")),
        },
        Command::Report(a) => match std::fs::read_to_string(&a.record).map_err(|e| CliError::Io(e.to_string())).and_then(|t| ReportRecord::from_json(&t)) {
            Ok(rec) => match a.series {
                Some(id) => match emit_series(&rec, &id) {
                    Ok(text) => {
                        emit(&text);
                        exit::OK
                    }
                    Err(e) => fail(&e),
                },
                None => {
                    emit(&rec.summary());
                    exit::OK
                }
            },
            Err(e) => fail(&e),
        },
    };
    ExitCode::from(code as u8)
}
