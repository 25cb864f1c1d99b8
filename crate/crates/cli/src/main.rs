use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use brittle_core::config::{Problem, ProblemSpec, SearchKind};
use brittle_core::error::Error;
use brittle_core::evolution::{incremental_step, run_evolution_with};
use brittle_core::io::{self, RunLock};
use brittle_core::lemma::LemmaSpec;
use brittle_core::{audit_trace, validate_problem};

#[derive(Parser)]
#[command(name = "brittle", version, about = "Quasistatic brittle fracture on a lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the time-discrete evolution and write a trace directory.
    Run(RunArgs),
    /// Audit a trace directory written by `run`.
    Audit(AuditArgs),
    /// Compare exhaustive and greedy search at one step.
    Oracle(OracleArgs),
    /// Run an oscillating-sequence experiment and emit its CSV report.
    Lemma(LemmaArgs),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T", value_name = "T")]
    end: Option<f64>,
    #[arg(long)]
    strategy: Option<SearchKind>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn spec(&self) -> anyhow::Result<ProblemSpec> {
        let mut spec = ProblemSpec::load(&self.config)?;
        if self.dt.is_some() || self.end.is_some() {
            if spec.time.points.is_some() {
                bail!("--dt/--T cannot override an explicit list of time points");
            }
            if let Some(dt) = self.dt {
                spec.time.step = Some(dt);
            }
            if let Some(end) = self.end {
                spec.time.end = Some(end);
            }
        }
        if let Some(kind) = self.strategy {
            spec.strategy.kind = kind;
        }
        if let Some(seed) = self.seed {
            spec.audit.seed = seed;
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Trace directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Step index; defaults to the first step at which the crack grows.
    #[arg(long)]
    step: Option<usize>,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for `lemma.csv`; the report goes to standard output otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn problem_or_report(spec: ProblemSpec) -> anyhow::Result<Option<Problem>> {
    let problem = Problem::new(spec)?;
    let report = validate_problem(&problem);
    if !report.is_ok() {
        eprintln!("{report}");
        return Ok(None);
    }
    Ok(Some(problem))
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let spec = args.overrides.spec()?;
    let dir = args
        .out
        .clone()
        .or_else(|| spec.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("run"));
    let Some(problem) = problem_or_report(spec)? else {
        return Ok(ExitCode::from(2));
    };
    let search = problem.spec.strategy.kind;
    let _lock = RunLock::acquire(&dir)?;
    match run_evolution_with(&problem, search) {
        Ok(trace) => {
            io::write_trace_files(&dir, &problem, &trace, search.as_str())?;
            let first = trace
                .first_crack_step()
                .map(|i| format!("first crack growth at step {i} (t = {})", trace.steps[i].t))
                .unwrap_or_else(|| "no crack growth".into());
            println!("{} steps written to {}; {first}", trace.len(), dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::Aborted {
            step,
            partial,
            source,
        }) => {
            io::write_trace_files(&dir, &problem, &partial, search.as_str())?;
            eprintln!(
                "run aborted at step {step}: {source}; partial trace of {} steps written to {}",
                partial.len(),
                dir.display()
            );
            Ok(ExitCode::FAILURE)
        }
        Err(e) => Err(e.into()),
    }
}

fn audit(args: AuditArgs) -> anyhow::Result<ExitCode> {
    let (problem, trace) = io::load_run(&args.out)?;
    if !trace.complete {
        eprintln!("trace in {} is incomplete", args.out.display());
        return Ok(ExitCode::FAILURE);
    }
    let report = audit_trace(&problem, &trace)?;
    let path = args.out.join(io::AUDIT_FILE);
    fs::write(&path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    println!("{report}");
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn oracle(args: OracleArgs) -> anyhow::Result<ExitCode> {
    let spec = args.overrides.spec()?;
    let Some(problem) = problem_or_report(spec)? else {
        return Ok(ExitCode::from(2));
    };
    let trace = run_evolution_with(&problem, SearchKind::Exhaustive)?;
    let step = match args.step {
        Some(s) => s,
        None => trace
            .first_crack_step()
            .context("the run never cracks; pass --step")?,
    };
    if step == 0 || step >= trace.len() {
        bail!("--step must lie in 1..{}", trace.len());
    }
    let prev = &trace.steps[step - 1];
    let t = trace.steps[step].t;
    let exhaustive = incremental_step(&problem, step, t, &prev.crack, &prev.u, SearchKind::Exhaustive)?;
    let greedy = incremental_step(&problem, step, t, &prev.crack, &prev.u, SearchKind::Greedy)?;
    println!("step {step} t = {t}");
    println!(
        "exhaustive {:.16e} crack {} ({} candidates)",
        exhaustive.energy.total, exhaustive.crack, exhaustive.candidates_evaluated
    );
    println!(
        "greedy     {:.16e} crack {} ({} candidates)",
        greedy.energy.total, greedy.crack, greedy.candidates_evaluated
    );
    println!(
        "margin     {:.16e}",
        greedy.energy.total - exhaustive.energy.total
    );
    Ok(ExitCode::SUCCESS)
}

fn lemma(args: LemmaArgs) -> anyhow::Result<ExitCode> {
    let spec = LemmaSpec::load(&args.config)?;
    let report = spec.run()?;
    let csv = report.to_csv();
    match args.out {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            let path: &Path = &dir.join("lemma.csv");
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            println!("{} rows written to {}", report.rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Audit(a) => audit(a),
        Command::Oracle(a) => oracle(a),
        Command::Lemma(a) => lemma(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
