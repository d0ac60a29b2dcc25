//! `mac`: sparsify g2o pose graphs by maximizing algebraic connectivity.

mod report;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mac_core::g2o::{budget_from_fraction, parse_g2o, to_problem_with_budget, PoseGraphFile, PoseGraphProblem};
use mac_core::Initialization;
use rayon::prelude::*;

use report::{run_method, write_csv, Method, RunReport, RunSettings};

#[derive(Parser)]
#[command(name = "mac", version, about = "Pose-graph sparsification by algebraic connectivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select loop closures for one budget and write the sparsified graph.
    Sparsify(SparsifyArgs),
    /// Run several selectors over several budgets and tabulate the results.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Naive,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frank-Wolfe iteration cap.
    #[arg(long, default_value_t = 20)]
    max_iters: usize,
    /// Stop once the duality gap is at most this.
    #[arg(long, default_value_t = 1e-8)]
    gap_tol: f64,
    /// Madow draws to take, keeping the best.
    #[arg(long, default_value_t = 1)]
    madow_draws: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Naive)]
    init: InitArg,
    /// Leave wall times blank so repeated runs produce identical output.
    #[arg(long)]
    no_timing: bool,
}

impl SolverArgs {
    fn settings(&self) -> RunSettings {
        RunSettings {
            seed: self.seed,
            max_iters: self.max_iters,
            gap_tol: self.gap_tol,
            madow_draws: self.madow_draws,
            init: match self.init {
                InitArg::Naive => Initialization::Naive,
                InitArg::Uniform => Initialization::Uniform,
            },
            timing: !self.no_timing,
        }
    }
}

#[derive(Args)]
struct SparsifyArgs {
    /// Input g2o file.
    input: PathBuf,
    /// Where to write the sparsified g2o file.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = Method::MacMadow)]
    method: Method,
    /// Fraction of loop closures to keep; K = round(fraction * m).
    #[arg(long, required_unless_present = "budget")]
    fraction: Option<f64>,
    /// Absolute number of loop closures to keep (overrides --fraction).
    #[arg(long)]
    budget: Option<usize>,
    /// Report destination (stdout if absent).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Input g2o file.
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "mac-nearest,mac-madow,naive,greedy-esp")]
    methods: Vec<Method>,
    /// Report destination (stdout if absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for independent cells (all cores if absent).
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

struct Loaded {
    name: String,
    file: PoseGraphFile,
    /// Problem with K = 0; cells rebudget it.
    base: PoseGraphProblem,
}

fn load(path: &Path) -> Result<Loaded> {
    let file = parse_g2o(path).with_context(|| format!("reading {}", path.display()))?;
    if file.skipped_records > 0 {
        log::warn!("skipped {} unsupported records", file.skipped_records);
    }
    let base = to_problem_with_budget(&file, 0)?;
    for warning in base.problem.validate() {
        log::warn!("{warning:?}");
    }
    log::info!(
        "{}: {} vertices, {} fixed edges, {} candidates ({} in file)",
        path.display(),
        file.vertices.len(),
        base.problem.fixed_edges().len(),
        base.problem.candidate_count(),
        file.candidate_count()
    );
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Loaded { name, file, base })
}

fn with_budget(base: &PoseGraphProblem, k: usize) -> Result<PoseGraphProblem> {
    Ok(PoseGraphProblem {
        problem: base.problem.with_budget(k)?,
        ..base.clone()
    })
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(rows: &[RunReport], format: Format, path: Option<&Path>, single: bool) -> Result<()> {
    let mut out = open_output(path)?;
    match format {
        Format::Csv => write_csv(rows, &mut out)?,
        Format::Json if single && rows.len() == 1 => {
            serde_json::to_writer_pretty(&mut out, &rows[0])?;
            writeln!(out)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn sparsify(args: &SparsifyArgs) -> Result<()> {
    let loaded = load(&args.input)?;
    let m = loaded.base.problem.candidate_count();
    let k = match (args.budget, args.fraction) {
        (Some(k), _) => k,
        (None, Some(f)) => budget_from_fraction(f, m)?,
        (None, None) => bail!("either --fraction or --budget is required"),
    };
    let built = with_budget(&loaded.base, k)?;
    let rule = loaded.file.kind.weight_rule();
    let (row, selection) = run_method(&loaded.name, rule, &built, args.method, &args.solver.settings())?;
    let text = loaded.file.to_g2o_string(&built.file_selection(&selection)?)?;
    std::fs::write(&args.output, text).with_context(|| format!("writing {}", args.output.display()))?;
    emit(&[row], args.format, args.report.as_deref(), true)
}

/// Returns the number of failed cells.
fn sweep(args: &SweepArgs) -> Result<usize> {
    let loaded = load(&args.input)?;
    let m = loaded.base.problem.candidate_count();
    let settings = args.solver.settings();
    let rule = loaded.file.kind.weight_rule();

    let cells: Vec<(f64, Method)> = args
        .fractions
        .iter()
        .flat_map(|&f| args.methods.iter().map(move |&method| (f, method)))
        .collect();
    let run_cell = |&(fraction, method): &(f64, Method)| -> Result<RunReport> {
        let k = budget_from_fraction(fraction, m)?;
        let built = with_budget(&loaded.base, k)?;
        let (mut row, _) = run_method(&loaded.name, rule, &built, method, &settings)?;
        row.fraction = fraction;
        Ok(row)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()?;
    let outcomes: Vec<Result<RunReport>> = pool.install(|| cells.par_iter().map(run_cell).collect());

    let mut rows = Vec::with_capacity(cells.len());
    let mut failed = 0;
    for ((fraction, method), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                failed += 1;
                eprintln!("failed cell {method} @ {fraction}: {e:#}");
            }
        }
    }
    emit(&rows, args.format, args.output.as_deref(), false)?;
    Ok(failed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Sparsify(args) => sparsify(args).map(|()| 0),
        Command::Sweep(args) => sweep(args),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} cell(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
