use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use diffstiff::adjoint::{finite_difference4, gradient, FD4_STEP};
use diffstiff::functions::Output;
use diffstiff::model::ObjectiveKind;
use diffstiff::optimize::sweep::assign_materials;
use diffstiff::optimize::{material_sweep, Algorithm, GradientMode, Termination};
use diffstiff::report::{history_csv, sweep_summary_csv, AnalysisReport, Geometry, RunReport};
use diffstiff::{fixtures, load_problem, optimize_problem, Analyzer, Error, Problem};

/// Print to stdout; a closed pipe (`| head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_SINGULAR: u8 = 3;
const EXIT_OPTIMIZER: u8 = 4;

/// Largest gradcheck relative error that still passes.
const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Entries smaller than this fraction of their row's largest entry are compared against the row.
const GRADCHECK_ROW_FLOOR: f64 = 1e-4;
/// Absolute differences below this always pass.
const GRADCHECK_ABS_FLOOR: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "diffstiff",
    version,
    about = "Analysis, gradient checks and optimization of bar structures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a problem at its initial design and print the JSON report.
    Analyze {
        file: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare adjoint gradients with central differences.
    Gradcheck {
        file: PathBuf,
        /// objective, volume, compliance, embodied_carbon, g<i> (constraint row i) or all.
        #[arg(long, default_value = "objective")]
        output: String,
        /// Relative step of the fourth-order central difference.
        #[arg(long = "h", default_value_t = FD4_STEP)]
        h: f64,
        /// Negative control: perturb the adjoint gradient before comparing.
        #[arg(long, hide = true)]
        corrupt_adjoint: bool,
    },
    /// Run an optimization.
    Optimize {
        file: PathBuf,
        #[arg(long)]
        alg: Option<Alg>,
        #[arg(long)]
        grad: Option<Grad>,
        /// Wall-clock budget, seconds.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Iteration cap (generations for the GA).
        #[arg(long)]
        max_iter: Option<usize>,
        /// Start from the node positions in a geometry file written by an earlier run.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Directory for report.json, history.csv and geometry.json; without it the report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize every assignment of materials to element groups.
    Sweep {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        groups: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        materials: Vec<String>,
        /// Concurrent runs.
        #[arg(long)]
        jobs: Option<usize>,
        /// Directory for summary.csv and one report per run; without it the summary goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the built-in problem files, or one of them.
    Fixture {
        /// Fixture name; all of them when omitted.
        name: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Alg {
    Mma,
    Lbfgs,
    Ga,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grad {
    Adjoint,
    Fd,
}

enum Failure {
    Core(Error),
    Io(String),
    Gradcheck(f64),
    Optimizer(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_singular() => EXIT_SINGULAR,
            Failure::Core(
                Error::Parse { .. }
                | Error::Validation(_)
                | Error::Unit(_)
                | Error::InvalidInput(_)
                | Error::Io(_),
            ) => EXIT_VALIDATION,
            Failure::Core(_) | Failure::Io(_) | Failure::Gradcheck(_) => EXIT_FAILURE,
            Failure::Optimizer(_) => EXIT_OPTIMIZER,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io(e) => e.clone(),
            Failure::Gradcheck(err) => {
                format!("gradient check failed: relative error {err:.3e} > {GRADCHECK_TOLERANCE:e}")
            }
            Failure::Optimizer(m) => format!("optimizer failed: {m}"),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// DIFFSTIFF_THREADS caps the worker pool.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("DIFFSTIFF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("DIFFSTIFF_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("DIFFSTIFF_THREADS must be positive".into());
    }
    let cap = std::thread::available_parallelism().map_or(n, |p| p.get().min(n));
    rayon::ThreadPoolBuilder::new()
        .num_threads(cap)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Analyze { file, out } => analyze(&file, out.as_deref()),
        Command::Gradcheck {
            file,
            output,
            h,
            corrupt_adjoint,
        } => gradcheck(&file, &output, h, corrupt_adjoint),
        Command::Optimize {
            file,
            alg,
            grad,
            time,
            seed,
            max_iter,
            geometry,
            out,
        } => {
            let mut problem = load_problem(&file)?;
            if let Some(g) = geometry {
                let geometry: Geometry = read_json(&g)?;
                let mut source = problem.source.clone();
                geometry.apply(&mut source)?;
                problem = Problem::from_file(source)?;
            }
            let mut s = problem.optimizer.clone();
            if let Some(a) = alg {
                s.algorithm = match a {
                    Alg::Mma => Algorithm::Mma,
                    Alg::Lbfgs => Algorithm::Lbfgs,
                    Alg::Ga => Algorithm::Ga,
                };
            }
            if let Some(g) = grad {
                s.gradients = match g {
                    Grad::Adjoint => GradientMode::Adjoint,
                    Grad::Fd => GradientMode::FiniteDifference,
                };
            }
            if time.is_some() {
                s.time_limit = time;
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(n) = max_iter {
                s.max_iterations = n;
                s.ga.generations = n;
            }
            optimize(&problem, &s, out.as_deref())
        }
        Command::Sweep {
            file,
            groups,
            materials,
            jobs,
            out,
        } => sweep(&file, &groups, &materials, jobs, out.as_deref()),
        Command::Fixture { name, out } => write_fixtures(name.as_deref(), &out),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Core(Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Core(Error::Serialize(e.to_string())))
}

fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(p) => fs::write(p, text)?,
        None => say!("{text}"),
    }
    Ok(())
}

fn analyze(file: &Path, out: Option<&Path>) -> CliResult {
    let problem = load_problem(file)?;
    let report = AnalysisReport::new(&problem, &problem.initial())?;
    emit(&to_json(&report)?, out)
}

/// Objective with a different kind, so any global quantity can be checked.
fn with_objective(problem: &Problem, kind: ObjectiveKind) -> Problem {
    let mut p = problem.clone();
    p.objective = kind;
    p
}

fn gradcheck(file: &Path, output: &str, h: f64, corrupt: bool) -> CliResult {
    let loaded = load_problem(file)?;
    let (problem, outputs, names): (Problem, Vec<Output>, Vec<String>) = match output {
        "objective" => (loaded, vec![Output::Objective], vec!["objective".into()]),
        "volume" => (
            with_objective(&loaded, ObjectiveKind::Volume),
            vec![Output::Objective],
            vec![output.into()],
        ),
        "compliance" => (
            with_objective(&loaded, ObjectiveKind::Compliance),
            vec![Output::Objective],
            vec![output.into()],
        ),
        "embodied_carbon" => (
            with_objective(&loaded, ObjectiveKind::EmbodiedCarbon),
            vec![Output::Objective],
            vec![output.into()],
        ),
        "all" => {
            let m = loaded.n_constraints();
            let outputs = std::iter::once(Output::Objective)
                .chain((0..m).map(Output::Constraint))
                .collect();
            let names = std::iter::once("objective".to_string())
                .chain((0..m).map(|i| format!("g{i}")))
                .collect();
            (loaded, outputs, names)
        }
        other => {
            let i = other
                .strip_prefix('g')
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|&i| i < loaded.n_constraints())
                .ok_or_else(|| Error::Validation(format!("unknown output {other:?}")))?;
            (loaded, vec![Output::Constraint(i)], vec![other.into()])
        }
    };

    let analyzer = Analyzer::for_problem(&problem)?;
    let x = problem.initial();
    let analysis = analyzer.analyze(&problem, &x)?;
    let fd_rows = finite_difference4(&problem, &analyzer, &x, &outputs, h)?;
    let mut worst = 0.0f64;
    say!(
        "{:<12} {:<24} {:>16} {:>16} {:>10}",
        "output",
        "variable",
        "adjoint",
        "fd",
        "rel_err"
    );
    for ((name, &out), fd) in names.iter().zip(&outputs).zip(&fd_rows) {
        let mut adj = gradient(&problem, &analyzer, &analysis, out)?;
        if corrupt {
            for g in adj.iter_mut() {
                *g = *g * 1.01 + 1e-3;
            }
        }
        let scale = adj.iter().chain(fd).fold(0.0f64, |m, v| m.max(v.abs()));
        for (j, (a, f)) in adj.iter().zip(fd).enumerate() {
            // entries far below the row's own scale sit under the differencing noise,
            // so they are measured against the row instead
            let denom = a
                .abs()
                .max(f.abs())
                .max(GRADCHECK_ROW_FLOOR * scale)
                .max(GRADCHECK_ABS_FLOOR / GRADCHECK_TOLERANCE);
            let err = (a - f).abs() / denom;
            worst = worst.max(err);
            say!(
                "{:<12} {:<24} {:>16.8e} {:>16.8e} {:>10.2e}",
                name,
                problem.variables[j].name,
                a,
                f,
                err
            );
        }
    }
    say!("max relative error {worst:.3e}");
    if worst > GRADCHECK_TOLERANCE {
        return Err(Failure::Gradcheck(worst));
    }
    Ok(())
}

fn optimize(
    problem: &Problem,
    settings: &diffstiff::OptimizerSettings,
    out: Option<&Path>,
) -> CliResult {
    let result = optimize_problem(problem, Some(settings))?;
    let failure = match &result.termination {
        Termination::AnalysisFailure(m) => Some(m.clone()),
        _ => None,
    };
    let report = RunReport::new(problem, settings, rayon::current_num_threads(), result)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.json"), to_json(&report)?)?;
            fs::write(dir.join("history.csv"), history_csv(&report.result)?)?;
            fs::write(
                dir.join("geometry.json"),
                to_json(&Geometry::from_state(problem, &report.final_state))?,
            )?;
            eprintln!(
                "{}: objective {:.6e}, max violation {:.3e}, {} iterations, {:?}",
                report.problem,
                report.result.objective_final,
                report.result.max_violation,
                report.result.iterations,
                report.result.termination
            );
        }
        None => say!("{}", to_json(&report)?),
    }
    match failure {
        Some(m) => Err(Failure::Optimizer(m)),
        None => Ok(()),
    }
}

fn sweep(
    file: &Path,
    groups: &[String],
    materials: &[String],
    jobs: Option<usize>,
    out: Option<&Path>,
) -> CliResult {
    let problem = load_problem(file)?;
    let source = problem.source.clone();
    let runs = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Failure::Io(e.to_string()))?;
            pool.install(|| material_sweep(&source, groups, materials))?
        }
        None => material_sweep(&source, groups, materials)?,
    };
    let summary = sweep_summary_csv(&runs)?;
    match out {
        Some(dir) => {
            let run_dir = dir.join("runs");
            fs::create_dir_all(&run_dir)?;
            fs::write(dir.join("summary.csv"), &summary)?;
            for r in &runs {
                let Some(result) = &r.result else { continue };
                let choice: Vec<usize> = r
                    .assignment
                    .iter()
                    .map(|m| materials.iter().position(|x| x == m).unwrap_or(0))
                    .collect();
                let assigned =
                    Problem::from_file(assign_materials(&source, groups, materials, &choice)?)?;
                let report = RunReport::new(
                    &assigned,
                    &assigned.optimizer,
                    rayon::current_num_threads(),
                    result.clone(),
                )?;
                fs::write(run_dir.join(format!("{}.json", r.id)), to_json(&report)?)?;
            }
        }
        None => say!("{}", summary.trim_end()),
    }
    Ok(())
}

fn write_fixtures(name: Option<&str>, out: &Path) -> CliResult {
    let all = fixtures::catalog();
    let chosen: Vec<_> = match name {
        Some(n) => {
            let f = all
                .into_iter()
                .find(|(k, _)| *k == n)
                .ok_or_else(|| Error::Validation(format!("unknown fixture {n:?}")))?;
            vec![f]
        }
        None => all,
    };
    fs::create_dir_all(out)?;
    for (name, file) in chosen {
        let path = out.join(format!("{name}.json"));
        fs::write(&path, to_json(&file)?)?;
        say!("{}", path.display());
    }
    Ok(())
}
