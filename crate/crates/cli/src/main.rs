use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tark::active::{budget_schedule, bound_theorem6, PreconditionedTark};
use tark::harness::{
    aggregate, coefficients_sidecar, figure1_config, figure2_config, run_experiment, verify_bounds,
    write_aggregate_csv, write_csv, BoundKind, BoundSetup, ExperimentConfig, ExperimentOutput,
    Metric, MethodKind, MethodSpec, ProblemSpec,
};
use tark::linalg::{
    relative_error, spectral_summary, write_matrix, write_vector, LeastSquaresProblem,
};
use tark::problems::{
    gen_gaussian_problem, gen_lower_bound_problem, gen_poly_regression, Basis, LowerBoundSpec,
    PolyRegressionSpec,
};
use tark::sampling::derive_seed;
use tark::{Error, Result, RngStream};

#[derive(Parser, Debug)]
#[command(name = "tark", version, about = "Randomized Kaczmarz solvers and benchmarks")]
struct Cli {
    /// Master seed; overrides the seed in a config file when given.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for independent trials.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a test problem as matrix/vector text files plus a JSON sidecar.
    Generate(GenerateArgs),
    /// Run one solver on a matrix and right-hand side read from files.
    Solve(SolveArgs),
    /// Run a multi-method, multi-trial experiment from a JSON config.
    Compare(CompareArgs),
    /// Monte-Carlo check of a mean-square-error bound.
    Bounds(BoundsArgs),
    /// Preconditioned TARK with a volume-sampled start.
    Active(ActiveArgs),
    /// Produce the CSV and sidecar files behind the convergence figures.
    FigureData(FigureArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemKind {
    Poly,
    LowerBound,
    Gaussian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BasisArg {
    Chebyshev,
    Monomial,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Chebyshev => Basis::Chebyshev,
            BasisArg::Monomial => Basis::Monomial,
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "poly")]
    kind: ProblemKind,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 25)]
    d: usize,
    #[arg(long, value_enum, default_value = "chebyshev")]
    basis: BasisArg,
    #[arg(long, default_value_t = 0.2)]
    noise_std: f64,
    /// Block height for the lower-bound class.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Block correlation for the lower-bound class.
    #[arg(long, default_value_t = 5.0)]
    v: f64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    rhs: PathBuf,
    #[arg(long, default_value = "tark")]
    method: String,
    /// Rows accessed.
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    #[arg(long)]
    t_b: Option<u64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct ProblemSource {
    /// Matrix file; without it a Gaussian problem is generated.
    #[arg(long, requires = "rhs")]
    matrix: Option<PathBuf>,
    #[arg(long, requires = "matrix")]
    rhs: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    noise_std: f64,
}

impl ProblemSource {
    fn load(&self, seed: u64) -> Result<LeastSquaresProblem> {
        match (&self.matrix, &self.rhs) {
            (Some(m), Some(r)) => ProblemSpec::Files {
                matrix: m.clone(),
                rhs: r.clone(),
            }
            .resolve(None),
            _ => gen_gaussian_problem(self.n, self.d, self.noise_std, seed),
        }
    }
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    source: ProblemSource,
    /// 1 to 5.
    #[arg(long)]
    theorem: String,
    #[arg(long, default_value_t = 1001)]
    t: u64,
    #[arg(long)]
    t_b: Option<u64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(Args, Debug)]
struct ActiveArgs {
    #[command(flatten)]
    source: ProblemSource,
    /// Final time; ignored when --eps is given.
    #[arg(long, default_value_t = 1001)]
    t: u64,
    /// Defaults to t/2.
    #[arg(long)]
    t_b: Option<u64>,
    /// Target residual inflation; picks t and t_b from the entry budget.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args, Debug)]
struct FigureArgs {
    /// 1: four RK methods on Chebyshev regression. 2: ridge methods on
    /// monomial regression.
    #[arg(long, default_value_t = 1)]
    figure: u8,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Generate(a) => generate(a, seed, out),
        Command::Solve(a) => solve(a, seed, out),
        Command::Compare(a) => compare(a, cli.seed, out),
        Command::Bounds(a) => bounds(a, seed, out),
        Command::Active(a) => active(a, seed, out),
        Command::FigureData(a) => figure_data(a, seed, out),
    }
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut f = io::BufWriter::new(fs::File::create(p)?);
            write(&mut f)?;
            f.flush()?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn generate(a: &GenerateArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let dir = out.unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let (problem, spec) = match a.kind {
        ProblemKind::Poly => {
            let spec = PolyRegressionSpec {
                n: a.n,
                d: a.d,
                basis: a.basis.into(),
                noise_std: a.noise_std,
                seed,
            };
            (gen_poly_regression(&spec)?, serde_json::to_value(&spec)?)
        }
        ProblemKind::LowerBound => {
            let spec = LowerBoundSpec {
                d: a.d,
                m: a.m,
                v: a.v,
                seed,
            };
            (gen_lower_bound_problem(&spec)?, serde_json::to_value(&spec)?)
        }
        ProblemKind::Gaussian => (
            gen_gaussian_problem(a.n, a.d, a.noise_std, seed)?,
            json!({"n": a.n, "d": a.d, "noise_std": a.noise_std, "seed": seed}),
        ),
    };
    let spectral = spectral_summary(&problem.matrix)?;
    write_matrix(dir.join("A.txt"), &problem.matrix)?;
    write_vector(dir.join("b.txt"), &problem.rhs)?;
    let x = problem.reference_solution.as_deref().unwrap_or(&[]);
    write_vector(dir.join("x_ref.txt"), x)?;
    write_json(
        &dir.join("problem.json"),
        &json!({
            "kind": format!("{:?}", a.kind).to_lowercase(),
            "spec": spec,
            "n": problem.n_rows(),
            "d": problem.n_cols(),
            "kappa_dem": spectral.kappa_dem(),
            "condition_number": spectral.condition_number(),
            "rank": spectral.rank,
            "matrix": "A.txt",
            "rhs": "b.txt",
            "reference_solution": "x_ref.txt",
            "reference_residual_sq": problem.reference_residual_sq,
        }),
    )?;
    eprintln!(
        "wrote {}x{} problem to {} (kappa_dem {:.6e}, cond {:.6e})",
        problem.n_rows(),
        problem.n_cols(),
        dir.display(),
        spectral.kappa_dem(),
        spectral.condition_number()
    );
    Ok(())
}

fn solve(a: &SolveArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let method: MethodKind = a.method.parse()?;
    let spec = MethodSpec {
        t_b: a.t_b,
        omega: a.omega,
        q: a.q,
        mu: a.mu,
        ..MethodSpec::new(method)
    };
    let mut cfg = ExperimentConfig::new(
        ProblemSpec::Files {
            matrix: a.matrix.clone(),
            rhs: a.rhs.clone(),
        },
        vec![spec],
        a.budget,
    );
    cfg.trials = 1;
    cfg.master_seed = seed;
    cfg.points_per_decade = 1;
    cfg.ridge_mu = a.mu;
    let result = run_experiment(&cfg, None, None)?;
    let x = &result.finals[0].x;
    emit(out, |w| {
        w.write_all(tark::linalg::format_vector(x).as_bytes())?;
        Ok(())
    })?;
    eprintln!(
        "{}: {} rows, rel_err_lstsq {:e}",
        method.name(),
        a.budget,
        relative_error(x, &result.reference)
    );
    if let Some(r) = &result.ridge_reference {
        eprintln!("rel_err_ridge {:e}", relative_error(x, r));
    }
    Ok(())
}

/// Sibling path `<stem><suffix>` next to `csv`.
fn sibling(csv: &Path, suffix: &str) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    csv.with_file_name(format!("{stem}{suffix}"))
}

fn write_outputs(result: &ExperimentOutput, csv: Option<&Path>, ridge: bool) -> Result<()> {
    emit(csv, |w| write_csv(&result.records, w))?;
    if let Some(p) = csv {
        write_json(&sibling(p, "_summary.json"), &serde_json::to_value(&result.summary)?)?;
        let agg = aggregate(&result.records, Metric::Lstsq);
        emit(Some(&sibling(p, "_aggregate.csv")), |w| write_aggregate_csv(&agg, w))?;
        if ridge {
            let agg = aggregate(&result.records, Metric::Ridge);
            emit(Some(&sibling(p, "_aggregate_ridge.csv")), |w| {
                write_aggregate_csv(&agg, w)
            })?;
        }
    }
    for s in &result.summary {
        let ridge = s
            .median_rel_err_ridge
            .map(|m| format!(", ridge median {m:e}"))
            .unwrap_or_default();
        eprintln!(
            "{:>16}: median {:e} (IQR {:e} .. {:e}){ridge}",
            s.method, s.median_rel_err_lstsq, s.iqr_rel_err_lstsq[0], s.iqr_rel_err_lstsq[1]
        );
    }
    Ok(())
}

fn compare(a: &CompareArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let base = a.config.parent();
    let csv = out.map(Path::to_path_buf).or_else(|| {
        cfg.output
            .as_ref()
            .map(|p| base.filter(|_| p.is_relative()).map_or(p.clone(), |b| b.join(p)))
    });
    let result = run_experiment(&cfg, base, None)?;
    write_outputs(&result, csv.as_deref(), cfg.ridge_mu.is_some())
}

fn bounds(a: &BoundsArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let kind: BoundKind = a.theorem.to_ascii_lowercase().parse()?;
    let problem = a.source.load(seed)?;
    let mut setup = BoundSetup::new(kind, a.t_b.unwrap_or(a.t / 4), a.t, a.trials, seed);
    setup.mu = a.mu;
    let report = verify_bounds(&problem, &setup)?;
    let value = serde_json::to_value(&report)?;
    emit(out, |w| {
        writeln!(w, "{}", serde_json::to_string_pretty(&value)?)?;
        Ok(())
    })?;
    eprintln!(
        "{:?}: {} of {} checkpoints pass",
        kind,
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len()
    );
    Ok(())
}

fn active(a: &ActiveArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let problem = a.source.load(seed)?;
    let solver = PreconditionedTark::new(&problem)?;
    let r = solver.rank();
    let (t_b, t) = match a.eps {
        Some(eps) if eps > 0.0 => budget_schedule(r, eps),
        Some(eps) => return Err(Error::InvalidParameter(format!("eps {eps} must be positive"))),
        None => (a.t_b.unwrap_or(a.t / 2), a.t),
    };
    if t_b >= t {
        return Err(Error::InvalidParameter(format!("burn-in {t_b} must be below t = {t}")));
    }
    let optimal = problem
        .reference_residual_sq
        .expect("loaded problems carry a reference");
    let bound = bound_theorem6(r, t_b, t);
    let mut lines = Vec::with_capacity(a.trials);
    let mut total = 0.0;
    for trial in 0..a.trials {
        let mut rng = RngStream::new(derive_seed(seed, &[trial as u64]));
        let est = solver.run(t_b, t, &mut rng, &mut tark::kaczmarz::NoTrace)?;
        let res = problem.residual_sq(&est.x);
        total += res;
        lines.push(format!(
            "{trial},{},{},{},{},{}",
            est.entries_accessed,
            res,
            optimal,
            res / optimal,
            bound
        ));
    }
    emit(out, |w| {
        writeln!(w, "trial,entries_accessed,residual_sq,optimal_residual_sq,ratio,bound")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    eprintln!(
        "rank {r}, t_b {t_b}, t {t}: mean ratio {:.6}, bound {:.6}",
        total / a.trials.max(1) as f64 / optimal,
        bound
    );
    Ok(())
}

fn figure_data(a: &FigureArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let dir = out.unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let (cfg, basis) = match a.figure {
        1 => (figure1_config(a.n, a.budget, a.trials, seed), Basis::Chebyshev),
        2 => (figure2_config(a.n, a.budget, a.trials, seed), Basis::Monomial),
        other => return Err(Error::Config(format!("unknown figure {other}"))),
    };
    let result = run_experiment(&cfg, None, None)?;
    let csv = dir.join(format!("figure{}.csv", a.figure));
    write_outputs(&result, Some(&csv), cfg.ridge_mu.is_some())?;
    write_json(
        &dir.join(format!("figure{}_coefficients.json", a.figure)),
        &coefficients_sidecar(basis, &result.reference, &result.finals),
    )?;
    write_json(
        &dir.join(format!("figure{}_config.json", a.figure)),
        &serde_json::to_value(&cfg)?,
    )?;
    Ok(())
}
