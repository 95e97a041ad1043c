use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wirelayr::bench::{run_bench, write_cells_csv, write_instances_csv, BenchParams};
use wirelayr::diagram::{validate_instance, Instance};
use wirelayr::engine::{solve_instance, Problem, Solution, SolveParams, SolveStatus};
use wirelayr::gridgen::{assemble_forest, dump_graphs};
use wirelayr::milp::{export_model, ModelFormat};
use wirelayr::scene::{export_scene, SceneFormat};
use wirelayr::synth::{generate_fitting, generate_suite, instance_file_name, GeneratorParams, SuiteManifest, SuiteSpec};
use wirelayr::validate::{check_layout, BendGap};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NO_INCUMBENT: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "wirelayr", version, about = "Lay out wiring trees around pipelines in 3-D")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate one synthetic instance.
    Generate(GenerateArgs),
    /// Generate a grid of synthetic instances plus a manifest.
    Suite(SuiteArgs),
    /// Dump the per-tree grid graphs of an instance.
    Discretize {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance to optimality or until the time limit.
    Solve(SolveArgs),
    /// Check a solution against the instance geometry.
    Validate {
        instance: PathBuf,
        solution: PathBuf,
        /// Treat bends closer than G as violations instead of advisories.
        #[arg(long, value_name = "G")]
        enforce_bend_gap: Option<i64>,
    },
    /// Solve every instance of a suite and tabulate per cell.
    Bench(BenchArgs),
    /// Write an instance and optional solution as a 3-D scene.
    Export {
        instance: PathBuf,
        #[arg(long)]
        solution: Option<PathBuf>,
        /// obj or csv
        #[arg(long, default_value = "obj")]
        format: SceneFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    pipelines: usize,
    #[arg(long, default_value_t = 1)]
    branches: usize,
    #[arg(long, default_value_t = 3)]
    nodes: usize,
    #[arg(long, default_value_t = 1)]
    delta: i64,
    #[arg(long, default_value_t = 100)]
    cube: i64,
    #[arg(long, default_value_t = 10)]
    region_edge: i64,
    #[arg(long, default_value_t = 10)]
    min_bend_gap: i64,
    #[arg(long, default_value_t = 6)]
    min_pipeline_separation: i64,
    /// Output directory; the file name encodes the parameters.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SuiteArgs {
    /// The full benchmark grid: {1,2} x {1,3,5} x {3,5,10,15} x {1,3,5}.
    #[arg(long)]
    table1: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [1])]
    pipelines: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1])]
    branches: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [3])]
    nodes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1])]
    deltas: Vec<i64>,
    #[arg(long, default_value_t = 10)]
    per_cell: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, default_value_t = 100)]
    cube: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Seconds.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Overridden by WIRELAYR_THREADS.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    node_limit: Option<u64>,
    /// Materialize every safety row before the search starts.
    #[arg(long)]
    eager: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full model (all safety rows) as MPS, or LP by extension.
    #[arg(long, value_name = "PATH")]
    emit_model: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    manifest: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Instances solved at once. Overridden by WIRELAYR_THREADS.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-cell CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance CSV.
    #[arg(long)]
    instances: Option<PathBuf>,
}

fn threads(flag: usize) -> Result<usize> {
    match std::env::var("WIRELAYR_THREADS") {
        Ok(v) => v.trim().parse().with_context(|| format!("WIRELAYR_THREADS={v:?} is not a count")),
        Err(_) => Ok(flag),
    }
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("bad time limit {s}"))
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = Instance::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let issues = validate_instance(&inst);
    if let Some(first) = issues.first() {
        bail!("{}: {} issue(s), first: {first}", path.display(), issues.len());
    }
    Ok(inst)
}

fn load_solution(path: &Path) -> Result<Solution> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Solution::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Write to `path`, or stdout when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let p = GeneratorParams {
        seed: a.seed,
        cube: a.cube,
        pipelines: a.pipelines,
        branches: a.branches,
        nodes: a.nodes,
        region_edge: a.region_edge,
        delta: a.delta,
        min_bend_gap: a.min_bend_gap,
        min_pipeline_separation: a.min_pipeline_separation,
    };
    let inst = generate_fitting(&p)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let path = a.out.join(instance_file_name(&p));
    fs::write(&path, inst.to_json_string()).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn suite(a: SuiteArgs) -> Result<ExitCode> {
    let spec = if a.table1 {
        SuiteSpec { base_seed: a.base_seed, cube: a.cube, ..SuiteSpec::table1(a.per_cell) }
    } else {
        SuiteSpec {
            pipelines: a.pipelines,
            branches: a.branches,
            nodes: a.nodes,
            deltas: a.deltas,
            per_cell: a.per_cell,
            base_seed: a.base_seed,
            cube: a.cube,
        }
    };
    let m = generate_suite(&spec, &a.out)?;
    eprintln!("{} instances in {}", m.entries.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn discretize(instance: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let inst = load_instance(instance)?;
    let graphs = match assemble_forest(&inst) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("infeasible: {e}");
            return Ok(ExitCode::from(EXIT_INFEASIBLE));
        }
    };
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, &dump_graphs(&inst, &graphs))?;
    writeln!(w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let inst = load_instance(&a.instance)?;
    let params = SolveParams {
        time_limit: seconds(a.time_limit)?,
        threads: threads(a.threads)?.max(1),
        seed: a.seed,
        eager: a.eager,
        node_limit: a.node_limit,
    };
    let (layout, report) = match Problem::build(&inst) {
        Ok(p) => {
            if let Some(path) = &a.emit_model {
                export_model(&p.eager_model(), ModelFormat::from_path(path), path)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let out = p.solve(&params);
            (out.layout, out.report)
        }
        Err(_) => {
            let out = solve_instance(&inst, &params);
            (out.layout, out.report)
        }
    };
    let sol = Solution::new(layout.as_ref(), &report);
    let mut w = sink(a.out.as_deref())?;
    w.write_all(sol.to_json_string().as_bytes())?;
    w.flush()?;
    eprintln!(
        "{:?}: objective {:?}, bound {:?}, {} nodes, {} lazy rows, {:.3}s",
        report.status,
        report.objective,
        report.best_bound,
        report.nodes,
        report.lazy_rows,
        report.wall_time.as_secs_f64()
    );
    Ok(match report.status {
        SolveStatus::Optimal | SolveStatus::Feasible => ExitCode::SUCCESS,
        SolveStatus::Infeasible => ExitCode::from(EXIT_INFEASIBLE),
        SolveStatus::TimeLimit => ExitCode::from(EXIT_NO_INCUMBENT),
    })
}

fn validate(instance: &Path, solution: &Path, enforce: Option<i64>) -> Result<ExitCode> {
    let inst = load_instance(instance)?;
    let sol = load_solution(solution)?;
    let Some(layout) = sol.layout() else {
        bail!("{} holds no layout (status {:?})", solution.display(), sol.status);
    };
    let bend = match enforce {
        Some(g) => BendGap { min_gap: g, enforce: true },
        None => BendGap::default(),
    };
    let report = check_layout(&inst, &layout, bend);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let manifest = SuiteManifest::load(&a.manifest)?;
    let dir = a.manifest.parent().unwrap_or(Path::new("."));
    let params = BenchParams { time_limit: seconds(a.time_limit)?, seed: a.seed, jobs: threads(a.threads)?.max(1) };
    let result = run_bench(&manifest, dir, &params)?;
    write_cells_csv(&result.cells, sink(a.out.as_deref())?)?;
    if let Some(p) = &a.instances {
        write_instances_csv(&result.instances, sink(Some(p))?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn export(instance: &Path, solution: Option<&Path>, format: SceneFormat, out: Option<&Path>) -> Result<ExitCode> {
    let inst = load_instance(instance)?;
    let layout = match solution {
        Some(p) => load_solution(p)?.layout(),
        None => None,
    };
    if let Some(l) = &layout {
        let report = check_layout(&inst, l, BendGap::default());
        if !report.is_empty() {
            bail!("solution does not validate: {} violation(s)", report.violations.len());
        }
    }
    let mut w = sink(out)?;
    export_scene(&inst, layout.as_ref(), format, &mut w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Generate(a) => generate(a),
        Cmd::Suite(a) => suite(a),
        Cmd::Discretize { instance, out } => discretize(&instance, out.as_deref()),
        Cmd::Solve(a) => solve(a),
        Cmd::Validate { instance, solution, enforce_bend_gap } => validate(&instance, &solution, enforce_bend_gap),
        Cmd::Bench(a) => bench(a),
        Cmd::Export { instance, solution, format, out } => export(&instance, solution.as_deref(), format, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
