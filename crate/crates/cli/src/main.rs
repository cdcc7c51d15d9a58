// `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ipsr_core::fixtures::Shape;
use ipsr_core::io::{read_mesh, read_points, write_mesh, write_oriented_points, write_points_xyz};
use ipsr_core::metrics::{symmetric_distance, trim_far_vertices, DEFAULT_SAMPLES_PER_DIRECTION};
use ipsr_core::pipeline::{run_ipsr_with, IpsrOutput, DEFAULT_DELTA, DEFAULT_DEPTH, DEFAULT_MAX_ITERS};
use ipsr_core::poisson::DEFAULT_ALPHA;
use ipsr_core::toy2d::{run_ipsr_2d, Init2d, Shape2d, Toy2dConfig};
use ipsr_core::{Error, Init, IpsrConfig, Point3};

#[derive(Parser)]
#[command(name = "ipsr", version, about = "Watertight surfaces from unoriented point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct a mesh from a point cloud (.xyz, .ply, .obj)
    Reconstruct(RunArgs),
    /// Export the oriented sample points instead of a mesh
    Orient(RunArgs),
    /// Normalized symmetric distance between two meshes
    Evaluate(EvaluateArgs),
    /// Run the planar replica on a built-in curve
    Toy2d(Toy2dArgs),
    /// Write points sampled from an analytic test shape
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InitKind {
    Random,
    Visibility,
}

#[derive(Args)]
struct RunArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Grid resolution is 2^depth
    #[arg(long, default_value_t = DEFAULT_DEPTH, value_parser = clap::value_parser!(u32).range(4..=10))]
    depth: u32,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = InitKind::Random)]
    init: InitKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Screening weight of the last solve (defaults to --alpha)
    #[arg(long)]
    final_alpha: Option<f64>,
    /// Write iter_<N>.ply and report.jsonl here
    #[arg(long)]
    dump_iters: Option<PathBuf>,
    /// Drop mesh vertices farther than this from every input point
    #[arg(long)]
    trim_dist: Option<f64>,
    /// Single-threaded, reproducible run
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    recon: PathBuf,
    reference: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_DIRECTION)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape2dKind {
    Ellipse,
    Circle,
    TwoCircles,
}

#[derive(Args)]
struct Toy2dArgs {
    #[arg(long, value_enum)]
    shape: Shape2dKind,
    /// Write iter_<N>.svg snapshots here
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    points: usize,
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u32).range(2..=12))]
    depth: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeKind {
    Sphere,
    Torus,
    Ellipsoid,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(value_enum)]
    shape: ShapeKind,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(short = 'n', long, default_value_t = 4000)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    /// Bad arguments or unreadable input: exit 2.
    Usage(String),
    /// Exit 1.
    Runtime(String),
}

fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidParameter { .. } | Error::Parse { .. } | Error::UnknownFormat(_) => Failure::Usage(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn input_error(path: &Path, e: Error) -> Failure {
    match e {
        Error::Io(io) => Failure::Usage(format!("{}: {io}", path.display())),
        other => Failure::Usage(other.to_string()),
    }
}

fn check_output(path: &Path, allowed: &[&str]) -> Result<(), Failure> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext {
        Some(e) if allowed.contains(&e.as_str()) => Ok(()),
        _ => Err(Failure::Usage(format!(
            "{}: output must end in .{}",
            path.display(),
            allowed.join(" or .")
        ))),
    }
}

fn configure_threads(deterministic: bool) -> Result<(), Failure> {
    let threads = if deterministic {
        Some(1)
    } else {
        match std::env::var("IPSR_THREADS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Failure::Usage(format!("IPSR_THREADS must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn load_points(path: &Path) -> Result<Vec<Point3>, Failure> {
    let cloud = read_points(path).map_err(|e| input_error(path, e))?;
    if cloud.normals.is_some() {
        eprintln!("note: input normals ignored");
    }
    Ok(cloud.points)
}

fn run(args: &RunArgs) -> Result<(Vec<Point3>, IpsrOutput), Failure> {
    configure_threads(args.deterministic)?;
    let config = IpsrConfig {
        depth: args.depth,
        alpha: args.alpha,
        delta: args.delta,
        k: args.k,
        max_iters: args.max_iters,
        init: match args.init {
            InitKind::Random => Init::Random { seed: args.seed },
            InitKind::Visibility => Init::Visibility,
        },
        deterministic: args.deterministic,
        final_alpha: args.final_alpha,
        dump_dir: args.dump_iters.clone(),
        ..Default::default()
    };
    config.validate().map_err(classify)?;
    if let Some(t) = args.trim_dist {
        if !(t > 0.0) {
            return Err(Failure::Usage(format!("--trim-dist must be > 0, got {t}")));
        }
    }
    let points = load_points(&args.input)?;
    let out = run_ipsr_with(&points, &config, |r| eprintln!("{r}")).map_err(classify)?;
    if !out.converged {
        eprintln!("warning: not converged after {} iterations", out.reports.len());
    }
    Ok((points, out))
}

fn reconstruct(args: RunArgs) -> Result<(), Failure> {
    check_output(&args.output, &["ply", "obj"])?;
    let (points, out) = run(&args)?;
    let mesh = match args.trim_dist {
        Some(t) => trim_far_vertices(&out.mesh, &points, t).map_err(classify)?,
        None => out.mesh,
    };
    write_mesh(&mesh, &args.output).map_err(classify)
}

fn orient(args: RunArgs) -> Result<(), Failure> {
    check_output(&args.output, &["ply"])?;
    let (_, out) = run(&args)?;
    write_oriented_points(&out.samples, &out.transform, &args.output).map_err(classify)
}

fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let recon = read_mesh(&args.recon).map_err(|e| input_error(&args.recon, e))?;
    let reference = read_mesh(&args.reference).map_err(|e| input_error(&args.reference, e))?;
    let d = symmetric_distance(&recon, &reference, args.samples, args.seed).map_err(|e| match e {
        Error::EmptyMesh => Failure::Usage("empty mesh".into()),
        e => classify(e),
    })?;
    println!("mean={:.6e} max={:.6e}", d.mean, d.max);
    Ok(())
}

fn toy2d(args: Toy2dArgs) -> Result<(), Failure> {
    let shape = match args.shape {
        Shape2dKind::Ellipse => Shape2d::ELLIPSE,
        Shape2dKind::Circle => Shape2d::CIRCLE,
        Shape2dKind::TwoCircles => Shape2d::TWO_CIRCLES,
    };
    let config = Toy2dConfig {
        depth: args.depth,
        init: Init2d::Random { seed: args.seed },
        svg_dir: args.svg,
        ..Default::default()
    };
    let out = run_ipsr_2d(&shape.sample(args.points), &config).map_err(classify)?;
    let inward = out.inward_history(|p| shape.inward_normal(p));
    println!("iter=0 inward={:.4}", inward[0]);
    for (r, f) in out.reports.iter().zip(&inward[1..]) {
        let d = r.d.map_or("-".to_string(), |d| format!("{d:.6}"));
        println!("iter={} d={d} loops={} inward={f:.4}", r.iter, r.loops);
    }
    println!("converged={} loops={}", out.converged, out.loops.len());
    Ok(())
}

fn fixture(args: FixtureArgs) -> Result<(), Failure> {
    let shape = match args.shape {
        ShapeKind::Sphere => Shape::UNIT_SPHERE,
        ShapeKind::Torus => Shape::UNIT_TORUS,
        ShapeKind::Ellipsoid => Shape::UNIT_ELLIPSOID,
    };
    check_output(&args.output, &["xyz"])?;
    write_points_xyz(&shape.sample(args.points, args.seed), &args.output).map_err(classify)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reconstruct(a) => reconstruct(a),
        Command::Orient(a) => orient(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Toy2d(a) => toy2d(a),
        Command::Fixture(a) => fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
