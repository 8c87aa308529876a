use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use gradedmg::fem::{self, ModelProblem};
use gradedmg::hierarchy::{self, HierarchyConfig, MeshHierarchy};
use gradedmg::meshgen::{self, GradingSpec, FICHERA_EDGE_ANGLE, PACMAN_ANGLE};
use gradedmg::solver::{gmres, GmresOptions, Ilu0, MgPreconditioner, Preconditioner};
use gradedmg::{io, Error, Result};

/// Graded meshes, coarsened hierarchies and geometric multigrid solves.
#[derive(Parser)]
#[command(name = "gradedmg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a model-domain mesh.
    Generate(GenerateArgs),
    /// Coarsen a mesh into a hierarchy and report its quality.
    Coarsen(CoarsenArgs),
    /// Solve a model problem on a hierarchy written by `coarsen`.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Pacman,
    Fichera,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mg,
    Ilu,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

#[derive(Args)]
struct GenerateArgs {
    domain: DomainArg,
    #[arg(long, value_parser = positive_usize)]
    vertices: usize,
    /// Grade toward the reentrant feature (default).
    #[arg(long, conflicts_with = "uniform")]
    graded: bool,
    /// Quasi-uniform mesh.
    #[arg(long)]
    uniform: bool,
    /// Grading exponent; defaults to pi over the reentrant angle.
    #[arg(long, value_parser = positive_f64)]
    mu: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoarsenArgs {
    mesh: PathBuf,
    #[arg(long, value_parser = positive_f64)]
    beta: Option<f64>,
    /// Stop once a level has at most this many vertices.
    #[arg(long, value_parser = positive_usize)]
    min_coarse: Option<usize>,
    #[arg(long, value_parser = positive_f64)]
    c_ar: Option<f64>,
    /// Feature angle threshold in radians.
    #[arg(long, value_parser = positive_f64)]
    c_k: Option<f64>,
    #[arg(long, value_parser = positive_usize)]
    max_levels: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    hierarchy: PathBuf,
    #[arg(long)]
    problem: DomainArg,
    #[arg(long, default_value = "mg")]
    method: Method,
    #[arg(long, default_value_t = 1e-12, value_parser = positive_f64)]
    rtol: f64,
    #[arg(long, default_value_t = 3, value_parser = positive_usize)]
    smooths: usize,
    #[arg(long, value_parser = positive_usize)]
    restart: Option<usize>,
    #[arg(long, default_value_t = 100_000, value_parser = positive_usize)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let angle = match a.domain {
        DomainArg::Pacman => PACMAN_ANGLE,
        DomainArg::Fichera => FICHERA_EDGE_ANGLE,
    };
    let grading = if a.uniform {
        GradingSpec::uniform()
    } else {
        GradingSpec::graded(match a.mu {
            Some(mu) => mu,
            None => meshgen::mu_for_angle(angle)?,
        })
    };
    let mesh = match a.domain {
        DomainArg::Pacman => meshgen::generate_pacman(&grading, a.vertices)?,
        DomainArg::Fichera => meshgen::generate_fichera(&grading, a.vertices)?,
    };
    io::write_mesh(&a.out, &mesh)?;
    println!(
        "{} vertices, {} cells (mu = {}) -> {}",
        mesh.num_vertices(),
        mesh.num_cells(),
        grading.mu,
        a.out.display()
    );
    Ok(())
}

fn level_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("level_{k}.mesh"))
}

fn coarsen(a: &CoarsenArgs) -> Result<()> {
    let mesh = io::read_mesh(&a.mesh)?;
    let mut cfg = HierarchyConfig::for_dim(mesh.dim());
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    if let Some(m) = a.min_coarse {
        cfg.min_vertices = m;
    }
    if let Some(c) = a.c_ar {
        cfg.remesh = cfg.remesh.with_c_ar(c);
    }
    if let Some(c) = a.c_k {
        cfg.curvature_threshold = c;
    }
    if let Some(m) = a.max_levels {
        cfg.max_levels = m;
    }
    let h = hierarchy::build_hierarchy(&mesh, &cfg)?;
    if h.len() == 1 {
        if mesh.num_vertices() <= cfg.min_vertices {
            warn!("mesh has {} vertices, already at most {}; hierarchy has one level", mesh.num_vertices(), cfg.min_vertices);
        } else {
            warn!("first coarsening did not halve the cell count at beta {}; hierarchy has one level", cfg.beta);
        }
    }
    fs::create_dir_all(&a.out)?;
    for (k, m) in h.meshes().enumerate() {
        io::write_mesh(&level_path(&a.out, k), m)?;
    }
    let rows = h.metrics();
    fs::write(a.out.join("quality.csv"), hierarchy::metrics_csv(&rows))?;
    print!("{}", hierarchy::metrics_table(&rows));
    Ok(())
}

fn read_hierarchy(dir: &Path) -> Result<MeshHierarchy> {
    let mut meshes = Vec::new();
    while level_path(dir, meshes.len()).exists() {
        meshes.push(io::read_mesh(&level_path(dir, meshes.len()))?);
    }
    if meshes.is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no level_0.mesh in {}", dir.display()),
        )));
    }
    MeshHierarchy::from_meshes(meshes, false)
}

fn solve(a: &SolveArgs) -> Result<()> {
    let h = read_hierarchy(&a.hierarchy)?;
    let problem = match a.problem {
        DomainArg::Pacman => ModelProblem::pacman(),
        DomainArg::Fichera => ModelProblem::fichera(),
    };
    let (sys, precond): (_, Box<dyn Preconditioner>) = match a.method {
        Method::Mg => {
            if h.len() < 2 {
                return Err(Error::SingleLevel);
            }
            let (sys, mg) = MgPreconditioner::from_hierarchy(&h, &problem, a.smooths)?;
            (sys, Box::new(mg))
        }
        Method::Ilu => {
            let sys = fem::assemble(h.mesh(0), &problem)?;
            let ilu = Ilu0::factor(&sys.matrix)?;
            (sys, Box::new(ilu))
        }
    };
    let restart = a.restart.unwrap_or(match a.method {
        Method::Mg => 50,
        Method::Ilu => 30,
    });
    let opts = GmresOptions { rtol: a.rtol, restart, max_iters: a.max_iters };
    let r = gmres(&sys.matrix, &sys.rhs, precond.as_ref(), &opts);
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("convergence.csv"), r.history_csv())?;
    io::write_vector(&a.out.join("solution.vec"), &r.x)?;
    let method = match a.method {
        Method::Mg => "mg",
        Method::Ilu => "ilu",
    };
    let mut summary = format!(
        "dofs,levels,method,iterations,relative_residual,converged\n{},{},{method},{},{:e},{}",
        sys.num_dofs(),
        h.len(),
        r.iterations,
        r.relative_residual,
        r.converged
    );
    if let Some(exact) = problem.exact() {
        let e = fem::l2_error(h.mesh(0), &r.x, exact)?;
        summary = summary.replacen("converged\n", "converged,l2_error\n", 1);
        summary.push_str(&format!(",{e:e}"));
    }
    println!("{summary}");
    fs::write(a.out.join("summary.csv"), summary + "\n")?;
    if !r.converged {
        warn!("GMRES did not reach rtol {} ({} iterations)", a.rtol, r.iterations);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("GRADEDMG_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    warn!("could not size thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: GRADEDMG_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    let res = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Coarsen(a) => coarsen(a),
        Command::Solve(a) => solve(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
