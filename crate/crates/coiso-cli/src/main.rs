//! `coiso` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use coiso_cli::commands::{execute, BracketArgs, Command, DynamicsArgs, JacobiArgs};
use coiso_cli::config::{ConfigFile, Overrides, RunConfig, Tolerances};
use coiso_cli::report::render;
use coiso_cli::CliError;

#[derive(Parser)]
#[command(name = "coiso", version, about = "Coisotropic embeddings, connections and brackets of pre-symplectic models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate, classify and embed; certify the embedding.
    Analyze(Common),
    /// Evaluate {f, g} at points.
    Bracket {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        /// Comma-separated base or enlarged point.
        #[arg(long, conflicts_with = "random")]
        at: Option<String>,
        /// Number of seeded random points.
        #[arg(long)]
        random: Option<usize>,
        /// Expression the bracket is compared against.
        #[arg(long)]
        expect: Option<String>,
    },
    /// Jacobiator over seeded random polynomial triples.
    Jacobi {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        triples: usize,
        /// Rescale the bivector by a non-constant factor (negative control).
        #[arg(long)]
        corrupt: bool,
    },
    /// Constraint algorithm on the model's Hamiltonian system.
    Pca(Common),
    /// Integrate the bracket flow and report energy drift.
    Dynamics {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Comma-separated initial state in the enlarged chart.
        #[arg(long)]
        at: Option<String>,
        /// CSV path (defaults to the report path with a .csv extension).
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_rank: Option<f64>,
    #[arg(long)]
    tol_curvature: Option<f64>,
    #[arg(long)]
    tol_closed: Option<f64>,
    #[arg(long)]
    tol_jacobi: Option<f64>,
    #[arg(long)]
    tol_drift: Option<f64>,
    /// central (hooks on), fd (hooks off) or exact.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = self.config.as_deref().map(ConfigFile::load).transpose()?;
        RunConfig::resolve(
            file,
            Overrides {
                model: self.model.clone(),
                n: self.n,
                grid: self.grid.clone(),
                group: self.group.clone(),
                points: self.points,
                seed: self.seed,
                tol: Tolerances {
                    rank: self.tol_rank,
                    curvature: self.tol_curvature,
                    closed: self.tol_closed,
                    jacobi: self.tol_jacobi,
                    drift: self.tol_drift,
                },
                backend: self.backend.clone(),
                h: self.h,
                output: self.output.clone(),
            },
        )
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad coordinate `{p}` in `{s}`"))))
        .collect()
}

fn write(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (common, cmd, csv_path) = match cli.command {
        Cmd::Analyze(c) => (c, Command::Analyze, None),
        Cmd::Pca(c) => (c, Command::Pca, None),
        Cmd::Bracket { common, f, g, at, random, expect } => {
            let at = at.as_deref().map(parse_point).transpose()?;
            (common, Command::Bracket(BracketArgs { f, g, at, random, expect }), None)
        }
        Cmd::Jacobi { common, triples, corrupt } => (common, Command::Jacobi(JacobiArgs { triples, corrupt }), None),
        Cmd::Dynamics { common, t_end, dt, at, trajectory } => {
            let at = at.as_deref().map(parse_point).transpose()?;
            (common, Command::Dynamics(DynamicsArgs { t_end, dt, at }), trajectory)
        }
    };
    let cfg = common.resolve()?;
    let mut out = execute(&cmd, &cfg);
    if !common.no_timestamp {
        out.report.generated_at = SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs());
    }
    let json = out.report.to_json();
    match &cfg.output {
        Some(p) => write(p, &json)?,
        None => print!("{json}"),
    }
    if let Some(csv) = &out.trajectory {
        let path = csv_path.or_else(|| cfg.output.as_ref().map(|p| p.with_extension("csv")));
        if let Some(p) = path {
            write(&p, csv)?;
        }
    }
    eprint!("{}", render(&json));
    Ok(out.exit)
}

fn main() -> ExitCode {
    // Usage errors are configuration errors (3), not clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
