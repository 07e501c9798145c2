//! The five commands. Each fills a [`Report`]; a stage error leaves a
//! partial report naming the stage.

use coiso::connection::{curvature_decomposition, validate, Classification};
use coiso::embedding::{certify_closed, certify_coisotropic, tubular_radius, CoisotropicEmbedding};
use coiso::geomcore::poly::Polynomial;
use coiso::geomcore::Bivector;
use coiso::obs::{compile, parse};
use coiso::pca::{primary_constraints, solve_dynamics, stabilization_step, Trajectory};
use coiso::poisson::{
    block_decompose, bracket, invert, jacobi_residual, lift, project, projectability_check, PoissonStructure,
};
use coiso::presympl::kernel_basis;
use coiso::sampling::{rng, uniform, SeededRng};
use coiso::ScalarField;
use serde_json::Value;

use crate::config::{ModelKind, RunConfig};
use crate::instance::Instance;
use crate::report::{BracketRow, ConstraintEntry, Report};
use crate::{CliError, EXIT_CERTIFICATION, EXIT_OK};

/// Tolerance of the algebraic connection checks.
pub const VALIDATE_TOL: f64 = 1e-8;
/// Default closedness tolerance for `dOmega` (finite differences).
pub const CLOSED_TOL: f64 = 1e-4;
/// Pullback and `{mu, mu}` tolerance on the zero section.
pub const COISOTROPY_TOL: f64 = 1e-6;
/// `mu`-derivative tolerance for projecting `Lambda_W`.
pub const PROJECTABILITY_TOL: f64 = 1e-6;
/// Cross-term tolerance of the block split.
pub const BLOCK_TOL: f64 = 1e-8;
/// Agreement required between a bracket and its `--expect` expression.
pub const BRACKET_TOL: f64 = 1e-6;
pub const JACOBI_TOL: f64 = 1e-5;
pub const DRIFT_TOL: f64 = 1e-8;
/// Points used for the tubular radius and projectability sweeps.
const SWEEP_CAP: usize = 8;

/// Monopole initial state `(r, pr, s1, s2, s3, alpha1, alpha2, mu)`.
pub const MONOPOLE_X0: [f64; 8] = [1.0, -3.0, -1.2, 0.0, 0.0, 1.5, 0.0, 0.9];

#[derive(Debug, Clone, Default)]
pub struct BracketArgs {
    pub f: String,
    pub g: String,
    pub at: Option<Vec<f64>>,
    pub random: Option<usize>,
    pub expect: Option<String>,
}

#[derive(Debug, Clone)]
pub struct JacobiArgs {
    pub triples: usize,
    pub corrupt: bool,
}

#[derive(Debug, Clone)]
pub struct DynamicsArgs {
    pub t_end: f64,
    pub dt: f64,
    pub at: Option<Vec<f64>>,
}

pub enum Command {
    Analyze,
    Bracket(BracketArgs),
    Jacobi(JacobiArgs),
    Pca,
    Dynamics(DynamicsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Bracket(_) => "bracket",
            Command::Jacobi(_) => "jacobi",
            Command::Pca => "pca",
            Command::Dynamics(_) => "dynamics",
        }
    }
}

pub struct Outcome {
    pub report: Report,
    pub exit: i32,
    /// CSV trajectory of the dynamics command.
    pub trajectory: Option<String>,
}

/// Runs `cmd` to completion; never panics on bad input.
pub fn execute(cmd: &Command, cfg: &RunConfig) -> Outcome {
    let mut report = Report::new(cmd.name(), cfg);
    let mut trajectory = None;
    let result = match cmd {
        Command::Analyze => analyze(cfg, &mut report),
        Command::Bracket(a) => run_bracket(cfg, a, &mut report),
        Command::Jacobi(a) => jacobi(cfg, a, &mut report),
        Command::Pca => pca(cfg, &mut report),
        Command::Dynamics(a) => dynamics(cfg, a, &mut report).map(|t| {
            trajectory = Some(t.to_csv());
            report.stages.iter().all(|s| s.pass)
        }),
    };
    let exit = match result {
        Ok(pass) => {
            report.pass = pass && report.stages.iter().all(|s| s.pass);
            if report.pass {
                EXIT_OK
            } else {
                report.failure_stage = report.stages.iter().find(|s| !s.pass).map(|s| s.name.clone());
                EXIT_CERTIFICATION
            }
        }
        Err(e) => {
            report.pass = false;
            report.error = Some(e.to_string());
            e.exit_code()
        }
    };
    Outcome { report, exit, trajectory }
}

/// Marks `name` as the running stage so an error leaves it recorded.
fn step<T>(rep: &mut Report, name: &str, f: impl FnOnce(&mut Report) -> Result<T, CliError>) -> Result<T, CliError> {
    rep.failure_stage = Some(name.to_string());
    let out = f(rep)?;
    rep.failure_stage = None;
    Ok(out)
}

fn radius_value(r: f64) -> Value {
    if r.is_finite() {
        Value::from(r)
    } else {
        Value::from("inf")
    }
}

struct Analysis {
    inst: Instance,
    base: Vec<Vec<f64>>,
    classification: Classification,
    embedding: CoisotropicEmbedding,
    lambda: PoissonStructure,
}

/// Build, classify and embed; shared by `analyze`, `bracket` and `jacobi`.
fn prepare(cfg: &RunConfig, rep: &mut Report, full: bool) -> Result<Analysis, CliError> {
    let inst = step(rep, "build", |_| Instance::build(cfg, false))?;
    let base = inst.base_points(cfg.points, cfg.seed);
    let structure = match cfg.tol.rank {
        Some(t) => inst.structure.clone().with_rank_tol(t),
        None => inst.structure.clone(),
    };
    if full {
        step(rep, "kernel", |rep| {
            let mut coranks = Vec::with_capacity(base.len());
            for x in &base {
                coranks.push(kernel_basis(&structure, x)?.corank());
            }
            let k = coranks[0];
            rep.kernel_dim = Some(k);
            rep.stage("kernel", coranks.iter().all(|&c| c == k) && k == inst.connection.r());
            Ok(())
        })?;
        step(rep, "validate", |rep| {
            let v = validate(&inst.connection, &structure, &base, VALIDATE_TOL)?;
            rep.residual("idempotence", v.idempotence);
            rep.residual("verticality", v.verticality);
            rep.residual("kernel_membership", v.kernel_membership);
            rep.residual("invariance", v.invariance);
            rep.stage("validate", v.pass);
            Ok(())
        })?;
    }
    let classification = step(rep, "curvature", |rep| {
        let c = curvature_decomposition(&inst.connection, &base, cfg.tol.curvature)?;
        rep.residual("dP", c.max_dp());
        rep.residual("dHP", c.max_dhp());
        rep.residual("dVP", c.max_dvp());
        rep.classification = Some(c.classification);
        Ok(c.classification)
    })?;
    let embedding = step(rep, "embedding", |_| Ok(CoisotropicEmbedding::build(&structure, &inst.connection, &base[0])?))?;
    let lambda = invert(&embedding);
    Ok(Analysis { inst, base, classification, embedding, lambda })
}

pub fn analyze(cfg: &RunConfig, rep: &mut Report) -> Result<bool, CliError> {
    let a = prepare(cfg, rep, true)?;
    let zs = a.inst.enlarged_points(cfg.points, cfg.seed);
    let e = &a.embedding;
    step(rep, "closed", |rep| {
        let c = certify_closed(e, &zs)?;
        rep.residual("dOmega", c.residual);
        rep.stage("closed", c.residual < cfg.tol.closed.unwrap_or(CLOSED_TOL));
        Ok(())
    })?;
    step(rep, "coisotropic", |rep| {
        let c = certify_coisotropic(e, &a.lambda.lambda, &a.base, COISOTROPY_TOL)?;
        rep.residual("pullback", c.pullback_residual);
        rep.residual("mu_bracket", c.mu_bracket_residual);
        rep.stage("coisotropic", c.pass);
        Ok(())
    })?;
    let cap = a.base.len().min(SWEEP_CAP);
    step(rep, "tubular", |rep| {
        let t = tubular_radius(e, &a.base[..cap], SWEEP_CAP, cfg.seed)?;
        rep.tubular_radius = Some(radius_value(t.radius));
        Ok(())
    })?;
    step(rep, "projectability", |rep| {
        let b = block_decompose(&a.lambda, e, a.classification, &zs[..cap], BLOCK_TOL)?;
        let p = projectability_check(&b, &zs[..cap], &a.inst.connection.backend, PROJECTABILITY_TOL)?;
        rep.residual("projectability", p.residual);
        rep.residual("block_cross", b.cross_residual);
        rep.detail("projectable", p.pass);
        // Only the closed case promises a projectable bracket.
        rep.stage("projectability", a.classification != Classification::Closed || p.pass);
        Ok(())
    })?;
    Ok(true)
}

fn parse_expr(src: &str, what: &str) -> Result<coiso::obs::Expr, CliError> {
    parse(src).map_err(|e| CliError::Config(format!("{what} `{src}`: {e}")))
}

pub fn run_bracket(cfg: &RunConfig, args: &BracketArgs, rep: &mut Report) -> Result<bool, CliError> {
    let (fe, ge) = (parse_expr(&args.f, "--f")?, parse_expr(&args.g, "--g")?);
    let xe = args.expect.as_deref().map(|s| parse_expr(s, "--expect")).transpose()?;
    let a = prepare(cfg, rep, false)?;
    let e = &a.embedding;
    let (n, big) = (e.base.dim(), e.dim());
    let backend = a.inst.connection.backend;

    // Closed case: try the projected bracket on the base chart.
    let projected = if a.classification == Classification::Closed {
        let zs = a.inst.enlarged_points(a.base.len().min(SWEEP_CAP), cfg.seed);
        step(rep, "projection", |rep| {
            let b = block_decompose(&a.lambda, e, a.classification, &zs, BLOCK_TOL)?;
            let p = projectability_check(&b, &zs, &backend, PROJECTABILITY_TOL)?;
            rep.residual("projectability", p.residual);
            Ok(if p.pass { Some(project(&b, &p, e)?) } else { None })
        })?
    } else {
        None
    };

    let rows = step(rep, "bracket", |rep| {
        let mut rows = Vec::new();
        match &projected {
            Some(lam) => {
                rep.detail("mode", "projected");
                let reg = &a.inst.observables;
                let f = compile(&fe, &e.base, reg)?;
                let g = compile(&ge, &e.base, reg)?;
                let x = xe.as_ref().map(|x| compile(x, &e.base, reg)).transpose()?;
                let pts = match &args.at {
                    Some(p) if p.len() == n || p.len() == big => vec![p[..n].to_vec()],
                    Some(p) => return Err(bad_point(p.len(), n, big)),
                    None => a.inst.base_points(args.random.unwrap_or(cfg.points), cfg.seed),
                };
                for p in pts {
                    let value = bracket(lam, &f, &g, &p, &backend)?;
                    rows.push(row(p, value, None, None, x.as_ref())?);
                }
            }
            None => {
                rep.detail("mode", "enlarged");
                let reg = a.inst.observables.lifted(e);
                let f = compile(&fe, &e.enlarged, &reg)?;
                let g = compile(&ge, &e.enlarged, &reg)?;
                let x = xe.as_ref().map(|x| compile(x, &e.enlarged, &reg)).transpose()?;
                let pts = match &args.at {
                    Some(p) if p.len() == n => vec![e.sigma0(p)],
                    Some(p) if p.len() == big => vec![p.clone()],
                    Some(p) => return Err(bad_point(p.len(), n, big)),
                    None => a.inst.enlarged_points(args.random.unwrap_or(cfg.points), cfg.seed),
                };
                for z in pts {
                    let value = bracket(&a.lambda, &f, &g, &z, &backend)?;
                    let base_part = bracket(&a.lambda, &f, &g, &e.sigma0(&z[..n]), &backend)?;
                    rows.push(row(z, value, Some(base_part), Some(value - base_part), x.as_ref())?);
                }
            }
        }
        Ok(rows)
    })?;
    let worst = rows.iter().filter_map(|r| r.residual).fold(0.0f64, f64::max);
    if xe.is_some() {
        rep.residual("bracket_vs_expected", worst);
        rep.stage("expected", worst < BRACKET_TOL);
    }
    rep.brackets = rows;
    Ok(true)
}

fn bad_point(len: usize, n: usize, big: usize) -> CliError {
    CliError::Config(format!("--at has {len} coordinates; expected {n} (base) or {big} (enlarged)"))
}

fn row(
    point: Vec<f64>,
    value: f64,
    base_part: Option<f64>,
    anomaly: Option<f64>,
    expect: Option<&ScalarField>,
) -> Result<BracketRow, CliError> {
    let expected = expect.map(|x| x.eval(&point)).transpose()?;
    let residual = expected.map(|v| (value - v).abs());
    Ok(BracketRow { point, value, base_part, anomaly, expected, residual })
}

/// Random cubic in a few coordinates plus a dense linear part, so that
/// brackets between triples do not vanish by sparsity.
fn random_observable(g: &mut SeededRng, chart: &std::sync::Arc<coiso::Chart>) -> ScalarField {
    let n = chart.dim();
    let mut p = Polynomial::random(g, n, 3, 3, 3);
    for i in 0..n {
        p = p.plus(&Polynomial::var(n, i).scaled(uniform(g, -1.0, 1.0) / (n as f64).sqrt()));
    }
    p.to_field(chart.clone())
}

/// `(1 + |x|^2 / 2) Lambda`: antisymmetric but not Poisson in dimension > 2.
fn corrupted(p: &PoissonStructure) -> PoissonStructure {
    let l = p.lambda.clone();
    let lambda = Bivector::try_new(p.chart().clone(), move |x| {
        let s = 1.0 + 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        Ok(l.eval(x)? * s)
    });
    PoissonStructure { lambda, provenance: p.provenance }
}

pub fn jacobi(cfg: &RunConfig, args: &JacobiArgs, rep: &mut Report) -> Result<bool, CliError> {
    if args.triples == 0 {
        return Err(CliError::Config("--triples must be at least 1".into()));
    }
    let a = prepare(cfg, rep, false)?;
    let backend = a.inst.connection.backend;
    if backend.is_exact() {
        return Err(CliError::Config("the jacobiator needs a finite-difference backend".into()));
    }
    let tol = cfg.tol.jacobi.unwrap_or(JACOBI_TOL);
    let mut g = rng(cfg.seed ^ 0x6a61);
    let mut structures: Vec<(&str, PoissonStructure, Vec<Vec<f64>>)> =
        vec![("enlarged", a.lambda.clone(), a.inst.enlarged_points(args.triples, cfg.seed.wrapping_add(1)))];
    if a.classification == Classification::Closed {
        let zs = a.inst.enlarged_points(a.base.len().min(SWEEP_CAP), cfg.seed);
        let projected = step(rep, "projection", |_| {
            let b = block_decompose(&a.lambda, &a.embedding, a.classification, &zs, BLOCK_TOL)?;
            let p = projectability_check(&b, &zs, &backend, PROJECTABILITY_TOL)?;
            Ok(project(&b, &p, &a.embedding)?)
        })?;
        structures.push(("projected", projected, a.inst.base_points(args.triples, cfg.seed.wrapping_add(1))));
    }
    if args.corrupt {
        structures[0].1 = corrupted(&structures[0].1);
        rep.detail("corrupted", structures[0].0);
    }
    for (name, p, pts) in &structures {
        let triples: Vec<_> = (0..args.triples)
            .map(|_| (random_observable(&mut g, p.chart()), random_observable(&mut g, p.chart()), random_observable(&mut g, p.chart())))
            .collect();
        let r = step(rep, "jacobi", |_| Ok(jacobi_residual(p, &triples, pts, &backend)?))?;
        rep.residual(&format!("jacobi_{name}"), r);
        rep.stage(&format!("jacobi_{name}"), r < tol);
    }
    Ok(true)
}

pub fn pca(cfg: &RunConfig, rep: &mut Report) -> Result<bool, CliError> {
    let inst = step(rep, "build", |_| match cfg.model {
        ModelKind::Monopole => Instance::build(cfg, true),
        ModelKind::LatticeEd => Instance::abelian_system(cfg),
        ModelKind::LatticeYm => Instance::build(cfg, false),
    })?;
    let sys = inst.system.as_ref().ok_or_else(|| CliError::Config("model has no Hamiltonian system".into()))?;
    let backend = cfg.backend.backend();
    let tol = backend.default_tolerance();
    let pts = inst.system_points(cfg.points, cfg.seed);
    let primary = step(rep, "primary", |_| Ok(primary_constraints(sys, &pts, &backend, tol)?))?;
    rep.constraints = primary
        .constraints
        .iter()
        .map(|c| ConstraintEntry { label: c.label.clone(), max_abs: c.max_abs, is_constraint: c.is_constraint })
        .collect();
    rep.detail("primary_count", primary.count());
    let (stabilized, iterations) = if primary.stabilized {
        (true, primary.iterations)
    } else {
        match &inst.param {
            Some(param) => {
                let surf = inst.base_points(cfg.points, cfg.seed.wrapping_add(1));
                let (next, _) = step(rep, "stabilization", |_| {
                    Ok(stabilization_step(sys, &primary, param, &surf, &backend, tol)?)
                })?;
                rep.detail("secondary_count", next.count());
                (next.stabilized, next.iterations)
            }
            None => (false, primary.iterations),
        }
    };
    rep.detail("stabilized", stabilized);
    rep.detail("iterations", iterations);
    rep.stage("stabilization", stabilized);
    Ok(true)
}

pub fn dynamics(cfg: &RunConfig, args: &DynamicsArgs, rep: &mut Report) -> Result<Trajectory, CliError> {
    if cfg.model != ModelKind::Monopole {
        return Err(CliError::Config("dynamics is available for the monopole model".into()));
    }
    let inst = step(rep, "build", |_| Instance::build(cfg, true))?;
    let backend = cfg.backend.backend();
    let x0 = args.at.clone().unwrap_or_else(|| MONOPOLE_X0.to_vec());
    let e = step(rep, "embedding", |_| Ok(CoisotropicEmbedding::build(&inst.structure, &inst.connection, &x0[..x0.len().min(7)])?))?;
    if x0.len() != e.dim() {
        return Err(CliError::Config(format!("--at has {} coordinates; the enlarged chart has {}", x0.len(), e.dim())));
    }
    let h = inst.observables.get("H").ok_or_else(|| CliError::Config("model registers no Hamiltonian".into()))?;
    let lambda = invert(&e);
    let traj = step(rep, "integrate", |_| Ok(solve_dynamics(&lambda.lambda, &lift(h, &e), &x0, args.t_end, args.dt, &backend)?))?;
    let drift = traj.max_drift();
    let mu = e.dim() - 1;
    let mu_drift = traj.states.iter().fold(0.0f64, |m, s| m.max((s[mu] - x0[mu]).abs()));
    rep.residual("energy_drift", drift);
    rep.residual("mu_drift", mu_drift);
    rep.detail("steps", traj.times.len() - 1);
    rep.detail("energy0", traj.energies[0]);
    rep.detail("final_state", traj.states.last().cloned().unwrap_or_default());
    rep.stage("energy", drift < cfg.tol.drift.unwrap_or(DRIFT_TOL));
    Ok(traj)
}
