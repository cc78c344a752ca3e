//! `qharm`: batch front-end for the estimators and verification harnesses.
//!
//! Exit status: 0 when every selected check passes, 1 when a check fails,
//! 2 on configuration or numerical errors.

mod config;
mod output;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qharm_core::feynman_kac::{gradient_fd, q_harmonic_paths, BoundaryData, CrnEvaluator, Deterministic, IntervalSolver};
use qharm_core::rng::with_workers;
use qharm_core::spectral::{build_discrete_frac_laplacian, eigenpairs};
use qharm_core::verification::{counterexample_blowup, counterexample_blowup_nystrom, dyadic_offsets, HARNESSES};
use serde_json::json;

use config::{ConfigError, RunConfig};
use output::{emit, emit_csv, Row, VERSION};

#[derive(Parser)]
#[command(name = "qharm", version, about = "Gauge, gradient and spectral checks for killed stable processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    d: Option<usize>,
    /// `interval A B`, `ball X R` or `whole`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    domain: Option<String>,
    /// `zero`, `const C`, `critical R`, `cone X R ETA C`, `power X R P C` or `gaussian X W C`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    q: Option<String>,
    /// Exterior data: `one`, `const C` or `slab LO HI`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    f: Option<String>,
    /// Evaluation point, repeatable; coordinates comma-separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    x: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Monte Carlo paths.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    /// Interior nodes of the discrete operator.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Number of eigenpairs.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Radius of the critical potential.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Finite-difference step.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Nodes of the deterministic interval solver.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Tolerance override applied to every report.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Append estimate rows to an existing CSV instead of replacing it.
    #[arg(long, global = true)]
    append: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and report PASS/FAIL per harness.
    Verify {
        /// One of kernels, sampling, reflection, bounds, exponents, gradient, counterexample, spectral, all.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Gauge E^x e_q(τ_D) at the evaluation points.
    Gauge,
    /// q-harmonic extension of the exterior data at the evaluation points.
    Eval,
    /// Finite-difference gradient of the q-harmonic extension.
    Gradient,
    /// Difference-quotient blow-up of the gauge near the critical potential's support (`--q` replaces it).
    Counterexample,
    /// Principal eigenpairs of the discrete operator with potential.
    Spectral {
        /// Also write the operator matrix as whitespace-separated text.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Registered harnesses with the statements they exercise.
    List,
}

enum Failure {
    Config(ConfigError),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<qharm_core::error::Error> for Failure {
    fn from(e: qharm_core::error::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(format!("I/O: {e}"))
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", p.display(), e.0)))?
        }
        None => RunConfig::default(),
    };
    cfg.command = match &cli.command {
        Command::Verify { .. } => "verify",
        Command::Gauge => "gauge",
        Command::Eval => "eval",
        Command::Gradient => "gradient",
        Command::Counterexample => "counterexample",
        Command::Spectral { .. } => "spectral",
        Command::List => "list",
    }
    .into();
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = cli.$f.clone() { cfg.$f = v; })* };
    }
    set!(alpha, d, domain, q, f, seed, workers, n, dt, t_max, m, k, r, h, nodes);
    if !cli.x.is_empty() {
        cfg.x = cli.x.clone();
    }
    if let Some(t) = cli.tolerance {
        cfg.tolerance.insert("default".into(), t);
    }
    if let Command::Verify { suite: Some(s) } = &cli.command {
        cfg.suite = s.clone();
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn point_id(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Deterministic interval solver when the configuration allows one.
fn solver(cfg: &RunConfig, f: &BoundaryData) -> Result<Option<IntervalSolver>, Failure> {
    if cfg.d != 1 || cfg.alpha > 1.0 {
        return Ok(None);
    }
    let Ok((a, b)) = cfg.interval() else { return Ok(None) };
    Ok(Some(IntervalSolver::new(&cfg.params()?, a, b, &cfg.potential()?, f, cfg.nodes)?))
}

fn verify(cfg: &RunConfig) -> Result<bool, Failure> {
    let selected: Vec<&str> = match cfg.suite.as_str() {
        "all" => suites::SUITES.to_vec(),
        s if suites::SUITES.contains(&s) => vec![s],
        s => return Err(ConfigError(format!("field `suite`: unknown suite `{s}`")).into()),
    };
    let mut reports = vec![];
    for s in &selected {
        for rep in suites::run_suite(s, cfg)? {
            let rep = suites::apply_tolerance(rep, cfg);
            println!("{}", rep.table_row());
            reports.push(rep);
        }
    }
    let pass = reports.iter().all(|r| r.pass);
    if cfg.out.is_some() {
        let doc = json!({
            "tool": "qharm",
            "version": VERSION,
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "config": cfg,
            "suites": selected,
            "reports": reports,
            "pass": pass,
        });
        emit(cfg.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc).expect("report serialises")))?;
    }
    Ok(pass)
}

fn estimates(cfg: &RunConfig, append: bool, gauge: bool) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let dom = cfg.domain_spec()?;
    let q = cfg.potential()?;
    let f = if gauge { BoundaryData::constant(1.0) } else { cfg.boundary()? };
    let pts = cfg.points()?;
    let label = if gauge { "gauge" } else { "u" };
    let paths = q_harmonic_paths(&p, &dom, &q, &f, &pts, &cfg.fk())?;
    let mut rows: Vec<Row> = pts.iter().enumerate().map(|(j, x)| Row::estimate(format!("{label}@{}", point_id(x)), &paths.estimate(j))).collect();
    if paths.truncated > 0 {
        eprintln!("warning: {} paths reached the time cap and contribute 0", paths.truncated);
    }
    if let Some(s) = solver(cfg, &f)? {
        rows.extend(pts.iter().map(|x| Row::exact(format!("{label}_nystrom@{}", point_id(x)), s.eval(x[0]), cfg.nodes)));
    }
    emit_csv(cfg.out.as_deref(), &rows, cfg.seed, &cfg.hash(), append)?;
    Ok(true)
}

fn gradient(cfg: &RunConfig, append: bool) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let dom = cfg.domain_spec()?;
    let q = cfg.potential()?;
    let f = cfg.boundary()?;
    let ev = CrnEvaluator { p: &p, dom: &dom, q: &q, f: &f, cfg: cfg.fk() };
    let det = solver(cfg, &f)?;
    let mut rows = vec![];
    for x in cfg.points()? {
        let g = gradient_fd(&ev, &x, cfg.h)?;
        for i in 0..x.len() {
            rows.push(Row { id: format!("grad{i}@{}", point_id(&x)), value: g.grad[i], stderr: g.stderr[i], n: cfg.n });
        }
        if let Some(s) = &det {
            let e = gradient_fd(&Deterministic(|y: &[f64]| s.eval(y[0])), &x, cfg.h)?;
            rows.push(Row::exact(format!("grad0_nystrom@{}", point_id(&x)), e.grad[0], cfg.nodes));
        }
    }
    emit_csv(cfg.out.as_deref(), &rows, cfg.seed, &cfg.hash(), append)?;
    Ok(true)
}

fn counterexample(cfg: &RunConfig) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let (a, b) = cfg.interval()?;
    let q = if cfg.q == "zero" { qharm_core::feynman_kac::PotentialSpec::critical(cfg.alpha, vec![0.0], cfg.r)? } else { cfg.potential()? };
    let hs = dyadic_offsets(3, 8);
    let centre = 0.5 * (a + b);
    let mc = counterexample_blowup(&p, &cfg.domain_spec()?, &q, centre, cfg.r, &hs, &cfg.fk())?;
    let ny = counterexample_blowup_nystrom(&p, a, b, &q, centre, cfg.r, &hs, cfg.nodes).ok();
    let doc = json!({
        "tool": "qharm",
        "version": VERSION,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "config": cfg,
        "potential": q,
        "profile": mc,
        "deterministic": ny,
        "diverges": mc.diverges(),
        "consistent_with_zero": mc.consistent_with_zero(),
    });
    emit(cfg.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc).expect("profile serialises")))?;
    Ok(mc.diverges())
}

fn spectral(cfg: &RunConfig, matrix: Option<&std::path::Path>) -> Result<bool, Failure> {
    let (a, b) = cfg.interval()?;
    let op = build_discrete_frac_laplacian(&cfg.params()?, a, b, cfg.m)?;
    let eig = eigenpairs(&op, &cfg.potential()?, cfg.k)?;
    let lambdas = eig.values.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(";");
    let mut body = format!(
        "# qharm spectral alpha={} m={} q={} lambda={lambdas} seed={} config_hash={} version={VERSION}\nnode{}\n",
        cfg.alpha,
        cfg.m,
        cfg.q,
        cfg.seed,
        cfg.hash(),
        (1..=cfg.k).map(|i| format!(",phi{i}")).collect::<String>()
    );
    for (j, x) in eig.nodes.iter().enumerate() {
        body.push_str(&format!("{x:.17e}"));
        for v in &eig.vectors {
            body.push_str(&format!(",{:.17e}", v[j]));
        }
        body.push('\n');
    }
    emit(cfg.out.as_deref(), &body)?;
    if let Some(path) = matrix {
        emit(Some(path), &op.to_text())?;
    }
    Ok(true)
}

fn list() {
    for h in HARNESSES {
        println!("{:<26} {:<15} {:<16} {}", h.name, h.suite, h.anchor, h.summary);
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    if let Command::List = cli.command {
        list();
        return Ok(true);
    }
    let cfg = build_config(cli)?;
    let body = || match &cli.command {
        Command::Verify { .. } => verify(&cfg),
        Command::Gauge => estimates(&cfg, cli.append, true),
        Command::Eval => estimates(&cfg, cli.append, false),
        Command::Gradient => gradient(&cfg, cli.append),
        Command::Counterexample => counterexample(&cfg),
        Command::Spectral { matrix } => spectral(&cfg, matrix.as_deref()),
        Command::List => unreachable!(),
    };
    with_workers(Some(cfg.workers), body)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
