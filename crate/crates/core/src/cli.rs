//! Command-line front end: argument parsing, dispatch and file output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ConfigError, RunConfig};
use crate::error::GsbpError;
use crate::experiments::{
    convergence_to_csv, run_burgers_batch, run_convergence, run_manufactured, run_scans,
    scans_to_csv, BurgersConfig, ConvergenceConfig, ScanSettings, StabilityConfig,
    StabilityScanResult,
};
use crate::mesh::Mesh1D;
use crate::operators::{assemble_first_derivative, verify_axioms, CertificationReport};
use crate::problems::AdvDiffConfig;
use crate::ref_element::build_lgl;

#[derive(Debug, Parser)]
#[command(
    name = "gsbp",
    version,
    about = "Upwind gSBP operators with IMEX time stepping for advection-diffusion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Certify the operator axioms and write certification.csv
    Verify(RunArgs),
    /// Scan the maximum energy-stable time step and write stability.csv
    Scan(RunArgs),
    /// Run a convergence study and write convergence.csv
    Converge(RunArgs),
    /// Single advection-diffusion run with solution and energy output
    Solve(RunArgs),
    /// Viscous Burgers stability demonstration
    Burgers(RunArgs),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` configuration file
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<String>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    pub workers: Option<String>,
    /// Scan integration horizon
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Polynomial degrees, comma separated
    #[arg(long = "N", value_name = "LIST")]
    pub degrees: Option<String>,
    /// Cell counts, comma separated
    #[arg(long = "K", value_name = "LIST")]
    pub cells: Option<String>,
    /// Operator parameters for verify, comma separated
    #[arg(long, value_name = "LIST")]
    pub theta: Option<String>,
    /// A single (theta_adv, theta_diff) pair
    #[arg(long, num_args = 2, value_names = ["THETA_ADV", "THETA_DIFF"], allow_negative_numbers = true)]
    pub pair: Option<Vec<String>>,
    /// Pairs as `ta:td,ta:td`
    #[arg(long, value_name = "LIST")]
    pub pairs: Option<String>,
    /// IMEX order (1, 2 or 3)
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub c: Option<String>,
    /// Time step rule dt = mu * dx
    #[arg(long)]
    pub mu: Option<String>,
    /// Fixed time step
    #[arg(long)]
    pub dt: Option<String>,
    /// Final time
    #[arg(long = "T")]
    pub t_end: Option<String>,
    /// decay or growth
    #[arg(long)]
    pub solution: Option<String>,
    /// bounded, periodic or both (comma separated)
    #[arg(long)]
    pub topology: Option<String>,
    #[arg(long)]
    pub tau_cap: Option<String>,
    /// Snapshot times, comma separated
    #[arg(long, value_name = "LIST")]
    pub snapshots: Option<String>,
}

impl RunArgs {
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        let mut push = |k: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                o.push((k, v.clone()));
            }
        };
        push("out", &self.out);
        push("workers", &self.workers);
        push("horizon", &self.horizon);
        push("seed", &self.seed);
        push("N", &self.degrees);
        push("K", &self.cells);
        push("theta", &self.theta);
        push("pairs", &self.pairs);
        push("order", &self.order);
        push("a", &self.a);
        push("c", &self.c);
        push("mu", &self.mu);
        push("dt", &self.dt);
        push("T", &self.t_end);
        push("solution", &self.solution);
        push(
            "topology",
            &self.topology.as_ref().map(|t| {
                if t == "both" {
                    "bounded,periodic".to_string()
                } else {
                    t.clone()
                }
            }),
        );
        push("tau_cap", &self.tau_cap);
        push("snapshots", &self.snapshots);
        if let Some(p) = &self.pair {
            o.push(("pairs", format!("{}:{}", p[0], p[1])));
        }
        o
    }
}

impl CliCommand {
    pub fn split(&self) -> (Command, &RunArgs) {
        match self {
            Self::Verify(a) => (Command::Verify, a),
            Self::Scan(a) => (Command::Scan, a),
            Self::Converge(a) => (Command::Converge, a),
            Self::Solve(a) => (Command::Solve, a),
            Self::Burgers(a) => (Command::Burgers, a),
        }
    }
}

/// Failure categories, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] GsbpError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Assertion(_) => 3,
            Self::Numerical(_) => 4,
            Self::Io(_) => 5,
        }
    }
}

/// Files written and a short human-readable summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }
}

fn problem(cfg: &RunConfig, degree: usize, cells: usize, pair: (f64, f64)) -> AdvDiffConfig {
    AdvDiffConfig {
        a: cfg.a,
        c: cfg.c,
        theta_adv: pair.0,
        theta_diff: pair.1,
        degree,
        cells,
        ..Default::default()
    }
}

/// Runs the configured experiment and writes its outputs.
pub fn dispatch(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let mut w = Writer::new(&cfg.out)?;
    w.write("config.txt", &cfg.to_config_string())?;
    let summary = match cfg.command {
        Command::Verify => verify(cfg, &mut w)?,
        Command::Scan => scan(cfg, &mut w)?,
        Command::Converge => converge(cfg, &mut w)?,
        Command::Solve => solve(cfg, &mut w)?,
        Command::Burgers => burgers(cfg, &mut w)?,
    };
    Ok(RunOutput {
        files: w.files,
        summary,
    })
}

fn verify(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let mut csv = format!("{}\n", CertificationReport::csv_header());
    let mut failed = Vec::new();
    let mut count = 0;
    for &n in &cfg.degrees {
        let elem = build_lgl(n)?;
        for &k in &cfg.cells {
            let mesh = Mesh1D::uniform(-std::f64::consts::PI, std::f64::consts::PI, k)?;
            for &theta in &cfg.thetas {
                for &topology in &cfg.topologies {
                    let ops = assemble_first_derivative(&elem, &mesh, theta, topology)?;
                    let report = verify_axioms(&ops);
                    csv.push_str(&report.to_csv_row());
                    csv.push('\n');
                    count += 1;
                    if !report.passed() {
                        failed.push(format!("N={n} K={k} theta={theta} {topology}"));
                    }
                }
            }
        }
    }
    w.write("certification.csv", &csv)?;
    if failed.is_empty() {
        Ok(format!("verify: {count} operator sets certified"))
    } else {
        Err(CliError::Assertion(format!(
            "{} of {count} operator sets failed: {}",
            failed.len(),
            failed.join("; ")
        )))
    }
}

/// Theory floor: compatible pairs never lose energy stability at
/// `τ ≤ 2` (first order) or `τ ≤ 1/11` (second order).
pub fn theory_floor_violations(results: &[StabilityScanResult]) -> Vec<String> {
    let mut out = Vec::new();
    for r in results {
        let p = &r.config.problem;
        let floor = match r.config.order {
            1 => 2.0,
            2 => 1.0 / 11.0,
            _ => continue,
        };
        if !p.compatible() {
            continue;
        }
        for probe in &r.probes {
            if !probe.stable && r.config.tau_from_dt(probe.dt) <= floor {
                out.push(format!(
                    "order {} N={} K={} pair ({}, {}) unstable at tau={}",
                    r.config.order,
                    p.degree,
                    p.cells,
                    p.theta_adv,
                    p.theta_diff,
                    r.config.tau_from_dt(probe.dt)
                ));
            }
        }
    }
    out
}

fn scan(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let mut configs = Vec::new();
    for &pair in &cfg.pairs {
        for &n in &cfg.degrees {
            for &k in &cfg.cells {
                configs.push(StabilityConfig {
                    problem: problem(cfg, n, k, pair),
                    order: cfg.order,
                    horizon: cfg.horizon,
                });
            }
        }
    }
    let settings = ScanSettings {
        tau_cap: cfg.tau_cap,
        tau_lower: cfg.tau_lower,
        resolution: cfg.resolution,
        ..Default::default()
    };
    eprintln!("scan: {} configurations", configs.len());
    let results = run_scans(&configs, &settings, cfg.workers)?;
    w.write("stability.csv", &scans_to_csv(&results))?;
    let mut log = String::from("order,N,K,theta_adv,theta_diff,dt,tau,stable,solver_failure\n");
    for r in &results {
        let p = &r.config.problem;
        for probe in &r.probes {
            let _ = writeln!(
                log,
                "{},{},{},{},{},{:.12e},{:.12e},{},{}",
                r.config.order,
                p.degree,
                p.cells,
                p.theta_adv,
                p.theta_diff,
                probe.dt,
                r.config.tau_from_dt(probe.dt),
                probe.stable,
                probe.solver_failure
            );
        }
    }
    w.write("stability_probes.csv", &log)?;
    let non_monotone: Vec<_> = results.iter().filter(|r| !r.monotone).collect();
    for r in &non_monotone {
        let p = &r.config.problem;
        eprintln!(
            "warning: non-monotone probe log for N={} K={} pair ({}, {})",
            p.degree, p.cells, p.theta_adv, p.theta_diff
        );
    }
    let floor = theory_floor_violations(&results);
    if !floor.is_empty() {
        return Err(CliError::Assertion(format!(
            "theory floor violated: {}",
            floor.join("; ")
        )));
    }
    Ok(format!(
        "scan: {} configurations, {} unbounded, {} non-monotone",
        results.len(),
        results.iter().filter(|r| r.is_unbounded()).count(),
        non_monotone.len()
    ))
}

fn converge(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let mut csv = String::new();
    let mut lines = 0;
    for &pair in &cfg.pairs {
        for &n in &cfg.degrees {
            let conv = ConvergenceConfig {
                problem: problem(cfg, n, cfg.cells[0], pair),
                order: cfg.order,
                mu: cfg.mu,
                t_end: cfg.t_end,
                solution: cfg.solution,
                refinements: cfg.cells.clone(),
            };
            let rows = run_convergence(&conv, cfg.workers)?;
            let block = convergence_to_csv(&conv, &rows);
            if csv.is_empty() {
                csv.push_str(&block);
            } else {
                // keep a single header: drop the comment and header lines
                csv.extend(block.lines().skip(2).map(|l| format!("{l}\n")));
            }
            lines += rows.len();
        }
    }
    w.write("convergence.csv", &csv)?;
    Ok(format!("converge: {lines} rows"))
}

fn solve(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = problem(cfg, cfg.degrees[0], cfg.cells[0], cfg.pairs[0]);
    let dt = cfg.dt.unwrap_or(cfg.mu * p.dx());
    let sol = cfg.solution.with(p.a, p.c);
    let run = run_manufactured(&p, cfg.order, sol, dt, cfg.t_end)?;
    if !run.finite {
        return Err(CliError::Numerical(GsbpError::NonFinite(run.t)));
    }
    let mut csv = String::from("x,u,exact\n");
    for (x, u) in run.discretization.nodes().iter().zip(&run.state) {
        let _ = writeln!(csv, "{x:.12e},{u:.12e},{:.12e}", sol.eval(*x, run.t));
    }
    w.write("solution.csv", &csv)?;
    w.write("energy.csv", &run.trace.to_csv())?;
    Ok(format!(
        "solve: t={} steps={} l2_error={:.6e} max_step_growth={:.6}",
        run.t,
        run.trace.len().saturating_sub(1),
        run.l2_error,
        run.max_growth
    ))
}

fn burgers(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let mut configs = Vec::new();
    for &(ta, td) in &cfg.pairs {
        for &n in &cfg.degrees {
            for &k in &cfg.cells {
                configs.push(BurgersConfig {
                    theta_adv: ta,
                    theta_diff: td,
                    degree: n,
                    cells: k,
                    c: cfg.c,
                    dt: cfg.dt.unwrap_or(0.1),
                    t_end: cfg.t_end,
                    order: cfg.order,
                    snapshot_times: cfg.snapshots.clone(),
                    blowup_factor: cfg.blowup_factor,
                });
            }
        }
    }
    let runs = run_burgers_batch(&configs, cfg.workers)?;
    let mut summary =
        String::from("theta_adv,theta_diff,N,K,completed,blowup_time,first_energy_increase,t_reached,max_energy\n");
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |t| format!("{t:.6}"));
    for r in &runs {
        let c = &r.config;
        let tag = format!(
            "ta{}_td{}_N{}_K{}",
            c.theta_adv, c.theta_diff, c.degree, c.cells
        );
        for s in &r.snapshots {
            w.write(&format!("burgers_{tag}_t{:.4}.csv", s.t), &s.to_csv())?;
        }
        w.write(&format!("burgers_{tag}_energy.csv"), &r.trace.to_csv())?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{:.6},{:.6e}",
            c.theta_adv,
            c.theta_diff,
            c.degree,
            c.cells,
            r.completed(),
            opt(r.blowup_time),
            opt(r.first_energy_increase),
            r.t_reached,
            r.max_energy()
        );
    }
    w.write("burgers.csv", &summary)?;
    Ok(format!(
        "burgers: {} runs, {} blew up",
        runs.len(),
        runs.iter().filter(|r| !r.completed()).count()
    ))
}

/// Parses arguments, runs, and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, args) = cli.command.split();
    let result = RunConfig::parse(command, args.config.as_deref(), &args.overrides())
        .map_err(CliError::from)
        .and_then(|cfg| dispatch(&cfg));
    match result {
        Ok(out) => {
            println!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
