//! Reproduction harness: maximum stable time step scans, convergence
//! studies and the viscous Burgers stability demonstration.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::error::{GsbpError, Result};
use crate::imex::{integrate, tableau_by_order, EnergyTrace, ImexIntegrator, ImexTableau};
use crate::mesh::Mesh1D;
use crate::problems::{
    burgers_rhs, initial_condition, l2_error, sample, semidiscretize, AdvDiffConfig,
    AdvDiffDiscretization, ManufacturedSolution,
};
use crate::ref_element::build_lgl;

/// Relative per-step energy slack before a step counts as growth.
pub const ENERGY_SLACK: f64 = 1e-12;

fn tableau(order: u8) -> Result<ImexTableau> {
    tableau_by_order(order).ok_or(GsbpError::NonPositive {
        name: "tableau order (1, 2 or 3)",
        value: order as f64,
    })
}

/// One grid point of a stability scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConfig {
    pub problem: AdvDiffConfig,
    pub order: u8,
    /// Integration horizon of every probe.
    pub horizon: f64,
}

impl StabilityConfig {
    /// `Δt = τ c / a²`
    pub fn dt_from_tau(&self, tau: f64) -> f64 {
        tau * self.problem.c / (self.problem.a * self.problem.a)
    }

    pub fn tau_from_dt(&self, dt: f64) -> f64 {
        dt * self.problem.a * self.problem.a / self.problem.c
    }
}

/// Result of integrating with one fixed time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    pub dt: f64,
    pub stable: bool,
    /// The run aborted on a solver failure or non-finite state.
    pub solver_failure: bool,
    /// Step at which the energy first grew, if any.
    pub first_growth: Option<usize>,
    pub steps: usize,
}

/// Reusable probe session; keeps the stage factorizations across probes.
pub struct StabilityProbe {
    config: StabilityConfig,
    integrator: ImexIntegrator,
    u0: Vec<f64>,
}

impl StabilityProbe {
    pub fn new(config: StabilityConfig) -> Result<Self> {
        if !(config.horizon > 0.0) {
            return Err(GsbpError::NonPositive {
                name: "horizon",
                value: config.horizon,
            });
        }
        let disc = semidiscretize(&config.problem, None)?;
        let sol = ManufacturedSolution::Decay {
            a: config.problem.a,
            c: config.problem.c,
        };
        let u0 = initial_condition(&sol, &disc.mesh, &disc.element);
        let integrator = ImexIntegrator::new(tableau(config.order)?, disc.problem);
        Ok(Self {
            config,
            integrator,
            u0,
        })
    }

    pub fn config(&self) -> &StabilityConfig {
        &self.config
    }

    /// Takes `ceil(T / Δt)` full steps (at least one) and checks
    /// `E_{n+1} ≤ E_n (1 + ENERGY_SLACK)` after each.
    pub fn probe(&mut self, dt: f64) -> ProbeOutcome {
        let steps = ((self.config.horizon / dt).ceil() as usize).max(1);
        let mut prev = self.integrator.problem().energy(&self.u0);
        let mut first_growth = None;
        let run = integrate(&mut self.integrator, &self.u0, dt, steps as f64 * dt, |s| {
            if s.energy > prev * (1.0 + ENERGY_SLACK) {
                first_growth = Some(s.step);
                return ControlFlow::Break(());
            }
            prev = s.energy;
            ControlFlow::Continue(())
        });
        match run {
            Ok(out) => ProbeOutcome {
                dt,
                stable: first_growth.is_none(),
                solver_failure: false,
                first_growth,
                steps: out.steps,
            },
            Err(_) => ProbeOutcome {
                dt,
                stable: false,
                solver_failure: true,
                first_growth,
                steps: 0,
            },
        }
    }
}

/// Whether the decay problem's energy never grows over the horizon at step `dt`.
pub fn is_stable(config: &StabilityConfig, dt: f64) -> Result<ProbeOutcome> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(GsbpError::NonPositive {
            name: "time step",
            value: dt,
        });
    }
    Ok(StabilityProbe::new(*config)?.probe(dt))
}

/// Search parameters, in units of `τ = a² Δt / c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    /// First probe.
    pub tau_start: f64,
    /// Below this the result is `BelowBracket`.
    pub tau_lower: f64,
    /// A stable probe here means `Unbounded`.
    pub tau_cap: f64,
    /// Relative bisection width on `Δt`.
    pub resolution: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            tau_start: 1.0,
            tau_lower: 1e-3,
            tau_cap: 1e4,
            resolution: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanOutcome {
    /// Largest probed stable `Δt`.
    Bounded(f64),
    Unbounded,
    BelowBracket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityScanResult {
    pub config: StabilityConfig,
    pub outcome: ScanOutcome,
    pub probes: Vec<ProbeOutcome>,
    /// False when a stable probe exceeds an unstable one by more than the
    /// bisection width.
    pub monotone: bool,
}

impl StabilityScanResult {
    pub fn dt_max(&self) -> Option<f64> {
        match self.outcome {
            ScanOutcome::Bounded(dt) => Some(dt),
            _ => None,
        }
    }

    pub fn tau(&self) -> Option<f64> {
        self.dt_max().map(|dt| self.config.tau_from_dt(dt))
    }

    pub fn is_unbounded(&self) -> bool {
        self.outcome == ScanOutcome::Unbounded
    }

    /// Table typography: `+` when unbounded, `<τ_lower` below the bracket.
    pub fn tau_or_plus(&self) -> String {
        match self.outcome {
            ScanOutcome::Bounded(_) => format!("{:.6e}", self.tau().unwrap_or(f64::NAN)),
            ScanOutcome::Unbounded => "+".into(),
            ScanOutcome::BelowBracket => "<lower".into(),
        }
    }

    pub fn csv_header() -> &'static str {
        "order,N,K,a,c,theta_adv,theta_diff,tau_or_plus"
    }

    pub fn to_csv_row(&self) -> String {
        let p = &self.config.problem;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.config.order,
            p.degree,
            p.cells,
            p.a,
            p.c,
            p.theta_adv,
            p.theta_diff,
            self.tau_or_plus()
        )
    }

    /// Per-probe log: `dt,tau,stable,solver_failure`.
    pub fn probe_log_csv(&self) -> String {
        let mut s = String::from("dt,tau,stable,solver_failure\n");
        for p in &self.probes {
            let _ = writeln!(
                s,
                "{:.12e},{:.12e},{},{}",
                p.dt,
                self.config.tau_from_dt(p.dt),
                p.stable,
                p.solver_failure
            );
        }
        s
    }
}

fn check_monotone(probes: &[ProbeOutcome], resolution: f64) -> bool {
    let min_unstable = probes
        .iter()
        .filter(|p| !p.stable)
        .map(|p| p.dt)
        .fold(f64::INFINITY, f64::min);
    probes
        .iter()
        .filter(|p| p.stable)
        .all(|p| p.dt <= min_unstable * (1.0 + resolution))
}

/// Brackets the stability limit by doubling or halving from `tau_start`,
/// then bisects to the requested relative resolution.
pub fn max_stable_dt(
    config: &StabilityConfig,
    settings: &ScanSettings,
) -> Result<StabilityScanResult> {
    let mut probe = StabilityProbe::new(*config)?;
    let mut probes = Vec::new();
    let mut run = |tau: f64, probes: &mut Vec<ProbeOutcome>| {
        let out = probe.probe(config.dt_from_tau(tau));
        probes.push(out);
        out.stable
    };

    let finish = |outcome, probes: Vec<ProbeOutcome>| {
        let monotone = check_monotone(&probes, settings.resolution);
        Ok(StabilityScanResult {
            config: *config,
            outcome,
            probes,
            monotone,
        })
    };

    let (mut lo, mut hi);
    if run(settings.tau_start, &mut probes) {
        lo = settings.tau_start;
        loop {
            let next = (2.0 * lo).min(settings.tau_cap);
            if run(next, &mut probes) {
                if next >= settings.tau_cap {
                    return finish(ScanOutcome::Unbounded, probes);
                }
                lo = next;
            } else {
                hi = next;
                break;
            }
        }
    } else {
        hi = settings.tau_start;
        loop {
            let next = (0.5 * hi).max(settings.tau_lower);
            if run(next, &mut probes) {
                lo = next;
                break;
            }
            if next <= settings.tau_lower {
                return finish(ScanOutcome::BelowBracket, probes);
            }
            hi = next;
        }
    }
    while (hi - lo) > settings.resolution * lo {
        let mid = 0.5 * (lo + hi);
        if run(mid, &mut probes) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    finish(ScanOutcome::Bounded(config.dt_from_tau(lo)), probes)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|_| GsbpError::NonPositive {
            name: "worker count",
            value: workers as f64,
        })
}

/// Runs independent scans on `workers` threads (0 = all cores); results keep
/// the input order.
pub fn run_scans(
    configs: &[StabilityConfig],
    settings: &ScanSettings,
    workers: usize,
) -> Result<Vec<StabilityScanResult>> {
    pool(workers)?.install(|| {
        configs
            .par_iter()
            .map(|c| max_stable_dt(c, settings))
            .collect()
    })
}

pub fn scans_to_csv(results: &[StabilityScanResult]) -> String {
    let mut s = format!("{}\n", StabilityScanResult::csv_header());
    for r in results {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

/// Which manufactured solution a convergence study integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    Decay,
    Growth,
}

impl SolutionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Decay => "decay",
            Self::Growth => "growth",
        }
    }

    pub fn with(self, a: f64, c: f64) -> ManufacturedSolution {
        match self {
            Self::Decay => ManufacturedSolution::Decay { a, c },
            Self::Growth => ManufacturedSolution::Growth { a, c },
        }
    }
}

impl std::str::FromStr for SolutionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "decay" => Ok(Self::Decay),
            "growth" => Ok(Self::Growth),
            other => Err(format!(
                "unknown solution '{other}' (expected decay or growth)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    /// `cells` is overridden by each entry of `refinements`.
    pub problem: AdvDiffConfig,
    pub order: u8,
    /// `Δt = μ Δx`
    pub mu: f64,
    pub t_end: f64,
    pub solution: SolutionKind,
    pub refinements: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub cells: usize,
    pub dt: f64,
    pub mu: f64,
    pub theta_adv: f64,
    pub theta_diff: f64,
    /// `None` marks an unstable run.
    pub l2_error: Option<f64>,
    /// Final error regardless of the stability verdict.
    pub raw_l2_error: f64,
    /// `log₂(e_{K/2} / e_K)`, from the second row on.
    pub eoc: Option<f64>,
    /// Largest single-step ratio `E_{n+1} / E_n`.
    pub max_growth: f64,
}

impl ConvergenceRow {
    pub fn csv_header() -> &'static str {
        "N,K,dt_rule,theta_adv,theta_diff,l2_error,eoc"
    }

    pub fn to_csv_row(&self) -> String {
        let err = self
            .l2_error
            .map_or_else(|| "-".to_string(), |e| format!("{e:.6e}"));
        let eoc = self
            .eoc
            .map_or_else(|| "-".to_string(), |e| format!("{e:.4}"));
        format!(
            "{},{},{}dx,{},{},{},{}",
            self.degree, self.cells, self.mu, self.theta_adv, self.theta_diff, err, eoc
        )
    }
}

/// Result of one fixed-step run against a manufactured solution.
#[derive(Debug, Clone)]
pub struct ManufacturedRun {
    pub discretization: AdvDiffDiscretization,
    pub state: Vec<f64>,
    pub t: f64,
    pub trace: EnergyTrace,
    pub l2_error: f64,
    /// Largest single-step ratio `E_{n+1} / E_n`.
    pub max_growth: f64,
    /// Largest ratio of the discrete energy to the exact solution's energy.
    pub max_excess: f64,
    pub finite: bool,
}

/// Energy multiple of the exact solution that marks a forced run as unstable.
pub const FORCED_BLOWUP_FACTOR: f64 = 2.0;

impl ManufacturedRun {
    /// Unforced runs must never increase the energy; forced runs gain energy
    /// from the source and count as unstable once their energy exceeds the
    /// exact energy by [`FORCED_BLOWUP_FACTOR`].
    pub fn stable(&self, forced: bool) -> bool {
        self.finite
            && if forced {
                self.max_excess <= FORCED_BLOWUP_FACTOR
            } else {
                self.max_growth <= 1.0 + ENERGY_SLACK
            }
    }
}

/// Integrates `solution` from its nodal interpolant to `t_end`.
pub fn run_manufactured(
    problem: &AdvDiffConfig,
    order: u8,
    solution: ManufacturedSolution,
    dt: f64,
    t_end: f64,
) -> Result<ManufacturedRun> {
    let disc = semidiscretize(problem, Some(solution))?;
    let u0 = initial_condition(&solution, &disc.mesh, &disc.element);
    let nodes = disc.nodes().to_vec();
    let norm = disc.norm().to_vec();
    let exact_energy = |t: f64| {
        let u = sample(&nodes, |x| solution.eval(x, t));
        crate::operators::weighted_dot(&norm, &u, &u)
    };
    let mut integrator = ImexIntegrator::new(tableau(order)?, disc.problem.clone());
    let mut prev = disc.problem.energy(&u0);
    let mut max_growth: f64 = 0.0;
    let mut max_excess: f64 = 0.0;
    let run = integrate(&mut integrator, &u0, dt, t_end, |s| {
        max_growth = max_growth.max(s.energy / prev);
        max_excess = max_excess.max(s.energy / exact_energy(s.t));
        prev = s.energy;
        ControlFlow::Continue(())
    });
    match run {
        Ok(out) => {
            let err = l2_error(&out.state, &solution, out.t, &nodes, &norm);
            Ok(ManufacturedRun {
                discretization: disc,
                state: out.state,
                t: out.t,
                trace: out.trace,
                l2_error: err,
                max_growth,
                max_excess,
                finite: err.is_finite(),
            })
        }
        Err(GsbpError::NonFinite(t)) => Ok(ManufacturedRun {
            discretization: disc,
            state: Vec::new(),
            t,
            trace: EnergyTrace::default(),
            l2_error: f64::INFINITY,
            max_growth: f64::INFINITY,
            max_excess: f64::INFINITY,
            finite: false,
        }),
        Err(e) => Err(e),
    }
}

/// Runs the refinement sequence with `Δt = μ Δx`; unstable rows (see
/// [`ManufacturedRun::stable`]) carry no error.
pub fn run_convergence(cfg: &ConvergenceConfig, workers: usize) -> Result<Vec<ConvergenceRow>> {
    let p = &cfg.problem;
    let solution = cfg.solution.with(p.a, p.c);
    let runs: Vec<Result<(usize, f64, ManufacturedRun)>> = pool(workers)?.install(|| {
        cfg.refinements
            .par_iter()
            .map(|&k| {
                let problem = AdvDiffConfig { cells: k, ..*p };
                let dt = cfg.mu * problem.dx();
                run_manufactured(&problem, cfg.order, solution, dt, cfg.t_end).map(|r| (k, dt, r))
            })
            .collect()
    });
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(runs.len());
    for run in runs {
        let (k, dt, r) = run?;
        let stable = r.stable(solution.has_source());
        let l2 = stable.then_some(r.l2_error);
        let eoc = match (
            rows.last()
                .and_then(|prev| prev.l2_error.map(|e| (prev.cells, e))),
            l2,
        ) {
            (Some((kp, ep)), Some(e)) if e > 0.0 => {
                Some((ep / e).ln() / (k as f64 / kp as f64).ln())
            }
            _ => None,
        };
        rows.push(ConvergenceRow {
            degree: p.degree,
            cells: k,
            dt,
            mu: cfg.mu,
            theta_adv: p.theta_adv,
            theta_diff: p.theta_diff,
            l2_error: l2,
            raw_l2_error: r.l2_error,
            eoc,
            max_growth: r.max_growth,
        });
    }
    Ok(rows)
}

pub fn convergence_to_csv(cfg: &ConvergenceConfig, rows: &[ConvergenceRow]) -> String {
    let mut s = format!(
        "# solution={} order={} a={} c={} T={} error=discrete M-norm at nodes\n{}\n",
        cfg.solution.as_str(),
        cfg.order,
        cfg.problem.a,
        cfg.problem.c,
        cfg.t_end,
        ConvergenceRow::csv_header()
    );
    for r in rows {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersConfig {
    pub theta_adv: f64,
    pub theta_diff: f64,
    pub degree: usize,
    pub cells: usize,
    pub c: f64,
    pub dt: f64,
    pub t_end: f64,
    pub order: u8,
    /// Output times; the final state is always recorded.
    pub snapshot_times: Vec<f64>,
    /// Blow-up when the energy exceeds this multiple of the initial energy.
    pub blowup_factor: f64,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self {
            theta_adv: 0.0,
            theta_diff: 0.0,
            degree: 2,
            cells: 50,
            c: 0.1,
            dt: 0.1,
            t_end: 2.0,
            order: 2,
            snapshot_times: vec![0.0, 1.0, 2.0],
            blowup_factor: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl Snapshot {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,u\n");
        for (x, u) in self.x.iter().zip(&self.u) {
            let _ = writeln!(s, "{x:.12e},{u:.12e}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersRun {
    pub config: BurgersConfig,
    /// Time at which blow-up was detected.
    pub blowup_time: Option<f64>,
    /// First time at which a step increased the energy.
    pub first_energy_increase: Option<f64>,
    pub t_reached: f64,
    pub trace: EnergyTrace,
    pub snapshots: Vec<Snapshot>,
}

impl BurgersRun {
    pub fn completed(&self) -> bool {
        self.blowup_time.is_none()
    }

    pub fn max_energy(&self) -> f64 {
        self.trace.energies().fold(0.0, f64::max)
    }
}

/// Viscous Burgers with `u₀ = sin x` on `(-π, π)`.
pub fn run_burgers_demo(cfg: &BurgersConfig) -> Result<BurgersRun> {
    let elem = build_lgl(cfg.degree)?;
    let mesh = Mesh1D::uniform(-std::f64::consts::PI, std::f64::consts::PI, cfg.cells)?;
    let disc = burgers_rhs(&elem, &mesh, cfg.theta_adv, cfg.theta_diff, cfg.c)?;
    let x = disc.nodes().to_vec();
    let u0 = sample(&x, f64::sin);
    let e0 = disc.problem.energy(&u0);
    let mut integrator = ImexIntegrator::new(tableau(cfg.order)?, disc.problem.clone());
    let tol = 1e-9 * cfg.dt;
    let mut pending: Vec<f64> = cfg.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    if pending.first().is_some_and(|t| t.abs() <= tol) {
        snapshots.push(Snapshot {
            t: 0.0,
            x: x.clone(),
            u: u0.clone(),
        });
    }
    pending.retain(|t| *t > tol);
    let mut blowup_time = None;
    let mut first_energy_increase = None;
    let mut prev = e0;
    let run = integrate(&mut integrator, &u0, cfg.dt, cfg.t_end, |s| {
        if s.energy > prev * (1.0 + ENERGY_SLACK) && first_energy_increase.is_none() {
            first_energy_increase = Some(s.t);
        }
        prev = s.energy;
        while pending.first().is_some_and(|t| *t <= s.t + tol) {
            snapshots.push(Snapshot {
                t: s.t,
                x: x.clone(),
                u: s.state.to_vec(),
            });
            pending.remove(0);
        }
        if s.energy > cfg.blowup_factor * e0 {
            blowup_time = Some(s.t);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    let (t_reached, trace) = match run {
        Ok(out) => {
            if blowup_time.is_none() && snapshots.last().is_none_or(|s| s.t < out.t - tol) {
                snapshots.push(Snapshot {
                    t: out.t,
                    x: x.clone(),
                    u: out.state.clone(),
                });
            }
            (out.t, out.trace)
        }
        Err(GsbpError::NonFinite(t)) => {
            blowup_time = Some(t);
            (t, EnergyTrace::default())
        }
        Err(e) => return Err(e),
    };
    Ok(BurgersRun {
        config: cfg.clone(),
        blowup_time,
        first_energy_increase,
        t_reached,
        trace,
        snapshots,
    })
}

/// Runs several Burgers configurations in parallel, keeping input order.
pub fn run_burgers_batch(configs: &[BurgersConfig], workers: usize) -> Result<Vec<BurgersRun>> {
    pool(workers)?.install(|| configs.par_iter().map(run_burgers_demo).collect())
}
