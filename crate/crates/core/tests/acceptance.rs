//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed. Exits nonzero
//! if any criterion fails, unless the failure matches a documented deviation
//! exactly; such failures are still reported as FAIL.

use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use upwind_gsbp::experiments::{
    is_stable, max_stable_dt, run_burgers_demo, run_convergence, BurgersConfig, ConvergenceConfig,
    ConvergenceRow, ScanSettings, SolutionKind, StabilityConfig, StabilityScanResult,
};
use upwind_gsbp::imex::{
    integrate, tableau_imex1, tableau_imex2, tableau_imex3, ImexIntegrator, ImexSplitProblem,
    ImexTableau,
};
use upwind_gsbp::operators::weighted_dot;
use upwind_gsbp::problems::AdvDiffConfig;
use upwind_gsbp::{
    assemble_first_derivative, build_lgl, second_derivative, verify_axioms, BlockMatrix,
    GlobalOperatorSet, Mesh1D, Topology,
};

const COMPATIBLE: [(f64, f64); 3] = [(0.5, 0.5), (0.25, 0.25), (0.0, 0.0)];
const REFINEMENTS: [usize; 5] = [20, 40, 80, 160, 320];

struct Outcome {
    pass: bool,
    /// The failure is the documented deviation and nothing else.
    known_deviation: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        known_deviation: false,
        detail,
    }
}

fn problem(a: f64, c: f64, n: usize, k: usize, (ta, td): (f64, f64)) -> AdvDiffConfig {
    AdvDiffConfig {
        a,
        c,
        theta_adv: ta,
        theta_diff: td,
        degree: n,
        cells: k,
        ..Default::default()
    }
}

fn ops(n: usize, k: usize, theta: f64, topology: Topology) -> GlobalOperatorSet {
    let elem = build_lgl(n).unwrap();
    let mesh = Mesh1D::uniform(-PI, PI, k).unwrap();
    assemble_first_derivative(&elem, &mesh, theta, topology).unwrap()
}

fn dense(m: &BlockMatrix) -> DMatrix<f64> {
    m.to_dense()
}

fn scan(cfg: StabilityConfig) -> StabilityScanResult {
    max_stable_dt(&cfg, &ScanSettings::default()).unwrap()
}

fn c1_certification() -> Outcome {
    let mut worst_bounded: f64 = 0.0;
    let mut worst_periodic: f64 = 0.0;
    let mut failures = Vec::new();
    for n in 1..=3 {
        for k in [4, 20, 80] {
            for theta in [0.0, 0.25, 0.5] {
                for topology in [Topology::Bounded, Topology::Periodic] {
                    let set = ops(n, k, theta, topology);
                    let report = verify_axioms(&set);
                    let m =
                        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(set.norm()));
                    let dm = dense(set.d_minus());
                    let dp = dense(set.d_plus());
                    // LGL nodes contain the cell end points, so B = e_last e_lastᵀ - e_0 e_0ᵀ
                    let dim = set.dim();
                    let mut b = DMatrix::zeros(dim, dim);
                    if topology == Topology::Bounded {
                        b[(0, 0)] = -1.0;
                        b[(dim - 1, dim - 1)] = 1.0;
                    }
                    let sbp = (&m * &dp + dm.transpose() * &m - &b).amax();
                    let c = dense(set.dissipation_matrix());
                    let c_max = c.clone().symmetric_eigen().eigenvalues.max();
                    match topology {
                        Topology::Bounded => {
                            let r = report
                                .accuracy_residual
                                .max(report.interpolation_residual.unwrap_or(0.0))
                                .max(sbp)
                                .max(c_max)
                                .max(report.dissipation_asymmetry);
                            worst_bounded = worst_bounded.max(r);
                            if r > 1e-10 || report.norm_min <= 0.0 {
                                failures.push(format!("bounded N={n} K={k} θ={theta}: {r:.2e}"));
                            }
                        }
                        Topology::Periodic => {
                            let d2 = &dm * &dp;
                            let energy = (&m * d2 + dp.transpose() * &m * &dp).amax();
                            let r = sbp.max(energy);
                            worst_periodic = worst_periodic.max(r);
                            if r > 1e-11 || c_max > 1e-10 || report.norm_min <= 0.0 {
                                failures.push(format!("periodic N={n} K={k} θ={theta}: {r:.2e}"));
                            }
                        }
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "27 bounded + 27 periodic sets; worst axiom residual {worst_bounded:.2e} (tol 1e-10), \
             worst periodic identity residual {worst_periodic:.2e} (tol 1e-11) {}",
            failures.join("; ")
        ),
    )
}

fn floor_check(order: u8, tau: f64) -> Outcome {
    let mut violations = Vec::new();
    let mut count = 0;
    for (a, c) in [(0.1, 0.1), (0.2, 0.01)] {
        for pair in COMPATIBLE {
            for n in 1..=3 {
                for k in [20, 40, 80, 160] {
                    let cfg = StabilityConfig {
                        problem: problem(a, c, n, k, pair),
                        order,
                        horizon: 100.0,
                    };
                    let dt = tau * c / (a * a);
                    let probe = is_stable(&cfg, dt).unwrap();
                    count += 1;
                    if !probe.stable {
                        violations.push(format!(
                            "a={a} c={c} {pair:?} N={n} K={k} growth at step {:?}",
                            probe.first_growth
                        ));
                    }
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "imex{order} at Δt = {tau:.6} c/a², {count} runs to T = 100, {} violations {}",
            violations.len(),
            violations.join("; ")
        ),
    )
}

fn c4_plateau() -> Outcome {
    let mut bad = Vec::new();
    let (mut lo1, mut hi1) = (f64::INFINITY, 0.0f64);
    for pair in COMPATIBLE {
        for n in 1..=3 {
            for k in [40, 80] {
                let r = scan(StabilityConfig {
                    problem: problem(0.2, 0.01, n, k, pair),
                    order: 1,
                    horizon: 100.0,
                });
                let tau = r.tau().unwrap_or(f64::INFINITY);
                lo1 = lo1.min(tau);
                hi1 = hi1.max(tau);
                if (tau - 2.0).abs() > 0.2 {
                    bad.push(format!("imex1 {pair:?} N={n} K={k} τ={}", r.tau_or_plus()));
                }
            }
        }
    }
    let (mut lo2, mut hi2) = (f64::INFINITY, 0.0f64);
    for pair in COMPATIBLE {
        for n in 1..=3 {
            for k in REFINEMENTS {
                let r = scan(StabilityConfig {
                    problem: problem(0.1, 0.1, n, k, pair),
                    order: 2,
                    horizon: 100.0,
                });
                let tau = r.tau().unwrap_or(f64::INFINITY);
                lo2 = lo2.min(tau);
                hi2 = hi2.max(tau);
                if (tau - 2.4).abs() > 0.25 {
                    bad.push(format!("imex2 {pair:?} N={n} K={k} τ={}", r.tau_or_plus()));
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "imex1 a=0.2 c=0.01 K∈{{40,80}}: τ ∈ [{lo1:.4}, {hi1:.4}] (target 2.0±0.2); \
             imex2 a=c=0.1 K=20..320: τ ∈ [{lo2:.4}, {hi2:.4}] (target 2.4±0.25) {}",
            bad.join("; ")
        ),
    )
}

fn c5_unbounded() -> Outcome {
    let mut finite = Vec::new();
    let mut finite_beyond_n1 = false;
    let mut total = 0;
    for pair in COMPATIBLE {
        for n in 1..=3 {
            for k in REFINEMENTS {
                let r = scan(StabilityConfig {
                    problem: problem(0.1, 0.1, n, k, pair),
                    order: 1,
                    horizon: 100.0,
                });
                total += 1;
                if !r.is_unbounded() {
                    finite_beyond_n1 |= n > 1;
                    finite.push(format!("{pair:?} N={n} K={k} τ={}", r.tau_or_plus()));
                }
            }
        }
    }
    // Documented: for N = 1 a slowly damped mode keeps τ finite, growing like K².
    Outcome {
        pass: finite.is_empty(),
        known_deviation: !finite_beyond_n1,
        detail: format!(
            "{}/{total} entries UNBOUNDED at τ_cap = 1e4; finite: {}",
            total - finite.len(),
            if finite.is_empty() {
                "none".to_string()
            } else {
                finite.join("; ")
            }
        ),
    }
}

fn c6_incompatible() -> Outcome {
    let tau = |k| {
        scan(StabilityConfig {
            problem: problem(0.1, 0.1, 1, k, (0.5, 0.0)),
            order: 1,
            horizon: 100.0,
        })
        .tau()
        .unwrap_or(f64::INFINITY)
    };
    let (t40, t80) = (tau(40), tau(80));
    let ratio = t40 / t80;
    let pass = (ratio - 2.0).abs() <= 0.3
        && (t40 / 0.16 - 1.0).abs() <= 0.25
        && (t80 / 0.079 - 1.0).abs() <= 0.25;
    outcome(
        pass,
        format!("τ(40) = {t40:.4e}, τ(80) = {t80:.4e}, ratio {ratio:.3} (target 2.0±0.3; anchors 1.6e-1, 7.9e-2 ±25%)"),
    )
}

fn c7_third_order() -> Outcome {
    let mut taus = Vec::new();
    for pair in COMPATIBLE {
        for k in [40, 80] {
            let r = scan(StabilityConfig {
                problem: problem(0.1, 0.1, 2, k, pair),
                order: 3,
                horizon: 100.0,
            });
            taus.push((pair, k, r.tau().unwrap_or(f64::INFINITY)));
        }
    }
    let pass = taus.iter().all(|t| (t.2 - 5.9).abs() <= 0.6);
    let list: Vec<String> = taus
        .iter()
        .map(|(p, k, t)| format!("{p:?} K={k} τ={t:.4}"))
        .collect();
    outcome(
        pass,
        format!("imex3 N=2: {} (target 5.9±0.6)", list.join(", ")),
    )
}

fn convergence(
    a: f64,
    c: f64,
    n: usize,
    pair: (f64, f64),
    order: u8,
    mu: f64,
    solution: SolutionKind,
) -> Vec<ConvergenceRow> {
    let cfg = ConvergenceConfig {
        problem: problem(a, c, n, 20, pair),
        order,
        mu,
        t_end: 10.0,
        solution,
        refinements: REFINEMENTS.to_vec(),
    };
    run_convergence(&cfg, 1).unwrap()
}

fn c8_decay() -> Outcome {
    let rows = convergence(0.1, 0.1, 1, (0.5, 0.5), 2, 25.0, SolutionKind::Decay);
    let errors = [1.01e-1, 2.31e-2, 6.42e-3];
    let eocs = [2.13, 1.85];
    let mut pass = true;
    let mut got = Vec::new();
    for (i, e) in errors.iter().enumerate() {
        let v = rows[i].l2_error.unwrap_or(f64::INFINITY);
        pass &= (v / e - 1.0).abs() <= 0.05;
        got.push(format!("{v:.4e}"));
    }
    let mut got_eoc = Vec::new();
    for (i, e) in eocs.iter().enumerate() {
        let v = rows[i + 1].eoc.unwrap_or(f64::NAN);
        pass &= (v - e).abs() <= 0.1;
        got_eoc.push(format!("{v:.3}"));
    }
    let central = convergence(0.1, 0.1, 1, (0.0, 0.0), 2, 25.0, SolutionKind::Decay);
    let central_eoc: Vec<f64> = central.iter().filter_map(|r| r.eoc).collect();
    let last = central_eoc.last().copied().unwrap_or(f64::NAN);
    pass &= (last - 1.0).abs() <= 0.15;
    outcome(
        pass,
        format!(
            "(½,½) errors {} (5%), EOC {} (±0.1); (0,0) EOC {:?} → {last:.3} (1.0±0.15)",
            got.join(", "),
            got_eoc.join(", "),
            central_eoc
                .iter()
                .map(|e| (e * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        ),
    )
}

fn c9_growth() -> Outcome {
    let rows = convergence(1.0, 0.1, 3, (0.0, 0.0), 3, 0.3, SolutionKind::Growth);
    let eocs: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.cells >= 80)
        .map(|r| (r.cells, r.eoc.unwrap_or(f64::NAN)))
        .collect();
    let pass = eocs.iter().all(|(_, e)| (e - 3.0).abs() <= 0.05);
    outcome(
        pass,
        format!(
            "imex3 N=3 μ=0.3 (0,0) growth: EOC {} (3.00±0.05)",
            eocs.iter()
                .map(|(k, e)| format!("K={k}: {e:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn c10_burgers() -> Outcome {
    let run = |pair: (f64, f64), k| {
        run_burgers_demo(&BurgersConfig {
            theta_adv: pair.0,
            theta_diff: pair.1,
            cells: k,
            ..Default::default()
        })
        .unwrap()
    };
    let upwind = run((0.5, 0.0), 100);
    let mut pass = upwind.blowup_time.is_some_and(|t| t < 2.0);
    let mut parts = vec![format!(
        "(½,0) K=100 blow-up at t={}",
        upwind
            .blowup_time
            .map_or("none".into(), |t| format!("{t:.2}"))
    )];
    for k in [50, 100, 200, 400] {
        let r = run((0.0, 0.0), k);
        let e0 = r.trace.energies().next().unwrap();
        let ok =
            r.completed() && r.max_energy().is_finite() && r.max_energy() <= e0 * (1.0 + 1e-12);
        pass &= ok;
        parts.push(format!(
            "(0,0) K={k} {} max E/E0 = {:.6}",
            if r.completed() {
                "completed T=2"
            } else {
                "stopped"
            },
            r.max_energy() / e0
        ));
    }
    outcome(pass, parts.join("; "))
}

fn forced_problem(lambda: f64) -> ImexSplitProblem {
    let explicit: upwind_gsbp::imex::ExplicitFn = Arc::new(move |t, u, out| {
        out[0] = -u[0] + t.cos();
    });
    ImexSplitProblem::new(
        vec![1.0],
        BlockMatrix::from_diagonal(&[lambda], 1),
        explicit,
    )
    .unwrap()
}

/// Exact solution of `u' = (λ - 1) u + cos t`, `u(0) = 1`.
fn forced_exact(lambda: f64, t: f64) -> f64 {
    let l = lambda - 1.0;
    let (a, b) = (-l / (1.0 + l * l), 1.0 / (1.0 + l * l));
    (1.0 - a) * (l * t).exp() + a * t.cos() + b * t.sin()
}

fn ode_eoc(tab: &ImexTableau) -> f64 {
    let lambda = -5.0;
    let err = |dt: f64| {
        let mut it = ImexIntegrator::new(tab.clone(), forced_problem(lambda));
        let out = integrate(&mut it, &[1.0], dt, 1.0, |_| ControlFlow::Continue(())).unwrap();
        (out.state[0] - forced_exact(lambda, 1.0)).abs()
    };
    let (e1, e2) = (err(1.0 / 256.0), err(1.0 / 512.0));
    (e1 / e2).log2()
}

fn c11_properties() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for tab in [tableau_imex1(), tableau_imex2(), tableau_imex3()] {
        let eoc = ode_eoc(&tab);
        pass &= (eoc - tab.order() as f64).abs() <= 0.1;
        notes.push(format!("{} EOC {eoc:.3}", tab.name()));
    }

    let (mut worst_d2, mut worst_jump, mut worst_cons): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut fail_dissipative, mut fail_bound) = (0, 0);
    for n in 1..=3 {
        for k in [4, 20] {
            for theta in [0.0, 0.25, 0.5] {
                let set = ops(n, k, theta, Topology::Periodic);
                let elem = build_lgl(n).unwrap();
                let mesh = Mesh1D::uniform(-PI, PI, k).unwrap();
                let d2 = second_derivative(&elem, &mesh, theta, Topology::Periodic).unwrap();
                let m = set.norm();
                let ones = vec![1.0; set.dim()];
                for seed in 0..100u64 {
                    let mut rng = StdRng::seed_from_u64(seed);
                    let u: Vec<f64> = (0..set.dim())
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect();
                    let v: Vec<f64> = (0..set.dim())
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect();
                    let dmu = set.d_minus().mul_vec(&u);
                    let dpu = set.d_plus().mul_vec(&u);
                    let dpv = set.d_plus().mul_vec(&v);
                    let scale = weighted_dot(m, &dpu, &dpu).max(1.0);
                    // dissipativity of -D⁻
                    if weighted_dot(m, &dmu, &u) < -1e-12 * scale {
                        fail_dissipative += 1;
                    }
                    // (D₂u, v)_M = -(D⁺u, D⁺v)_M
                    let lhs = weighted_dot(m, &d2.matrix().mul_vec(&u), &v);
                    let rhs = -weighted_dot(m, &dpu, &dpv);
                    worst_d2 = worst_d2.max((lhs - rhs).abs() / rhs.abs().max(scale));
                    // |(D⁻u, v)_M| ≤ ‖u‖_M ‖D⁺v‖_M
                    let bound = weighted_dot(m, &u, &u).sqrt() * weighted_dot(m, &dpv, &dpv).sqrt();
                    if weighted_dot(m, &dmu, &v).abs() > bound * (1.0 + 1e-12) + 1e-12 {
                        fail_bound += 1;
                    }
                    // jump identity from the nodal traces of neighbouring cells
                    let nb = n + 1;
                    let jumps: f64 = (0..k)
                        .map(|i| {
                            let j = u[((i + 1) % k) * nb] - u[i * nb + n];
                            j * j
                        })
                        .sum();
                    let utcu = weighted_dot(&ones, &set.dissipation_matrix().mul_vec(&u), &u);
                    worst_jump = worst_jump.max((utcu + theta * jumps).abs());
                    // conservation
                    worst_cons = worst_cons.max(weighted_dot(m, &ones, &dmu).abs());
                }
            }
        }
    }
    pass &= fail_dissipative == 0
        && fail_bound == 0
        && worst_d2 <= 1e-11
        && worst_jump <= 1e-12
        && worst_cons <= 1e-11;
    notes.push(format!(
        "dissipativity violations {fail_dissipative}, D₂ identity worst rel {worst_d2:.1e}, bound violations {fail_bound}, \
         jump identity {worst_jump:.1e}, 1ᵀMD⁻u {worst_cons:.1e} over 1800 random vectors"
    ));
    outcome(pass, notes.join("; "))
}

fn main() {
    type Criterion = (u8, &'static str, fn() -> Outcome);
    let criteria: Vec<Criterion> = vec![
        (1, "operator certification", c1_certification),
        (2, "first-order energy floor", || floor_check(1, 2.0)),
        (3, "second-order energy floor", || {
            floor_check(2, 1.0 / 11.0)
        }),
        (4, "stability plateau", c4_plateau),
        (5, "unbounded first-order entries", c5_unbounded),
        (6, "O(Δx) incompatible pair", c6_incompatible),
        (7, "third-order spot check", c7_third_order),
        (8, "decay convergence", c8_decay),
        (9, "growth convergence", c9_growth),
        (10, "viscous Burgers", c10_burgers),
        (11, "property suites", c11_properties),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let status = match (o.pass, o.known_deviation) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known deviation)",
            (false, false) => {
                unexpected.push(id);
                "FAIL"
            }
        };
        println!(
            "criterion {id:>2} {status}: {name} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
