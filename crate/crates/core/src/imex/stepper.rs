//! Generic IMEX stage recursion and time loop.

use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::sync::Arc;

use super::solver::StageSolver;
use super::tableau::ImexTableau;
use crate::error::{GsbpError, Result};
use crate::operators::weighted_dot;
use crate::sparse::BlockMatrix;

/// Explicit right-hand side `out = F(t, u)`.
pub type ExplicitFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// `du/dt = F(t, u) + L u` with `F` explicit and the fixed matrix `L` implicit.
#[derive(Clone)]
pub struct ImexSplitProblem {
    norm: Vec<f64>,
    implicit: BlockMatrix,
    explicit: ExplicitFn,
}

impl std::fmt::Debug for ImexSplitProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImexSplitProblem")
            .field("dim", &self.dim())
            .finish_non_exhaustive()
    }
}

impl ImexSplitProblem {
    pub fn new(norm: Vec<f64>, implicit: BlockMatrix, explicit: ExplicitFn) -> Result<Self> {
        if implicit.dim() != norm.len() {
            return Err(GsbpError::DimensionMismatch {
                expected: norm.len(),
                got: implicit.dim(),
            });
        }
        Ok(Self {
            norm,
            implicit,
            explicit,
        })
    }

    /// Problem with a linear explicit part `F(t, u) = E u`.
    pub fn linear(norm: Vec<f64>, implicit: BlockMatrix, explicit: BlockMatrix) -> Result<Self> {
        if explicit.dim() != norm.len() {
            return Err(GsbpError::DimensionMismatch {
                expected: norm.len(),
                got: explicit.dim(),
            });
        }
        let f: ExplicitFn = Arc::new(move |_, u, out| explicit.mul_vec_into(u, out));
        Self::new(norm, implicit, f)
    }

    pub fn dim(&self) -> usize {
        self.norm.len()
    }

    pub fn norm(&self) -> &[f64] {
        &self.norm
    }

    pub fn implicit_matrix(&self) -> &BlockMatrix {
        &self.implicit
    }

    /// `‖u‖²_M`
    pub fn energy(&self, u: &[f64]) -> f64 {
        weighted_dot(&self.norm, u, u)
    }

    pub fn explicit_rhs(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        (self.explicit)(t, u, &mut out);
        out
    }

    pub fn implicit_rhs(&self, u: &[f64]) -> Vec<f64> {
        self.implicit.mul_vec(u)
    }
}

/// A stepping session: tableau, problem and the stage factorization cache.
#[derive(Debug, Clone)]
pub struct ImexIntegrator {
    tableau: ImexTableau,
    problem: ImexSplitProblem,
    solver: StageSolver,
}

impl ImexIntegrator {
    pub fn new(tableau: ImexTableau, problem: ImexSplitProblem) -> Self {
        let solver = StageSolver::new(problem.implicit.clone(), problem.norm.clone());
        Self {
            tableau,
            problem,
            solver,
        }
    }

    pub fn tableau(&self) -> &ImexTableau {
        &self.tableau
    }

    pub fn problem(&self) -> &ImexSplitProblem {
        &self.problem
    }

    pub fn solver(&self) -> &StageSolver {
        &self.solver
    }

    /// Advances `u` from `t` to `t + dt`.
    pub fn step(&mut self, t: f64, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        let n = self.problem.dim();
        if u.len() != n {
            return Err(GsbpError::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(GsbpError::NonPositive {
                name: "time step",
                value: dt,
            });
        }
        if dt == 0.0 {
            return Ok(u.to_vec());
        }
        let tab = &self.tableau;
        let (a1, a2, b1, b2, c) = (
            tab.a_explicit(),
            tab.a_implicit(),
            tab.b_explicit(),
            tab.b_implicit(),
            tab.c(),
        );
        let s = tab.stages();
        let mut f_exp: Vec<Option<Vec<f64>>> = vec![None; s];
        let mut l_imp: Vec<Option<Vec<f64>>> = vec![None; s];
        let explicit_needed = |j: usize| b1[j] != 0.0 || (j + 1..s).any(|i| a1[(i, j)] != 0.0);
        let implicit_needed = |j: usize| b2[j] != 0.0 || (j + 1..s).any(|i| a2[(i, j)] != 0.0);

        for i in 0..s {
            let stage = if i == 0 {
                u.to_vec()
            } else {
                let mut rhs = u.to_vec();
                for j in 0..i {
                    if let Some(f) = &f_exp[j] {
                        axpy(dt * a1[(i, j)], f, &mut rhs);
                    }
                    if let Some(l) = &l_imp[j] {
                        axpy(dt * a2[(i, j)], l, &mut rhs);
                    }
                }
                self.solver.solve(dt * a2[(i, i)], &rhs)?
            };
            if explicit_needed(i) {
                let mut f = vec![0.0; n];
                (self.problem.explicit)(t + c[i] * dt, &stage, &mut f);
                f_exp[i] = Some(f);
            }
            if implicit_needed(i) {
                l_imp[i] = Some(self.problem.implicit.mul_vec(&stage));
            }
        }

        let mut next = u.to_vec();
        for j in 0..s {
            if let Some(f) = &f_exp[j] {
                axpy(dt * b1[j], f, &mut next);
            }
            if let Some(l) = &l_imp[j] {
                axpy(dt * b2[j], l, &mut next);
            }
        }
        Ok(next)
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha == 0.0 {
        return;
    }
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

/// One step of `tableau` on `problem` without retaining the factorization cache.
pub fn step(
    tableau: &ImexTableau,
    problem: &ImexSplitProblem,
    u: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    ImexIntegrator::new(tableau.clone(), problem.clone()).step(t, u, dt)
}

/// Passed to the observer after every completed step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<'a> {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub state: &'a [f64],
}

/// `(step, t, ‖u‖²_M)` samples, starting with the initial state at step 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    pub rows: Vec<(usize, f64, f64)>,
}

impl EnergyTrace {
    pub fn push(&mut self, step: usize, t: f64, energy: f64) {
        self.rows.push((step, t, energy));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.2)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,t,energy\n");
        for (n, t, e) in &self.rows {
            let _ = writeln!(s, "{n},{t:.12e},{e:.12e}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Integration {
    pub state: Vec<f64>,
    pub t: f64,
    pub steps: usize,
    pub trace: EnergyTrace,
    /// True when the observer stopped the run before `T`.
    pub halted: bool,
}

/// Number of steps of size `dt` needed to reach `t_end`, ignoring a final
/// remainder below `1e-12 dt`.
pub fn step_count(dt: f64, t_end: f64) -> usize {
    let ratio = t_end / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-12 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Integrates from `t = 0` to `t_end`; step `n` ends at `min(n dt, t_end)`.
pub fn integrate<F>(
    integrator: &mut ImexIntegrator,
    u0: &[f64],
    dt: f64,
    t_end: f64,
    mut observer: F,
) -> Result<Integration>
where
    F: FnMut(&StepInfo) -> ControlFlow<()>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(GsbpError::NonPositive {
            name: "time step",
            value: dt,
        });
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(GsbpError::NonPositive {
            name: "final time",
            value: t_end,
        });
    }
    let nsteps = step_count(dt, t_end);
    let mut trace = EnergyTrace::default();
    let mut u = u0.to_vec();
    trace.push(0, 0.0, integrator.problem.energy(&u));
    let mut t = 0.0;
    for n in 1..=nsteps {
        let t_next = if n == nsteps { t_end } else { n as f64 * dt };
        let h = t_next - t;
        u = integrator.step(t, &u, h)?;
        t = t_next;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(GsbpError::NonFinite(t));
        }
        let energy = integrator.problem.energy(&u);
        trace.push(n, t, energy);
        let info = StepInfo {
            step: n,
            t,
            dt: h,
            energy,
            state: &u,
        };
        if observer(&info).is_break() {
            return Ok(Integration {
                state: u,
                t,
                steps: n,
                trace,
                halted: n < nsteps,
            });
        }
    }
    Ok(Integration {
        state: u,
        t,
        steps: nsteps,
        trace,
        halted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imex::tableau::{tableau_imex1, tableau_imex2, tableau_imex3};
    use crate::mesh::Mesh1D;
    use crate::operators::{assemble_first_derivative, second_derivative, Topology};
    use crate::ref_element::build_lgl;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn scalar(l1: f64, l2: f64) -> ImexSplitProblem {
        ImexSplitProblem::linear(
            vec![1.0],
            BlockMatrix::from_diagonal(&[l2], 1),
            BlockMatrix::from_diagonal(&[l1], 1),
        )
        .unwrap()
    }

    fn observed_order(tab: ImexTableau, l1: f64, l2: f64) -> Vec<f64> {
        let errs: Vec<f64> = (4..=10)
            .map(|k| {
                let dt = 2f64.powi(-k);
                let mut it = ImexIntegrator::new(tab.clone(), scalar(l1, l2));
                let out =
                    integrate(&mut it, &[1.0], dt, 1.0, |_| ControlFlow::Continue(())).unwrap();
                (out.state[0] - (l1 + l2).exp()).abs()
            })
            .collect();
        errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }

    #[test]
    fn scalar_split_orders() {
        for tab in [tableau_imex1(), tableau_imex2(), tableau_imex3()] {
            let eoc = observed_order(tab.clone(), -1.0, -10.0);
            let last = *eoc.last().unwrap();
            assert!((last - tab.order() as f64).abs() <= 0.1, "{tab}: {eoc:?}");
        }
    }

    #[test]
    fn euler_limits() {
        let (l, dt) = (-3.0, 0.1);
        let fe = step(&tableau_imex1(), &scalar(l, 0.0), &[2.0], 0.0, dt).unwrap();
        assert!((fe[0] - 2.0 * (1.0 + l * dt)).abs() < 1e-15);
        let be = step(&tableau_imex1(), &scalar(0.0, l), &[2.0], 0.0, dt).unwrap();
        assert!((be[0] - 2.0 / (1.0 - l * dt)).abs() < 1e-15);
        for tab in [tableau_imex1(), tableau_imex2(), tableau_imex3()] {
            let id = step(&tab, &scalar(0.0, 0.0), &[1.5], 0.0, 0.3).unwrap();
            assert_eq!(id, vec![1.5]);
            let zero_dt = step(&tab, &scalar(-1.0, -2.0), &[1.5], 0.0, 0.0).unwrap();
            assert_eq!(zero_dt, vec![1.5]);
        }
    }

    struct AdvDiff {
        d_minus: DMatrix<f64>,
        d2: DMatrix<f64>,
        problem: ImexSplitProblem,
    }

    fn adv_diff(n: usize, k: usize, theta: f64, a: f64, c: f64) -> AdvDiff {
        let e = build_lgl(n).unwrap();
        let m = Mesh1D::uniform(-PI, PI, k).unwrap();
        let ops = assemble_first_derivative(&e, &m, theta, Topology::Periodic).unwrap();
        let d2 = second_derivative(&e, &m, theta, Topology::Periodic).unwrap();
        let problem = ImexSplitProblem::linear(
            ops.norm().to_vec(),
            d2.matrix().scaled(c),
            ops.d_minus().scaled(-a),
        )
        .unwrap();
        AdvDiff {
            d_minus: ops.d_minus().to_dense(),
            d2: d2.matrix().to_dense(),
            problem,
        }
    }

    fn random_state(dim: usize, seed: u64) -> DVector<f64> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn imex1_matches_assembled_one_step_matrix() {
        let (a, c, dt) = (0.3, 0.2, 0.05);
        let sys = adv_diff(1, 4, 0.5, a, c);
        let dim = sys.problem.dim();
        let u = random_state(dim, 7);
        let got = step(&tableau_imex1(), &sys.problem, u.as_slice(), 0.0, dt).unwrap();
        let id = DMatrix::<f64>::identity(dim, dim);
        let lhs = &id - &sys.d2 * (c * dt);
        let rhs = &u - &sys.d_minus * &u * (a * dt);
        let expected = lhs.lu().solve(&rhs).unwrap();
        assert!((DVector::from_vec(got) - expected).amax() < 1e-13);
    }

    #[test]
    fn imex2_matches_two_stage_formulas() {
        let (a, c, dt) = (0.1, 0.1, 0.4);
        let g = crate::imex::tableau::imex2_gamma();
        let d = 1.0 - 1.0 / (2.0 * g);
        let sys = adv_diff(2, 5, 0.25, a, c);
        let dim = sys.problem.dim();
        let u = random_state(dim, 11);
        let got = step(&tableau_imex2(), &sys.problem, u.as_slice(), 0.0, dt).unwrap();
        let id = DMatrix::<f64>::identity(dim, dim);
        let lhs = (&id - &sys.d2 * (c * dt * g)).lu();
        let u1 = lhs.solve(&(&u - &sys.d_minus * &u * (a * dt * g))).unwrap();
        let rhs2 = &u
            + (&sys.d_minus * &u * (-a * d)
                + &sys.d_minus * &u1 * (-a * (1.0 - d))
                + &sys.d2 * &u1 * (c * (1.0 - g)))
                * dt;
        let u2 = lhs.solve(&rhs2).unwrap();
        assert!((DVector::from_vec(got) - u2).amax() < 1e-12);
    }

    #[test]
    fn truncated_final_step() {
        let mut it = ImexIntegrator::new(tableau_imex1(), scalar(0.0, -1.0));
        let mut dts = Vec::new();
        let out = integrate(&mut it, &[1.0], 0.4, 1.0, |s| {
            dts.push(s.dt);
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(out.steps, 3);
        assert_eq!(out.t, 1.0);
        assert!((dts[2] - 0.2).abs() < 1e-15);
        let one = integrate(&mut it, &[1.0], 0.4, 0.4, |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(one.steps, 1);
        assert_eq!(step_count(0.1, 0.3), 3);
        let zero = integrate(&mut it, &[1.0], 0.4, 0.0, |_| ControlFlow::Continue(())).unwrap();
        assert_eq!((zero.steps, zero.state[0]), (0, 1.0));
    }

    #[test]
    fn pure_diffusion_energy_strictly_decreases() {
        for tab in [tableau_imex1(), tableau_imex2(), tableau_imex3()] {
            let sys = adv_diff(2, 10, 0.0, 0.0, 0.1);
            let e = build_lgl(2).unwrap();
            let m = Mesh1D::uniform(-PI, PI, 10).unwrap();
            let u0: Vec<f64> = m.physical_nodes(&e).iter().map(|x| x.sin()).collect();
            let mut it = ImexIntegrator::new(tab, sys.problem);
            let out = integrate(&mut it, &u0, 0.3, 6.0, |_| ControlFlow::Continue(())).unwrap();
            let e: Vec<f64> = out.trace.energies().collect();
            assert!(e.windows(2).all(|w| w[1] < w[0]));
            assert_eq!(out.trace.len(), 21);
        }
    }

    #[test]
    fn observer_can_halt() {
        let mut it = ImexIntegrator::new(tableau_imex1(), scalar(1.0, 0.0));
        let out = integrate(&mut it, &[1.0], 0.1, 10.0, |s| {
            if s.energy > 2.0 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert!(out.halted);
        assert!(out.t < 10.0);
        assert!(out.trace.to_csv().starts_with("step,t,energy\n0,"));
    }
}
