//! Concrete periodic test problems: linear advection-diffusion with
//! manufactured solutions and the viscous Burgers equation.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{GsbpError, Result};
use crate::imex::{ExplicitFn, ImexSplitProblem};
use crate::mesh::Mesh1D;
use crate::operators::{
    assemble_first_derivative, check_theta, second_derivative, weighted_dot, GlobalOperatorSet,
    SecondDerivativeOperator, Topology,
};
use crate::ref_element::{build_lgl, ReferenceElement};

/// Parameters of `u_t + a u_x = c u_xx` on a periodic uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvDiffConfig {
    pub a: f64,
    pub c: f64,
    pub theta_adv: f64,
    pub theta_diff: f64,
    pub degree: usize,
    pub cells: usize,
    pub x_a: f64,
    pub x_b: f64,
}

impl Default for AdvDiffConfig {
    fn default() -> Self {
        Self {
            a: 0.1,
            c: 0.1,
            theta_adv: 0.5,
            theta_diff: 0.5,
            degree: 1,
            cells: 20,
            x_a: -PI,
            x_b: PI,
        }
    }
}

impl AdvDiffConfig {
    /// True iff the implicit operator is built from the explicit pair.
    pub fn compatible(&self) -> bool {
        self.theta_adv == self.theta_diff
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("a", self.a), ("c", self.c)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GsbpError::NonPositive { name, value });
            }
        }
        check_theta(self.theta_adv)?;
        check_theta(self.theta_diff)
    }

    pub fn element(&self) -> Result<ReferenceElement> {
        build_lgl(self.degree)
    }

    pub fn mesh(&self) -> Result<Mesh1D> {
        Mesh1D::uniform(self.x_a, self.x_b, self.cells)
    }

    /// Uniform cell width.
    pub fn dx(&self) -> f64 {
        (self.x_b - self.x_a) / self.cells as f64
    }
}

/// Closed-form solutions of the (possibly forced) advection-diffusion equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManufacturedSolution {
    /// `u = e^{-ct} sin(x - at)`, no source.
    Decay { a: f64, c: f64 },
    /// `u = e^{ct} sin x` with source `g = e^{ct} (2c sin x + a cos x)`.
    Growth { a: f64, c: f64 },
}

impl ManufacturedSolution {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Decay { .. } => "decay",
            Self::Growth { .. } => "growth",
        }
    }

    pub fn coefficients(&self) -> (f64, f64) {
        match *self {
            Self::Decay { a, c } | Self::Growth { a, c } => (a, c),
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match *self {
            Self::Decay { a, c } => (-c * t).exp() * (x - a * t).sin(),
            Self::Growth { c, .. } => (c * t).exp() * x.sin(),
        }
    }

    pub fn u_t(&self, x: f64, t: f64) -> f64 {
        match *self {
            Self::Decay { a, c } => {
                (-c * t).exp() * (-c * (x - a * t).sin() - a * (x - a * t).cos())
            }
            Self::Growth { c, .. } => c * (c * t).exp() * x.sin(),
        }
    }

    pub fn u_x(&self, x: f64, t: f64) -> f64 {
        match *self {
            Self::Decay { a, c } => (-c * t).exp() * (x - a * t).cos(),
            Self::Growth { c, .. } => (c * t).exp() * x.cos(),
        }
    }

    pub fn u_xx(&self, x: f64, t: f64) -> f64 {
        -self.eval(x, t)
    }

    pub fn source(&self, x: f64, t: f64) -> f64 {
        match *self {
            Self::Decay { .. } => 0.0,
            Self::Growth { a, c } => (c * t).exp() * (2.0 * c * x.sin() + a * x.cos()),
        }
    }

    pub fn has_source(&self) -> bool {
        matches!(self, Self::Growth { .. })
    }

    /// `u_t + a u_x - c u_xx - g`
    pub fn residual(&self, x: f64, t: f64) -> f64 {
        let (a, c) = self.coefficients();
        self.u_t(x, t) + a * self.u_x(x, t) - c * self.u_xx(x, t) - self.source(x, t)
    }
}

/// Assembled operators and the split problem for one configuration.
#[derive(Debug, Clone)]
pub struct AdvDiffDiscretization {
    pub config: AdvDiffConfig,
    pub element: ReferenceElement,
    pub mesh: Mesh1D,
    /// First-derivative pair at `theta_adv`.
    pub advection: GlobalOperatorSet,
    /// `D₂ = D⁻(θ_diff) D⁺(θ_diff)`
    pub diffusion: SecondDerivativeOperator,
    pub problem: ImexSplitProblem,
}

impl AdvDiffDiscretization {
    pub fn nodes(&self) -> &[f64] {
        self.advection.nodes()
    }

    pub fn norm(&self) -> &[f64] {
        self.advection.norm()
    }
}

/// Splits `du/dt = -a D⁻ u + g + c D₂ u` into explicit advection (plus the
/// source of `source`, if any, at stage times) and implicit diffusion.
pub fn semidiscretize(
    cfg: &AdvDiffConfig,
    source: Option<ManufacturedSolution>,
) -> Result<AdvDiffDiscretization> {
    cfg.validate()?;
    let element = cfg.element()?;
    let mesh = cfg.mesh()?;
    let advection = assemble_first_derivative(&element, &mesh, cfg.theta_adv, Topology::Periodic)?;
    let diffusion = second_derivative(&element, &mesh, cfg.theta_diff, Topology::Periodic)?;
    let adv = advection.d_minus().scaled(-cfg.a);
    let forcing = source.filter(|s| s.has_source());
    let nodes = advection.nodes().to_vec();
    let explicit: ExplicitFn = Arc::new(move |t, u, out| {
        adv.mul_vec_into(u, out);
        if let Some(g) = &forcing {
            for (o, x) in out.iter_mut().zip(&nodes) {
                *o += g.source(*x, t);
            }
        }
    });
    let problem = ImexSplitProblem::new(
        advection.norm().to_vec(),
        diffusion.matrix().scaled(cfg.c),
        explicit,
    )?;
    Ok(AdvDiffDiscretization {
        config: *cfg,
        element,
        mesh,
        advection,
        diffusion,
        problem,
    })
}

/// Nodal interpolation of `u(·, t)`.
pub fn sample<F: Fn(f64) -> f64>(nodes: &[f64], f: F) -> Vec<f64> {
    nodes.iter().map(|&x| f(x)).collect()
}

/// Nodal interpolation of the solution at `t = 0`.
pub fn initial_condition(
    solution: &ManufacturedSolution,
    mesh: &Mesh1D,
    elem: &ReferenceElement,
) -> Vec<f64> {
    sample(&mesh.physical_nodes(elem), |x| solution.eval(x, 0.0))
}

/// `‖u - u_exact(·, t)‖_M` over the nodes.
pub fn l2_error(
    state: &[f64],
    solution: &ManufacturedSolution,
    t: f64,
    nodes: &[f64],
    norm: &[f64],
) -> f64 {
    let e: Vec<f64> = state
        .iter()
        .zip(nodes)
        .map(|(u, &x)| u - solution.eval(x, t))
        .collect();
    weighted_dot(norm, &e, &e).sqrt()
}

/// Viscous Burgers semi-discretization
/// `du/dt = -½(D⁺ + D⁻) u²/2 + ‖u‖_∞ M⁻¹ C u + c D₂ u`.
#[derive(Debug, Clone)]
pub struct BurgersDiscretization {
    pub advection: GlobalOperatorSet,
    pub diffusion: SecondDerivativeOperator,
    pub problem: ImexSplitProblem,
}

impl BurgersDiscretization {
    pub fn nodes(&self) -> &[f64] {
        self.advection.nodes()
    }

    /// Convective part `-½(D⁺ + D⁻) u²/2`.
    pub fn convective(&self, u: &[f64]) -> Vec<f64> {
        let f: Vec<f64> = u.iter().map(|v| 0.5 * v * v).collect();
        let mut out = self.advection.d_minus().mul_vec(&f);
        let plus = self.advection.d_plus().mul_vec(&f);
        out.iter_mut()
            .zip(&plus)
            .for_each(|(o, p)| *o = -0.5 * (*o + p));
        out
    }

    /// Dissipative part `‖u‖_∞ M⁻¹ C u`.
    pub fn dissipative(&self, u: &[f64]) -> Vec<f64> {
        let amax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cu = self.advection.dissipation_matrix().mul_vec(u);
        cu.iter()
            .zip(self.advection.norm())
            .map(|(c, m)| amax * c / m)
            .collect()
    }
}

pub fn burgers_rhs(
    elem: &ReferenceElement,
    mesh: &Mesh1D,
    theta_adv: f64,
    theta_diff: f64,
    c: f64,
) -> Result<BurgersDiscretization> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(GsbpError::NonPositive {
            name: "c",
            value: c,
        });
    }
    let advection = assemble_first_derivative(elem, mesh, theta_adv, Topology::Periodic)?;
    let diffusion = second_derivative(elem, mesh, theta_diff, Topology::Periodic)?;
    let central = advection
        .d_minus()
        .add_scaled(advection.d_plus(), 1.0)
        .scaled(-0.5);
    let dissipation = advection
        .dissipation_matrix()
        .scale_rows(&advection.norm().iter().map(|m| 1.0 / m).collect::<Vec<_>>());
    let explicit: ExplicitFn = Arc::new(move |_, u, out| {
        let f: Vec<f64> = u.iter().map(|v| 0.5 * v * v).collect();
        central.mul_vec_into(&f, out);
        let amax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if amax > 0.0 {
            let d = dissipation.mul_vec(u);
            out.iter_mut().zip(&d).for_each(|(o, d)| *o += amax * d);
        }
    });
    let problem = ImexSplitProblem::new(
        advection.norm().to_vec(),
        diffusion.matrix().scaled(c),
        explicit,
    )?;
    Ok(BurgersDiscretization {
        advection,
        diffusion,
        problem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::weighted_dot;
    use rand::{Rng, SeedableRng};

    #[test]
    fn manufactured_residuals_vanish() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        for sol in [
            ManufacturedSolution::Decay { a: 0.1, c: 0.1 },
            ManufacturedSolution::Decay { a: 1.0, c: 0.1 },
            ManufacturedSolution::Growth { a: 1.0, c: 0.1 },
            ManufacturedSolution::Growth { a: 0.3, c: 0.5 },
        ] {
            for _ in 0..200 {
                let x = rng.random_range(-PI..PI);
                let t = rng.random_range(0.0..10.0);
                assert!(sol.residual(x, t).abs() < 1e-10, "{sol:?} at ({x}, {t})");
            }
        }
        let g = ManufacturedSolution::Growth { a: 1.0, c: 0.1 };
        let (x, t) = (0.7f64, 2.0f64);
        let reference_g = (0.1 * t).exp() * (0.2 * f64::sin(x) + f64::cos(x));
        assert!((g.source(x, t) - reference_g).abs() < 1e-15);
    }

    #[test]
    fn constants_are_steady() {
        for (ta, td) in [(0.5, 0.5), (0.5, 0.0), (0.0, 0.0), (0.25, 0.25)] {
            let cfg = AdvDiffConfig {
                theta_adv: ta,
                theta_diff: td,
                degree: 2,
                cells: 6,
                ..Default::default()
            };
            assert_eq!(cfg.compatible(), ta == td);
            let d = semidiscretize(&cfg, None).unwrap();
            let u = vec![2.5; d.problem.dim()];
            assert!(d
                .problem
                .explicit_rhs(0.3, &u)
                .iter()
                .all(|v| v.abs() < 1e-12));
            assert!(d.problem.implicit_rhs(&u).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn initial_data_and_error_norm() {
        let cfg = AdvDiffConfig {
            degree: 2,
            cells: 5,
            ..Default::default()
        };
        let (e, m) = (cfg.element().unwrap(), cfg.mesh().unwrap());
        let d = semidiscretize(&cfg, None).unwrap();
        for sol in [
            ManufacturedSolution::Decay { a: 0.1, c: 0.1 },
            ManufacturedSolution::Growth { a: 1.0, c: 0.1 },
        ] {
            let u0 = initial_condition(&sol, &m, &e);
            let expect: Vec<f64> = d.nodes().iter().map(|x| x.sin()).collect();
            for (u, s) in u0.iter().zip(&expect) {
                assert!((u - s).abs() < 1e-15);
            }
            assert_eq!(l2_error(&u0, &sol, 0.0, d.nodes(), d.norm()), 0.0);
        }
        let zero = ManufacturedSolution::Decay { a: 0.1, c: 0.1 };
        let mut err = initial_condition(&zero, &m, &e);
        let idx = 3 * 2 + 1;
        err[idx] += 1.0;
        let dx = cfg.dx();
        let expected = (dx * e.weights()[1] / 2.0).sqrt();
        assert!((l2_error(&err, &zero, 0.0, d.nodes(), d.norm()) - expected).abs() < 1e-14);
    }

    #[test]
    fn semidiscrete_energy_is_dissipated() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for (ta, td) in [(0.5, 0.5), (0.5, 0.0), (0.0, 0.0), (0.25, 0.25)] {
            let cfg = AdvDiffConfig {
                theta_adv: ta,
                theta_diff: td,
                degree: 3,
                cells: 7,
                ..Default::default()
            };
            let d = semidiscretize(&cfg, None).unwrap();
            for _ in 0..20 {
                let u: Vec<f64> = (0..d.problem.dim())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let f = d.problem.explicit_rhs(0.0, &u);
                let l = d.problem.implicit_rhs(&u);
                let rate = weighted_dot(d.norm(), &u, &f) + weighted_dot(d.norm(), &u, &l);
                assert!(rate <= 1e-12);
            }
        }
    }

    #[test]
    fn source_enters_explicitly() {
        let cfg = AdvDiffConfig {
            a: 1.0,
            degree: 2,
            cells: 4,
            ..Default::default()
        };
        let sol = ManufacturedSolution::Growth { a: 1.0, c: 0.1 };
        let with = semidiscretize(&cfg, Some(sol)).unwrap();
        let u = vec![0.0; with.problem.dim()];
        let f = with.problem.explicit_rhs(1.5, &u);
        for (v, x) in f.iter().zip(with.nodes()) {
            assert!((v - sol.source(*x, 1.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn burgers_terms() {
        let e = build_lgl(2).unwrap();
        let m = Mesh1D::uniform(-PI, PI, 12).unwrap();
        for ta in [0.5, 0.0] {
            let b = burgers_rhs(&e, &m, ta, 0.0, 0.1).unwrap();
            let k = vec![1.7; b.problem.dim()];
            assert!(b
                .problem
                .explicit_rhs(0.0, &k)
                .iter()
                .all(|v| v.abs() < 1e-12));
            let u0: Vec<f64> = b.nodes().iter().map(|x| x.sin()).collect();
            let rhs = b.problem.explicit_rhs(0.0, &u0);
            let lin = b.problem.implicit_rhs(&u0);
            let ones = vec![1.0; u0.len()];
            let mass = weighted_dot(b.advection.norm(), &ones, &rhs)
                + weighted_dot(b.advection.norm(), &ones, &lin);
            assert!(mass.abs() < 1e-12);
            let diss = b.dissipative(&u0);
            if ta == 0.0 {
                assert!(diss.iter().all(|v| v.abs() < 1e-14));
            }
            assert!(weighted_dot(b.advection.norm(), &u0, &diss) <= 1e-14);
            let split: Vec<f64> = b
                .convective(&u0)
                .iter()
                .zip(&diss)
                .map(|(a, b)| a + b)
                .collect();
            for (s, r) in split.iter().zip(&rhs) {
                assert!((s - r).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad = AdvDiffConfig {
            theta_adv: 0.7,
            ..Default::default()
        };
        assert!(semidiscretize(&bad, None).is_err());
        let bad = AdvDiffConfig {
            c: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            semidiscretize(&bad, None),
            Err(GsbpError::NonPositive { name: "c", .. })
        ));
    }
}
