//! Global first- and second-derivative upwind gSBP operators obtained from the
//! nodal DG discretization of `u_t + a u_x = 0` with the flux family
//!
//! ```text
//! (au)* = a (1/2 + θ) u_left + a (1/2 - θ) u_right,   θ ∈ [-1/2, 1/2]
//! ```
//!
//! `θ = 0` is the central flux, `θ = 1/2` full upwinding. The dual operator is
//! `D⁺(θ) = D⁻(-θ)`, and every pair shares the diagonal norm matrix
//! `M = diag(Δx_i/2 · M̂)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::fmt;

use crate::error::{GsbpError, Result};
use crate::mesh::Mesh1D;
use crate::ref_element::ReferenceElement;
use crate::sparse::BlockMatrix;

/// Pass/fail threshold for every certification residual.
pub const AXIOM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    /// Wrap-around coupling between the last and first cell; no boundary operator.
    Periodic,
    /// Open interval with boundary operator `B = t_β t_βᵀ - t_α t_αᵀ`.
    Bounded,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Periodic => "periodic",
            Topology::Bounded => "bounded",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Topology {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "periodic" => Ok(Topology::Periodic),
            "bounded" => Ok(Topology::Bounded),
            other => Err(format!("unknown topology '{other}'")),
        }
    }
}

/// Boundary data of the bounded topology.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperator {
    pub t_alpha: Vec<f64>,
    pub t_beta: Vec<f64>,
    /// `diag(-L(-1)L(-1)ᵀ, 0, ..., 0, L(1)L(1)ᵀ)`
    pub b_glob: BlockMatrix,
}

/// A dual pair `D⁻(θ)`, `D⁺(θ)` with its norm, `Q±` and dissipation matrices.
#[derive(Debug, Clone)]
pub struct GlobalOperatorSet {
    theta: f64,
    topology: Topology,
    d_minus: BlockMatrix,
    d_plus: BlockMatrix,
    norm: Vec<f64>,
    q_minus: BlockMatrix,
    q_plus: BlockMatrix,
    dissipation: BlockMatrix,
    boundary: Option<BoundaryOperator>,
    left_trace: DVector<f64>,
    right_trace: DVector<f64>,
    nodes: Vec<f64>,
    degree: usize,
    x_a: f64,
    x_b: f64,
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && (-0.5..=0.5).contains(&theta) {
        Ok(())
    } else {
        Err(GsbpError::ThetaOutOfRange(theta))
    }
}

/// Assembles `D⁻(θ)` block by block.
fn assemble_d_minus(
    elem: &ReferenceElement,
    mesh: &Mesh1D,
    theta: f64,
    topology: Topology,
) -> BlockMatrix {
    let nb = elem.num_nodes();
    let k = mesh.num_cells();
    let (l, r) = elem.boundary_vectors();
    let minv = DMatrix::from_diagonal(&DVector::from_iterator(
        nb,
        elem.weights().iter().map(|w| 1.0 / w),
    ));
    let d = elem.diff_matrix();
    let up = 0.5 - theta;
    let down = 0.5 + theta;
    let rr = &minv * r * r.transpose();
    let ll = &minv * l * l.transpose();

    let a11 = d - &rr * up + &ll * down;
    let a12 = &minv * r * l.transpose() * up;
    let a21 = -(&minv * l * r.transpose()) * down;
    let a_lb = d - &rr * up;
    let a_rb = d + &ll * down;

    let mut out = BlockMatrix::zeros(k, nb);
    for (i, &dx) in mesh.widths().iter().enumerate() {
        let s = 2.0 / dx;
        match topology {
            Topology::Periodic => {
                out.add_block(i, i, &(&a11 * s));
                out.add_block(i, (i + 1) % k, &(&a12 * s));
                out.add_block(i, (i + k - 1) % k, &(&a21 * s));
            }
            Topology::Bounded => {
                let diag = if i == 0 {
                    &a_lb
                } else if i == k - 1 {
                    &a_rb
                } else {
                    &a11
                };
                out.add_block(i, i, &(diag * s));
                if i + 1 < k {
                    out.add_block(i, i + 1, &(&a12 * s));
                }
                if i > 0 {
                    out.add_block(i, i - 1, &(&a21 * s));
                }
            }
        }
    }
    out
}

/// Builds the dual pair `D⁻(θ)`, `D⁺(θ) = D⁻(-θ)` and its derived matrices.
pub fn assemble_first_derivative(
    elem: &ReferenceElement,
    mesh: &Mesh1D,
    theta: f64,
    topology: Topology,
) -> Result<GlobalOperatorSet> {
    check_theta(theta)?;
    let nb = elem.num_nodes();
    let k = mesh.num_cells();
    let d_minus = assemble_d_minus(elem, mesh, theta, topology);
    let d_plus = assemble_d_minus(elem, mesh, -theta, topology);

    let norm: Vec<f64> = mesh
        .widths()
        .iter()
        .flat_map(|&dx| elem.weights().iter().map(move |w| 0.5 * dx * w))
        .collect();

    let (l, r) = elem.boundary_vectors();
    let boundary = match topology {
        Topology::Periodic => None,
        Topology::Bounded => {
            let mut b_glob = BlockMatrix::zeros(k, nb);
            b_glob.add_block(0, 0, &-(l * l.transpose()));
            b_glob.add_block(k - 1, k - 1, &(r * r.transpose()));
            let mut t_alpha = vec![0.0; k * nb];
            let mut t_beta = vec![0.0; k * nb];
            t_alpha[..nb].copy_from_slice(l.as_slice());
            t_beta[(k - 1) * nb..].copy_from_slice(r.as_slice());
            Some(BoundaryOperator {
                t_alpha,
                t_beta,
                b_glob,
            })
        }
    };

    let md_minus = d_minus.scale_rows(&norm);
    let md_plus = d_plus.scale_rows(&norm);
    let (q_minus, q_plus) = match &boundary {
        Some(bd) => (
            md_minus.add_scaled(&bd.b_glob, -0.5),
            md_plus.add_scaled(&bd.b_glob, -0.5),
        ),
        None => (md_minus, md_plus),
    };
    let dissipation = q_plus.add_scaled(&q_minus, -1.0).scaled(0.5);

    Ok(GlobalOperatorSet {
        theta,
        topology,
        d_minus,
        d_plus,
        norm,
        q_minus,
        q_plus,
        dissipation,
        boundary,
        left_trace: l.clone(),
        right_trace: r.clone(),
        nodes: mesh.physical_nodes(elem),
        degree: elem.degree(),
        x_a: mesh.x_a(),
        x_b: mesh.x_b(),
    })
}

impl GlobalOperatorSet {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn d_minus(&self) -> &BlockMatrix {
        &self.d_minus
    }

    pub fn d_plus(&self) -> &BlockMatrix {
        &self.d_plus
    }

    /// Diagonal of the norm matrix `M`.
    pub fn norm(&self) -> &[f64] {
        &self.norm
    }

    pub fn q_minus(&self) -> &BlockMatrix {
        &self.q_minus
    }

    pub fn q_plus(&self) -> &BlockMatrix {
        &self.q_plus
    }

    pub fn boundary(&self) -> Option<&BoundaryOperator> {
        self.boundary.as_ref()
    }

    /// Physical node coordinates the operators act on.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_cells(&self) -> usize {
        self.d_minus.num_blocks()
    }

    pub fn dim(&self) -> usize {
        self.d_minus.dim()
    }

    /// `C = ½(Q⁺ - Q⁻)`.
    pub fn dissipation_matrix(&self) -> &BlockMatrix {
        &self.dissipation
    }

    /// `‖u‖²_M`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        weighted_dot(&self.norm, u, u)
    }

    /// Trace jumps `u^{i+1}(-1) - u^i(1)` at the interior interfaces, followed
    /// by the wrap-around interface in the periodic topology.
    pub fn interface_jumps(&self, u: &[f64]) -> Vec<f64> {
        let nb = self.left_trace.len();
        let k = self.num_cells();
        let cell = |i: usize| DVector::from_column_slice(&u[i * nb..(i + 1) * nb]);
        let interfaces = match self.topology {
            Topology::Periodic => k,
            Topology::Bounded => k - 1,
        };
        (0..interfaces)
            .map(|i| self.left_trace.dot(&cell((i + 1) % k)) - self.right_trace.dot(&cell(i)))
            .collect()
    }
}

/// `uᵀ diag(m) v`.
pub fn weighted_dot(m: &[f64], u: &[f64], v: &[f64]) -> f64 {
    m.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum()
}

/// Flux family realized by a second-derivative operator `D⁻(θ)D⁺(θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionFlux {
    /// θ = 0, arithmetic means for solution and gradient
    Br1,
    /// θ = +1/2
    LdgA,
    /// θ = -1/2
    LdgB,
    General,
}

impl DiffusionFlux {
    pub fn from_theta(theta: f64) -> Self {
        if theta == 0.0 {
            DiffusionFlux::Br1
        } else if theta == 0.5 {
            DiffusionFlux::LdgA
        } else if theta == -0.5 {
            DiffusionFlux::LdgB
        } else {
            DiffusionFlux::General
        }
    }
}

#[derive(Debug, Clone)]
pub struct SecondDerivativeOperator {
    theta_diff: f64,
    flux: DiffusionFlux,
    d2: BlockMatrix,
    pair: GlobalOperatorSet,
}

/// `D₂ = D⁻(θ)·D⁺(θ)`: BR1 for θ = 0, LDG_a for θ = 1/2, LDG_b for θ = -1/2.
pub fn second_derivative(
    elem: &ReferenceElement,
    mesh: &Mesh1D,
    theta_diff: f64,
    topology: Topology,
) -> Result<SecondDerivativeOperator> {
    let pair = assemble_first_derivative(elem, mesh, theta_diff, topology)?;
    Ok(SecondDerivativeOperator::from_pair(pair))
}

impl SecondDerivativeOperator {
    pub fn from_pair(pair: GlobalOperatorSet) -> Self {
        let d2 = pair.d_minus.matmul(&pair.d_plus);
        Self {
            theta_diff: pair.theta,
            flux: DiffusionFlux::from_theta(pair.theta),
            d2,
            pair,
        }
    }

    pub fn theta_diff(&self) -> f64 {
        self.theta_diff
    }

    pub fn flux(&self) -> DiffusionFlux {
        self.flux
    }

    pub fn matrix(&self) -> &BlockMatrix {
        &self.d2
    }

    /// The first-derivative pair the operator is composed from.
    pub fn pair(&self) -> &GlobalOperatorSet {
        &self.pair
    }

    /// `‖M D₂ + (D⁺)ᵀ M D⁺‖_max`, zero in exact arithmetic for the periodic topology.
    pub fn energy_identity_residual(&self) -> f64 {
        let md2 = self.d2.scale_rows(&self.pair.norm);
        let dp = &self.pair.d_plus;
        let gram = dp.transpose().matmul(&dp.scale_rows(&self.pair.norm));
        md2.add_scaled(&gram, 1.0).amax()
    }
}

/// Which rows entered the accuracy residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyScope {
    AllRows,
    /// Periodic operators: monomials are not periodic, so only the rows of
    /// cells not touching the wrap-around interface are checked.
    InteriorCells,
}

/// Residuals of the upwind gSBP axioms for one operator set.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub degree: usize,
    pub cells: usize,
    pub theta: f64,
    pub topology: Topology,
    pub accuracy_scope: AccuracyScope,
    /// max over k ≤ N and D± of `‖D x^k - k x^{k-1}‖_max / max(1, ‖x^k‖_max)`
    pub accuracy_residual: f64,
    /// max over l ≤ N of boundary interpolation errors (bounded only)
    pub interpolation_residual: Option<f64>,
    /// `‖Q⁺ + (Q⁻)ᵀ‖_max`
    pub sbp_residual: f64,
    /// `‖C - Cᵀ‖_max`
    pub dissipation_asymmetry: f64,
    /// largest eigenvalue of C
    pub dissipation_max_eigenvalue: f64,
    /// smallest entry of diag(M)
    pub norm_min: f64,
    /// `‖M D₂ + (D⁺)ᵀ M D⁺‖_max` (periodic only)
    pub second_derivative_residual: Option<f64>,
    pub tolerance: f64,
}

impl CertificationReport {
    pub fn accuracy_ok(&self) -> bool {
        self.accuracy_residual <= self.tolerance
    }

    pub fn interpolation_ok(&self) -> bool {
        self.interpolation_residual
            .is_none_or(|r| r <= self.tolerance)
    }

    pub fn sbp_ok(&self) -> bool {
        self.sbp_residual <= self.tolerance
    }

    pub fn dissipation_ok(&self) -> bool {
        self.dissipation_asymmetry <= self.tolerance
            && self.dissipation_max_eigenvalue <= self.tolerance
    }

    pub fn norm_ok(&self) -> bool {
        self.norm_min > 0.0
    }

    pub fn second_derivative_ok(&self) -> bool {
        self.second_derivative_residual
            .is_none_or(|r| r <= self.tolerance)
    }

    pub fn passed(&self) -> bool {
        self.accuracy_ok()
            && self.interpolation_ok()
            && self.sbp_ok()
            && self.dissipation_ok()
            && self.norm_ok()
            && self.second_derivative_ok()
    }

    /// `key: value` lines.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"));
        let verdict = |ok: bool| if ok { "pass" } else { "fail" };
        let scope = match self.accuracy_scope {
            AccuracyScope::AllRows => "all",
            AccuracyScope::InteriorCells => "interior",
        };
        format!(
            "degree: {}\ncells: {}\ntheta: {}\ntopology: {}\n\
             accuracy_scope: {}\naccuracy_residual: {:.6e}\naccuracy: {}\n\
             interpolation_residual: {}\ninterpolation: {}\n\
             sbp_residual: {:.6e}\nsbp: {}\n\
             dissipation_asymmetry: {:.6e}\ndissipation_max_eigenvalue: {:.6e}\ndissipation: {}\n\
             norm_min: {:.6e}\nnorm: {}\n\
             second_derivative_residual: {}\nsecond_derivative: {}\n\
             tolerance: {:.1e}\npassed: {}\n",
            self.degree,
            self.cells,
            self.theta,
            self.topology,
            scope,
            self.accuracy_residual,
            verdict(self.accuracy_ok()),
            opt(self.interpolation_residual),
            verdict(self.interpolation_ok()),
            self.sbp_residual,
            verdict(self.sbp_ok()),
            self.dissipation_asymmetry,
            self.dissipation_max_eigenvalue,
            verdict(self.dissipation_ok()),
            self.norm_min,
            verdict(self.norm_ok()),
            opt(self.second_derivative_residual),
            verdict(self.second_derivative_ok()),
            self.tolerance,
            self.passed(),
        )
    }

    pub fn csv_header() -> &'static str {
        "degree,cells,theta,topology,accuracy_residual,interpolation_residual,sbp_residual,\
         dissipation_max_eigenvalue,second_derivative_residual,passed"
    }

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6e}"));
        format!(
            "{},{},{},{},{:.6e},{},{:.6e},{:.6e},{},{}",
            self.degree,
            self.cells,
            self.theta,
            self.topology,
            self.accuracy_residual,
            opt(self.interpolation_residual),
            self.sbp_residual,
            self.dissipation_max_eigenvalue,
            opt(self.second_derivative_residual),
            self.passed()
        )
    }
}

/// Largest eigenvalue of a symmetric matrix given in block form.
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Measures every upwind gSBP axiom; failures are reported, never raised.
pub fn verify_axioms(ops: &GlobalOperatorSet) -> CertificationReport {
    let nb = ops.degree + 1;
    let k = ops.num_cells();
    let rows: Vec<usize> = match ops.topology {
        Topology::Bounded => (0..ops.dim()).collect(),
        Topology::Periodic => (nb..(k - 1) * nb).collect(),
    };
    let mut accuracy: f64 = 0.0;
    for deg in 0..=ops.degree {
        let xk: Vec<f64> = ops.nodes.iter().map(|x| x.powi(deg as i32)).collect();
        let dxk: Vec<f64> = ops
            .nodes
            .iter()
            .map(|x| {
                if deg == 0 {
                    0.0
                } else {
                    deg as f64 * x.powi(deg as i32 - 1)
                }
            })
            .collect();
        let scale = xk.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for d in [&ops.d_minus, &ops.d_plus] {
            let y = d.mul_vec(&xk);
            for &r in &rows {
                accuracy = accuracy.max((y[r] - dxk[r]).abs() / scale);
            }
        }
    }

    let interpolation_residual = ops.boundary.as_ref().map(|bd| {
        let mut worst: f64 = 0.0;
        for deg in 0..=ops.degree {
            let xk: Vec<f64> = ops.nodes.iter().map(|x| x.powi(deg as i32)).collect();
            let ta: f64 = bd.t_alpha.iter().zip(&xk).map(|(a, b)| a * b).sum();
            let tb: f64 = bd.t_beta.iter().zip(&xk).map(|(a, b)| a * b).sum();
            worst = worst
                .max((ta - ops.x_a.powi(deg as i32)).abs())
                .max((tb - ops.x_b.powi(deg as i32)).abs());
        }
        worst
    });

    let sbp_residual = ops.q_plus.add_scaled(&ops.q_minus.transpose(), 1.0).amax();
    let c = ops.dissipation.to_dense();
    let dissipation_asymmetry = (&c - c.transpose()).amax();
    let dissipation_max_eigenvalue = max_symmetric_eigenvalue(&c);
    let norm_min = ops.norm.iter().cloned().fold(f64::INFINITY, f64::min);
    let second_derivative_residual = match ops.topology {
        Topology::Periodic => {
            Some(SecondDerivativeOperator::from_pair(ops.clone()).energy_identity_residual())
        }
        Topology::Bounded => None,
    };

    CertificationReport {
        degree: ops.degree,
        cells: k,
        theta: ops.theta,
        topology: ops.topology,
        accuracy_scope: match ops.topology {
            Topology::Bounded => AccuracyScope::AllRows,
            Topology::Periodic => AccuracyScope::InteriorCells,
        },
        accuracy_residual: accuracy,
        interpolation_residual,
        sbp_residual,
        dissipation_asymmetry,
        dissipation_max_eigenvalue,
        norm_min,
        second_derivative_residual,
        tolerance: AXIOM_TOLERANCE,
    }
}

/// Semi-discrete advection with a weak inflow condition,
/// `du/dt = -a D⁻ u + σ M⁻¹ t_α t_αᵀ u`.
#[derive(Debug, Clone)]
pub struct SatAdvection {
    operator: BlockMatrix,
    norm: Vec<f64>,
    t_beta: Vec<f64>,
    a: f64,
    sigma: f64,
}

pub fn sat_advection_rhs(ops: &GlobalOperatorSet, a: f64, sigma: f64) -> Result<SatAdvection> {
    let bd = ops.boundary.as_ref().ok_or(GsbpError::TopologyMismatch {
        expected: "bounded",
    })?;
    if !(a > 0.0) {
        return Err(GsbpError::NonPositive {
            name: "a",
            value: a,
        });
    }
    let nb = ops.degree + 1;
    let mut operator = ops.d_minus.scaled(-a);
    let l = &ops.left_trace;
    let penalty = DMatrix::from_fn(nb, nb, |r, c| sigma * l[r] * l[c] / ops.norm[r]);
    operator.add_block(0, 0, &penalty);
    Ok(SatAdvection {
        operator,
        norm: ops.norm.clone(),
        t_beta: bd.t_beta.clone(),
        a,
        sigma,
    })
}

impl SatAdvection {
    pub fn operator(&self) -> &BlockMatrix {
        &self.operator
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.operator.mul_vec(u)
    }

    /// `M L + Lᵀ M + a t_β t_βᵀ`; negative semi-definite when `σ ≤ -a/2`.
    pub fn energy_form(&self) -> DMatrix<f64> {
        let ml = self.operator.scale_rows(&self.norm).to_dense();
        let tb = DVector::from_column_slice(&self.t_beta);
        &ml + ml.transpose() + (&tb * tb.transpose()) * self.a
    }

    pub fn max_energy_eigenvalue(&self) -> f64 {
        max_symmetric_eigenvalue(&self.energy_form())
    }
}
