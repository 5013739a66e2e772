//! Nodal machinery on the reference interval (-1, 1).
//!
//! A [`ReferenceElement`] holds Legendre-Gauss-Lobatto nodes and weights, the
//! diagonal mass matrix, the Lagrange differentiation matrix and the vectors
//! that interpolate a nodal polynomial to the cell boundaries.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{GsbpError, Result};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 16;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Single-cell nodal DG element on (-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    diff: DMatrix<f64>,
    left: DVector<f64>,
    right: DVector<f64>,
}

/// Legendre polynomial `P_n(x)` together with `P_{n-1}(x)`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Value and derivative of `P_n` at an interior point `|x| < 1`.
pub(crate) fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (p, p_prev) = legendre_pair(n, x);
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Evaluates the Legendre polynomial `P_n` at `x`.
pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_pair(n, x).0
}

fn lgl_nodes(n: usize) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=n).map(|j| -(PI * j as f64 / n as f64).cos()).collect();
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    let nn1 = (n * (n + 1)) as f64;
    for x in nodes.iter_mut().take(n).skip(1) {
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_and_derivative(n, *x);
            // d/dx[(1 - x^2) P'_n] = -n(n+1) P_n
            let update = (1.0 - *x * *x) * dp / (nn1 * p);
            *x += update;
            if update.abs() < NEWTON_TOL {
                break;
            }
        }
    }
    // enforce exact mirror symmetry
    for j in 0..=n / 2 {
        let m = 0.5 * (nodes[n - j] - nodes[j]);
        nodes[j] = -m;
        nodes[n - j] = m;
    }
    if n.is_multiple_of(2) {
        nodes[n / 2] = 0.0;
    }
    nodes
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|k| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &xj)| nodes[k] - xj)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Lagrange basis `(L_1(x), ..., L_{N+1}(x))` for the given nodal set.
pub fn lagrange_basis(nodes: &[f64], x: f64) -> DVector<f64> {
    let n = nodes.len();
    if let Some(hit) = nodes.iter().position(|&xj| xj == x) {
        let mut v = DVector::zeros(n);
        v[hit] = 1.0;
        return v;
    }
    let w = barycentric_weights(nodes);
    let terms: Vec<f64> = (0..n).map(|k| w[k] / (x - nodes[k])).collect();
    let denom: f64 = terms.iter().sum();
    DVector::from_iterator(n, terms.into_iter().map(|t| t / denom))
}

/// Differentiation matrix `D_jk = L'_k(x_j)` via barycentric weights.
/// Diagonal entries use the negative-sum identity so rows annihilate constants.
fn lagrange_diff_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let w = barycentric_weights(nodes);
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = 0.0;
        for k in 0..n {
            if k != j {
                let v = (w[k] / w[j]) / (nodes[j] - nodes[k]);
                d[(j, k)] = v;
                diag -= v;
            }
        }
        d[(j, j)] = diag;
    }
    d
}

/// Builds the Legendre-Gauss-Lobatto element of degree `degree` (N+1 nodes).
pub fn build_lgl(degree: usize) -> Result<ReferenceElement> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(GsbpError::DegreeOutOfRange(degree));
    }
    let nodes = lgl_nodes(degree);
    let nn1 = (degree * (degree + 1)) as f64;
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let p = legendre(degree, x);
            2.0 / (nn1 * p * p)
        })
        .collect();
    for j in 0..=degree / 2 {
        let w = 0.5 * (weights[j] + weights[degree - j]);
        weights[j] = w;
        weights[degree - j] = w;
    }
    let diff = lagrange_diff_matrix(&nodes);
    let left = lagrange_basis(&nodes, -1.0);
    let right = lagrange_basis(&nodes, 1.0);
    Ok(ReferenceElement {
        degree,
        nodes,
        weights,
        diff,
        left,
        right,
    })
}

impl ReferenceElement {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes, N + 1.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Diagonal mass matrix `diag(w_j)`.
    pub fn mass(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.weights))
    }

    /// `D_jk = L'_k(x_j)`.
    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// `(L(-1), L(1))`.
    pub fn boundary_vectors(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.left, &self.right)
    }

    /// Residual of the cell SBP identity `M D + D^T M = L(1)L(1)^T - L(-1)L(-1)^T`
    /// in the max norm.
    pub fn sbp_residual(&self) -> f64 {
        let m = self.mass();
        let lhs = &m * &self.diff + self.diff.transpose() * &m;
        let b = &self.right * self.right.transpose() - &self.left * self.left.transpose();
        (lhs - b).amax()
    }

    /// Quadrature of `f` over (-1, 1).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
