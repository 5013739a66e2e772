//! Linear solves for the implicit stages `(I - τ L) x = rhs`.
//!
//! Multiplying by the norm matrix gives `(M - τ M L) x = M rhs`. For
//! `L = c D₂` on a periodic grid, `M L = -c (D⁺)ᵀ M D⁺`, so the scaled system
//! is symmetric positive definite and is factored once per `τ` with an
//! envelope (skyline) Cholesky decomposition.

#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;

use crate::error::{GsbpError, Result};
use crate::sparse::BlockMatrix;

/// Target for `‖(I - τL)x - rhs‖ / ‖rhs‖`.
pub const STAGE_RESIDUAL_TOL: f64 = 1e-12;
const MAX_REFINEMENTS: usize = 3;
const SYMMETRY_TOL: f64 = 1e-10;

/// Cholesky factor stored row by row over each row's envelope.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors a symmetric matrix; only the lower triangle is read.
    /// Returns the failing row when a pivot is not positive.
    pub fn factor(a: &BlockMatrix) -> std::result::Result<Self, usize> {
        let n = a.dim();
        let b = a.block_size();
        let mut first: Vec<usize> = (0..n).collect();
        for (bi, bj, _) in a.blocks() {
            if bj <= bi {
                for r in bi * b..(bi + 1) * b {
                    first[r] = first[r].min(bj * b);
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for (i, f) in first.iter().enumerate() {
            offsets.push(offsets[i] + i - f + 1);
        }
        let mut values = vec![0.0; offsets[n]];
        for (bi, bj, blk) in a.blocks() {
            if bj > bi {
                continue;
            }
            for r in 0..b {
                for c in 0..b {
                    let (i, j) = (bi * b + r, bj * b + c);
                    if j <= i {
                        values[offsets[i] + j - first[i]] = blk[(r, c)];
                    }
                }
            }
        }

        for i in 0..n {
            let row_i = offsets[i];
            for j in first[i]..i {
                let row_j = offsets[j];
                let k0 = first[i].max(first[j]);
                let mut s = values[row_i + j - first[i]];
                for k in k0..j {
                    s -= values[row_i + k - first[i]] * values[row_j + k - first[j]];
                }
                values[row_i + j - first[i]] = s / values[row_j + j - first[j]];
            }
            let mut d = values[row_i + i - first[i]];
            for k in first[i]..i {
                let v = values[row_i + k - first[i]];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(i);
            }
            values[row_i + i - first[i]] = d.sqrt();
        }
        Ok(Self {
            first,
            offsets,
            values,
        })
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[self.offsets[i] + j - self.first[i]]
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = x[i];
            for k in self.first[i]..i {
                s -= self.entry(i, k) * x[k];
            }
            x[i] = s / self.entry(i, i);
        }
        for i in (0..n).rev() {
            x[i] /= self.entry(i, i);
            let xi = x[i];
            for k in self.first[i]..i {
                x[k] -= self.entry(i, k) * xi;
            }
        }
    }
}

#[derive(Debug, Clone)]
enum StageFactor {
    Direct(SkylineCholesky),
    /// Cholesky broke down; the symmetrized matrix is kept for conjugate gradients.
    Iterative(BlockMatrix),
}

/// Solves implicit stage systems for one fixed operator, caching one
/// factorization per distinct `τ`.
#[derive(Debug, Clone)]
pub struct StageSolver {
    operator: BlockMatrix,
    norm: Vec<f64>,
    cache: HashMap<u64, StageFactor>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl StageSolver {
    pub fn new(operator: BlockMatrix, norm: Vec<f64>) -> Self {
        assert_eq!(operator.dim(), norm.len());
        Self {
            operator,
            norm,
            cache: HashMap::new(),
        }
    }

    pub fn operator(&self) -> &BlockMatrix {
        &self.operator
    }

    /// Number of cached factorizations.
    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    /// `M - τ M L`, symmetrized after checking the asymmetry.
    pub fn stage_matrix(&self, tau: f64) -> Result<BlockMatrix> {
        let ml = self.operator.scale_rows(&self.norm);
        let m = BlockMatrix::from_diagonal(&self.norm, self.operator.block_size());
        let a = m.add_scaled(&ml, -tau);
        let at = a.transpose();
        let scale = a.amax().max(f64::MIN_POSITIVE);
        let asym = a.add_scaled(&at, -1.0).amax() / scale;
        if asym > SYMMETRY_TOL {
            return Err(GsbpError::NonSymmetricStage(asym));
        }
        Ok(a.add_scaled(&at, 1.0).scaled(0.5))
    }

    fn factor(&mut self, tau: f64) -> Result<&StageFactor> {
        let key = tau.to_bits();
        if !self.cache.contains_key(&key) {
            let a = self.stage_matrix(tau)?;
            let f = match SkylineCholesky::factor(&a) {
                Ok(ch) => StageFactor::Direct(ch),
                Err(_) => StageFactor::Iterative(a),
            };
            self.cache.insert(key, f);
        }
        Ok(&self.cache[&key])
    }

    /// `rhs - (I - τL) x`
    fn residual(&self, tau: f64, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let lx = self.operator.mul_vec(x);
        rhs.iter()
            .zip(x)
            .zip(&lx)
            .map(|((r, x), l)| r - (x - tau * l))
            .collect()
    }

    /// Solves `(I - τL) x = rhs`.
    pub fn solve(&mut self, tau: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.norm.len() {
            return Err(GsbpError::DimensionMismatch {
                expected: self.norm.len(),
                got: rhs.len(),
            });
        }
        if tau < 0.0 || !tau.is_finite() {
            return Err(GsbpError::NonPositive {
                name: "stage coefficient tau",
                value: tau,
            });
        }
        if tau == 0.0 {
            return Ok(rhs.to_vec());
        }
        let rhs_norm = norm2(rhs);
        if rhs_norm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let norm = self.norm.clone();
        let scaled: Vec<f64> = rhs.iter().zip(&norm).map(|(r, m)| r * m).collect();
        match self.factor(tau)?.clone() {
            StageFactor::Direct(ch) => {
                let mut x = scaled;
                ch.solve_in_place(&mut x);
                for _ in 0..MAX_REFINEMENTS {
                    let r = self.residual(tau, &x, rhs);
                    if norm2(&r) <= STAGE_RESIDUAL_TOL * rhs_norm {
                        break;
                    }
                    let mut delta: Vec<f64> = r.iter().zip(&norm).map(|(r, m)| r * m).collect();
                    ch.solve_in_place(&mut delta);
                    x.iter_mut().zip(&delta).for_each(|(x, d)| *x += d);
                }
                Ok(x)
            }
            StageFactor::Iterative(a) => conjugate_gradient(&a, &scaled, STAGE_RESIDUAL_TOL),
        }
    }

    /// Relative residual `‖(I - τL)x - rhs‖ / ‖rhs‖`.
    pub fn relative_residual(&self, tau: f64, x: &[f64], rhs: &[f64]) -> f64 {
        let r = self.residual(tau, x, rhs);
        norm2(&r) / norm2(rhs).max(f64::MIN_POSITIVE)
    }
}

/// Unpreconditioned conjugate gradients on an SPD block matrix, capped at
/// `10 n` iterations.
pub fn conjugate_gradient(a: &BlockMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let mut ap = vec![0.0; n];
    let cap = 10 * n;
    for _ in 0..cap {
        a.mul_vec_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        if rr_new.sqrt() <= tol * b_norm {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(GsbpError::SolverNonConvergence {
        iterations: cap,
        residual: rr.sqrt() / b_norm,
    })
}

/// One-shot solve of `(I - τ L) x = rhs` using the norm `M` for symmetrization.
pub fn solve_implicit_stage(
    operator: &BlockMatrix,
    norm: &[f64],
    tau: f64,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    StageSolver::new(operator.clone(), norm.to_vec()).solve(tau, rhs)
}
