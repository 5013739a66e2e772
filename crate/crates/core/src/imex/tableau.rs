//! Padded explicit/DIRK Butcher pairs.
//!
//! An explicit `(s+1)`-stage method is coupled with an `s`-stage DIRK method
//! whose table is padded with a zero first row and column, so both share the
//! abscissae `c = (0, c_2, ..., c_{s+1})`.

use nalgebra::{DMatrix, DVector};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ImexTableau {
    name: &'static str,
    order: u8,
    a_explicit: DMatrix<f64>,
    a_implicit: DMatrix<f64>,
    b_explicit: DVector<f64>,
    b_implicit: DVector<f64>,
    c: DVector<f64>,
}

/// Result of [`ImexTableau::check`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableauDiagnostics {
    /// max_i |c_i - Σ_j A¹_ij| and |c_i - Σ_j A²_ij|
    pub row_sum_residual: f64,
    pub explicit_strictly_lower: bool,
    pub implicit_lower: bool,
    pub implicit_padded: bool,
    /// `A²_{s+1,j} = b²_j` for j = 2..s+1
    pub stiffly_accurate: bool,
}

impl TableauDiagnostics {
    pub fn structurally_valid(&self) -> bool {
        self.row_sum_residual < 1e-14
            && self.explicit_strictly_lower
            && self.implicit_lower
            && self.implicit_padded
    }
}

impl ImexTableau {
    /// Builds a tableau from row-major coefficient tables, deriving `c` from
    /// the explicit row sums.
    pub fn new(
        name: &'static str,
        order: u8,
        a_explicit: &[&[f64]],
        a_implicit: &[&[f64]],
        b_explicit: &[f64],
        b_implicit: &[f64],
    ) -> Self {
        let s = b_explicit.len();
        let to_mat = |rows: &[&[f64]]| {
            assert_eq!(rows.len(), s);
            DMatrix::from_fn(s, s, |i, j| rows[i][j])
        };
        let a_explicit = to_mat(a_explicit);
        let a_implicit = to_mat(a_implicit);
        let c = DVector::from_iterator(s, a_explicit.row_iter().map(|r| r.sum()));
        Self {
            name,
            order,
            a_explicit,
            a_implicit,
            b_explicit: DVector::from_column_slice(b_explicit),
            b_implicit: DVector::from_column_slice(b_implicit),
            c,
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Number of padded stages, s + 1.
    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn a_explicit(&self) -> &DMatrix<f64> {
        &self.a_explicit
    }

    pub fn a_implicit(&self) -> &DMatrix<f64> {
        &self.a_implicit
    }

    pub fn b_explicit(&self) -> &DVector<f64> {
        &self.b_explicit
    }

    pub fn b_implicit(&self) -> &DVector<f64> {
        &self.b_implicit
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn check(&self) -> TableauDiagnostics {
        let s = self.stages();
        let mut row_sum_residual: f64 = 0.0;
        for i in 0..s {
            row_sum_residual = row_sum_residual
                .max((self.c[i] - self.a_explicit.row(i).sum()).abs())
                .max((self.c[i] - self.a_implicit.row(i).sum()).abs());
        }
        let explicit_strictly_lower =
            (0..s).all(|i| (i..s).all(|j| self.a_explicit[(i, j)] == 0.0));
        let implicit_lower = (0..s).all(|i| (i + 1..s).all(|j| self.a_implicit[(i, j)] == 0.0));
        let implicit_padded = (0..s)
            .all(|k| self.a_implicit[(0, k)] == 0.0 && self.a_implicit[(k, 0)] == 0.0)
            && self.b_implicit[0] == 0.0;
        let stiffly_accurate =
            (1..s).all(|j| (self.a_implicit[(s - 1, j)] - self.b_implicit[j]).abs() < 1e-15);
        TableauDiagnostics {
            row_sum_residual,
            explicit_strictly_lower,
            implicit_lower,
            implicit_padded,
            stiffly_accurate,
        }
    }
}

impl fmt::Display for ImexTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (order {}, {} stages)",
            self.name,
            self.order,
            self.stages()
        )
    }
}

/// Forward Euler paired with backward Euler.
pub fn tableau_imex1() -> ImexTableau {
    ImexTableau::new(
        "imex1",
        1,
        &[&[0.0, 0.0], &[1.0, 0.0]],
        &[&[0.0, 0.0], &[0.0, 1.0]],
        &[1.0, 0.0],
        &[0.0, 1.0],
    )
}

/// Diagonal coefficient `γ = 1 - √2/2` of the second-order pair.
pub fn imex2_gamma() -> f64 {
    1.0 - std::f64::consts::FRAC_1_SQRT_2
}

/// Second-order pair with `γ = 1 - √2/2`, `δ = 1 - 1/(2γ)`, so `γ - δ = 1`.
pub fn tableau_imex2() -> ImexTableau {
    let g = imex2_gamma();
    let d = 1.0 - 1.0 / (2.0 * g);
    ImexTableau::new(
        "imex2",
        2,
        &[&[0.0, 0.0, 0.0], &[g, 0.0, 0.0], &[d, 1.0 - d, 0.0]],
        &[&[0.0, 0.0, 0.0], &[0.0, g, 0.0], &[0.0, 1.0 - g, g]],
        &[d, 1.0 - d, 0.0],
        &[0.0, 1.0 - g, g],
    )
}

fn gamma_cubic(x: f64) -> (f64, f64) {
    let p = ((6.0 * x - 18.0) * x + 9.0) * x - 1.0;
    let dp = (18.0 * x - 36.0) * x + 9.0;
    (p, dp)
}

/// Middle root of `6x³ - 18x² + 9x - 1`, refined by Newton iteration.
pub fn imex3_gamma() -> f64 {
    let mut x = 0.4358665215;
    for _ in 0..50 {
        let (p, dp) = gamma_cubic(x);
        let step = p / dp;
        x -= step;
        if step.abs() < 1e-17 {
            break;
        }
    }
    x
}

/// Third-order pair with an L-stable, stiffly accurate three-stage DIRK part.
pub fn tableau_imex3() -> ImexTableau {
    let g = imex3_gamma();
    let b1 = -1.5 * g * g + 4.0 * g - 0.25;
    let b2 = 1.5 * g * g - 5.0 * g + 1.25;
    let a1 = -0.35;
    let a2 = (1.0 / 3.0 - 2.0 * g * g - 2.0 * b2 * a1 * g) / (g * (1.0 - g));
    let c3 = 0.5 * (1.0 + g);
    ImexTableau::new(
        "imex3",
        3,
        &[
            &[0.0, 0.0, 0.0, 0.0],
            &[g, 0.0, 0.0, 0.0],
            &[c3 - a1, a1, 0.0, 0.0],
            &[0.0, 1.0 - a2, a2, 0.0],
        ],
        &[
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, g, 0.0, 0.0],
            &[0.0, 0.5 * (1.0 - g), g, 0.0],
            &[0.0, b1, b2, g],
        ],
        &[0.0, b1, b2, g],
        &[0.0, b1, b2, g],
    )
}

/// Looks up a tableau by its declared order.
pub fn tableau_by_order(order: u8) -> Option<ImexTableau> {
    match order {
        1 => Some(tableau_imex1()),
        2 => Some(tableau_imex2()),
        3 => Some(tableau_imex3()),
        _ => None,
    }
}
