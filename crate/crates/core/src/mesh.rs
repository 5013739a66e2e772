//! One-dimensional partitions of `(x_a, x_b)` into cells.

use crate::error::{GsbpError, Result};
use crate::ref_element::ReferenceElement;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    x_a: f64,
    x_b: f64,
    widths: Vec<f64>,
    edges: Vec<f64>,
}

impl Mesh1D {
    /// `K` cells of equal width `(x_b - x_a) / K`.
    pub fn uniform(x_a: f64, x_b: f64, cells: usize) -> Result<Self> {
        check_interval(x_a, x_b)?;
        if cells < 2 {
            return Err(GsbpError::TooFewCells(cells));
        }
        let len = x_b - x_a;
        let width = len / cells as f64;
        let mut edges: Vec<f64> = (0..cells)
            .map(|i| x_a + len * (i as f64 / cells as f64))
            .collect();
        edges.push(x_b);
        Ok(Self {
            x_a,
            x_b,
            widths: vec![width; cells],
            edges,
        })
    }

    /// Non-uniform mesh from explicit cell widths; they must sum to `x_b - x_a`.
    pub fn from_widths(x_a: f64, widths: Vec<f64>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(GsbpError::TooFewCells(widths.len()));
        }
        if let Some((index, &width)) = widths
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(GsbpError::InvalidCellWidth { index, width });
        }
        let mut edges = Vec::with_capacity(widths.len() + 1);
        let mut x = x_a;
        edges.push(x);
        for w in &widths {
            x += w;
            edges.push(x);
        }
        let x_b = x;
        check_interval(x_a, x_b)?;
        Ok(Self {
            x_a,
            x_b,
            widths,
            edges,
        })
    }

    pub fn x_a(&self) -> f64 {
        self.x_a
    }

    pub fn x_b(&self) -> f64 {
        self.x_b
    }

    pub fn num_cells(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Largest cell width, the `Δx` used in time-step rules.
    pub fn max_width(&self) -> f64 {
        self.widths.iter().cloned().fold(0.0, f64::max)
    }

    /// Cell edges `x_1 = x_a, ..., x_{K+1} = x_b`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// `min Δx_i / max Δx_i`.
    pub fn quasi_uniformity(&self) -> f64 {
        let min = self.widths.iter().cloned().fold(f64::INFINITY, f64::min);
        min / self.max_width()
    }

    /// Nodes of every cell mapped from the reference element, cell by cell.
    /// Interface coordinates appear twice for nodal sets containing ±1.
    pub fn physical_nodes(&self, elem: &ReferenceElement) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_cells() * elem.num_nodes());
        for cell in self.edges.windows(2) {
            let (left, right) = (cell[0], cell[1]);
            // written as a convex combination so ξ = ±1 land exactly on the edges
            out.extend(
                elem.nodes()
                    .iter()
                    .map(|&xi| 0.5 * (1.0 - xi) * left + 0.5 * (1.0 + xi) * right),
            );
        }
        out
    }
}

fn check_interval(x_a: f64, x_b: f64) -> Result<()> {
    if !(x_a.is_finite() && x_b.is_finite() && x_a < x_b) {
        return Err(GsbpError::InvalidInterval { x_a, x_b });
    }
    Ok(())
}
