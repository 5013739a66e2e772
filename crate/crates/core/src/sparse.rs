//! Square block-sparse matrices with a uniform block size.
//!
//! Global operators couple each cell only to its neighbours, so every block
//! row holds a handful of dense `(N+1) x (N+1)` blocks.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    block: usize,
    nblocks: usize,
    /// Per block row: `(block column, dense block)` sorted by column.
    rows: Vec<Vec<(usize, DMatrix<f64>)>>,
}

impl BlockMatrix {
    pub fn zeros(nblocks: usize, block: usize) -> Self {
        Self {
            block,
            nblocks,
            rows: vec![Vec::new(); nblocks],
        }
    }

    /// Block-diagonal matrix with the given diagonal entries.
    pub fn from_diagonal(diag: &[f64], block: usize) -> Self {
        assert_eq!(diag.len() % block, 0);
        let nblocks = diag.len() / block;
        let mut m = Self::zeros(nblocks, block);
        for i in 0..nblocks {
            let d = DMatrix::from_fn(
                block,
                block,
                |r, c| {
                    if r == c {
                        diag[i * block + r]
                    } else {
                        0.0
                    }
                },
            );
            m.add_block(i, i, &d);
        }
        m
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn num_blocks(&self) -> usize {
        self.nblocks
    }

    pub fn dim(&self) -> usize {
        self.block * self.nblocks
    }

    /// Accumulates `value` into block `(i, j)`.
    pub fn add_block(&mut self, i: usize, j: usize, value: &DMatrix<f64>) {
        assert_eq!(value.shape(), (self.block, self.block));
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |(c, _)| *c) {
            Ok(pos) => row[pos].1 += value,
            Err(pos) => row.insert(pos, (j, value.clone())),
        }
    }

    pub fn block_at(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |(c, _)| *c)
            .ok()
            .map(|pos| &row[pos].1)
    }

    /// Iterates `(i, j, block)` over the stored blocks.
    pub fn blocks(&self) -> impl Iterator<Item = (usize, usize, &DMatrix<f64>)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |(j, b)| (i, *j, b)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let b = self.block;
        self.block_at(r / b, c / b)
            .map(|blk| blk[(r % b, c % b)])
            .unwrap_or(0.0)
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let b = self.block;
        assert_eq!(x.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        for (i, row) in self.rows.iter().enumerate() {
            let dst = &mut out[i * b..(i + 1) * b];
            dst.iter_mut().for_each(|v| *v = 0.0);
            for (j, blk) in row {
                let src = &x[j * b..(j + 1) * b];
                for (r, d) in dst.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (c, s) in src.iter().enumerate() {
                        acc += blk[(r, c)] * s;
                    }
                    *d += acc;
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.nblocks, self.block);
        for (i, j, blk) in self.blocks() {
            t.add_block(j, i, &blk.transpose());
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.block, rhs.block);
        assert_eq!(self.nblocks, rhs.nblocks);
        let mut out = Self::zeros(self.nblocks, self.block);
        for (i, row) in self.rows.iter().enumerate() {
            for (k, a) in row {
                for (j, b) in &rhs.rows[*k] {
                    out.add_block(i, *j, &(a * b));
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            for (_, blk) in row.iter_mut() {
                *blk *= s;
            }
        }
        out
    }

    /// `self + s * rhs`.
    pub fn add_scaled(&self, rhs: &Self, s: f64) -> Self {
        let mut out = self.clone();
        for (i, j, blk) in rhs.blocks() {
            out.add_block(i, j, &(blk * s));
        }
        out
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.dim());
        let b = self.block;
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            for (_, blk) in row.iter_mut() {
                for r in 0..b {
                    let s = d[i * b + r];
                    blk.row_mut(r).iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let b = self.block;
        let mut d = DMatrix::zeros(self.dim(), self.dim());
        for (i, j, blk) in self.blocks() {
            d.view_mut((i * b, j * b), (b, b)).copy_from(blk);
        }
        d
    }

    /// Largest absolute entry.
    pub fn amax(&self) -> f64 {
        self.blocks().map(|(_, _, b)| b.amax()).fold(0.0, f64::max)
    }
}
