use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{Adjacency, VoxelGraph};
use crate::error::{invalid, Error, Result};

const PAR_CHUNK: usize = 4096;

/// Matrix-free normalized Laplacian `I - D^{-1/2} A D^{-1/2}`.
#[derive(Debug, Clone)]
pub struct LaplacianOperator<'a> {
    adjacency: &'a Adjacency,
    degrees: Vec<u32>,
    inv_sqrt_degree: Vec<f64>,
}

pub fn laplacian(graph: &VoxelGraph) -> Result<LaplacianOperator<'_>> {
    LaplacianOperator::new(graph.adjacency())
}

impl<'a> LaplacianOperator<'a> {
    pub fn new(adjacency: &'a Adjacency) -> Result<Self> {
        if adjacency.is_empty() {
            return Err(invalid("graph is empty"));
        }
        let degrees: Vec<u32> = (0..adjacency.len()).map(|i| adjacency.degree(i) as u32).collect();
        if let Some(i) = degrees.iter().position(|&d| d == 0) {
            return Err(invalid(format!("vertex {i} has degree 0")));
        }
        let inv_sqrt_degree = degrees.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
        Ok(Self {
            adjacency,
            degrees,
            inv_sqrt_degree,
        })
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn adjacency(&self) -> &Adjacency {
        self.adjacency
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Unit-norm `D^{1/2} 1`, the null vector of a connected graph.
    pub fn null_vector(&self) -> Vec<f64> {
        let total: f64 = self.degrees.iter().map(|&d| d as f64).sum();
        let scale = 1.0 / total.sqrt();
        self.degrees.iter().map(|&d| (d as f64).sqrt() * scale).collect()
    }

    #[inline]
    fn row(&self, i: usize, x: &[f64]) -> f64 {
        let s = &self.inv_sqrt_degree;
        let acc: f64 = self.adjacency.neighbours(i).iter().map(|&j| s[j as usize] * x[j as usize]).sum();
        x[i] - s[i] * acc
    }

    fn check(&self, x: &[f64], y: &[f64]) -> Result<()> {
        for len in [x.len(), y.len()] {
            if len != self.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.len(),
                    actual: len,
                });
            }
        }
        Ok(())
    }

    /// `y = L x`, parallel over row blocks.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check(x, y)?;
        y.par_chunks_mut(PAR_CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * PAR_CHUNK;
            for (k, v) in out.iter_mut().enumerate() {
                *v = self.row(base + k, x);
            }
        });
        Ok(())
    }

    /// Single-threaded `y = L x`, for callers that parallelize across vectors.
    pub fn matvec_serial(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check(x, y)?;
        for (i, v) in y.iter_mut().enumerate() {
            *v = self.row(i, x);
        }
        Ok(())
    }

    /// Block product `Y = L X` where each column of the `m x n` matrix `x`
    /// holds the `m` block values of one vertex.
    pub fn apply_block(&self, x: &DMatrix<f64>, y: &mut DMatrix<f64>) -> Result<()> {
        let m = x.nrows();
        if x.ncols() != self.len() || y.shape() != x.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: x.ncols(),
            });
        }
        if m == 0 {
            return Ok(());
        }
        let s = &self.inv_sqrt_degree;
        let xs = x.as_slice();
        let rows_per_chunk = (PAR_CHUNK / m).max(16);
        y.as_mut_slice()
            .par_chunks_mut(rows_per_chunk * m)
            .enumerate()
            .for_each(|(c, out)| {
                let mut acc = vec![0.0; m];
                for (k, yi) in out.chunks_exact_mut(m).enumerate() {
                    let i = c * rows_per_chunk + k;
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    for &j in self.adjacency.neighbours(i) {
                        let j = j as usize;
                        let sj = s[j];
                        for (a, &xj) in acc.iter_mut().zip(&xs[j * m..(j + 1) * m]) {
                            *a += sj * xj;
                        }
                    }
                    let si = s[i];
                    for ((v, &xi), &a) in yi.iter_mut().zip(&xs[i * m..(i + 1) * m]).zip(&acc) {
                        *v = xi - si * a;
                    }
                }
            });
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.len()];
        self.matvec(x, &mut y)?;
        Ok(y)
    }

    /// Explicit nonzeros `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let s = &self.inv_sqrt_degree;
        let mut out = Vec::with_capacity(self.len() + self.adjacency.neighbour_array().len());
        for i in 0..self.len() {
            let mut diag_done = false;
            for &j in self.adjacency.neighbours(i) {
                let j = j as usize;
                if !diag_done && j > i {
                    out.push((i, i, 1.0));
                    diag_done = true;
                }
                out.push((i, j, -s[i] * s[j]));
            }
            if !diag_done {
                out.push((i, i, 1.0));
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }
}
