//! Eigenpairs of the normalized Laplacian, the graph Fourier transform and
//! the eigenvalue counting function.

mod chfsi;
mod container;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::graph::LaplacianOperator;

pub use chfsi::{eig_low, EigLowOptions};
pub use container::{read_spectrum, write_eigenvalue_cdf_csv, write_spectrum};

/// Largest graph handled by the dense solver.
pub const DENSE_LIMIT: usize = 4096;

/// Ascending eigenpairs of a Laplacian, either the full spectrum or every
/// pair up to a certified cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSlice {
    n: usize,
    eigenvalues: Vec<f64>,
    /// Column-major `n x k`: eigenvector `i` is `vectors[i*n..(i+1)*n]`.
    vectors: Vec<f64>,
    residuals: Vec<f64>,
    coverage: f64,
    solver: String,
    seed: u64,
}

impl SpectralSlice {
    pub fn new(
        n: usize,
        eigenvalues: Vec<f64>,
        vectors: Vec<f64>,
        residuals: Vec<f64>,
        coverage: f64,
        solver: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        let k = eigenvalues.len();
        if vectors.len() != n * k {
            return Err(Error::DimensionMismatch {
                expected: n * k,
                actual: vectors.len(),
            });
        }
        if residuals.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: residuals.len(),
            });
        }
        if k > n {
            return Err(invalid("more eigenpairs than vertices"));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) || eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(invalid("eigenvalues must be finite and ascending"));
        }
        Ok(Self {
            n,
            eigenvalues,
            vectors,
            residuals,
            coverage,
            solver: solver.into(),
            seed,
        })
    }

    /// Number of eigenpairs held.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Number of graph vertices.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    pub fn eigenvectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.n.max(1)).take(self.len())
    }

    pub(crate) fn vector_data(&self) -> &[f64] {
        &self.vectors
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Every eigenvalue `<= coverage` is present in the slice.
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn solver(&self) -> &str {
        &self.solver
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The pairs with eigenvalue `<= cut`, with coverage lowered accordingly.
    pub fn truncated(&self, cut: f64) -> Result<Self> {
        if cut > self.coverage && !self.is_full() {
            return Err(Error::Uncertified {
                lambda: cut,
                coverage: self.coverage,
            });
        }
        let k = self.eigenvalues.partition_point(|&v| v <= cut);
        Ok(Self {
            n: self.n,
            eigenvalues: self.eigenvalues[..k].to_vec(),
            vectors: self.vectors[..k * self.n].to_vec(),
            residuals: self.residuals[..k].to_vec(),
            coverage: cut,
            solver: self.solver.clone(),
            seed: self.seed,
        })
    }

    /// Recomputes `||L u - lambda u||` for every pair with fresh matvecs.
    pub fn verify_residuals(&self, op: &LaplacianOperator<'_>) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        let mut out = Vec::with_capacity(self.len());
        for (i, u) in self.eigenvectors().enumerate() {
            op.matvec(u, &mut y)?;
            let lam = self.eigenvalues[i];
            out.push(y.iter().zip(u).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt());
        }
        Ok(out)
    }
}

/// Graph Fourier coefficients `values[i] = <u_i, f>`.
#[derive(Debug, Clone, PartialEq)]
pub struct GftCoefficients {
    pub values: Vec<f64>,
}

pub fn gft(slice: &SpectralSlice, f: &[f64]) -> Result<GftCoefficients> {
    if f.len() != slice.dim() {
        return Err(Error::DimensionMismatch {
            expected: slice.dim(),
            actual: f.len(),
        });
    }
    let values = slice
        .eigenvectors()
        .map(|u| u.iter().zip(f).map(|(a, b)| a * b).sum())
        .collect();
    Ok(GftCoefficients { values })
}

/// Number of eigenvalues `<= lambda`. Fails when `lambda` exceeds the
/// certified coverage of a partial slice.
pub fn count_below(slice: &SpectralSlice, lambda: f64) -> Result<usize> {
    if !slice.is_full() && lambda > slice.coverage() {
        return Err(Error::Uncertified {
            lambda,
            coverage: slice.coverage(),
        });
    }
    Ok(slice.eigenvalues().partition_point(|&v| v <= lambda))
}

/// Upper end of the normalized-Laplacian spectrum used for kernel design.
pub fn lambda_max_bound(_op: &LaplacianOperator<'_>) -> f64 {
    2.0
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub(crate) fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full eigendecomposition of an explicit symmetric matrix.
pub fn eig_dense_matrix(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(invalid("matrix is not square"));
    }
    if n > DENSE_LIMIT {
        return Err(invalid(format!("dense eigensolver limited to {DENSE_LIMIT} vertices, got {n}")));
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// All eigenpairs of the operator via dense symmetric decomposition.
pub fn eig_dense(op: &LaplacianOperator<'_>) -> Result<SpectralSlice> {
    let n = op.len();
    let (mut values, vecs) = eig_dense_matrix(op.to_dense())?;
    // The spectrum lies in [0, 2]; anything outside is rounding, and on
    // bipartite graphs a top value of 2 + eps would escape `count_below(2)`.
    values.iter_mut().for_each(|v| *v = v.clamp(0.0, 2.0));
    let mut flat = vecs.as_slice().to_vec();
    for v in flat.chunks_exact_mut(n) {
        normalize_sign(v);
    }
    let mut slice = SpectralSlice::new(n, values, flat, vec![0.0; n], 2.0, "dense", 0)?;
    slice.residuals = slice.verify_residuals(op)?;
    Ok(slice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Adjacency;
    use std::f64::consts::PI;

    fn cycle_values(n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|k| 1.0 - (2.0 * PI * k as f64 / n as f64).cos()).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn k2_and_cycle() {
        let a = Adjacency::from_edges(2, &[(0, 1)]).unwrap();
        let s = eig_dense(&LaplacianOperator::new(&a).unwrap()).unwrap();
        assert!(s.eigenvalues()[0].abs() < 1e-14 && (s.eigenvalues()[1] - 2.0).abs() < 1e-14);

        let a = Adjacency::cycle(8).unwrap();
        let op = LaplacianOperator::new(&a).unwrap();
        let s = eig_dense(&op).unwrap();
        for (x, y) in s.eigenvalues().iter().zip(cycle_values(8)) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(s.residuals().iter().all(|&r| r < 1e-12));
        assert!(lambda_max_bound(&op) >= s.eigenvalues()[7]);
        // Even cycles are bipartite, so the bound is attained.
        assert!((s.eigenvalues()[7] - 2.0).abs() < 1e-12);
        assert_eq!(count_below(&s, 0.3).unwrap(), cycle_values(8).iter().filter(|&&v| v <= 0.3).count());
        assert_eq!(count_below(&s, 0.0).unwrap(), 1);
        assert_eq!(count_below(&s, 2.0).unwrap(), 8);
    }

    #[test]
    fn disconnected_pairs_have_double_zero() {
        let a = Adjacency::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let s = eig_dense(&LaplacianOperator::new(&a).unwrap()).unwrap();
        assert!(s.eigenvalues()[..2].iter().all(|v| v.abs() < 1e-14));
        assert!(s.eigenvalues()[2] > 1.0);
    }

    #[test]
    fn gft_basics() {
        let a = Adjacency::cycle(7).unwrap();
        let s = eig_dense(&LaplacianOperator::new(&a).unwrap()).unwrap();
        let g = gft(&s, s.eigenvector(2)).unwrap();
        for (i, v) in g.values.iter().enumerate() {
            assert!((v - if i == 2 { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
        let f: Vec<f64> = (0..7).map(|i| (i as f64).sin() + 0.5).collect();
        let e: f64 = gft(&s, &f).unwrap().values.iter().map(|v| v * v).sum();
        let want: f64 = f.iter().map(|v| v * v).sum();
        assert!((e - want).abs() <= 1e-10 * want);
        assert!(gft(&s, &[0.0; 7]).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(gft(&s, &[0.0; 6]).is_err());
    }

    #[test]
    fn partial_slice_coverage() {
        let a = Adjacency::cycle(8).unwrap();
        let s = eig_dense(&LaplacianOperator::new(&a).unwrap()).unwrap();
        let t = s.truncated(0.5).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(count_below(&t, 0.5).unwrap(), 3);
        assert!(matches!(count_below(&t, 0.6), Err(Error::Uncertified { .. })));
    }
}
