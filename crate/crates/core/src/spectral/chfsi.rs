//! Lower end of the spectrum by Chebyshev-filtered subspace iteration.
//!
//! The block holds one basis vector per row, so column `j` of every block is
//! the vertex-`j` slice of all basis vectors. The known null vector
//! `D^{1/2} 1` is locked from the start; further pairs are locked bottom-up
//! once their residual reaches the tolerance. The iteration stops when a few
//! converged pairs sit above the cutoff, which certifies that nothing below
//! the cutoff was skipped.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{eig_dense, normalize_sign, SpectralSlice, DENSE_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::graph::components::label_components;
use crate::graph::LaplacianOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct EigLowOptions {
    /// Residual bound `||L u - lambda u||` for every returned pair.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Initial block size; 0 picks a default.
    pub block: usize,
    /// Extra block rows kept above the wanted ones to speed convergence.
    pub guard: usize,
    /// Converged pairs required above `cut * (1 + margin)` before stopping.
    pub extras: usize,
    pub margin: f64,
    pub max_degree: usize,
}

impl Default for EigLowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            seed: 0x5eed,
            block: 0,
            guard: 10,
            extras: 3,
            margin: 1e-3,
            max_degree: 300,
        }
    }
}

const MIN_DEGREE: usize = 10;
/// Gain of the filter at the slowest wanted Ritz value, per iteration.
const TARGET_GAIN: f64 = 1e4;
const RANK_TOL: f64 = 1e-10;

/// All eigenpairs with eigenvalue `<= cut` of a connected graph.
pub fn eig_low(op: &LaplacianOperator<'_>, cut: f64, opts: &EigLowOptions) -> Result<SpectralSlice> {
    if !(cut > 0.0 && cut < 2.0) {
        return Err(invalid(format!("cutoff must lie in (0, 2), got {cut}")));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if label_components(op.adjacency()).count() != 1 {
        return Err(invalid("graph must be connected"));
    }
    let n = op.len();
    let threshold = cut * (1.0 + opts.margin);
    let dense = || -> Result<SpectralSlice> {
        let s = eig_dense(op)?;
        let k = s.eigenvalues().partition_point(|&v| v <= cut);
        SpectralSlice::new(
            n,
            s.eigenvalues()[..k].to_vec(),
            s.vector_data()[..k * n].to_vec(),
            s.residuals()[..k].to_vec(),
            cut,
            "dense",
            opts.seed,
        )
    };
    let initial = if opts.block > 0 { opts.block } else { 32 };
    if 1 + initial + opts.guard > n / 2 {
        return if n <= DENSE_LIMIT {
            dense()
        } else {
            Err(invalid("block larger than half the graph"))
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let u1 = op.null_vector();
    let mut locked = DMatrix::from_row_slice(1, n, &u1);
    let mut locked_vals = vec![0.0];

    let mut x = random_rows(initial, n, &mut rng);
    orthonormalize(&mut x, &locked, &mut rng)?;
    let mut w = DMatrix::zeros(x.nrows(), n);

    for _iter in 0..opts.max_iter {
        // Rayleigh-Ritz on the active block.
        if w.shape() != x.shape() {
            w = DMatrix::zeros(x.nrows(), n);
        }
        op.apply_block(&x, &mut w)?;
        let (theta, res) = rayleigh_ritz(&mut x, &mut w);

        let converged = res.iter().take_while(|&&r| r <= opts.tol).count();
        if converged > 0 {
            locked = stack(&locked, &x.rows(0, converged).into_owned());
            locked_vals.extend_from_slice(&theta[..converged]);
            x = x.rows(converged, x.nrows() - converged).into_owned();
        }
        let extras_found = locked_vals.iter().filter(|&&v| v > threshold).count();
        if extras_found >= opts.extras {
            return finish(op, &locked, &locked_vals, cut, opts.seed);
        }
        let theta = &theta[converged..];

        let need = opts.extras - extras_found + opts.guard;
        let above = theta.iter().filter(|&&v| v > threshold).count();
        if above < need || x.nrows() < need {
            let grow = (need - above.min(need)).max(opts.guard).max(x.nrows() / 2);
            if locked.nrows() + x.nrows() + grow > n / 2 {
                return if n <= DENSE_LIMIT {
                    dense()
                } else {
                    Err(invalid("block larger than half the graph"))
                };
            }
            log::debug!("growing block from {} by {grow}", x.nrows());
            x = stack(&x, &random_rows(grow, n, &mut rng));
            orthonormalize(&mut x, &locked, &mut rng)?;
        }

        let upper = theta.last().copied().unwrap_or(1.0).max(threshold);
        let target_idx = theta.len().saturating_sub(opts.guard + 1).min(theta.len().saturating_sub(1));
        let target = theta.get(target_idx).copied().unwrap_or(0.0).min(upper);
        let degree = filter_degree(target, upper, 2.0, opts.max_degree);
        log::debug!(
            "active {} locked {} upper {upper:.3e} degree {degree}",
            x.nrows(),
            locked.nrows()
        );
        chebyshev_filter(op, &mut x, degree, upper, 2.0)?;
        orthonormalize(&mut x, &locked, &mut rng)?;
    }

    let partial = finish(op, &locked, &locked_vals, cut, opts.seed)?;
    let converged = partial.len();
    let partial = SpectralSlice::new(
        n,
        partial.eigenvalues().to_vec(),
        partial.vector_data().to_vec(),
        partial.residuals().to_vec(),
        0.0,
        "chfsi",
        opts.seed,
    )?;
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        converged,
        partial: Box::new(partial),
    })
}

fn filter_degree(target: f64, a: f64, b: f64, max_degree: usize) -> usize {
    let c = 0.5 * (a + b);
    let e = 0.5 * (b - a);
    let x = (c - target) / e;
    if x <= 1.0 {
        return max_degree;
    }
    let d = (TARGET_GAIN.acosh() / x.acosh()).ceil();
    (d as usize).clamp(MIN_DEGREE, max_degree.max(MIN_DEGREE))
}

/// Scaled Chebyshev filter of the given degree damping `[a, b]` and
/// amplifying below `a`, normalized to 1 at 0.
fn chebyshev_filter(op: &LaplacianOperator<'_>, x: &mut DMatrix<f64>, degree: usize, a: f64, b: f64) -> Result<()> {
    let e = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let mut sigma = e / (0.0 - c);
    let tau = 2.0 / sigma;
    let mut tmp = DMatrix::zeros(x.nrows(), x.ncols());
    op.apply_block(x, &mut tmp)?;
    // y = (L x - c x) * sigma / e
    let mut y = (&tmp - &*x * c) * (sigma / e);
    for _ in 2..=degree {
        let sigma_new = 1.0 / (tau - sigma);
        op.apply_block(&y, &mut tmp)?;
        let k1 = 2.0 * sigma_new / e;
        let k0 = sigma * sigma_new;
        // tmp <- (L y - c y) * k1 - k0 * x
        for ((t, &yv), &xv) in tmp.as_mut_slice().iter_mut().zip(y.as_slice()).zip(x.as_slice()) {
            *t = (*t - c * yv) * k1 - k0 * xv;
        }
        std::mem::swap(x, &mut y);
        std::mem::swap(&mut y, &mut tmp);
        sigma = sigma_new;
    }
    std::mem::swap(x, &mut y);
    Ok(())
}

/// Rotates `x` (and `w = L x`) onto Ritz vectors; returns ascending Ritz
/// values and residual norms.
fn rayleigh_ritz(x: &mut DMatrix<f64>, w: &mut DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let m = x.nrows();
    let h = &*x * w.transpose();
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let q = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    *x = q.transpose() * &*x;
    *w = q.transpose() * &*w;
    let res = (0..m)
        .map(|i| {
            (w.row(i) - x.row(i) * theta[i]).norm()
        })
        .collect();
    (theta, res)
}

fn random_rows(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m, n);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    out
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let (a, n) = top.shape();
    let b = bottom.nrows();
    DMatrix::from_fn(a + b, n, |r, c| if r < a { top[(r, c)] } else { bottom[(r - a, c)] })
}

fn project_out(x: &mut DMatrix<f64>, locked: &DMatrix<f64>) {
    for _ in 0..2 {
        let coef = &*x * locked.transpose();
        x.gemm(-1.0, &coef, locked, 1.0);
    }
}

/// Makes the rows of `x` orthonormal and orthogonal to `locked`, replacing
/// numerically dependent rows with fresh random ones.
fn orthonormalize(x: &mut DMatrix<f64>, locked: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<()> {
    for _attempt in 0..6 {
        project_out(x, locked);
        let bad = svqb(x);
        if bad.is_empty() {
            project_out(x, locked);
            if svqb(x).is_empty() {
                return Ok(());
            }
            continue;
        }
        let fresh = random_rows(bad.len(), x.ncols(), rng);
        for (k, &r) in bad.iter().enumerate() {
            x.row_mut(r).copy_from(&fresh.row(k));
        }
    }
    Err(Error::Numeric("could not orthonormalize the search block".into()))
}

/// Orthonormalizes rows in place via the eigendecomposition of the scaled
/// Gram matrix; returns the indices of rows that collapsed.
fn svqb(x: &mut DMatrix<f64>) -> Vec<usize> {
    let m = x.nrows();
    let norms: Vec<f64> = (0..m).map(|i| x.row(i).norm()).collect();
    let scale: Vec<f64> = norms.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 }).collect();
    for (i, &s) in scale.iter().enumerate() {
        x.row_mut(i).scale_mut(s);
    }
    let g = &*x * x.transpose();
    let eig = SymmetricEigen::new((&g + g.transpose()) * 0.5);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut bad = Vec::new();
    let mut t = eig.eigenvectors.transpose();
    for i in 0..m {
        let s = eig.eigenvalues[i];
        if s > RANK_TOL * top && top > 0.0 {
            t.row_mut(i).scale_mut(1.0 / s.sqrt());
        } else {
            bad.push(i);
        }
    }
    *x = t * &*x;
    bad
}

fn finish(op: &LaplacianOperator<'_>, locked: &DMatrix<f64>, vals: &[f64], cut: f64, seed: u64) -> Result<SpectralSlice> {
    let n = op.len();
    let mut order: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= cut).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut flat = Vec::with_capacity(order.len() * n);
    for &i in &order {
        let start = flat.len();
        flat.extend(locked.row(i).iter());
        normalize_sign(&mut flat[start..]);
    }
    let values = order.iter().map(|&i| vals[i]).collect();
    let mut slice = SpectralSlice::new(n, values, flat, vec![0.0; order.len()], cut, "chfsi", seed)?;
    slice.residuals = slice.verify_residuals(op)?;
    Ok(slice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Adjacency;
    use std::f64::consts::PI;

    #[test]
    fn cycle_256_low_end() {
        let a = Adjacency::cycle(256).unwrap();
        let op = LaplacianOperator::new(&a).unwrap();
        let s = eig_low(&op, 0.05, &EigLowOptions::default()).unwrap();
        let mut want: Vec<f64> = (0..256)
            .map(|k| 1.0 - (2.0 * PI * k as f64 / 256.0).cos())
            .filter(|&v| v <= 0.05)
            .collect();
        want.sort_by(f64::total_cmp);
        assert_eq!(s.len(), want.len());
        for (x, y) in s.eigenvalues().iter().zip(&want) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
        assert!(s.residuals().iter().all(|&r| r <= 1e-8));
        assert_eq!(s.solver(), "chfsi");
    }

    #[test]
    fn disconnected_is_rejected() {
        let a = Adjacency::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let op = LaplacianOperator::new(&a).unwrap();
        assert!(eig_low(&op, 0.1, &EigLowOptions::default()).is_err());
        let a = Adjacency::cycle(6).unwrap();
        let op = LaplacianOperator::new(&a).unwrap();
        assert!(eig_low(&op, 2.5, &EigLowOptions::default()).is_err());
    }

    #[test]
    fn small_graph_falls_back_to_dense() {
        let a = Adjacency::cycle(20).unwrap();
        let op = LaplacianOperator::new(&a).unwrap();
        let s = eig_low(&op, 0.2, &EigLowOptions::default()).unwrap();
        assert_eq!(s.solver(), "dense");
        assert_eq!(s.len(), (0..20).filter(|&k| 1.0 - (2.0 * PI * k as f64 / 20.0).cos() <= 0.2).count());
    }

    #[test]
    fn iteration_budget_exhaustion_carries_partial_results() {
        let a = Adjacency::cycle(400).unwrap();
        let op = LaplacianOperator::new(&a).unwrap();
        let opts = EigLowOptions {
            max_iter: 1,
            ..Default::default()
        };
        match eig_low(&op, 0.05, &opts) {
            Err(Error::NoConvergence { partial, .. }) => assert!(!partial.is_empty()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
