use rayon::prelude::*;
use serde::Serialize;

use super::KernelSystem;
use crate::error::{invalid, Error, Result};
use crate::graph::LaplacianOperator;

/// Hard upper limit on polynomial degree.
pub const DEGREE_CAP: usize = 3000;
/// Fit errors are measured on this many equal intervals of `[0, 2]`.
pub const FIT_GRID_INTERVALS: usize = 10_000;
const DOMAIN_END: f64 = 2.0;

/// Chebyshev series `sum_k c_k T_k(lambda - 1)` on `[0, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebyshevKernel {
    /// 1-based kernel index within its system (0 for free-standing fits).
    pub index: usize,
    pub degree: usize,
    /// Sup error against the target on the fitting grid.
    pub fit_error: f64,
    pub coefficients: Vec<f64>,
}

impl ChebyshevKernel {
    pub fn new(index: usize, coefficients: Vec<f64>, fit_error: f64) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coefficients must be finite and non-empty"));
        }
        Ok(Self {
            index,
            degree: coefficients.len() - 1,
            fit_error,
            coefficients,
        })
    }

    /// Clenshaw evaluation at `lambda`.
    pub fn eval(&self, lambda: f64) -> f64 {
        clenshaw(&self.coefficients, lambda - 1.0)
    }
}

fn clenshaw(c: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c[1..].iter().rev() {
        let b0 = ck + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + x * b1 - b2
}

/// Coefficients of degree `degree` from the cosine-sampled projection at
/// `2 (degree + 1)` Chebyshev nodes.
pub fn chebyshev_coefficients(f: &dyn Fn(f64) -> f64, degree: usize) -> Vec<f64> {
    let m = 2 * (degree + 1);
    let samples: Vec<f64> = (0..m)
        .map(|k| {
            let theta = std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
            f(theta.cos() + 1.0)
        })
        .collect();
    // cos(j * pi (2k + 1) / (2m)) only depends on j (2k + 1) mod 4m.
    let table: Vec<f64> = (0..4 * m)
        .map(|r| (std::f64::consts::PI * r as f64 / (2 * m) as f64).cos())
        .collect();
    let mut coef: Vec<f64> = (0..=degree)
        .map(|j| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(k, &fk)| fk * table[(j * (2 * k + 1)) % (4 * m)])
                .sum();
            2.0 * s / m as f64
        })
        .collect();
    coef[0] *= 0.5;
    coef
}

fn fit_grid() -> Vec<f64> {
    (0..=FIT_GRID_INTERVALS)
        .map(|i| DOMAIN_END * i as f64 / FIT_GRID_INTERVALS as f64)
        .collect()
}

fn sup_error(coef: &[f64], grid: &[f64], target: &[f64]) -> f64 {
    grid.iter()
        .zip(target)
        .map(|(&l, &t)| (clenshaw(coef, l - 1.0) - t).abs())
        .fold(0.0, f64::max)
}

/// Smallest degree (found by doubling then bisection) whose grid sup error is
/// within `budget`; `None` when even `max_degree` misses it.
fn search(f: &dyn Fn(f64) -> f64, grid: &[f64], target: &[f64], max_degree: usize, budget: f64) -> Option<(Vec<f64>, f64)> {
    let attempt = |d: usize| {
        let c = chebyshev_coefficients(f, d);
        let e = sup_error(&c, grid, target);
        (c, e)
    };
    let first = attempt(0);
    if first.1 <= budget {
        return Some(first);
    }
    let mut failed = 0;
    let mut d = 1;
    let mut best = loop {
        let d_try = d.min(max_degree);
        let r = attempt(d_try);
        if r.1 <= budget {
            break (d_try, r);
        }
        if d_try == max_degree {
            return None;
        }
        failed = d_try;
        d *= 2;
    };
    let (mut lo, mut hi) = (failed, best.0);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let r = attempt(mid);
        if r.1 <= budget {
            hi = mid;
            best = (mid, r);
        } else {
            lo = mid;
        }
    }
    Some(best.1)
}

/// Fits an arbitrary function on `[0, 2]` to the given sup-error budget.
pub fn fit_function(f: &dyn Fn(f64) -> f64, max_degree: usize, budget: f64) -> Result<ChebyshevKernel> {
    let grid = fit_grid();
    let target: Vec<f64> = grid.iter().map(|&l| f(l)).collect();
    let (c, e) = search(f, &grid, &target, max_degree.min(DEGREE_CAP), budget)
        .ok_or_else(|| Error::Numeric(format!("budget {budget:e} not reached at degree {max_degree}")))?;
    ChebyshevKernel::new(0, c, e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameFit {
    pub kernels: Vec<ChebyshevKernel>,
    /// Sup over the fitting grid of `|sum_j p_j(lambda)^2 - 1|`.
    pub joint_deviation: f64,
    pub joint_tol: f64,
}

impl FrameFit {
    pub fn degrees(&self) -> Vec<usize> {
        self.kernels.iter().map(|k| k.degree).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.kernels.iter().map(|k| k.degree).max().unwrap_or(0)
    }

    /// Sup of `|sum_j p_j^2 - 1|` over `points + 1` equispaced values of `[0, 2]`.
    pub fn deviation_on_grid(&self, points: usize) -> f64 {
        (0..=points)
            .map(|i| {
                let l = DOMAIN_END * i as f64 / points as f64;
                let s: f64 = self.kernels.iter().map(|k| k.eval(l).powi(2)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Fits every kernel to a sup-error budget of `joint_tol / (2 J)`, then
/// checks the approximate frame's tightness jointly.
pub fn chebyshev_fit(system: &KernelSystem, max_degree: usize, joint_tol: f64) -> Result<FrameFit> {
    if max_degree < 1 {
        return Err(invalid("max degree must be at least 1"));
    }
    if (system.lambda_end() - DOMAIN_END).abs() > 0.0 {
        return Err(invalid("kernel systems must span [0, 2]"));
    }
    let max_degree = max_degree.min(DEGREE_CAP);
    let budget = joint_tol / (2.0 * system.count() as f64);
    let grid = fit_grid();
    let fits: Vec<Option<ChebyshevKernel>> = (1..=system.count())
        .into_par_iter()
        .map(|j| {
            let f = |l: f64| system.kernel(j, l);
            let target: Vec<f64> = grid.iter().map(|&l| f(l)).collect();
            search(&f, &grid, &target, max_degree, budget).map(|(c, e)| ChebyshevKernel {
                index: j,
                degree: c.len() - 1,
                fit_error: e,
                coefficients: c,
            })
        })
        .collect();
    let missing: Vec<usize> = fits
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_none())
        .map(|(i, _)| i + 1)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Numeric(format!(
            "kernels {missing:?} miss the per-kernel budget {budget:e} at degree {max_degree}"
        )));
    }
    let mut fit = FrameFit {
        kernels: fits.into_iter().flatten().collect(),
        joint_deviation: 0.0,
        joint_tol,
    };
    fit.joint_deviation = fit.deviation_on_grid(FIT_GRID_INTERVALS);
    if fit.joint_deviation > joint_tol {
        return Err(Error::Numeric(format!(
            "joint tightness deviation {:e} exceeds {joint_tol:e}",
            fit.joint_deviation
        )));
    }
    Ok(fit)
}

type MatVec<'a> = dyn Fn(&[f64], &mut [f64]) -> Result<()> + Sync + 'a;

/// Shared recurrence `T_{k+1} = 2 (L - I) T_k - T_{k-1}` applied to `f`,
/// calling `visit(k, T_k f)` for every `k <= degree`.
fn recurrence(matvec: &MatVec<'_>, f: &[f64], degree: usize, mut visit: impl FnMut(usize, &[f64])) -> Result<()> {
    let n = f.len();
    let mut prev = f.to_vec();
    visit(0, &prev);
    if degree == 0 {
        return Ok(());
    }
    let mut cur = vec![0.0; n];
    matvec(f, &mut cur)?;
    for (c, &x) in cur.iter_mut().zip(f) {
        *c -= x;
    }
    visit(1, &cur);
    let mut next = vec![0.0; n];
    for k in 2..=degree {
        matvec(&cur, &mut next)?;
        for ((nx, &c), &p) in next.iter_mut().zip(&cur).zip(&prev) {
            *nx = 2.0 * (*nx - c) - p;
        }
        visit(k, &next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(())
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("non-finite value in polynomial filter".into()))
    }
}

fn check_len(op: &LaplacianOperator<'_>, f: &[f64]) -> Result<()> {
    if f.len() != op.len() {
        return Err(Error::DimensionMismatch {
            expected: op.len(),
            actual: f.len(),
        });
    }
    Ok(())
}

/// `p(L) f` for a Chebyshev kernel `p`.
pub fn apply_filter(op: &LaplacianOperator<'_>, kernel: &ChebyshevKernel, f: &[f64]) -> Result<Vec<f64>> {
    check_len(op, f)?;
    let mut out = vec![0.0; f.len()];
    let c = &kernel.coefficients;
    recurrence(&|x, y| op.matvec(x, y), f, kernel.degree, |k, t| {
        for (o, &v) in out.iter_mut().zip(t) {
            *o += c[k] * v;
        }
    })?;
    check_finite(&out)?;
    Ok(out)
}

fn bank_vectors(matvec: &MatVec<'_>, kernels: &[ChebyshevKernel], f: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = f.len();
    let degree = kernels.iter().map(|k| k.degree).max().unwrap_or(0);
    let mut outs = vec![vec![0.0; n]; kernels.len()];
    recurrence(matvec, f, degree, |k, t| {
        for (out, kern) in outs.iter_mut().zip(kernels) {
            if let Some(&c) = kern.coefficients.get(k) {
                for (o, &v) in out.iter_mut().zip(t) {
                    *o += c * v;
                }
            }
        }
    })?;
    for o in &outs {
        check_finite(o)?;
    }
    Ok(outs)
}

fn bank(matvec: &MatVec<'_>, kernels: &[ChebyshevKernel], f: &[f64]) -> Result<Vec<f64>> {
    let outs = bank_vectors(matvec, kernels, f)?;
    Ok(outs.iter().map(|o| o.iter().map(|v| v * v).sum()).collect())
}

/// `p_j(L) f` for every kernel, sharing one recurrence.
pub fn filter_bank(op: &LaplacianOperator<'_>, kernels: &[ChebyshevKernel], f: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_len(op, f)?;
    bank_vectors(&|x, y| op.matvec(x, y), kernels, f)
}

/// Squared norms `||p_j(L) f||^2` for every kernel, sharing one recurrence
/// of `max_j degree_j` matvecs.
pub fn apply_bank(op: &LaplacianOperator<'_>, kernels: &[ChebyshevKernel], f: &[f64]) -> Result<Vec<f64>> {
    check_len(op, f)?;
    bank(&|x, y| op.matvec(x, y), kernels, f)
}

/// [`apply_bank`] for many signals, parallel across signals.
pub fn apply_bank_many(op: &LaplacianOperator<'_>, kernels: &[ChebyshevKernel], signals: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    for f in signals {
        check_len(op, f)?;
    }
    signals
        .par_iter()
        .map(|f| bank(&|x, y| op.matvec_serial(x, y), kernels, f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{design_system, window};
    use crate::graph::Adjacency;
    use crate::spectral::eig_dense;

    #[test]
    fn constant_is_degree_zero() {
        let k = fit_function(&|_| 1.0, 100, 1e-12).unwrap();
        assert_eq!(k.degree, 0);
        assert!((k.eval(0.7) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coefficients_match_naive_projection() {
        let f = |l: f64| (3.0 * l).sin() + l * l;
        let c = chebyshev_coefficients(&f, 12);
        let m = 26;
        for (j, &cj) in c.iter().enumerate() {
            let mut s = 0.0;
            for k in 0..m {
                let th = std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
                s += f(th.cos() + 1.0) * (j as f64 * th).cos();
            }
            let want = s * 2.0 / m as f64 * if j == 0 { 0.5 } else { 1.0 };
            assert!((cj - want).abs() < 1e-13);
        }
        // Clenshaw agrees with the trigonometric definition.
        let k = ChebyshevKernel::new(0, c.clone(), 0.0).unwrap();
        for l in [0.0, 0.3, 1.0, 1.9, 2.0] {
            let x: f64 = l - 1.0;
            let naive: f64 = c.iter().enumerate().map(|(j, cj)| cj * (j as f64 * x.acos()).cos()).sum();
            assert!((k.eval(l) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn narrow_bump_needs_high_degree() {
        // Bump of total width 0.005 centred at 0.05.
        let f = |l: f64| window((l - 0.05) / 0.0025);
        let budget = 1e-3;
        let k = fit_function(&f, DEGREE_CAP, budget).unwrap();
        assert!(k.degree >= 100, "degree {}", k.degree);
        // Grid-error oracle with the trigonometric form of T_k.
        let oracle = |c: &[f64]| {
            (0..=FIT_GRID_INTERVALS)
                .map(|i| {
                    let l = 2.0 * i as f64 / FIT_GRID_INTERVALS as f64;
                    let th = (l - 1.0_f64).clamp(-1.0, 1.0).acos();
                    let p: f64 = c.iter().enumerate().map(|(j, cj)| cj * (j as f64 * th).cos()).sum();
                    (p - f(l)).abs()
                })
                .fold(0.0, f64::max)
        };
        assert!(oracle(&k.coefficients) <= budget * (1.0 + 1e-9));
        assert!(oracle(&chebyshev_coefficients(&f, k.degree - 1)) > budget);
    }

    #[test]
    fn small_system_fit_and_filters() {
        let s = design_system(6, 0.5, 2.0, 2.0).unwrap();
        let fit = chebyshev_fit(&s, DEGREE_CAP, 0.01).unwrap();
        assert!(fit.joint_deviation <= 0.01);
        assert_eq!(fit.kernels.len(), 6);

        let a = Adjacency::cycle(40).unwrap();
        let op = LaplacianOperator::new(&a).unwrap();
        let dense = eig_dense(&op).unwrap();
        let f: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let fnorm2: f64 = f.iter().map(|v| v * v).sum();
        let norms = apply_bank(&op, &fit.kernels, &f).unwrap();
        assert!((norms.iter().sum::<f64>() - fnorm2).abs() <= 0.01 * fnorm2);
        let many = apply_bank_many(&op, &fit.kernels, &[f.clone(), vec![0.0; 40]]).unwrap();
        assert_eq!(many[0], norms);
        assert!(many[1].iter().all(|&v| v == 0.0));
        let vectors = filter_bank(&op, &fit.kernels, &f).unwrap();
        for (v, kern) in vectors.iter().zip(&fit.kernels) {
            let single = apply_filter(&op, kern, &f).unwrap();
            assert!(v.iter().zip(&single).all(|(a, b)| (a - b).abs() < 1e-12));
        }

        // Eigenvector invariance.
        let k = &fit.kernels[1];
        let u = dense.eigenvector(3);
        let y = apply_filter(&op, k, u).unwrap();
        let gain = k.eval(dense.eigenvalues()[3]);
        for (a, b) in y.iter().zip(u) {
            assert!((a - gain * b).abs() < 1e-8);
        }

        let id = ChebyshevKernel::new(0, vec![1.0], 0.0).unwrap();
        assert_eq!(apply_filter(&op, &id, &f).unwrap(), f);
        assert!(apply_filter(&op, &id, &f[..39]).is_err());
    }
}
