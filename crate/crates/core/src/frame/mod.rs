//! Warped tight frame of spectral kernels on `[0, lambda_end]`, their
//! Chebyshev approximations, and polynomial filtering of graph signals.
//!
//! Kernel `j` (1-based) is a smooth cosine bump `cos(pi/2 * nu(|x|))` with
//! `x = omega(lambda) - (j - 1)`, where `nu` is a polynomial step with
//! `nu(t) + nu(1 - t) = 1`. Neighbouring squared bumps therefore sum to one
//! exactly. The warp `omega` has slope `s` below the transition and `s /
//! ratio` above it, blended smoothly over a short window, and maps
//! `lambda_end` onto `J - 1`.

mod chebyshev;
mod export;

use crate::error::{invalid, Result};

pub use chebyshev::{
    apply_bank, apply_bank_many, apply_filter, chebyshev_coefficients, chebyshev_fit, filter_bank, fit_function,
    ChebyshevKernel,
    FrameFit, DEGREE_CAP, FIT_GRID_INTERVALS,
};
pub use export::{write_coefficients_json, write_kernels_csv};

/// Half-width of the slope blending window as a fraction of the distance
/// from the transition to the nearer end of the spectrum.
const BLEND_FRACTION: f64 = 0.1;
const QUAD_TOL: f64 = 1e-13;

/// Smooth step on `[0, 1]` with vanishing derivatives up to third order at
/// both ends.
#[inline]
pub(crate) fn smooth_step(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t.powi(4) * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
}

/// Antiderivative of [`smooth_step`] on `[0, 1]`.
#[inline]
fn smooth_step_integral(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t.powi(5) * (7.0 - 14.0 * t + 10.0 * t * t - 2.5 * t.powi(3))
}

/// Prototype bump on `[-1, 1]`.
#[inline]
pub fn window(x: f64) -> f64 {
    let a = x.abs();
    if a >= 1.0 {
        0.0
    } else {
        (std::f64::consts::FRAC_PI_2 * smooth_step(a)).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSystem {
    count: usize,
    transition: f64,
    ratio: f64,
    lambda_end: f64,
    slope_narrow: f64,
    slope_wide: f64,
    blend: f64,
    centers: Vec<f64>,
}

/// Designs `count` kernels on `[0, lambda_end]` whose bands are `ratio`
/// times wider above `transition` than below it.
pub fn design_system(count: usize, transition: f64, ratio: f64, lambda_end: f64) -> Result<KernelSystem> {
    if count < 2 {
        return Err(invalid(format!("need at least 2 kernels, got {count}")));
    }
    if !(lambda_end > 0.0 && lambda_end.is_finite()) {
        return Err(invalid("spectrum end must be positive"));
    }
    if !(transition > 0.0 && transition < lambda_end) {
        return Err(invalid(format!("transition {transition} must lie inside (0, {lambda_end})")));
    }
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(invalid(format!("band ratio must be at least 1, got {ratio}")));
    }
    let span = (count - 1) as f64;
    let slope_narrow = span / (transition + (lambda_end - transition) / ratio);
    let mut system = KernelSystem {
        count,
        transition,
        ratio,
        lambda_end,
        slope_narrow,
        slope_wide: slope_narrow / ratio,
        blend: BLEND_FRACTION * transition.min(lambda_end - transition),
        centers: Vec::new(),
    };
    if ratio > 1.0 && system.warp(transition) < 1.0 {
        return Err(invalid(format!(
            "{count} kernels are too few to place a band below the transition at {transition}"
        )));
    }
    system.centers = (1..=count).map(|j| system.compute_center(j)).collect();
    Ok(system)
}

impl KernelSystem {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn transition(&self) -> f64 {
        self.transition
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn lambda_end(&self) -> f64 {
        self.lambda_end
    }

    /// Warp slopes below and above the transition.
    pub fn slopes(&self) -> (f64, f64) {
        (self.slope_narrow, self.slope_wide)
    }

    /// Monotone map from `[0, lambda_end]` onto `[0, J - 1]`.
    pub fn warp(&self, lambda: f64) -> f64 {
        let (s1, s2, d) = (self.slope_narrow, self.slope_wide, self.blend);
        let a = self.transition - d;
        let b = self.transition + d;
        if lambda <= a {
            s1 * lambda
        } else if lambda < b {
            s1 * lambda - (s1 - s2) * 2.0 * d * smooth_step_integral((lambda - a) / (2.0 * d))
        } else {
            s1 * b - (s1 - s2) * d + s2 * (lambda - b)
        }
    }

    /// Inverse of [`Self::warp`], clamped to `[0, lambda_end]`.
    pub fn inverse_warp(&self, w: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, self.lambda_end);
        if w <= 0.0 {
            return lo;
        }
        if w >= self.warp(hi) {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.warp(mid) < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Value of kernel `j` (1-based) at `lambda`.
    pub fn kernel(&self, j: usize, lambda: f64) -> f64 {
        debug_assert!((1..=self.count).contains(&j));
        window(self.warp(lambda) - (j - 1) as f64)
    }

    /// All kernel values at `lambda`.
    pub fn values(&self, lambda: f64) -> Vec<f64> {
        (1..=self.count).map(|j| self.kernel(j, lambda)).collect()
    }

    /// `sum_j k_j(lambda)^2`, identically one on `[0, lambda_end]`.
    pub fn tightness(&self, lambda: f64) -> f64 {
        let w = self.warp(lambda);
        let first = (w.floor() as isize).max(0) as usize;
        (first..=(first + 2).min(self.count))
            .filter(|&j| j >= 1)
            .map(|j| window(w - (j - 1) as f64).powi(2))
            .sum()
    }

    /// Closed support of kernel `j` in `lambda`.
    pub fn support(&self, j: usize) -> (f64, f64) {
        let c = (j - 1) as f64;
        (self.inverse_warp(c - 1.0), self.inverse_warp(c + 1.0))
    }

    /// Kernels whose whole support lies at or below the transition.
    pub fn narrow_count(&self) -> usize {
        (1..=self.count).filter(|&j| self.support(j).1 <= self.transition).count()
    }

    /// Centre of mass of `k_j^2` for every kernel; the last is pinned to
    /// `lambda_end`.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    fn compute_center(&self, j: usize) -> f64 {
        if j == self.count {
            return self.lambda_end;
        }
        let (lo, hi) = self.support(j);
        let mass = adaptive_simpson(&|l| self.kernel(j, l).powi(2), lo, hi, QUAD_TOL);
        let moment = adaptive_simpson(&|l| l * self.kernel(j, l).powi(2), lo, hi, QUAD_TOL);
        moment / mass
    }
}

pub fn center_of_mass(system: &KernelSystem, j: usize) -> Result<f64> {
    if !(1..=system.count).contains(&j) {
        return Err(invalid(format!("kernel index {j} outside 1..={}", system.count)));
    }
    Ok(system.centers[j - 1])
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    // Start from a few panels so that narrow features are not skipped.
    let panels = 16;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            recurse(f, x0, x1, f0, fm, f1, simpson(f0, fm, f1, x0, x1), tol / panels as f64, 40)
        })
        .sum()
}
