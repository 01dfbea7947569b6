//! Ensemble spectral-energy profiles of normalized graph-signal sets and
//! correlation statistics.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::frame::{apply_bank_many, ChebyshevKernel, KernelSystem};
use crate::graph::LaplacianOperator;
use crate::spectral::{count_below, gft, SpectralSlice};

/// Below this norm a de-meaned signal is considered degenerate.
const DEGENERATE_NORM: f64 = 1e-12;
/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.96;

/// Removes the component along the unit vector `u1` and scales to unit norm.
pub fn normalize_signal(f: &[f64], u1: &[f64]) -> Result<Vec<f64>> {
    if f.len() != u1.len() {
        return Err(Error::DimensionMismatch {
            expected: u1.len(),
            actual: f.len(),
        });
    }
    let proj: f64 = f.iter().zip(u1).map(|(a, b)| a * b).sum();
    let mut g: Vec<f64> = f.iter().zip(u1).map(|(a, b)| a - proj * b).collect();
    // A second pass removes what cancellation left behind.
    let proj2: f64 = g.iter().zip(u1).map(|(a, b)| a * b).sum();
    g.iter_mut().zip(u1).for_each(|(a, b)| *a -= proj2 * b);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm >= DEGENERATE_NORM) {
        return Err(Error::Data(format!("signal is degenerate after removing the constant mode (norm {norm:e})")));
    }
    g.iter_mut().for_each(|v| *v /= norm);
    Ok(g)
}

/// Signals on one graph, each with a provenance label.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignalSet {
    signals: Vec<Vec<f64>>,
    labels: Vec<String>,
    normalized: bool,
}

impl GraphSignalSet {
    pub fn new(signals: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if signals.is_empty() {
            return Err(invalid("signal set is empty"));
        }
        if labels.len() != signals.len() {
            return Err(Error::DimensionMismatch {
                expected: signals.len(),
                actual: labels.len(),
            });
        }
        let n = signals[0].len();
        if let Some(bad) = signals.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        if signals.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("signal set contains non-finite values".into()));
        }
        Ok(Self {
            signals,
            labels,
            normalized: false,
        })
    }

    /// Normalizes every signal against `u1` (see [`normalize_signal`]).
    pub fn normalized(&self, u1: &[f64]) -> Result<Self> {
        let signals = self
            .signals
            .par_iter()
            .map(|f| normalize_signal(f, u1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            signals,
            labels: self.labels.clone(),
            normalized: true,
        })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.signals[0].len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn signals(&self) -> &[Vec<f64>] {
        &self.signals
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Concatenation of two sets on the same graph.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(Self {
            signals: self.signals.iter().chain(&other.signals).cloned().collect(),
            labels: self.labels.iter().chain(&other.labels).cloned().collect(),
            normalized: self.normalized && other.normalized,
        })
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(invalid("signal set must be normalized first"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyMethod {
    Exact,
    Coarse,
}

impl EnergyMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Coarse => "coarse",
        }
    }
}

/// Cumulative ensemble energy against a set of abscissae.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyProfile {
    pub abscissae: Vec<f64>,
    pub energies: Vec<f64>,
    pub method: EnergyMethod,
    pub label: String,
}

/// Squared GFT coefficients of every signal, in signal order.
fn spectral_powers(set: &GraphSignalSet, slice: &SpectralSlice) -> Result<Vec<Vec<f64>>> {
    set.signals
        .par_iter()
        .map(|f| Ok(gft(slice, f)?.values.into_iter().map(|c| c * c).collect()))
        .collect()
}

/// Mean over signals of the per-signal values, summed in signal order.
fn ensemble_mean(per_signal: &[Vec<f64>]) -> Vec<f64> {
    let s = per_signal.len() as f64;
    let mut acc = vec![0.0; per_signal[0].len()];
    for row in per_signal {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= s);
    acc
}

/// Fraction of the set's energy carried by eigenmodes with eigenvalue `<= lambda`.
pub fn ensemble_energy_exact(set: &GraphSignalSet, slice: &SpectralSlice, lambda: f64) -> Result<f64> {
    Ok(energy_profile_exact(set, slice, &[lambda])?.energies[0])
}

/// [`ensemble_energy_exact`] at many abscissae, sharing the transforms.
pub fn energy_profile_exact(set: &GraphSignalSet, slice: &SpectralSlice, lambdas: &[f64]) -> Result<EnergyProfile> {
    set.require_normalized()?;
    let counts = lambdas
        .iter()
        .map(|&l| count_below(slice, l))
        .collect::<Result<Vec<_>>>()?;
    let powers = spectral_powers(set, slice)?;
    let per_signal: Vec<Vec<f64>> = powers
        .iter()
        .map(|p| {
            let mut cum = Vec::with_capacity(p.len() + 1);
            cum.push(0.0);
            let mut acc = 0.0;
            for v in p {
                acc += v;
                cum.push(acc);
            }
            counts.iter().map(|&c| cum[c]).collect()
        })
        .collect();
    Ok(EnergyProfile {
        abscissae: lambdas.to_vec(),
        energies: ensemble_mean(&per_signal),
        method: EnergyMethod::Exact,
        label: String::new(),
    })
}

/// Cumulative band energies `E(F, c_j)` through the polynomial filter bank;
/// the abscissae are the kernel centres.
pub fn ensemble_energy_coarse(
    set: &GraphSignalSet,
    kernels: &[ChebyshevKernel],
    centers: &[f64],
    op: &LaplacianOperator<'_>,
) -> Result<EnergyProfile> {
    set.require_normalized()?;
    if centers.len() != kernels.len() {
        return Err(Error::DimensionMismatch {
            expected: kernels.len(),
            actual: centers.len(),
        });
    }
    let bands = apply_bank_many(op, kernels, set.signals())?;
    let mean = ensemble_mean(&bands);
    let mut acc = 0.0;
    let energies = mean
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    Ok(EnergyProfile {
        abscissae: centers.to_vec(),
        energies,
        method: EnergyMethod::Coarse,
        label: String::new(),
    })
}

/// Cumulative band energies through the ideal (unapproximated) kernels,
/// evaluated on the eigenpairs of `slice`. Bands whose support reaches past
/// the slice's coverage are left out, so the result may be shorter than `J`.
pub fn ideal_band_energy(set: &GraphSignalSet, slice: &SpectralSlice, system: &KernelSystem) -> Result<Vec<f64>> {
    set.require_normalized()?;
    let usable = (1..=system.count())
        .take_while(|&j| slice.is_full() || system.support(j).1 <= slice.coverage())
        .count();
    let powers = spectral_powers(set, slice)?;
    let weights: Vec<Vec<f64>> = slice
        .eigenvalues()
        .iter()
        .map(|&l| (1..=usable).map(|j| system.kernel(j, l).powi(2)).collect())
        .collect();
    let per_signal: Vec<Vec<f64>> = powers
        .iter()
        .map(|p| {
            let mut bands = vec![0.0; usable];
            for (pk, w) in p.iter().zip(&weights) {
                for (b, wj) in bands.iter_mut().zip(w) {
                    *b += wj * pk;
                }
            }
            let mut acc = 0.0;
            bands
                .into_iter()
                .map(|b| {
                    acc += b;
                    acc
                })
                .collect()
        })
        .collect();
    if usable == 0 {
        return Ok(Vec::new());
    }
    Ok(ensemble_mean(&per_signal))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Pearson correlation with a 95% interval from the Fisher z-transform.
pub fn pearson_ci(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 4 {
        return Err(invalid(format!("need at least 4 samples, got {n}")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::Data("zero variance in correlation input".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let z = r.atanh();
    let half = Z_95 / ((n - 3) as f64).sqrt();
    Ok(CorrelationResult {
        r,
        ci_low: (z - half).tanh(),
        ci_high: (z + half).tanh(),
        n,
    })
}

/// `abscissa,energy,method,label` rows for every profile, in order.
pub fn write_profiles_csv(path: impl AsRef<Path>, profiles: &[EnergyProfile]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "abscissa,energy,method,label")?;
    for p in profiles {
        for (a, e) in p.abscissae.iter().zip(&p.energies) {
            writeln!(w, "{a:e},{e:e},{},{}", p.method.as_str(), p.label)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_correlation_json(path: impl AsRef<Path>, result: &CorrelationResult) -> Result<()> {
    let text = serde_json::to_string_pretty(result).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
