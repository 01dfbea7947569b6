use std::io::Write;
use std::path::Path;

use super::{FrameFit, KernelSystem};
use crate::error::{Error, Result};

/// `lambda,k1,...,kJ,T` on `points + 1` equispaced values of the spectrum.
pub fn write_kernels_csv(path: impl AsRef<Path>, system: &KernelSystem, points: usize) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "lambda")?;
    for j in 1..=system.count() {
        write!(w, ",k{j}")?;
    }
    writeln!(w, ",T")?;
    let points = points.max(1);
    for i in 0..=points {
        let l = system.lambda_end() * i as f64 / points as f64;
        write!(w, "{l}")?;
        let vals = system.values(l);
        for v in &vals {
            write!(w, ",{v:e}")?;
        }
        writeln!(w, ",{:e}", vals.iter().map(|v| v * v).sum::<f64>())?;
    }
    w.flush()?;
    Ok(())
}

/// Degrees, fit errors and coefficients as pretty-printed JSON.
pub fn write_coefficients_json(path: impl AsRef<Path>, fit: &FrameFit) -> Result<()> {
    let text = serde_json::to_string_pretty(fit).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{chebyshev_fit, design_system};

    #[test]
    fn exports() {
        let s = design_system(4, 0.5, 2.0, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("k.csv");
        write_kernels_csv(&csv, &s, 10).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "lambda,k1,k2,k3,k4,T");
        assert_eq!(text.lines().count(), 12);
        let fit = chebyshev_fit(&s, 500, 0.01).unwrap();
        let js = dir.path().join("c.json");
        write_coefficients_json(&js, &fit).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(js).unwrap()).unwrap();
        assert_eq!(v["kernels"].as_array().unwrap().len(), 4);
        assert!(v["kernels"][0]["degree"].as_u64().is_some());
    }
}
