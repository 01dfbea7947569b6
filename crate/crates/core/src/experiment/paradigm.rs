use std::path::Path;

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};

/// Length of the HRF kernel in seconds.
pub const HRF_SUPPORT: f64 = 32.0;
/// Resolution of the boxcar and of the convolution, in seconds.
pub const REGRESSOR_STEP: f64 = 0.1;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

const PEAK_SHAPE: f64 = 6.0;
const UNDERSHOOT_SHAPE: f64 = 16.0;
const UNDERSHOOT_RATIO: f64 = 6.0;

fn gamma_pdf(t: f64, shape: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    ((shape - 1.0) * t.ln() - t - ln_gamma(shape)).exp()
}

/// Canonical double-gamma haemodynamic response (unit dispersions, peak
/// shape 6, undershoot shape 16, peak-to-undershoot ratio 6).
pub fn hrf(t: f64) -> f64 {
    if !(0.0..=HRF_SUPPORT).contains(&t) {
        return 0.0;
    }
    gamma_pdf(t, PEAK_SHAPE) - gamma_pdf(t, UNDERSHOOT_SHAPE) / UNDERSHOOT_RATIO
}

/// Event timing of one condition within a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Paradigm {
    pub name: String,
    pub onsets: Vec<f64>,
    pub durations: Vec<f64>,
    pub tr: f64,
    pub n_frames: usize,
}

impl Paradigm {
    pub fn new(name: impl Into<String>, onsets: Vec<f64>, durations: Vec<f64>, tr: f64, n_frames: usize) -> Result<Self> {
        if onsets.len() != durations.len() {
            return Err(Error::DimensionMismatch {
                expected: onsets.len(),
                actual: durations.len(),
            });
        }
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(invalid(format!("TR must be positive, got {tr}")));
        }
        let run = tr * n_frames as f64;
        if onsets.iter().any(|&o| !(o >= 0.0)) || onsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("onsets must be non-negative and ascending"));
        }
        for (&o, &d) in onsets.iter().zip(&durations) {
            if !(d >= 0.0) {
                return Err(invalid(format!("negative duration {d}")));
            }
            if o + d > run + 1e-9 {
                return Err(invalid(format!("event at {o} s lasting {d} s overruns the {run} s run")));
            }
        }
        Ok(Self {
            name: name.into(),
            onsets,
            durations,
            tr,
            n_frames,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }
}

/// Parses an event file: one event per line as `onset duration [amplitude]`,
/// separated by whitespace or commas. Blank lines, `#` comments and a
/// non-numeric header line are skipped; events are sorted by onset.
pub fn parse_ev(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut events = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let nums: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if events.is_empty() && nums.iter().all(Option::is_none) {
            continue;
        }
        match nums.as_slice() {
            [Some(o), Some(d), rest @ ..] if rest.len() <= 1 && rest.iter().all(Option::is_some) => {
                events.push((*o, *d));
            }
            _ => return Err(Error::Format(format!("event file line {}: expected `onset duration [amplitude]`", no + 1))),
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(events)
}

/// Conditions of one task, sorted by name.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskParadigms {
    pub task: String,
    pub conditions: Vec<Paradigm>,
}

/// Reads a directory laid out as `<task>/<condition>.txt`. Tasks and
/// conditions are returned in name order.
pub fn load_paradigm_dir(dir: impl AsRef<Path>, tr: f64, n_frames: usize) -> Result<Vec<TaskParadigms>> {
    let mut tasks = Vec::new();
    let mut task_dirs: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    task_dirs.sort();
    for td in task_dirs {
        let task = td.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let mut files: Vec<_> = std::fs::read_dir(&td)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let mut conditions = Vec::new();
        for f in files {
            let name = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let events = parse_ev(&std::fs::read_to_string(&f)?)?;
            let (onsets, durations) = events.into_iter().unzip();
            conditions.push(Paradigm::new(name, onsets, durations, tr, n_frames)?);
        }
        if !conditions.is_empty() {
            tasks.push(TaskParadigms { task, conditions });
        }
    }
    if tasks.is_empty() {
        return Err(Error::Data("no `<task>/<condition>.txt` event files found".into()));
    }
    Ok(tasks)
}

/// Per-frame regressor, peak-normalized to 1 unless identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub values: Vec<f64>,
}

/// Boxcar on a 0.1 s grid convolved with [`hrf`] and sampled at `i * TR`.
pub fn build_regressor(p: &Paradigm) -> Regressor {
    let step = REGRESSOR_STEP;
    let n_fine = ((p.n_frames as f64 * p.tr) / step).round() as usize + 1;
    let mut boxcar = vec![0.0; n_fine];
    for (&o, &d) in p.onsets.iter().zip(&p.durations) {
        let start = (o / step).round() as usize;
        let end = (((o + d) / step).round() as usize).min(n_fine);
        for b in &mut boxcar[start.min(n_fine)..end] {
            *b = 1.0;
        }
    }
    let kernel: Vec<f64> = (0..=(HRF_SUPPORT / step).round() as usize)
        .map(|k| hrf(k as f64 * step) * step)
        .collect();
    let mut values: Vec<f64> = (0..p.n_frames)
        .map(|i| {
            let m = ((i as f64 * p.tr) / step).round() as usize;
            kernel
                .iter()
                .enumerate()
                .take(m + 1)
                .map(|(k, h)| h * boxcar[m - k])
                .sum()
        })
        .collect();
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
    }
    Regressor { values }
}

/// Frames whose regressor value is at least `threshold`, ascending.
pub fn select_frames(r: &Regressor, threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(invalid(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    Ok(r.values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hrf_shape() {
        assert_eq!(hrf(0.0), 0.0);
        let (mut best, mut arg) = (f64::MIN, 0.0);
        for i in 0..=32000 {
            let t = i as f64 * 1e-3;
            if hrf(t) > best {
                best = hrf(t);
                arg = t;
            }
        }
        assert!((arg - 5.0).abs() < 0.1, "peak at {arg}");
        assert!(hrf(32.0).abs() < 0.01 * best);
    }

    #[test]
    fn long_block_plateaus() {
        let p = Paradigm::new("b", vec![10.0], vec![60.0], 1.0, 100).unwrap();
        let r = build_regressor(&p);
        let max = r.values.iter().cloned().fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-15);
        // Well inside the block the response has settled below the initial
        // overshoot, and still clears the default threshold.
        for i in 45..70 {
            assert!((r.values[i] - r.values[45]).abs() < 1e-3, "frame {i}: {}", r.values[i]);
            assert!(r.values[i] > DEFAULT_THRESHOLD && r.values[i] < 0.95);
        }
        assert!(r.values[5] == 0.0);
    }

    #[test]
    fn empty_paradigm_is_zero() {
        let p = Paradigm::new("e", vec![], vec![], 0.72, 50).unwrap();
        assert!(p.is_empty());
        let r = build_regressor(&p);
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert!(select_frames(&r, 0.8).unwrap().is_empty());
    }

    #[test]
    fn separated_blocks_repeat() {
        let p = Paradigm::new("two", vec![5.0, 65.0], vec![12.0, 12.0], 1.0, 120).unwrap();
        let r = build_regressor(&p);
        for i in 0..50 {
            assert!((r.values[5 + i] - r.values[65 + i]).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_is_inclusive() {
        let r = Regressor {
            values: vec![0.5, 0.8, 0.9],
        };
        assert_eq!(select_frames(&r, 0.8).unwrap(), vec![1, 2]);
        let r = Regressor {
            values: vec![0.2, 1.0, 0.99, 1.0],
        };
        assert_eq!(select_frames(&r, 1.0).unwrap(), vec![1, 3]);
        assert!(select_frames(&r, 0.0).is_err());
    }

    #[test]
    fn ev_parsing() {
        let ev = parse_ev("onset,duration\n36.5 27.5 1\n\n# note\n8.0,27.5\n").unwrap();
        assert_eq!(ev, vec![(8.0, 27.5), (36.5, 27.5)]);
        assert!(parse_ev("1 2\nfoo bar\n").is_err());
        assert!(Paradigm::new("x", vec![3.0, 1.0], vec![1.0, 1.0], 1.0, 10).is_err());
        assert!(Paradigm::new("x", vec![9.5], vec![1.0], 1.0, 10).is_err());
    }

    #[test]
    fn paradigm_directory() {
        let dir = tempfile::tempdir().unwrap();
        for (task, cond, body) in [("WM", "2bk", "0 10\n"), ("WM", "0bk", "20 5\n"), ("MOTOR", "lf", "1 2 1\n")] {
            std::fs::create_dir_all(dir.path().join(task)).unwrap();
            std::fs::write(dir.path().join(task).join(format!("{cond}.txt")), body).unwrap();
        }
        let tasks = load_paradigm_dir(dir.path(), 1.0, 40).unwrap();
        assert_eq!(tasks.len(), 2);
        assert_eq!(tasks[0].task, "MOTOR");
        assert_eq!(tasks[1].conditions[0].name, "0bk");
        assert_eq!(tasks[1].conditions[1].onsets, vec![0.0]);
    }
}
