use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chc_core::energy::{
    energy_profile_exact, ensemble_energy_coarse, ideal_band_energy, pearson_ci, write_profiles_csv, GraphSignalSet,
};
use chc_core::experiment::{
    assemble_sets, build_regressor, load_paradigm_dir, make_folded_sheet, make_shell, select_frames,
    ConditionSelection, FoldedSheet, Phantom,
};
use chc_core::frame::{apply_bank, chebyshev_fit, design_system, write_kernels_csv, FrameFit, KernelSystem};
use chc_core::graph::{
    build_graph as graph_from_mask, connected_components, largest_component, laplacian, prune_graph, read_graph,
    write_graph, write_pruned_edges_csv, ConnectionType, VoxelGraph,
};
use chc_core::spectral::{
    eig_dense, eig_low, read_spectrum, write_eigenvalue_cdf_csv, write_spectrum, EigLowOptions, SpectralSlice,
    DENSE_LIMIT,
};
use chc_core::surface::{load_surface, write_off, MeshIndex};
use chc_core::volume::{
    enforce_6connectivity, load_nifti, read_nifti, resample_mask, threshold_mask, write_nifti, NiftiDatatype,
    VoxelGrid,
};
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::stamp::Stamp;
use crate::{CliError, StageExt};

/// Grid used to report the exact frame's tightness.
const TIGHTNESS_POINTS: usize = 100_000;

fn require<'a>(path: &'a Option<PathBuf>, what: &str, command: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("{command} needs --{what} (or paths.{what} in the config)")))
}

fn data_error(stage: &'static str, msg: impl Into<String>) -> CliError {
    CliError::Stage {
        stage,
        source: chc_core::Error::Data(msg.into()),
    }
}

fn load_graph(config: &PipelineConfig) -> Result<VoxelGraph, CliError> {
    Ok(read_graph(config.graph_path()).stage("graph")?.0)
}

/// Mask, resampling, cleaning, graph construction, pruning and largest
/// component. Writes `graph.chcg`, `prune_report.json` and, when a surface is
/// given, `pruned_edges.csv`.
pub fn build_graph(config: &PipelineConfig) -> Result<(), CliError> {
    let stamp = Stamp::new(config);
    let p = &config.params;
    let out = &config.paths.output;
    let mask_path = require(&config.paths.mask, "mask", "build-graph")?;
    let grid = load_nifti(mask_path).stage("mask")?;
    let mut mask = threshold_mask(&grid, p.mask_threshold).stage("mask")?;
    if mask.count() == 0 {
        return Err(data_error("mask", format!("no voxel reaches {}", p.mask_threshold)));
    }
    if let Some(s) = p.spacing {
        mask = resample_mask(&mask, s).stage("resample")?;
    }
    let mask = enforce_6connectivity(&mask);
    if mask.count() == 0 {
        return Err(data_error("mask", "no voxel survives the connectivity cleanup"));
    }
    let full = graph_from_mask(&mask).stage("graph")?;

    let (pruned, report) = match &config.paths.surface {
        Some(s) => {
            let mesh = load_surface(s).stage("surface")?;
            let index = MeshIndex::build(mesh).stage("surface")?;
            let (g, r) = prune_graph(&full, &index).stage("prune")?;
            write_pruned_edges_csv(out.join("pruned_edges.csv"), &full, &r).stage("write")?;
            stamp.csv(&out.join("pruned_edges.csv"))?;
            (g, Some(r))
        }
        None => {
            log::warn!("no surface given; pruning skipped");
            (full.clone(), None)
        }
    };
    let components = connected_components(&pruned).count();
    let graph = largest_component(&pruned).stage("components")?;
    write_graph(config.graph_path(), &graph, &stamp.line()).stage("write")?;

    let mut by_type = BTreeMap::new();
    for kind in [ConnectionType::Horizontal, ConnectionType::Vertical, ConnectionType::Diagonal] {
        let n = report
            .as_ref()
            .map_or(0, |r| r.removed_edges.iter().filter(|e| e.kind == kind).count());
        by_type.insert(kind.as_str(), n);
    }
    stamp.json(
        &out.join("prune_report.json"),
        json!({
            "mask_voxels": mask.count(),
            "vertices_before": full.len(),
            "edges_before": full.num_edges(),
            "pruned": report.is_some(),
            "edges_removed": report.as_ref().map_or(0, |r| r.edges_removed),
            "edges_removed_by_type": by_type,
            "vertices_removed": report.as_ref().map_or(0, |r| r.vertices_removed),
            "components_before": connected_components(&full).count(),
            "components_after": components,
            "vertices": graph.len(),
            "edges": graph.num_edges(),
        }),
    )?;
    println!(
        "graph: {} vertices, {} edges (largest of {components} components)",
        graph.len(),
        graph.num_edges(),
    );
    Ok(())
}

/// Eigenpairs up to `lambda_cut`. Writes the spectrum container and
/// `eigenvalue_cdf.csv`.
pub fn eigs(config: &PipelineConfig) -> Result<(), CliError> {
    let stamp = Stamp::new(config);
    let p = &config.params;
    let graph = load_graph(config)?;
    let op = laplacian(&graph).stage("laplacian")?;
    let slice = if p.lambda_cut >= 2.0 {
        if graph.len() > DENSE_LIMIT {
            return Err(CliError::Config(format!(
                "lambda_cut >= 2 asks for the whole spectrum, which is only computed for graphs with at most \
                 {DENSE_LIMIT} vertices (this one has {}); choose a cutoff below 2",
                graph.len()
            )));
        }
        eig_dense(&op).stage("eigs")?
    } else {
        let opts = EigLowOptions {
            tol: p.eig_tol,
            max_iter: p.max_iter,
            seed: p.seed,
            ..EigLowOptions::default()
        };
        eig_low(&op, p.lambda_cut, &opts).stage("eigs")?
    };
    write_spectrum(config.spectrum_path(), &slice, &stamp.line()).stage("write")?;
    let cdf = config.paths.output.join("eigenvalue_cdf.csv");
    write_eigenvalue_cdf_csv(&cdf, &slice).stage("write")?;
    stamp.csv(&cdf)?;
    let worst = slice.residuals().iter().cloned().fold(0.0, f64::max);
    println!(
        "spectrum: {} eigenpairs of {} ({} solver), largest residual {worst:.2e}",
        slice.len(),
        slice.dim(),
        slice.solver()
    );
    Ok(())
}

fn design(config: &PipelineConfig) -> Result<KernelSystem, CliError> {
    let p = &config.params;
    design_system(p.kernels, p.transition, p.ratio, 2.0).stage("kernels")
}

fn fit(config: &PipelineConfig, system: &KernelSystem) -> Result<FrameFit, CliError> {
    let p = &config.params;
    chebyshev_fit(system, p.max_degree, p.joint_tol).stage("fit")
}

/// Kernel system on a grid (`kernels.csv`) plus degrees, errors and
/// coefficients of the fitted polynomials (`kernels.json`).
pub fn kernels(config: &PipelineConfig) -> Result<(), CliError> {
    let stamp = Stamp::new(config);
    let out = &config.paths.output;
    let system = design(config)?;
    let csv = out.join("kernels.csv");
    write_kernels_csv(&csv, &system, config.params.grid_points).stage("write")?;
    stamp.csv(&csv)?;
    let exact = (0..=TIGHTNESS_POINTS)
        .map(|i| (system.tightness(2.0 * i as f64 / TIGHTNESS_POINTS as f64) - 1.0).abs())
        .fold(0.0, f64::max);
    let fitted = fit(config, &system)?;
    let degrees = fitted.degrees();
    let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
    stamp.json(
        &out.join("kernels.json"),
        json!({
            "count": system.count(),
            "transition": system.transition(),
            "ratio": system.ratio(),
            "narrow_count": system.narrow_count(),
            "centers": system.centers(),
            "exact_deviation": exact,
            "joint_deviation": fitted.joint_deviation,
            "joint_tol": fitted.joint_tol,
            "degrees": degrees,
            "mean_degree": mean,
            "max_degree": fitted.max_degree(),
            "kernels": fitted.kernels,
        }),
    )?;
    println!(
        "kernels: {} bands, exact deviation {exact:.2e}, fitted deviation {:.2e}, degrees mean {mean:.0} max {}",
        system.count(),
        fitted.joint_deviation,
        fitted.max_degree()
    );
    Ok(())
}

/// Reads one value per line; `#` comments and a non-numeric first line are
/// skipped.
fn read_signal(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).stage("signal")?;
    let mut values = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if values.is_empty() && line.parse::<f64>().is_err() => continue,
            _ => return Err(data_error("signal", format!("line {}: `{line}` is not a finite number", no + 1))),
        }
    }
    Ok(values)
}

/// Band energies `||p_j(L) f||^2` of one signal (`filter.csv`).
pub fn filter(config: &PipelineConfig) -> Result<(), CliError> {
    let stamp = Stamp::new(config);
    let graph = load_graph(config)?;
    let f = read_signal(require(&config.paths.signal, "signal", "filter")?)?;
    if f.len() != graph.len() {
        return Err(CliError::Stage {
            stage: "signal",
            source: chc_core::Error::DimensionMismatch {
                expected: graph.len(),
                actual: f.len(),
            },
        });
    }
    let op = laplacian(&graph).stage("laplacian")?;
    let system = design(config)?;
    let fitted = fit(config, &system)?;
    let bands = apply_bank(&op, &fitted.kernels, &f).stage("filter")?;
    let path = config.paths.output.join("filter.csv");
    let mut text = format!("# {}\nkernel,center,degree,energy\n", stamp.line());
    for ((k, c), e) in fitted.kernels.iter().zip(system.centers()).zip(&bands) {
        writeln!(text, "{},{c:e},{},{e:e}", k.index, k.degree).unwrap();
    }
    std::fs::write(&path, text).stage("write")?;
    let total: f64 = bands.iter().sum();
    let norm2: f64 = f.iter().map(|v| v * v).sum();
    println!("filter: band energies sum to {total:e} (signal energy {norm2:e})");
    Ok(())
}

/// Exact profile abscissae: `profile_points` values from 0 to the cutoff,
/// clipped to what the spectrum certifies.
fn profile_grid(config: &PipelineConfig, slice: &SpectralSlice) -> Vec<f64> {
    let p = &config.params;
    let top = if slice.is_full() {
        p.lambda_cut
    } else {
        p.lambda_cut.min(slice.coverage())
    };
    let n = p.profile_points - 1;
    (0..=n).map(|i| top * i as f64 / n as f64).collect()
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Per-condition and per-task energy profiles from a functional series and
/// its event files. Writes `energy/<set>.csv`, `summary.csv` and, when a
/// spectrum is available, `agreement.csv` and `correlation.json`.
pub fn energy(config: &PipelineConfig) -> Result<(), CliError> {
    let stamp = Stamp::new(config);
    let p = &config.params;
    let out = &config.paths.output;
    let graph = load_graph(config)?;
    let op = laplacian(&graph).stage("laplacian")?;
    let u1 = op.null_vector();

    let frames = read_nifti(require(&config.paths.functional, "functional", "energy")?).stage("functional")?;
    let tasks = load_paradigm_dir(require(&config.paths.paradigms, "paradigms", "energy")?, p.tr, frames.len())
        .stage("paradigms")?;
    let mut selections = Vec::new();
    for t in &tasks {
        for c in &t.conditions {
            let frames = select_frames(&build_regressor(c), p.threshold).stage("regressors")?;
            selections.push(ConditionSelection {
                task: t.task.clone(),
                condition: c.name.clone(),
                frames,
            });
        }
    }
    let sets = assemble_sets(&frames, &graph, &selections, &u1).stage("sampling")?;
    if sets.tasks.is_empty() {
        return Err(data_error("regressors", format!("no frame reaches the threshold {}", p.threshold)));
    }

    let spectrum_path = config.spectrum_path();
    let slice = if spectrum_path.exists() {
        let s = read_spectrum(&spectrum_path).stage("spectrum")?.0;
        if s.dim() != graph.len() {
            return Err(CliError::Stage {
                stage: "spectrum",
                source: chc_core::Error::DimensionMismatch {
                    expected: graph.len(),
                    actual: s.dim(),
                },
            });
        }
        Some(s)
    } else {
        log::warn!("no spectrum at {}; exact profiles skipped", spectrum_path.display());
        None
    };

    let system = design(config)?;
    let fitted = fit(config, &system)?;
    let centers = system.centers();

    let mut all: Vec<(String, &str, &GraphSignalSet)> = Vec::new();
    for (task, cond, set) in &sets.conditions {
        all.push((format!("{task}/{cond}"), "condition", set));
    }
    for (task, set) in &sets.tasks {
        all.push((task.clone(), "task", set));
    }

    std::fs::create_dir_all(out.join("energy")).stage("write")?;
    let mut summary = format!("# {}\nlabel,kind,size,exact_at_cut,coarse_at_cut\n", stamp.line());
    let mut agreement = format!("# {}\nlabel,kernel,center,ideal,coarse,abs_diff\n", stamp.line());
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (label, kind, set) in &all {
        let mut profiles = Vec::new();
        let mut exact_at_cut = String::new();
        if let Some(s) = &slice {
            let mut prof = energy_profile_exact(set, s, &profile_grid(config, s)).stage("energy")?;
            prof.label = label.clone();
            if s.is_full() || p.lambda_cut <= s.coverage() {
                exact_at_cut = format!("{:e}", prof.energies.last().copied().unwrap_or(0.0));
            }
            profiles.push(prof);
            let ideal = ideal_band_energy(set, s, &system).stage("energy")?;
            let coarse = ensemble_energy_coarse(set, &fitted.kernels, centers, &op).stage("energy")?;
            for (j, (a, b)) in ideal.iter().zip(&coarse.energies).enumerate() {
                writeln!(agreement, "{label},{},{:e},{a:e},{b:e},{:e}", j + 1, centers[j], (a - b).abs()).unwrap();
                xs.push(*a);
                ys.push(*b);
            }
        }
        let mut coarse = ensemble_energy_coarse(set, &fitted.kernels, centers, &op).stage("energy")?;
        coarse.label = label.clone();
        let below = centers.iter().take_while(|&&c| c <= p.lambda_cut).count();
        let coarse_at_cut = if below == 0 { 0.0 } else { coarse.energies[below - 1] };
        profiles.push(coarse);
        let path = out.join("energy").join(format!("{}.csv", file_label(label)));
        write_profiles_csv(&path, &profiles).stage("write")?;
        stamp.csv(&path)?;
        writeln!(summary, "{label},{kind},{},{exact_at_cut},{coarse_at_cut:e}", set.len()).unwrap();
    }
    std::fs::write(out.join("summary.csv"), summary).stage("write")?;
    if slice.is_some() {
        std::fs::write(out.join("agreement.csv"), agreement).stage("write")?;
        let max_diff = xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let corr = pearson_ci(&xs, &ys).ok();
        stamp.json(
            &out.join("correlation.json"),
            json!({
                "compared": "ideal vs polynomial cumulative band energy",
                "points": xs.len(),
                "max_abs_diff": max_diff,
                "correlation": corr,
            }),
        )?;
    }
    println!(
        "energy: {} condition sets and {} task sets from {} frames",
        sets.conditions.len(),
        sets.tasks.len(),
        frames.len()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhantomKind {
    /// Two parallel sheets separated by a plane.
    Folded,
    /// Closed spherical shell.
    Shell,
}

#[derive(Debug, Clone, Args)]
pub struct PhantomArgs {
    #[arg(long, value_enum, default_value = "folded")]
    pub kind: PhantomKind,
    /// In-plane sheet size in voxels.
    #[arg(long, num_args = 2, default_values_t = [12, 12])]
    pub extent: Vec<usize>,
    /// Empty layers between the sheets.
    #[arg(long, default_value_t = 0)]
    pub gap: usize,
    /// Outer shell radius in voxels.
    #[arg(long, default_value_t = 20.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 2.0)]
    pub thickness: f64,
    /// Voxel size in mm.
    #[arg(long, default_value_t = 1.0)]
    pub voxel_size: f64,
    /// Length of the synthetic functional series; 0 writes none.
    #[arg(long, default_value_t = 0)]
    pub frames: usize,
    /// Standard deviation of the additive noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
}

/// Blocks of `duration` seconds every `period` seconds from `first`, kept
/// while they fit in the run.
fn blocks(first: f64, duration: f64, period: f64, run: f64) -> String {
    let mut text = String::from("onset,duration,amplitude\n");
    let mut t = first;
    while t + duration <= run {
        writeln!(text, "{t},{duration},1").unwrap();
        t += period;
    }
    text
}

/// Writes `mask.nii.gz`, the surface (`surface.off`, folded sheets only),
/// `ground_truth.json` and `ground_truth_edges.csv`; with `--frames`, also
/// `functional.nii.gz` and `paradigms/motor/{left,right}.txt`.
pub fn phantom(config: &PipelineConfig, args: &PhantomArgs) -> Result<(), CliError> {
    let stamp = Stamp::new(config);
    let out = &config.paths.output;
    let spacing = [args.voxel_size; 3];
    let ph: Phantom = match args.kind {
        PhantomKind::Folded => {
            let sheet = FoldedSheet::new([args.extent[0], args.extent[1]], args.gap, spacing);
            make_folded_sheet(&sheet).stage("phantom")?
        }
        PhantomKind::Shell => make_shell(args.radius, args.thickness, spacing).stage("phantom")?,
    };
    let geometry = ph.mask.geometry().clone();
    write_nifti(out.join("mask.nii.gz"), &[ph.mask.to_grid()], NiftiDatatype::Uint8).stage("write")?;
    if let Some(s) = &ph.surface {
        write_off(out.join("surface.off"), s).stage("write")?;
    }
    let mut edges = format!("# {}\ni_a,j_a,k_a,i_b,j_b,k_b\n", stamp.line());
    for [a, b] in &ph.crossing_edges {
        let (a, b) = (geometry.voxel_coords(*a), geometry.voxel_coords(*b));
        writeln!(edges, "{},{},{},{},{},{}", a[0], a[1], a[2], b[0], b[1], b[2]).unwrap();
    }
    std::fs::write(out.join("ground_truth_edges.csv"), edges).stage("write")?;
    stamp.json(
        &out.join("ground_truth.json"),
        json!({
            "kind": format!("{:?}", args.kind).to_lowercase(),
            "dims": geometry.dims(),
            "voxels": ph.mask.count(),
            "crossing_edges": ph.crossing_edges.len(),
            "components": ph.components,
        }),
    )?;

    if args.frames > 0 {
        let tr = config.params.tr;
        let run = tr * args.frames as f64;
        let dir = out.join("paradigms").join("motor");
        std::fs::create_dir_all(&dir).stage("write")?;
        std::fs::write(dir.join("left.txt"), blocks(4.0, 12.0, 40.0, run)).stage("write")?;
        std::fs::write(dir.join("right.txt"), blocks(24.0, 12.0, 40.0, run)).stage("write")?;
        let tasks = load_paradigm_dir(out.join("paradigms"), tr, args.frames).stage("paradigms")?;
        let regs: Vec<Vec<f64>> = tasks[0].conditions.iter().map(|c| build_regressor(c).values).collect();

        // Smooth spatial pattern per condition, one cosine period along x or y.
        let dims = geometry.dims();
        let pattern = |axis: usize, ijk: [usize; 3]| {
            (std::f64::consts::PI * ijk[axis] as f64 / (dims[axis].max(2) - 1) as f64).cos()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.params.seed);
        let frames: Vec<VoxelGrid> = (0..args.frames)
            .map(|t| {
                let data = (0..geometry.len())
                    .map(|v| {
                        let ijk = geometry.voxel_coords(v);
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        100.0 + regs[0][t] * pattern(0, ijk) + regs[1][t] * pattern(1, ijk) + args.noise * noise
                    })
                    .collect();
                VoxelGrid::new(geometry.clone(), data)
            })
            .collect::<chc_core::Result<_>>()
            .stage("phantom")?;
        write_nifti(out.join("functional.nii.gz"), &frames, NiftiDatatype::Float64).stage("write")?;
    }
    println!(
        "phantom: {} voxels, {} surface-crossing edges expected",
        ph.mask.count(),
        ph.crossing_edges.len()
    );
    Ok(())
}
