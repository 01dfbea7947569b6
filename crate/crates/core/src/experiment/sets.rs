use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::energy::GraphSignalSet;
use crate::error::{invalid, Result};
use crate::graph::VoxelGraph;
use crate::volume::{sample_signal, VoxelGrid};

/// Frames selected for one condition of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSelection {
    pub task: String,
    pub condition: String,
    pub frames: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AssembledSets {
    /// `(task, condition, set)` in input order; empty selections are skipped.
    pub conditions: Vec<(String, String, GraphSignalSet)>,
    /// `(task, set)` in task-name order, each the union of its conditions.
    pub tasks: Vec<(String, GraphSignalSet)>,
}

/// Samples every selected frame at the graph's voxel centres, normalizes it
/// against `u1` and groups the results per condition and per task.
pub fn assemble_sets(
    frames: &[VoxelGrid],
    graph: &VoxelGraph,
    selections: &[ConditionSelection],
    u1: &[f64],
) -> Result<AssembledSets> {
    let mut needed: Vec<usize> = selections.iter().flat_map(|s| s.frames.iter().copied()).collect();
    needed.sort_unstable();
    needed.dedup();
    if let Some(&bad) = needed.iter().find(|&&f| f >= frames.len()) {
        return Err(invalid(format!("frame {bad} out of range for {} frames", frames.len())));
    }
    let points = graph.vertex_centers();
    let sampled: Vec<Vec<f64>> = needed
        .par_iter()
        .map(|&f| {
            let s = sample_signal(&frames[f], &points)?;
            crate::energy::normalize_signal(&s.values, u1)
        })
        .collect::<Result<_>>()?;
    let lookup: BTreeMap<usize, &Vec<f64>> = needed.iter().copied().zip(&sampled).collect();
    let build = |frames: &[usize], prefix: &str| -> Result<GraphSignalSet> {
        let signals = frames.iter().map(|f| lookup[f].clone()).collect();
        let labels = frames.iter().map(|f| format!("{prefix}/{f}")).collect();
        // Sampled signals are already normalized.
        GraphSignalSet::new(signals, labels)?.normalized(u1)
    };

    let mut conditions = Vec::new();
    let mut per_task: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for s in selections {
        if s.frames.is_empty() {
            continue;
        }
        let mut frames = s.frames.clone();
        frames.sort_unstable();
        frames.dedup();
        conditions.push((s.task.clone(), s.condition.clone(), build(&frames, &format!("{}/{}", s.task, s.condition))?));
        per_task.entry(&s.task).or_default().extend(&frames);
    }
    let mut tasks = Vec::new();
    for (task, mut frames) in per_task {
        frames.sort_unstable();
        frames.dedup();
        tasks.push((task.to_string(), build(&frames, task)?));
    }
    Ok(AssembledSets { conditions, tasks })
}
