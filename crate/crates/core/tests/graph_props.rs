use chc_core::graph::{build_graph, laplacian, prune_graph, write_graph, VoxelGraph};
use chc_core::surface::{MeshIndex, TriangleMesh};
use chc_core::volume::{enforce_6connectivity, BinaryMask, VolumeGeometry};
use proptest::prelude::*;

prop_compose! {
    fn cleaned_mask()(dims in prop::array::uniform3(2usize..8), density in 0.3f64..0.95)
                     (bits in prop::collection::vec(prop::bool::weighted(density), dims[0] * dims[1] * dims[2]),
                      dims in Just(dims),
                      spacing in prop::array::uniform3(0.6f64..1.6)) -> BinaryMask {
        let g = VolumeGeometry::axis_aligned(dims, spacing, [1.0, -2.0, 0.5]).unwrap();
        enforce_6connectivity(&BinaryMask::new(g, bits).unwrap())
    }
}

fn graph() -> impl Strategy<Value = VoxelGraph> {
    cleaned_mask().prop_filter_map("empty mask", |m| (m.count() > 1).then(|| build_graph(&m).unwrap()))
}

/// A few large random triangles through the volume.
fn cutting_mesh() -> impl Strategy<Value = TriangleMesh> {
    prop::collection::vec(prop::array::uniform3(prop::array::uniform3(-2.0f64..12.0)), 1..5).prop_filter_map(
        "degenerate",
        |tris| {
            let verts: Vec<[f64; 3]> = tris.iter().flatten().copied().collect();
            let faces = (0..tris.len() as u32).map(|t| [3 * t, 3 * t + 1, 3 * t + 2]).collect();
            TriangleMesh::new(verts, faces).ok().filter(|m| !m.triangles().is_empty())
        },
    )
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    (0..n).map(|i| ((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn built_graph_is_simple_symmetric_and_local(g in graph()) {
        let a = g.adjacency();
        let geo = g.geometry();
        for v in 0..g.len() {
            prop_assert!(a.degree(v) >= 1);
            for &w in a.neighbours(v) {
                let w = w as usize;
                prop_assert!(w != v);
                prop_assert!(a.has_edge(w, v));
                let (p, q) = (geo.voxel_coords(g.vertex_to_voxel()[v]), geo.voxel_coords(g.vertex_to_voxel()[w]));
                prop_assert!((0..3).all(|k| p[k].abs_diff(q[k]) <= 1));
            }
        }
    }

    #[test]
    fn pruning_removes_exactly_the_crossing_edges(g in graph(), mesh in cutting_mesh()) {
        let (pruned, report) = prune_graph(&g, &MeshIndex::build(mesh.clone()).unwrap()).unwrap();
        prop_assert!(report.edges_removed <= report.edges_before);
        let geo = g.geometry();
        let mut kept = 0;
        for (a, b) in g.adjacency().edges() {
            let (va, vb) = (g.vertex_to_voxel()[a], g.vertex_to_voxel()[b]);
            let crosses = mesh.segment_intersects_brute(geo.center_of(va), geo.center_of(vb));
            let survives = match (pruned.voxel_to_vertex(va), pruned.voxel_to_vertex(vb)) {
                (Some(x), Some(y)) => pruned.adjacency().has_edge(x, y),
                _ => false,
            };
            prop_assert_eq!(survives, !crosses);
            kept += survives as usize;
        }
        // Nothing new appears.
        prop_assert_eq!(pruned.num_edges(), kept);
        prop_assert_eq!(report.edges_before - report.edges_removed, kept);
    }

    #[test]
    fn explicit_laplacian_matches_operator(g in graph(), seed in 0u64..1000) {
        let op = laplacian(&g).unwrap();
        let n = g.len();
        let dense = op.to_dense();
        let d = op.degrees();
        for i in 0..n {
            let mut row_off = 0.0;
            for j in 0..n {
                prop_assert!((dense[(i, j)] - dense[(j, i)]).abs() <= 1e-14);
                let want = if i == j {
                    1.0
                } else if g.adjacency().has_edge(i, j) {
                    -1.0 / (d[i] as f64 * d[j] as f64).sqrt()
                } else {
                    0.0
                };
                prop_assert!((dense[(i, j)] - want).abs() <= 1e-15);
                if i != j {
                    // Row of the similar matrix I - D^-1 A.
                    row_off += dense[(i, j)].abs() * (d[j] as f64 / d[i] as f64).sqrt();
                }
            }
            // Gershgorin discs of the similar random-walk form stay within [0, 2].
            prop_assert!(dense[(i, i)] - row_off >= -1e-12 && dense[(i, i)] + row_off <= 2.0 + 1e-12);
        }

        let x = random_vector(n, seed);
        let y = op.apply(&x).unwrap();
        let mut z = vec![0.0; n];
        for (i, j, v) in op.triplets() {
            z[i] += v * x[j];
        }
        let scale = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let diff = y.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-12 * scale.max(1.0));
        let null = op.apply(&op.null_vector()).unwrap();
        prop_assert!(null.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn graph_bytes_are_reproducible(m in cleaned_mask()) {
        prop_assume!(m.count() > 1);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.chcg"), dir.path().join("b.chcg"));
        write_graph(&a, &build_graph(&m).unwrap(), "x").unwrap();
        write_graph(&b, &build_graph(&m).unwrap(), "x").unwrap();
        prop_assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
