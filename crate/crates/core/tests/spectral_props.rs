use chc_core::energy::normalize_signal;
use chc_core::graph::{build_graph, largest_component, laplacian, VoxelGraph};
use chc_core::spectral::{count_below, eig_dense, eig_low, gft, EigLowOptions};
use chc_core::volume::{enforce_6connectivity, BinaryMask, VolumeGeometry};
use proptest::prelude::*;

prop_compose! {
    fn connected_graph()(dims in (6usize..16, 2usize..6, 2usize..4), density in 0.75f64..0.98)
                        (bits in prop::collection::vec(prop::bool::weighted(density), dims.0 * dims.1 * dims.2),
                         dims in Just([dims.0, dims.1, dims.2])) -> Option<VoxelGraph> {
        let g = VolumeGeometry::axis_aligned(dims, [1.0; 3], [0.0; 3]).unwrap();
        let m = enforce_6connectivity(&BinaryMask::new(g, bits).unwrap());
        (m.count() >= 30).then(|| largest_component(&build_graph(&m).unwrap()).unwrap()).filter(|g| g.len() >= 30)
    }
}

fn small_block() -> EigLowOptions {
    EigLowOptions {
        block: 4,
        guard: 4,
        ..EigLowOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iterative_slice_matches_dense(g in connected_graph(), cut in 0.05f64..0.6, seed in any::<u64>()) {
        let Some(g) = g else { return Ok(()) };
        let op = laplacian(&g).unwrap();
        let dense = eig_dense(&op).unwrap();
        let opts = EigLowOptions { seed, ..small_block() };
        let low = eig_low(&op, cut, &opts).unwrap();
        let want: Vec<f64> = dense.eigenvalues().iter().copied().filter(|&l| l <= cut).collect();
        // A dense eigenvalue within rounding of the cut may land on either side.
        let near_cut = dense.eigenvalues().iter().any(|&l| (l - cut).abs() < 1e-8);
        prop_assume!(!near_cut);
        prop_assert_eq!(low.len(), want.len());
        let vals = dense.eigenvalues();
        for (i, (a, b)) in low.eigenvalues().iter().zip(&want).enumerate() {
            prop_assert!((a - b).abs() <= 1e-8);
            let gap = [i.checked_sub(1).map(|p| vals[i] - vals[p]), vals.get(i + 1).map(|nx| nx - vals[i])]
                .into_iter()
                .flatten()
                .fold(f64::INFINITY, f64::min);
            if gap > 1e-3 {
                let dot: f64 = low.eigenvector(i).iter().zip(dense.eigenvector(i)).map(|(x, y)| x * y).sum();
                prop_assert!(1.0 - dot.abs() <= 1e-6, "pair {}: |cos| = {}", i, dot.abs());
            }
        }
        let res = low.verify_residuals(&op).unwrap();
        prop_assert!(res.iter().all(|&r| r <= opts.tol));
        prop_assert!(low.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(low.eigenvalues()[0].abs() <= 1e-10);
        for i in 0..low.len() {
            for j in 0..=i {
                let dot: f64 = low.eigenvector(i).iter().zip(low.eigenvector(j)).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn counting_function_and_transform(g in connected_graph(), f_seed in any::<u64>(), probes in prop::collection::vec(0.0f64..2.0, 1..20)) {
        let Some(g) = g else { return Ok(()) };
        let op = laplacian(&g).unwrap();
        let slice = eig_dense(&op).unwrap();
        let mut probes = probes;
        probes.sort_by(f64::total_cmp);
        let counts: Vec<usize> = probes.iter().map(|&l| count_below(&slice, l).unwrap()).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(count_below(&slice, 2.0).unwrap(), g.len());

        let mut state = f_seed | 1;
        let f: Vec<f64> = (0..g.len())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 2001) as f64 / 1000.0 - 1.0
            })
            .collect();
        let Ok(ft) = normalize_signal(&f, &op.null_vector()) else { return Ok(()) };
        let c = gft(&slice, &ft).unwrap().values;
        prop_assert!(c[0].abs() <= 1e-10);
    }
}
