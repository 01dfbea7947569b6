use std::sync::OnceLock;

use chc_core::frame::{apply_bank, apply_filter, chebyshev_fit, design_system, FrameFit, KernelSystem};
use chc_core::graph::{Adjacency, LaplacianOperator};
use proptest::prelude::*;

fn small_bank() -> &'static (KernelSystem, FrameFit) {
    static BANK: OnceLock<(KernelSystem, FrameFit)> = OnceLock::new();
    BANK.get_or_init(|| {
        let s = design_system(10, 0.3, 2.0, 2.0).unwrap();
        let f = chebyshev_fit(&s, 3000, 0.01).unwrap();
        (s, f)
    })
}

/// Cycle with a few chords, so the spectrum is not just cosines.
fn graph(n: usize, chords: &[(usize, usize)]) -> Adjacency {
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    edges.extend(chords.iter().map(|&(a, b)| (a % n, b % n)).filter(|(a, b)| a != b));
    edges.iter_mut().for_each(|e| *e = (e.0.min(e.1), e.0.max(e.1)));
    edges.sort_unstable();
    edges.dedup();
    Adjacency::from_edges(n, &edges).unwrap()
}

fn signal(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn designs_are_tight_nonnegative_and_ordered(
        count in 2usize..80,
        transition in 0.02f64..1.5,
        ratio in 1.0f64..20.0,
        probes in prop::collection::vec(0.0f64..=2.0, 50),
    ) {
        // Too few kernels for a narrow transition is a documented rejection.
        let s = design_system(count, transition, ratio, 2.0);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        for l in probes.into_iter().chain([0.0, transition, 2.0]) {
            let v = s.values(l);
            prop_assert!((v.iter().map(|k| k * k).sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(v.iter().all(|&k| k >= 0.0));
        }
        prop_assert!(s.centers().windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*s.centers().last().unwrap(), 2.0);
        let mids: Vec<f64> = (1..=count).map(|j| {
            let (a, b) = s.support(j);
            (a + b) / 2.0
        }).collect();
        prop_assert!(mids.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn filtering_is_linear(
        (f, g) in (8usize..80).prop_flat_map(|n| (signal(n), signal(n))),
        chords in prop::collection::vec((0usize..80, 0usize..80), 0..10),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        j in 0usize..10,
    ) {
        let adj = graph(f.len(), &chords);
        let op = LaplacianOperator::new(&adj).unwrap();
        let k = &small_bank().1.kernels[j];
        let mix: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = apply_filter(&op, k, &mix).unwrap();
        let (pf, pg) = (apply_filter(&op, k, &f).unwrap(), apply_filter(&op, k, &g).unwrap());
        let rhs: Vec<f64> = pf.iter().zip(&pg).map(|(a, b)| alpha * a + beta * b).collect();
        let scale = (alpha.abs() * f.iter().map(|v| v * v).sum::<f64>().sqrt()
            + beta.abs() * g.iter().map(|v| v * v).sum::<f64>().sqrt()).max(1e-300);
        let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-12 * scale, "{} vs scale {}", err, scale);
    }

    #[test]
    fn bank_preserves_energy(
        f in (8usize..120).prop_flat_map(signal),
        chords in prop::collection::vec((0usize..120, 0usize..120), 0..20),
    ) {
        let adj = graph(f.len(), &chords);
        let op = LaplacianOperator::new(&adj).unwrap();
        let fit = &small_bank().1;
        let total: f64 = apply_bank(&op, &fit.kernels, &f).unwrap().iter().sum();
        let e: f64 = f.iter().map(|v| v * v).sum();
        prop_assert!((total - e).abs() <= fit.joint_tol * e);
    }
}
