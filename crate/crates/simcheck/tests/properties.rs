//! Randomized invariant checks: properties that must hold for every input,
//! exercised over generated cases with shrinking on failure.

use proptest::prelude::*;

use nalgebra::DVector;
use simcheck::kernel::Kernel;
use simcheck::process::{direction_grid, marked_process};

proptest! {
    /// The process at the largest jump point is the full residual sum over
    /// sqrt(n), whatever the projections are.
    #[test]
    fn marked_process_ends_at_the_full_sum(
        n in 1usize..40,
        seed_proj in proptest::collection::vec(-100.0f64..100.0, 40),
        seed_res in proptest::collection::vec(-100.0f64..100.0, 40),
    ) {
        let proj = &seed_proj[..n];
        let res = &seed_res[..n];
        let mp = marked_process(proj, res).unwrap();
        let total: f64 = res.iter().sum::<f64>() / (n as f64).sqrt();
        let last = *mp.values.last().unwrap();
        prop_assert!((last - total).abs() <= 1e-10 * (1.0 + total.abs()));
    }

    /// Reordering the observations cannot change the process: the sorted
    /// jump points and the values attached to them are permutation
    /// invariant.
    #[test]
    fn marked_process_ignores_input_order(
        n in 2usize..30,
        seed_proj in proptest::collection::vec(-100.0f64..100.0, 30),
        seed_res in proptest::collection::vec(-100.0f64..100.0, 30),
        perm_seed in proptest::collection::vec(0usize..1000, 30),
    ) {
        let proj: Vec<f64> = seed_proj[..n].to_vec();
        let res: Vec<f64> = seed_res[..n].to_vec();
        // Deterministic permutation from the generated keys.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (perm_seed[i], i));
        let proj_p: Vec<f64> = order.iter().map(|&i| proj[i]).collect();
        let res_p: Vec<f64> = order.iter().map(|&i| res[i]).collect();
        let a = marked_process(&proj, &res).unwrap();
        let b = marked_process(&proj_p, &res_p).unwrap();
        for k in 0..n {
            prop_assert_eq!(a.jump_points[k], b.jump_points[k]);
            prop_assert!((a.values[k] - b.values[k]).abs() <= 1e-12);
        }
    }

    /// Shifting every projection by a constant relocates the jump points
    /// without touching the attached values.
    #[test]
    fn marked_process_is_translation_equivariant(
        n in 1usize..30,
        shift in -50.0f64..50.0,
        seed_proj in proptest::collection::vec(-100.0f64..100.0, 30),
        seed_res in proptest::collection::vec(-100.0f64..100.0, 30),
    ) {
        let proj: Vec<f64> = seed_proj[..n].to_vec();
        let res: Vec<f64> = seed_res[..n].to_vec();
        let shifted: Vec<f64> = proj.iter().map(|u| u + shift).collect();
        let a = marked_process(&proj, &res).unwrap();
        let b = marked_process(&shifted, &res).unwrap();
        for k in 0..n {
            prop_assert!((a.values[k] - b.values[k]).abs() <= 1e-12);
        }
    }

    /// Every grid direction is a unit vector in the nonnegative-first-
    /// coordinate half space, and the first one is the first coordinate
    /// axis, for any dimension and grid size.
    #[test]
    fn direction_grid_lives_on_the_half_sphere(
        q in 1usize..6,
        count in 1usize..200,
    ) {
        let grid = direction_grid(q, count).unwrap();
        prop_assert!(!grid.directions.is_empty());
        let e1 = DVector::from_fn(q, |i, _| if i == 0 { 1.0 } else { 0.0 });
        prop_assert!((grid.directions[0].clone() - e1).norm() <= 1e-12);
        for dir in &grid.directions {
            prop_assert_eq!(dir.len(), q);
            prop_assert!((dir.norm() - 1.0).abs() <= 1e-12);
            prop_assert!(dir[0] >= -1e-12);
        }
    }

    /// The compactly supported kernel is nonnegative, symmetric, bounded by
    /// its peak, and exactly zero outside [-1, 1]; the smooth kernel is
    /// positive everywhere and symmetric.
    #[test]
    fn kernel_shapes_hold_pointwise(u in -5.0f64..5.0) {
        let q = Kernel::Quartic.eval(u);
        prop_assert!(q >= 0.0);
        prop_assert!(q <= 15.0 / 16.0 + 1e-15);
        prop_assert!((q - Kernel::Quartic.eval(-u)).abs() <= 1e-15);
        if u.abs() > 1.0 {
            prop_assert_eq!(q, 0.0);
        }
        let g = Kernel::Gaussian.eval(u);
        prop_assert!(g > 0.0);
        prop_assert!((g - Kernel::Gaussian.eval(-u)).abs() <= 1e-15);
    }
}
