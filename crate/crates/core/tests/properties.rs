use proptest::prelude::*;

use mfglab::ergodic;
use mfglab::harness::{compare, Check, ExperimentKind, ResultField, RunManifest, Tolerances};
use mfglab::mather;
use mfglab::mfg::{self, SolverOptions};
use mfglab::model::ModelConfig;
use mfglab::semigroup::{self, MeasureFunctional};
use mfglab::torus::{self, Field, ProbMeasure, TorusGrid};

fn measure(weights: Vec<f64>) -> ProbMeasure {
    ProbMeasure::from_weights(TorusGrid::line(weights.len()), weights).unwrap()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wasserstein_is_a_metric(a in weights(16), b in weights(16), c in weights(16)) {
        let (a, b, c) = (measure(a), measure(b), measure(c));
        let ab = torus::wasserstein1(&a, &b).unwrap();
        let ba = torus::wasserstein1(&b, &a).unwrap();
        let bc = torus::wasserstein1(&b, &c).unwrap();
        let ac = torus::wasserstein1(&a, &c).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-14);
        prop_assert!(ac <= ab + bc + 1e-14);
        prop_assert!(torus::wasserstein1(&a, &a).unwrap() <= 1e-15);
        // no point is farther than half a period
        prop_assert!(ab <= 0.5 + 1e-14);
    }

    #[test]
    fn shifting_a_measure_costs_at_most_the_shift(w in weights(16), k in 1usize..8) {
        let grid = TorusGrid::line(16);
        let a = measure(w.clone());
        let shifted: Vec<f64> = (0..16).map(|j| w[(j + 16 - k) % 16]).collect();
        let b = measure(shifted);
        let d = torus::wasserstein1(&a, &b).unwrap();
        prop_assert!(d <= k as f64 * grid.spacing() + 1e-14);
    }

    #[test]
    fn difference_operators_annihilate_constants(c in -5.0f64..5.0, n in 8usize..40) {
        let f = Field::constant(TorusGrid::line(n), c);
        prop_assert!(torus::gradient(&f).max_abs() <= 1e-12);
        prop_assert!(torus::laplacian(&f).max_abs() <= 1e-9);
        prop_assert!(torus::composed_laplacian(&f).max_abs() <= 1e-9);
    }

    #[test]
    fn divergence_integrates_to_zero(w in weights(24)) {
        let f = Field::new(TorusGrid::line(24), w).unwrap();
        prop_assert!(torus::divergence(&torus::gradient(&f)).integral().abs() <= 1e-10);
    }

    #[test]
    fn manifests_round_trip_and_compare_equal(values in prop::collection::vec(-1e3f64..1e3, 1..6), seed in 0u64..1000) {
        let m = RunManifest {
            kind: ExperimentKind::Energy,
            spec_hash: "00".into(),
            code_version: "0".into(),
            seed,
            started_unix: 1.0,
            finished_unix: 2.0,
            results: values.iter().enumerate().map(|(i, v)| ResultField { name: format!("r{i}"), value: *v }).collect(),
            checks: vec![Check { name: "c".into(), pass: seed % 2 == 0, detail: "d".into() }],
        };
        let back = RunManifest::from_text(&m.to_text().unwrap()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert!(compare(&m, &back, &Tolerances::exact()).unwrap().is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solver_paths_conserve_mass(w in weights(16), amp in -0.5f64..0.5) {
        let grid = TorusGrid::line(16);
        let cfg = ModelConfig::cosine(grid, 0.2, amp).unwrap();
        let m0 = ProbMeasure::from_weights(grid, w).unwrap();
        let (traj, _) = mfg::solve_variational(&cfg, &m0, 1.0, 0.05, SolverOptions::default()).unwrap();
        for m in traj.m() {
            prop_assert!((m.mass() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn lax_oleinik_commutes_with_constants(w in weights(16), c in -2.0f64..2.0) {
        let grid = TorusGrid::line(16);
        let cfg = ModelConfig::kernel_benchmark(grid);
        let m = ProbMeasure::from_weights(grid, w).unwrap();
        let test = mather::cylindrical_dictionary(grid).unwrap().swap_remove(3);
        let phi = MeasureFunctional::cylindrical(test, 0.3);
        let opts = SolverOptions::default();
        let base = semigroup::lax_oleinik(&cfg, &phi, 0.2, &m, 0.0, 0.02, opts).unwrap();
        let up = semigroup::lax_oleinik(&cfg, &phi.shifted(c), 0.2, &m, 0.0, 0.02, opts).unwrap();
        prop_assert!((up - base - c).abs() <= 1e-10);
    }

    #[test]
    fn stationary_uniform_state_is_closed(n in 8usize..32) {
        let grid = TorusGrid::line(n);
        let cfg = ModelConfig::trivial(grid, 0.3);
        let (traj, _) = mfg::solve_variational(&cfg, &ProbMeasure::uniform(grid), 2.0, 0.05, SolverOptions::default()).unwrap();
        let occ = mather::occupation_measure(&traj, 1.0).unwrap();
        let tests = mather::cylindrical_dictionary(grid).unwrap();
        prop_assert!(mather::closedness_residual(&occ, &tests) <= 1e-12);
        let s = mather::smoothness_diagnostics(&occ);
        prop_assert!(s.grad_density.abs() <= 1e-12 && s.fisher.abs() <= 1e-12);
    }

    #[test]
    fn probe_panel_is_reproducible(seed in 0u64..1000) {
        let grid = TorusGrid::line(16);
        let a = ergodic::probe_panel(grid, seed);
        let b = ergodic::probe_panel(grid, seed);
        prop_assert_eq!(a.len(), 8);
        for (p, q) in a.iter().zip(&b) {
            prop_assert_eq!(&p.id, &q.id);
            prop_assert_eq!(p.measure.density(), q.measure.density());
        }
    }
}
