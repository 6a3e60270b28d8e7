//! Independent oracles: a transport LP for the Wasserstein distance and a
//! spectral solve of the single-agent ergodic problem.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::{single_agent_lambda, transport_lp};
use mfglab::model::ModelConfig;
use mfglab::particle::{solve_cell_problem, CellParams};
use mfglab::torus::{wasserstein1, ProbMeasure, TorusGrid};

fn random_measure(grid: TorusGrid, rng: &mut ChaCha8Rng, sparse: bool) -> ProbMeasure {
    let w = (0..grid.len())
        .map(|_| if sparse && rng.gen::<f64>() < 0.6 { 0.0 } else { rng.gen::<f64>() })
        .collect::<Vec<_>>();
    let w = if w.iter().all(|&x| x == 0.0) { vec![1.0; grid.len()] } else { w };
    ProbMeasure::from_weights(grid, w).unwrap()
}

#[test]
fn wasserstein_matches_transport_lp() {
    let grid = TorusGrid::line(16);
    let h = grid.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let a = random_measure(grid, &mut rng, case % 2 == 1);
        let b = random_measure(grid, &mut rng, case % 3 == 2);
        let ma: Vec<f64> = a.density().iter().map(|d| d * h).collect();
        let mb: Vec<f64> = b.density().iter().map(|d| d * h).collect();
        let lp = transport_lp(&ma, &mb, h);
        let w = wasserstein1(&a, &b).unwrap();
        assert!((w - lp).abs() <= 1e-9, "case {case}: closed form {w} vs LP {lp}");
    }
}

#[test]
fn spectral_oracle_is_resolved() {
    let a = single_agent_lambda(1.0, 16);
    let b = single_agent_lambda(1.0, 32);
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    // second-order perturbation: λ ≈ a²/(4·(2π)²) for small amplitude
    let small = single_agent_lambda(0.01, 16);
    let pert = 0.01f64.powi(2) / (4.0 * (2.0 * PI).powi(2));
    assert!((small - pert).abs() <= 1e-3 * pert, "{small} vs {pert}");
}

#[test]
fn single_particle_cell_problem_matches_spectral_oracle() {
    let grid = TorusGrid::line(64);
    let cfg = ModelConfig::cosine(grid, 1.0, 0.0).unwrap();
    let sol = solve_cell_problem(&cfg, 1, CellParams::default()).unwrap();
    let oracle = single_agent_lambda(1.0, 32);
    eprintln!("single particle: marching {} spectral {oracle}", sol.lambda_n);
    assert!(
        (sol.lambda_n - oracle).abs() <= 1e-4,
        "cell problem {} vs oracle {oracle}",
        sol.lambda_n
    );
}
