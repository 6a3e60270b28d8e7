//! Reference solvers shared by the integration tests.

use std::f64::consts::PI;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::{DMatrix, SymmetricEigen};

/// Minimal transport cost between two node masses with circle distance.
pub fn transport_lp(a: &[f64], b: &[f64], h: f64) -> f64 {
    let n = a.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let k = i.abs_diff(j);
            let dist = h * k.min(n - k) as f64;
            vars.push(lp.add_var(dist, (0.0, f64::INFINITY)));
        }
    }
    for i in 0..n {
        let mut row = LinearExpr::empty();
        for j in 0..n {
            row.add(vars[i * n + j], 1.0);
        }
        lp.add_constraint(row, ComparisonOp::Eq, a[i]);
    }
    // the last column constraint is implied by total mass
    for j in 0..n - 1 {
        let mut col = LinearExpr::empty();
        for i in 0..n {
            col.add(vars[i * n + j], 1.0);
        }
        lp.add_constraint(col, ComparisonOp::Eq, b[j]);
    }
    lp.solve().expect("transport LP is feasible").objective()
}

/// Ergodic constant of −v'' + ½|v'|² + V(x) = λ on the circle.
///
/// With v = −2 ln φ the equation becomes −2φ'' − Vφ = −λφ, so λ is minus the
/// ground-state energy. The operator is discretized in the Fourier basis,
/// where V = a·cos(2πx) couples neighbouring modes with weight a/2.
pub fn single_agent_lambda(amplitude: f64, modes: usize) -> f64 {
    let size = 2 * modes + 1;
    let mut op = DMatrix::<f64>::zeros(size, size);
    for r in 0..size {
        let k = r as f64 - modes as f64;
        op[(r, r)] = 2.0 * (2.0 * PI * k).powi(2);
        if r + 1 < size {
            op[(r, r + 1)] = -0.5 * amplitude;
            op[(r + 1, r)] = -0.5 * amplitude;
        }
    }
    let eig = SymmetricEigen::new(op);
    -eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}
