use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::torus::{Field, ProbMeasure, VectorField};

use super::{check_inputs, fp_residual, step_count, Method, Scheme, SolveReport, SolverOptions, TerminalCost, Trajectory};

const MEMORY: usize = 12;

/// Minimizes the discrete functional over drift paths, with the density
/// eliminated through the forward recursion. The returned trajectory carries
/// the adjoint state, which at the optimum is the HJB value function.
pub fn solve_variational(
    cfg: &ModelConfig,
    m0: &ProbMeasure,
    horizon: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<(Trajectory, SolveReport)> {
    solve_variational_with(cfg, m0, horizon, dt, opts, None, None)
}

struct Eval {
    value: f64,
    ms: Vec<Vec<f64>>,
    us: Vec<Vec<f64>>,
    /// Gradient of J with respect to every α^k_j.
    grad: Vec<f64>,
    /// m-weighted distance between α and D_pH(x, Du).
    gap: f64,
    /// Sum of the magnitudes of the terms of J, which sets its round-off.
    magnitude: f64,
}

fn evaluate(s: &Scheme, m0: &[f64], x: &[f64], terminal: Option<&dyn TerminalCost>) -> Eval {
    let n = s.n;
    let alpha: Vec<Vec<f64>> = x.chunks(n).map(|c| c.to_vec()).collect();
    let ms = s.forward(m0, &alpha);
    let value = s.total_cost(&ms, &alpha, terminal);
    let magnitude = value.abs()
        + alpha
            .iter()
            .enumerate()
            .map(|(k, a)| s.dt * s.running_cost_magnitude(&ms[k], a))
            .sum::<f64>();
    let us = s.adjoint(&ms, &alpha, terminal);
    let mut grad = vec![0.0; x.len()];
    let mut du = vec![0.0; n];
    let mut gap2 = 0.0;
    let w = s.dt * s.h;
    for (k, a) in alpha.iter().enumerate() {
        super::scheme::centered_diff(&us[k + 1], s.h, &mut du);
        for j in 0..n {
            let r = s.da_conjugate(j, a[j]) - du[j];
            let g = w * ms[k][j] * r;
            grad[k * n + j] = g;
            gap2 += g * r;
        }
    }
    Eval {
        value,
        ms,
        us,
        grad,
        gap: gap2.abs().sqrt(),
        magnitude,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Variational solve with an optional terminal cost and warm start.
pub fn solve_variational_with(
    cfg: &ModelConfig,
    m0: &ProbMeasure,
    horizon: f64,
    dt: f64,
    opts: SolverOptions,
    terminal: Option<&dyn TerminalCost>,
    warm_start: Option<&[VectorField]>,
) -> Result<(Trajectory, SolveReport)> {
    check_inputs(cfg, m0)?;
    let steps = step_count(horizon, dt)?;
    let s = Scheme::new(cfg, dt);
    let n = s.n;
    let mut x = vec![0.0; steps * n];
    if let Some(ws) = warm_start {
        if ws.len() != steps {
            return Err(Error::InvalidInput("warm start has the wrong number of steps".into()));
        }
        for (k, a) in ws.iter().enumerate() {
            x[k * n..(k + 1) * n].copy_from_slice(a.values());
        }
    }
    let m0d = m0.density();
    let mut cur = evaluate(&s, m0d, &x, terminal);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut gaps = Vec::new();
    while cur.gap > opts.tol {
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                method: "variational solver",
                iterations,
                gap: cur.gap,
                history: gaps,
            });
        }
        iterations += 1;

        // two-loop recursion
        let mut d: Vec<f64> = cur.grad.iter().map(|g| -g).collect();
        let mut coeffs = Vec::with_capacity(history.len());
        for (sv, yv, rho) in history.iter().rev() {
            let a = rho * dot(sv, &d);
            d.iter_mut().zip(yv).for_each(|(di, yi)| *di -= a * yi);
            coeffs.push(a);
        }
        // diagonal preconditioner: the Hessian in α^k_j scales like dt·h·m^k_j
        let weight: Vec<f64> = cur
            .ms
            .iter()
            .take(steps)
            .flat_map(|m| m.iter().map(|v| 1.0 / (s.dt * s.h * v.max(1e-12))))
            .collect();
        let gamma = history.back().map_or(1.0, |(sv, yv, _)| {
            dot(sv, yv) / yv.iter().zip(&weight).map(|(y, w)| y * y * w).sum::<f64>()
        });
        d.iter_mut().zip(&weight).for_each(|(v, w)| *v *= gamma * w);
        for ((sv, yv, rho), a) in history.iter().zip(coeffs.iter().rev()) {
            let b = rho * dot(yv, &d);
            d.iter_mut().zip(sv).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&cur.grad, &d);
        if !(slope < 0.0) {
            history.clear();
            d = cur.grad.iter().zip(&weight).map(|(g, w)| -g * w).collect();
            slope = dot(&cur.grad, &d);
        }

        // backtracking Armijo line search
        let mut step = 1.0;
        let next = loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let e = evaluate(&s, m0d, &trial, terminal);
            if e.value <= cur.value + 1e-4 * step * slope || step < 1e-12 {
                break (trial, e);
            }
            step *= 0.5;
        };
        let (nx, ne) = next;
        let sv: Vec<f64> = nx.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = ne.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > 1e-300 {
            history.push_back((sv, yv, 1.0 / sy));
            if history.len() > MEMORY {
                history.pop_front();
            }
        }
        if step < 1e-12 && ne.value >= cur.value {
            // line search stalled at round-off level
            x = nx;
            cur = ne;
            gaps.push(cur.gap);
            // J can no longer resolve a decrease of order gap²
            let floor = (10.0 * f64::EPSILON * cur.magnitude).sqrt();
            if cur.gap > opts.tol.max(floor) {
                return Err(Error::NonConvergence {
                    method: "variational solver",
                    iterations,
                    gap: cur.gap,
                    history: gaps,
                });
            }
            break;
        }
        x = nx;
        cur = ne;
        gaps.push(cur.gap);
    }

    let alpha: Vec<Vec<f64>> = x.chunks(n).map(|c| c.to_vec()).collect();
    let courant = s.courant(&alpha);
    if courant > opts.courant_limit {
        return Err(Error::Cfl {
            courant,
            limit: opts.courant_limit,
        });
    }
    let grid = *cfg.grid();
    let mut traj = Trajectory {
        grid,
        t0: 0.0,
        dt,
        m: cur.ms.iter().map(|m| s.measure(m)).collect(),
        alpha: alpha
            .into_iter()
            .map(|a| VectorField::new(grid, a).expect("sizes match"))
            .collect(),
        u: Some(cur.us.into_iter().map(|u| Field::new(grid, u).expect("sizes match")).collect()),
        fp_residual: 0.0,
    };
    traj.fp_residual = fp_residual(&traj);
    let report = SolveReport {
        value: cur.value,
        iterations,
        gap: cur.gap,
        method: Method::Variational,
        courant,
        fp_residual: traj.fp_residual,
    };
    Ok((traj, report))
}
