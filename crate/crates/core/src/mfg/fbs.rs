use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::torus::{Field, ProbMeasure, VectorField};

use super::{check_inputs, fp_residual, step_count, Method, Scheme, SolveReport, SolverOptions, Trajectory};

/// Fictitious play on the forward-backward system.
///
/// Starting from the heat flow of m0, each round solves the HJB equation
/// against the averaged density path, pushes m0 forward with the resulting
/// drift, and folds that best response into the average with weight 1/(k+1).
/// The returned trajectory is the last best response together with its drift
/// and value function, so α = D_pH(x, Du) holds exactly.
pub fn solve_fbs(
    cfg: &ModelConfig,
    m0: &ProbMeasure,
    horizon: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<(Trajectory, SolveReport)> {
    check_inputs(cfg, m0)?;
    let steps = step_count(horizon, dt)?;
    let s = Scheme::new(cfg, dt);
    let n = s.n;
    let zero = vec![vec![0.0; n]; steps];
    let mut mbar = s.forward(m0.density(), &zero);

    let best_response = |mbar: &[Vec<f64>]| {
        let (us, alpha) = s.hjb(mbar, None);
        let courant = s.courant(&alpha);
        if courant > opts.courant_limit {
            return Err(Error::Cfl {
                courant,
                limit: opts.courant_limit,
            });
        }
        let ms = s.forward(m0.density(), &alpha);
        let value = s.total_cost(&ms, &alpha, None);
        Ok((us, alpha, ms, value, courant))
    };

    // CFL is checked on the first best response before iterating
    let mut current = best_response(&mbar)?;
    let mut history = vec![current.3];
    let mut iterations = 1;
    let mut gap = f64::INFINITY;
    loop {
        let weight = 1.0 / (iterations as f64 + 1.0);
        for (avg, br) in mbar.iter_mut().zip(&current.2) {
            avg.iter_mut().zip(br).for_each(|(a, b)| *a += weight * (b - *a));
        }
        if gap <= opts.tol {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                method: "fictitious play",
                iterations,
                gap,
                history,
            });
        }
        let next = best_response(&mbar)?;
        iterations += 1;
        gap = (next.3 - current.3).abs();
        history.push(next.3);
        current = next;
    }

    let (us, alpha, ms, value, courant) = current;
    let grid = *cfg.grid();
    let mut traj = Trajectory {
        grid,
        t0: 0.0,
        dt,
        m: ms.iter().map(|m| s.measure(m)).collect(),
        alpha: alpha
            .into_iter()
            .map(|a| VectorField::new(grid, a).expect("sizes match"))
            .collect(),
        u: Some(us.into_iter().map(|u| Field::new(grid, u).expect("sizes match")).collect()),
        fp_residual: 0.0,
    };
    traj.fp_residual = fp_residual(&traj);
    let report = SolveReport {
        value,
        iterations,
        gap,
        method: Method::FictitiousPlay,
        courant,
        fp_residual: traj.fp_residual,
    };
    Ok((traj, report))
}
