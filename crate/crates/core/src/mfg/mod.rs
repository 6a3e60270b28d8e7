//! Finite-horizon potential MFG on the one-dimensional torus.
//!
//! Both solvers work on the same discrete problem. With A = I − dt·L where L
//! is the composed Laplacian div∘grad, the density moves by
//!
//!   A m^{k+1} = m^k + dt·div(m^k α^k),
//!
//! and the cost is J = Σ_k dt·[∫ H*(x, α^k) m^k + 𝓕(m^k)] (+ Φ(m^K) for the
//! Lax-Oleinik operator). The adjoint of this recursion is the implicit HJB
//! step A u^k = u^{k+1} + dt·[F(m^k) − H(x, Du^{k+1})] at α^k = D_pH(x, Du^{k+1}),
//! so the optimality system of the discrete functional and the discrete
//! forward-backward system coincide.

mod fbs;
mod io;
mod scheme;
mod variational;

pub use fbs::solve_fbs;
pub use io::{load_trajectory, save_trajectory};
pub use variational::{solve_variational, solve_variational_with};

pub(crate) use scheme::Scheme;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::torus::{Field, ProbMeasure, TorusGrid, VectorField};

/// A cost on the terminal measure, added to the running cost.
pub trait TerminalCost: Sync {
    fn value(&self, m: &ProbMeasure) -> f64;

    /// Flat derivative δΦ/δm(m, ·); `None` means the cost is treated as
    /// locally constant (no terminal forcing of the adjoint).
    fn flat_derivative(&self, m: &ProbMeasure) -> Option<Field>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Variational,
    FictitiousPlay,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Variational => "variational",
            Method::FictitiousPlay => "fictitious-play",
        }
    }
}

/// Numerical knobs shared by both solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Largest admissible dt·max|α|/h.
    pub courant_limit: f64,
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 5000,
            courant_limit: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Discrete value of the minimization problem from the initial measure.
    pub value: f64,
    pub iterations: usize,
    /// Variational: m-weighted L² distance between α and D_pH(x,Du).
    /// Fictitious play: last change of the best-response value.
    pub gap: f64,
    pub method: Method,
    pub courant: f64,
    pub fp_residual: f64,
}

/// A discrete MFG path on [t0, t0 + K·dt].
///
/// `m` and `u` hold K+1 time levels. `alpha` holds one drift per step: α^k
/// drives m^k to m^{k+1} and is paired with m^k in the running cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub(crate) grid: TorusGrid,
    pub(crate) t0: f64,
    pub(crate) dt: f64,
    pub(crate) m: Vec<ProbMeasure>,
    pub(crate) alpha: Vec<VectorField>,
    pub(crate) u: Option<Vec<Field>>,
    pub(crate) fp_residual: f64,
}

impl Trajectory {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.m.len()).map(|k| self.time(k)).collect()
    }

    pub fn m(&self) -> &[ProbMeasure] {
        &self.m
    }

    pub fn alpha(&self) -> &[VectorField] {
        &self.alpha
    }

    pub fn u(&self) -> Option<&[Field]> {
        self.u.as_deref()
    }

    /// Flux w = m·α at step k.
    pub fn w(&self, k: usize) -> VectorField {
        let vals = self.alpha[k]
            .values()
            .iter()
            .zip(self.m[k].density())
            .map(|(a, m)| a * m)
            .collect();
        VectorField::new(self.grid, vals).expect("sizes match")
    }

    pub fn fp_residual(&self) -> f64 {
        self.fp_residual
    }

    /// Builds a trajectory from user data; α must have one entry per step.
    pub fn from_parts(
        t0: f64,
        dt: f64,
        m: Vec<ProbMeasure>,
        alpha: Vec<VectorField>,
        u: Option<Vec<Field>>,
    ) -> Result<Self> {
        let grid = *m
            .first()
            .ok_or_else(|| Error::InvalidInput("trajectory needs at least one measure".into()))?
            .grid();
        if grid.dim() != 1 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        if m.len() != alpha.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} measures need {} drifts, got {}",
                m.len(),
                m.len() - 1,
                alpha.len()
            )));
        }
        if let Some(u) = &u {
            if u.len() != m.len() {
                return Err(Error::InvalidInput("u needs one field per time level".into()));
            }
        }
        if m.iter().any(|x| x.grid() != &grid)
            || alpha.iter().any(|x| x.grid() != &grid)
            || u.iter().flatten().any(|x| x.grid() != &grid)
        {
            return Err(Error::GridMismatch("trajectory entries live on different grids".into()));
        }
        let mut traj = Self {
            grid,
            t0,
            dt,
            m,
            alpha,
            u,
            fp_residual: 0.0,
        };
        traj.fp_residual = fp_residual(&traj);
        Ok(traj)
    }

    /// Restriction to steps [k0, k1].
    pub fn window(&self, k0: usize, k1: usize) -> Trajectory {
        Trajectory {
            grid: self.grid,
            t0: self.time(k0),
            dt: self.dt,
            m: self.m[k0..=k1].to_vec(),
            alpha: self.alpha[k0..k1].to_vec(),
            u: self.u.as_ref().map(|u| u[k0..=k1].to_vec()),
            fp_residual: self.fp_residual,
        }
    }
}

/// Number of steps for horizon T, requiring dt to divide T.
pub(crate) fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidInput(format!("need dt > 0 and T >= 0, got dt={dt} T={horizon}")));
    }
    let k = (horizon / dt).round();
    if (k * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::InvalidInput(format!("dt={dt} does not divide T={horizon}")));
    }
    Ok(k as usize)
}

pub(crate) fn check_inputs(cfg: &ModelConfig, m0: &ProbMeasure) -> Result<()> {
    if m0.grid() != cfg.grid() {
        return Err(Error::GridMismatch("initial measure and model grids differ".into()));
    }
    if cfg.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension(cfg.grid().dim()));
    }
    if !(m0.mass() > 0.0) {
        return Err(Error::InvalidInput("initial measure has zero total mass".into()));
    }
    Ok(())
}

/// Running cost Σ_k dt·[∫ H*(x,α^k) dm^k + 𝓕(m^k)], one evaluation per step
/// at the state the step starts from (the quadrature the solvers minimize).
pub fn evaluate_cost(cfg: &ModelConfig, traj: &Trajectory) -> Result<f64> {
    if traj.alpha.len() + 1 != traj.m.len() {
        return Err(Error::InvalidInput("trajectory is missing drifts".into()));
    }
    if traj.grid != *cfg.grid() {
        return Err(Error::GridMismatch("trajectory and model grids differ".into()));
    }
    Ok(partial_cost(cfg, traj, 0, traj.steps()))
}

/// Running cost over steps [k0, k1).
pub fn partial_cost(cfg: &ModelConfig, traj: &Trajectory, k0: usize, k1: usize) -> f64 {
    let s = Scheme::new(cfg, traj.dt);
    (k0..k1)
        .map(|k| s.dt * s.running_cost(traj.m[k].density(), traj.alpha[k].values()))
        .sum()
}

/// Flat derivative of the discrete value with respect to the initial measure,
/// (I − dt·L)u⁰, defined up to an additive constant.
pub fn value_gradient(traj: &Trajectory) -> Option<Field> {
    let u0 = traj.u.as_ref()?.first()?;
    let h = traj.grid.spacing();
    let mut lap = vec![0.0; u0.values().len()];
    scheme::composed_laplacian(u0.values(), h, &mut lap);
    let vals = u0.values().iter().zip(&lap).map(|(u, l)| u - traj.dt * l).collect();
    Some(Field::new(traj.grid, vals).expect("sizes match"))
}

/// Largest L¹ defect of the discrete Fokker-Planck step, per unit time.
pub fn fp_residual(traj: &Trajectory) -> f64 {
    let n = traj.grid.len();
    let h = traj.grid.spacing();
    let dt = traj.dt;
    let mut worst: f64 = 0.0;
    let mut flux = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut lap = vec![0.0; n];
    for k in 0..traj.steps() {
        let mk = traj.m[k].density();
        let mk1 = traj.m[k + 1].density();
        for j in 0..n {
            flux[j] = mk[j] * traj.alpha[k].values()[j];
        }
        scheme::centered_diff(&flux, h, &mut div);
        scheme::composed_laplacian(mk1, h, &mut lap);
        let defect: f64 = (0..n)
            .map(|j| (mk1[j] - dt * lap[j] - mk[j] - dt * div[j]).abs())
            .sum();
        worst = worst.max(h * defect / dt);
    }
    worst
}

/// |𝒰ᵀ(0,m0) − [cost of the optimal path on [0,t_mid] + 𝒰ᵀ(t_mid, m(t_mid))]|
/// with fresh variational solves. The value 𝒰ᵀ(t,·) is the horizon T−t problem.
pub fn dynamic_programming_gap(
    cfg: &ModelConfig,
    m0: &ProbMeasure,
    horizon: f64,
    t_mid: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<f64> {
    if !(0.0..=horizon).contains(&t_mid) {
        return Err(Error::InvalidInput(format!("t_mid={t_mid} outside [0,{horizon}]")));
    }
    let (traj, full) = solve_variational(cfg, m0, horizon, dt, opts)?;
    let k_mid = step_count(t_mid, dt)?;
    let head = partial_cost(cfg, &traj, 0, k_mid);
    let (_, tail) = solve_variational(cfg, &traj.m[k_mid], horizon - t_mid, dt, opts)?;
    Ok((full.value - (head + tail.value)).abs())
}
