//! Ergodic constant from long horizons, the energy invariant c(u,m), corrector
//! tables on probe panels and the monotonicity of ξ.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mfg::{self, SolverOptions, Trajectory};
use crate::model::ModelConfig;
use crate::torus::{self, Field, ProbMeasure, TorusGrid};

/// c(u,m) = ∫ (H(x,Du) − Δu) dm − 𝓕(m), with Δ the composed Laplacian the
/// solvers use.
pub fn energy(cfg: &ModelConfig, u: &Field, m: &ProbMeasure) -> Result<f64> {
    if u.grid() != m.grid() || u.grid() != cfg.grid() {
        return Err(Error::GridMismatch("energy needs u, m and the model on one grid".into()));
    }
    let g = *u.grid();
    let du = torus::gradient(u);
    let lap = torus::composed_laplacian(u);
    let mut acc = 0.0;
    for i in 0..g.len() {
        let x = g.coords(i);
        acc += (cfg.hamiltonian(&x, du.at(i)) - lap.values()[i]) * m.density()[i];
    }
    Ok(acc * g.cell_volume() - cfg.coupling_value(m)?)
}

/// Largest integrand magnitude max_x |H(x,Du) − Δu| + |𝓕(m)|.
fn energy_scale(cfg: &ModelConfig, u: &Field, m: &ProbMeasure) -> Result<f64> {
    let g = *u.grid();
    let du = torus::gradient(u);
    let lap = torus::composed_laplacian(u);
    let local = (0..g.len())
        .map(|i| (cfg.hamiltonian(&g.coords(i), du.at(i)) - lap.values()[i]).abs())
        .fold(0.0, f64::max);
    Ok(local + cfg.coupling_value(m)?.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDiagnostic {
    pub times: Vec<f64>,
    pub c_values: Vec<f64>,
    /// max |c(t) − c(s)|.
    pub drift: f64,
    /// Time average of c along the trajectory.
    pub c_mean: f64,
    /// Largest integrand magnitude seen along the trajectory.
    pub scale: f64,
    /// |c_mean − λ̂| when λ̂ is supplied.
    pub gap: Option<f64>,
}

/// Energy at every step k, taken as the mean of the two pairings of m^k with
/// u^k and with u^{k+1}. Each pairing alone carries an O(dt) error of opposite
/// sign in fast transients; their mean is second order and coincides with
/// both on stationary stretches.
pub fn energy_drift(cfg: &ModelConfig, traj: &Trajectory, lambda_hat: Option<f64>) -> Result<EnergyDiagnostic> {
    let u = traj
        .u()
        .ok_or_else(|| Error::InvalidInput("trajectory carries no value function".into()))?;
    let mut times = Vec::with_capacity(traj.steps());
    let mut c_values = Vec::with_capacity(traj.steps());
    let mut scale: f64 = 0.0;
    for k in 0..traj.steps() {
        let m = &traj.m()[k];
        times.push(traj.time(k));
        c_values.push(0.5 * (energy(cfg, &u[k], m)? + energy(cfg, &u[k + 1], m)?));
        scale = scale
            .max(energy_scale(cfg, &u[k], m)?)
            .max(energy_scale(cfg, &u[k + 1], m)?);
    }
    let hi = c_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = c_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let drift = if c_values.is_empty() { 0.0 } else { hi - lo };
    let c_mean = if c_values.is_empty() {
        0.0
    } else {
        c_values.iter().sum::<f64>() / c_values.len() as f64
    };
    Ok(EnergyDiagnostic {
        times,
        c_values,
        drift,
        c_mean,
        scale,
        gap: lambda_hat.map(|l| (c_mean - l).abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMethod {
    Slope,
    Increment,
    NParticle,
}

impl LambdaMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            LambdaMethod::Slope => "slope",
            LambdaMethod::Increment => "increment",
            LambdaMethod::NParticle => "n_particle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEstimate {
    pub value: f64,
    pub method: LambdaMethod,
    pub horizons: Vec<f64>,
    /// RMS residual of the linear fit (zero for two-point increments).
    pub residual: f64,
    pub probe: Option<String>,
}

/// Slope and increment estimates from the same set of solves.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaFit {
    pub slope: LambdaEstimate,
    pub increment: LambdaEstimate,
    /// Intercept of the fit, a proxy for χ(m0).
    pub intercept: f64,
    /// 𝒰ᵀ(0, m0) per horizon.
    pub values: Vec<f64>,
}

/// Values 𝒰ᵀ(0,m) for several horizons, solved concurrently and returned in order.
pub fn values_at_horizons(
    cfg: &ModelConfig,
    m0: &ProbMeasure,
    horizons: &[f64],
    dt: f64,
    opts: SolverOptions,
) -> Result<Vec<f64>> {
    horizons
        .par_iter()
        .map(|&t| {
            mfg::solve_variational(cfg, m0, t, dt, opts)
                .map(|(_, r)| r.value)
                .map_err(|e| e.context(format!("horizon {t}")))
        })
        .collect()
}

/// Least-squares line through (T, 𝒰ᵀ(0,m0)); λ̂ = −slope.
pub fn estimate_lambda_slope(
    cfg: &ModelConfig,
    m0: &ProbMeasure,
    horizons: &[f64],
    dt: f64,
    opts: SolverOptions,
) -> Result<LambdaFit> {
    if horizons.len() < 3 || horizons.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("need at least 3 increasing horizons".into()));
    }
    let values = values_at_horizons(cfg, m0, horizons, dt, opts)?;
    Ok(fit_lambda(horizons, &values))
}

pub(crate) fn fit_lambda(horizons: &[f64], values: &[f64]) -> LambdaFit {
    let k = horizons.len() as f64;
    let tm = horizons.iter().sum::<f64>() / k;
    let vm = values.iter().sum::<f64>() / k;
    let sxy: f64 = horizons.iter().zip(values).map(|(t, v)| (t - tm) * (v - vm)).sum();
    let sxx: f64 = horizons.iter().map(|t| (t - tm) * (t - tm)).sum();
    let slope = sxy / sxx;
    let intercept = vm - slope * tm;
    let residual = (horizons
        .iter()
        .zip(values)
        .map(|(t, v)| (v - intercept - slope * t).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    let last = horizons.len() - 1;
    let inc = -(values[last] - values[last - 1]) / (horizons[last] - horizons[last - 1]);
    LambdaFit {
        slope: LambdaEstimate {
            value: -slope,
            method: LambdaMethod::Slope,
            horizons: horizons.to_vec(),
            residual,
            probe: None,
        },
        increment: LambdaEstimate {
            value: inc,
            method: LambdaMethod::Increment,
            horizons: horizons[last - 1..].to_vec(),
            residual: 0.0,
            probe: None,
        },
        intercept,
        values: values.to_vec(),
    }
}

/// A named probe measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub id: String,
    pub measure: ProbMeasure,
}

/// Density proportional to exp(κ·cos(2π(x − center))).
pub fn von_mises(grid: TorusGrid, center: f64, kappa: f64) -> ProbMeasure {
    ProbMeasure::from_weights(
        grid,
        (0..grid.len())
            .map(|j| (kappa * ((2.0 * PI * (grid.axis_coord(j) - center)).cos() - 1.0)).exp())
            .collect(),
    )
    .expect("positive weights")
}

/// The default 8-probe panel: uniform, two concentrations, two shifted bumps,
/// a two-bump mixture and two seeded random histograms.
pub fn probe_panel(grid: TorusGrid, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = || {
        let w: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
        ProbMeasure::from_weights(grid, w).expect("positive weights")
    };
    let r1 = random();
    let r2 = random();
    let a = von_mises(grid, 0.2, 4.0);
    let b = von_mises(grid, 0.7, 4.0);
    let mix = ProbMeasure::from_weights(
        grid,
        a.density().iter().zip(b.density()).map(|(x, y)| 0.5 * (x + y)).collect(),
    )
    .expect("positive weights");
    vec![
        Probe { id: "uniform".into(), measure: ProbMeasure::uniform(grid) },
        Probe { id: "bump_k2".into(), measure: von_mises(grid, 0.5, 2.0) },
        Probe { id: "bump_k8".into(), measure: von_mises(grid, 0.5, 8.0) },
        Probe { id: "shift_q1".into(), measure: von_mises(grid, 0.25, 4.0) },
        Probe { id: "shift_q3".into(), measure: von_mises(grid, 0.75, 4.0) },
        Probe { id: "mixture".into(), measure: mix },
        Probe { id: "random_a".into(), measure: r1 },
        Probe { id: "random_b".into(), measure: r2 },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorTable {
    pub probes: Vec<Probe>,
    /// χ̂(mᵢ) = 𝒰ᵀ(0,mᵢ) + λ̂T.
    pub chi_hat: Vec<f64>,
    /// Flat derivative of 𝒰ᵀ(0,·) at each probe.
    pub gradients: Vec<Field>,
    pub horizon: f64,
    pub lambda_used: f64,
    /// (i, j, |χ̂ᵢ − χ̂ⱼ| / W1(mᵢ, mⱼ)) for every pair with positive distance.
    pub lipschitz: Vec<(usize, usize, f64)>,
}

impl CorrectorTable {
    pub fn max_lipschitz(&self) -> f64 {
        self.lipschitz.iter().map(|l| l.2).fold(0.0, f64::max)
    }

    /// max over probes of |χ̂ − other χ̂|, for tables on the same panel.
    pub fn sup_distance(&self, other: &CorrectorTable) -> Result<f64> {
        if self.probes.len() != other.probes.len()
            || self.probes.iter().zip(&other.probes).any(|(a, b)| a.id != b.id)
        {
            return Err(Error::InvalidInput("tables use different probe panels".into()));
        }
        Ok(self
            .chi_hat
            .iter()
            .zip(&other.chi_hat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Nearest probe in W1 and its distance.
    pub fn nearest(&self, m: &ProbMeasure) -> Result<(usize, f64)> {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.probes.iter().enumerate() {
            let d = torus::wasserstein1(&p.measure, m)?;
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }
}

pub fn corrector_table(
    cfg: &ModelConfig,
    probes: &[Probe],
    horizon: f64,
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<CorrectorTable> {
    let solved: Vec<(f64, Field)> = probes
        .par_iter()
        .map(|p| {
            mfg::solve_variational(cfg, &p.measure, horizon, dt, opts)
                .map(|(traj, r)| (r.value, mfg::value_gradient(&traj).expect("variational output carries u")))
                .map_err(|e| e.context(format!("probe {}", p.id)))
        })
        .collect::<Result<_>>()?;
    let (values, gradients): (Vec<f64>, Vec<Field>) = solved.into_iter().unzip();
    let chi_hat: Vec<f64> = values.iter().map(|v| v + lambda_hat * horizon).collect();
    let mut lipschitz = Vec::new();
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            let d = torus::wasserstein1(&probes[i].measure, &probes[j].measure)?;
            if d > 0.0 {
                lipschitz.push((i, j, (chi_hat[i] - chi_hat[j]).abs() / d));
            }
        }
    }
    Ok(CorrectorTable {
        probes: probes.to_vec(),
        chi_hat,
        gradients,
        horizon,
        lambda_used: lambda_hat,
        lipschitz,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiReport {
    pub times: Vec<f64>,
    /// ξ(t) = 𝒰ᵀ(t, m0) + λ̂(T − t).
    pub xi: Vec<f64>,
    /// max over consecutive sample times of ξ(t₂) − ξ(t₁), floored at 0.
    pub max_increment: f64,
}

impl XiReport {
    pub fn max_abs(&self) -> f64 {
        self.xi.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Evaluates ξ at increasing sample times with fresh solves; 𝒰ᵀ(t,m0) is the
/// value of the horizon T − t problem started from m0.
pub fn xi_monotonicity(
    cfg: &ModelConfig,
    m0: &ProbMeasure,
    horizon: f64,
    sample_times: &[f64],
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<XiReport> {
    if sample_times.windows(2).any(|w| !(w[1] > w[0])) || sample_times.iter().any(|t| !(0.0..horizon).contains(t)) {
        return Err(Error::InvalidInput("sample times must increase inside [0, T)".into()));
    }
    let remaining: Vec<f64> = sample_times.iter().map(|t| horizon - t).collect();
    let values = values_at_horizons(cfg, m0, &remaining, dt, opts)?;
    let xi: Vec<f64> = values.iter().zip(&remaining).map(|(v, s)| v + lambda_hat * s).collect();
    let max_increment = xi.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(XiReport {
        times: sample_times.to_vec(),
        xi,
        max_increment,
    })
}
