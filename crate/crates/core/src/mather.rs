//! Occupation measures of long optimal trajectories and the Mather-measure
//! checks: closedness against cylindrical test functionals, the averaged
//! Lagrangian objective, smoothness of the sampled densities and the weak-KAM
//! identity.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mfg::Trajectory;
use crate::model::ModelConfig;
use crate::torus::{self, Field, ProbMeasure, TorusGrid, VectorField};

/// One (m, α) pair of an occupation measure. `u_next` is the value function
/// one step later when the trajectory carries it, so that α = D_pH(x, Du_next)
/// for PDE-solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub m: ProbMeasure,
    pub alpha: VectorField,
    pub u_next: Option<Field>,
}

/// Uniform average of Dirac masses at (m(t), α(t)) over the stored steps of
/// [burn_in, T).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    samples: Vec<Sample>,
    horizon: f64,
    burn_in: f64,
}

impl OccupationMeasure {
    /// Equal weights over arbitrary samples, e.g. a window before burn-in or a
    /// single degenerate sample.
    pub fn from_samples(samples: Vec<Sample>, horizon: f64, burn_in: f64) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidInput("occupation measure needs at least one sample".into()))?;
        let grid = *first.m.grid();
        if samples.iter().any(|s| s.m.grid() != &grid || s.alpha.grid() != &grid) {
            return Err(Error::GridMismatch("samples live on different grids".into()));
        }
        Ok(Self {
            samples,
            horizon,
            burn_in,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.samples.len() as f64
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in
    }

    pub fn grid(&self) -> &TorusGrid {
        self.samples[0].m.grid()
    }

    fn average(&self, f: impl Fn(&Sample) -> f64 + Sync + Send) -> f64 {
        self.samples.par_iter().map(f).collect::<Vec<_>>().iter().sum::<f64>() * self.weight()
    }
}

/// Samples every stored step k with t_k − t0 ≥ burn_in, pairing m^k with α^k.
pub fn occupation_measure(traj: &Trajectory, burn_in: f64) -> Result<OccupationMeasure> {
    if !(burn_in >= 1.0) {
        return Err(Error::InvalidInput(format!("burn-in must be at least 1 time unit, got {burn_in}")));
    }
    if !(traj.horizon() > burn_in) {
        return Err(Error::HorizonTooShort {
            horizon: traj.horizon(),
            burn_in,
        });
    }
    let first = (burn_in / traj.dt() - 1e-9).ceil() as usize;
    let samples = (first..traj.steps())
        .map(|k| Sample {
            t: traj.time(k),
            m: traj.m()[k].clone(),
            alpha: traj.alpha()[k].clone(),
            u_next: traj.u().map(|u| u[k + 1].clone()),
        })
        .collect();
    OccupationMeasure::from_samples(samples, traj.horizon(), burn_in)
}

/// Smooth function of one variable with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum Outer {
    /// Σ c_i s^i.
    Polynomial(Vec<f64>),
    /// a·cos(ω s) + b·sin(ω s).
    Trig { cos: f64, sin: f64, freq: f64 },
}

impl Outer {
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Outer::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| acc * s + ci),
            Outer::Trig { cos, sin, freq } => cos * (freq * s).cos() + sin * (freq * s).sin(),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Outer::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, ci)| acc * s + i as f64 * ci),
            Outer::Trig { cos, sin, freq } => freq * (-cos * (freq * s).sin() + sin * (freq * s).cos()),
        }
    }
}

/// Φ(m) = φ(∫ψ dm), with D_mΦ(m,y) = φ'(∫ψ dm)·Dψ(y) and
/// div_y D_mΦ(m,y) = φ'(∫ψ dm)·div Dψ(y).
#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalTest {
    pub id: String,
    outer: Outer,
    inner: Field,
    grad: VectorField,
    div_grad: Field,
}

impl CylindricalTest {
    pub fn new(id: impl Into<String>, outer: Outer, inner: Field) -> Result<Self> {
        let id = id.into();
        if inner.grid().dim() != 1 {
            return Err(Error::UnsupportedDimension(inner.grid().dim()));
        }
        for s in [-0.8, 0.0, 0.3, 1.1] {
            let eps = 1e-5;
            let fd = (outer.value(s + eps) - outer.value(s - eps)) / (2.0 * eps);
            let d = outer.derivative(s);
            if !((fd - d).abs() <= 1e-6 * (1.0 + d.abs())) {
                return Err(Error::InvalidInput(format!(
                    "test {id}: outer derivative {d} disagrees with difference quotient {fd} at {s}"
                )));
            }
        }
        let grad = torus::gradient(&inner);
        let div_grad = torus::divergence(&grad);
        Ok(Self {
            id,
            outer,
            inner,
            grad,
            div_grad,
        })
    }

    pub fn outer(&self) -> &Outer {
        &self.outer
    }

    pub fn inner(&self) -> &Field {
        &self.inner
    }

    /// ∫ψ dm. Panics if m lives on another grid.
    pub fn moment(&self, m: &ProbMeasure) -> f64 {
        m.integrate(&self.inner).expect("measure on the test's grid")
    }

    pub fn value(&self, m: &ProbMeasure) -> f64 {
        self.outer.value(self.moment(m))
    }

    /// Flat derivative φ'(∫ψ dm)·ψ.
    pub fn flat_derivative(&self, m: &ProbMeasure) -> Field {
        let d = self.outer.derivative(self.moment(m));
        Field::new(*self.inner.grid(), self.inner.values().iter().map(|v| d * v).collect()).expect("same grid")
    }

    pub fn dm(&self, m: &ProbMeasure) -> VectorField {
        let d = self.outer.derivative(self.moment(m));
        VectorField::new(*self.inner.grid(), self.grad.values().iter().map(|v| d * v).collect()).expect("same grid")
    }

    pub fn div_dm(&self, m: &ProbMeasure) -> Field {
        let d = self.outer.derivative(self.moment(m));
        Field::new(*self.inner.grid(), self.div_grad.values().iter().map(|v| d * v).collect()).expect("same grid")
    }

    /// ∫ div_y D_mΦ dm − ∫ D_mΦ·α dm, the rate of change of Φ along the
    /// Fokker-Planck flow driven by α.
    pub fn generator(&self, m: &ProbMeasure, alpha: &VectorField) -> f64 {
        let d = self.outer.derivative(self.moment(m));
        let h = m.grid().cell_volume();
        let acc: f64 = (0..m.density().len())
            .map(|j| (self.div_grad.values()[j] - self.grad.values()[j] * alpha.values()[j]) * m.density()[j])
            .sum();
        d * acc * h
    }
}

type Profile = fn(f64) -> f64;

/// The 12 tests φ ∈ {identity, square, cos} × ψ ∈ {sin 2πx, cos 2πx, sin 4πx, cos 4πx}.
pub fn cylindrical_dictionary(grid: TorusGrid) -> Result<Vec<CylindricalTest>> {
    let outers = [
        ("id", Outer::Polynomial(vec![0.0, 1.0])),
        ("sq", Outer::Polynomial(vec![0.0, 0.0, 1.0])),
        (
            "cos",
            Outer::Trig {
                cos: 1.0,
                sin: 0.0,
                freq: 1.0,
            },
        ),
    ];
    let inners: [(&str, Profile); 4] = [
        ("sin1", |x| (2.0 * PI * x).sin()),
        ("cos1", |x| (2.0 * PI * x).cos()),
        ("sin2", |x| (4.0 * PI * x).sin()),
        ("cos2", |x| (4.0 * PI * x).cos()),
    ];
    let mut tests = Vec::with_capacity(12);
    for (oname, outer) in &outers {
        for (iname, f) in &inners {
            tests.push(CylindricalTest::new(
                format!("{oname}_{iname}"),
                outer.clone(),
                Field::from_fn(grid, |x| f(x[0])),
            )?);
        }
    }
    Ok(tests)
}

/// Sample average of the generator, one value per test.
pub fn closedness_terms(occ: &OccupationMeasure, tests: &[CylindricalTest]) -> Vec<f64> {
    tests
        .iter()
        .map(|test| occ.average(|s| test.generator(&s.m, &s.alpha)))
        .collect()
}

/// max over tests of |∫ [∫ div_y D_mΦ dm − ∫ D_mΦ·α dm] dν|.
pub fn closedness_residual(occ: &OccupationMeasure, tests: &[CylindricalTest]) -> f64 {
    closedness_terms(occ, tests).into_iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// ∫ H*(y, α) dm + 𝓕(m) at one sample.
pub fn objective_term(cfg: &ModelConfig, s: &Sample) -> Result<f64> {
    let g = *s.m.grid();
    let lag: f64 = (0..g.len())
        .map(|j| cfg.conjugate(&g.coords(j), s.alpha.at(j)) * s.m.density()[j])
        .sum();
    Ok(lag * g.cell_volume() + cfg.coupling_value(&s.m)?)
}

/// Sample average of ∫ H*(y, α) dm + 𝓕(m).
pub fn mather_objective(cfg: &ModelConfig, occ: &OccupationMeasure) -> Result<f64> {
    if occ.grid() != cfg.grid() {
        return Err(Error::GridMismatch("occupation measure and model grids differ".into()));
    }
    let terms: Result<Vec<f64>> = occ.samples.par_iter().map(|s| objective_term(cfg, s)).collect();
    Ok(terms?.iter().sum::<f64>() * occ.weight())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    /// 1 / min m.
    pub inv_density: f64,
    /// max |Dm|.
    pub grad_density: f64,
    /// ∫ |Dm/m|² m.
    pub fisher: f64,
}

/// Smoothness of one density; infinite where a cell is empty.
pub fn smoothness(m: &ProbMeasure) -> Smoothness {
    let dm = torus::gradient(&m.as_field());
    let d = m.density();
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let grad_density = dm.max_abs();
    let fisher = if min > 0.0 {
        d.iter().zip(dm.values()).map(|(mj, g)| g * g / mj).sum::<f64>() * m.grid().cell_volume()
    } else {
        f64::INFINITY
    };
    Smoothness {
        inv_density: if min > 0.0 { 1.0 / min } else { f64::INFINITY },
        grad_density,
        fisher,
    }
}

/// Componentwise maximum of the smoothness diagnostics over samples.
pub fn smoothness_diagnostics(occ: &OccupationMeasure) -> Smoothness {
    occ.samples
        .par_iter()
        .map(|s| smoothness(&s.m))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            Smoothness {
                inv_density: 0.0,
                grad_density: 0.0,
                fisher: 0.0,
            },
            |a, b| Smoothness {
                inv_density: a.inv_density.max(b.inv_density),
                grad_density: a.grad_density.max(b.grad_density),
                fisher: a.fisher.max(b.fisher),
            },
        )
}

/// ∫ q₁·Dm + ∫ H(y, q₁) dm − 𝓕(m) − λ̂ with q₁ = D_aH*(y, α).
pub fn identity_term(cfg: &ModelConfig, s: &Sample, lambda_hat: f64) -> Result<f64> {
    let g = *s.m.grid();
    let dm = torus::gradient(&s.m.as_field());
    let mut acc = 0.0;
    for j in 0..g.len() {
        let x = g.coords(j);
        let q = cfg.da_conjugate(&x, s.alpha.at(j));
        acc += q[0] * dm.values()[j] + cfg.hamiltonian(&x, &q) * s.m.density()[j];
    }
    Ok(acc * g.cell_volume() - cfg.coupling_value(&s.m)? - lambda_hat)
}

/// Per-sample weak-KAM identity residuals.
pub fn identity_residuals(cfg: &ModelConfig, occ: &OccupationMeasure, lambda_hat: f64) -> Result<Vec<f64>> {
    if occ.grid() != cfg.grid() {
        return Err(Error::GridMismatch("occupation measure and model grids differ".into()));
    }
    occ.samples
        .par_iter()
        .map(|s| identity_term(cfg, s, lambda_hat))
        .collect()
}

/// max over samples of |∫ q₁·Dm + ∫ H(y,q₁) dm − 𝓕(m) − λ̂|.
pub fn weak_kam_identity_residual(cfg: &ModelConfig, occ: &OccupationMeasure, lambda_hat: f64) -> Result<f64> {
    Ok(identity_residuals(cfg, occ, lambda_hat)?
        .into_iter()
        .fold(0.0, |a, v| a.max(v.abs())))
}

/// Largest samplewise |identity − (energy(u_next, m) − λ̂)|; `None` when the
/// samples carry no value function.
pub fn identity_energy_mismatch(cfg: &ModelConfig, occ: &OccupationMeasure, lambda_hat: f64) -> Result<Option<f64>> {
    if occ.samples.iter().any(|s| s.u_next.is_none()) {
        return Ok(None);
    }
    let worst = occ
        .samples
        .par_iter()
        .map(|s| {
            let u = s.u_next.as_ref().expect("checked above");
            let energy = crate::ergodic::energy(cfg, u, &s.m)?;
            Ok((identity_term(cfg, s, lambda_hat)? - (energy - lambda_hat)).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Some(worst))
}

/// One row of the per-sample report.
#[derive(Debug, Clone, PartialEq)]
pub struct MatherRow {
    pub t: f64,
    pub objective_term: f64,
    pub closedness: Vec<f64>,
    pub identity: f64,
    pub smoothness: Smoothness,
}

pub fn sample_rows(
    cfg: &ModelConfig,
    occ: &OccupationMeasure,
    tests: &[CylindricalTest],
    lambda_hat: f64,
) -> Result<Vec<MatherRow>> {
    occ.samples
        .par_iter()
        .map(|s| {
            Ok(MatherRow {
                t: s.t,
                objective_term: objective_term(cfg, s)?,
                closedness: tests.iter().map(|c| c.generator(&s.m, &s.alpha)).collect(),
                identity: identity_term(cfg, s, lambda_hat)?,
                smoothness: smoothness(&s.m),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::von_mises;
    use crate::mfg::{solve_fbs, solve_variational, SolverOptions};

    fn sample(m: ProbMeasure, alpha: VectorField) -> Sample {
        Sample {
            t: 0.0,
            m,
            alpha,
            u_next: None,
        }
    }

    /// Modified Bessel function I_ν by its power series.
    fn bessel_i(nu: u32, x: f64) -> f64 {
        let mut term = (0.5 * x).powi(nu as i32) / (1..=nu).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..60 {
            term *= 0.25 * x * x / (k as f64 * (k + nu) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn outer_functions() {
        let p = Outer::Polynomial(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.value(2.0), 1.0 - 4.0 + 12.0);
        assert_eq!(p.derivative(2.0), -2.0 + 12.0);
        let t = Outer::Trig {
            cos: 2.0,
            sin: 1.0,
            freq: 3.0,
        };
        assert!((t.derivative(0.4) - (-6.0 * 1.2f64.sin() + 3.0 * 1.2f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn inconsistent_outer_is_rejected() {
        // a cubic whose stored derivative would be wrong cannot be built, so
        // check the spot test through a mismatching trig frequency instead
        let g = TorusGrid::line(8);
        let ok = CylindricalTest::new("x", Outer::Polynomial(vec![0.0, 0.0, 0.0, 1.0]), Field::constant(g, 1.0));
        assert!(ok.is_ok());
        let nan = CylindricalTest::new(
            "nan",
            Outer::Trig {
                cos: f64::NAN,
                sin: 0.0,
                freq: 1.0,
            },
            Field::constant(g, 1.0),
        );
        assert!(matches!(nan, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn dictionary_derivatives_match_differences() {
        let g = TorusGrid::line(32);
        let tests = cylindrical_dictionary(g).unwrap();
        assert_eq!(tests.len(), 12);
        let m = von_mises(g, 0.3, 1.5);
        let delta: Vec<f64> = (0..32).map(|j| (2.0 * PI * j as f64 / 32.0 + 0.4).cos()).collect();
        for t in &tests {
            let eps = 1e-6;
            let shifted = |s: f64| {
                let d: Vec<f64> = m.density().iter().zip(&delta).map(|(a, b)| a + s * b).collect();
                t.value(&ProbMeasure::new(g, d).unwrap())
            };
            let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
            let lin: f64 = t.flat_derivative(&m).values().iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>() / 32.0;
            assert!((fd - lin).abs() < 1e-8, "{}: {fd} vs {lin}", t.id);
        }
    }

    #[test]
    fn uniform_stationary_samples_are_closed() {
        let g = TorusGrid::line(32);
        let tests = cylindrical_dictionary(g).unwrap();
        let occ = OccupationMeasure::from_samples(
            vec![sample(ProbMeasure::uniform(g), VectorField::zeros(g)); 3],
            1.0,
            0.0,
        )
        .unwrap();
        assert!(closedness_residual(&occ, &tests) < 1e-13);
    }

    #[test]
    fn single_sample_residual_is_its_generator() {
        let g = TorusGrid::line(24);
        let tests = cylindrical_dictionary(g).unwrap();
        let m = von_mises(g, 0.6, 2.0);
        let alpha = VectorField::new(g, (0..24).map(|j| (j as f64 * 0.3).sin()).collect()).unwrap();
        let occ = OccupationMeasure::from_samples(vec![sample(m.clone(), alpha.clone())], 1.0, 0.0).unwrap();
        let expected = tests.iter().map(|t| t.generator(&m, &alpha).abs()).fold(0.0, f64::max);
        assert_eq!(closedness_residual(&occ, &tests), expected);
    }

    #[test]
    fn closedness_telescopes_along_a_trajectory() {
        // the sample average is [Φ(m(T)) − Φ(m(burn_in))]/(T − burn_in) up to
        // a first-order time discretization error
        let g = TorusGrid::line(32);
        let cfg = ModelConfig::kernel_benchmark(g);
        let m0 = von_mises(g, 0.2, 3.0);
        let tests = cylindrical_dictionary(g).unwrap();
        let mismatch = |dt: f64| {
            let (traj, _) = solve_variational(&cfg, &m0, 3.0, dt, SolverOptions::default()).unwrap();
            let occ = occupation_measure(&traj, 1.0).unwrap();
            let k0 = (1.0 / dt).round() as usize;
            let k1 = traj.steps();
            let terms = closedness_terms(&occ, &tests);
            tests
                .iter()
                .zip(&terms)
                .map(|(t, term)| (term - (t.value(&traj.m()[k1]) - t.value(&traj.m()[k0])) / 2.0).abs())
                .fold(0.0, f64::max)
        };
        let coarse = mismatch(0.01);
        let fine = mismatch(0.005);
        assert!(coarse / fine > 1.6 && coarse / fine < 2.5, "{coarse} {fine}");
    }

    #[test]
    fn occupation_bookkeeping_and_errors() {
        let g = TorusGrid::line(16);
        let cfg = ModelConfig::kernel_benchmark(g);
        let m0 = von_mises(g, 0.5, 1.0);
        let (traj, _) = solve_variational(&cfg, &m0, 4.0, 0.05, SolverOptions::default()).unwrap();
        let occ = occupation_measure(&traj, 1.0).unwrap();
        assert_eq!(occ.len(), 60);
        assert!((occ.weight() * occ.len() as f64 - 1.0).abs() < 1e-15);
        assert!(matches!(occupation_measure(&traj, 4.0), Err(Error::HorizonTooShort { .. })));
        assert!(matches!(occupation_measure(&traj, 0.5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn trivial_model_values() {
        let g = TorusGrid::line(32);
        let cfg = ModelConfig::trivial(g, 0.7);
        let m0 = von_mises(g, 0.4, 2.0);
        let (traj, _) = solve_variational(&cfg, &m0, 4.0, 0.02, SolverOptions::default()).unwrap();
        let occ = occupation_measure(&traj, 2.0).unwrap();
        assert!(occ.samples().iter().all(|s| s.alpha.max_abs() == 0.0));
        assert!((mather_objective(&cfg, &occ).unwrap() - 0.7).abs() < 1e-12);
        assert!(weak_kam_identity_residual(&cfg, &occ, -0.7).unwrap() < 1e-12);
        let tests = cylindrical_dictionary(g).unwrap();
        assert!(closedness_residual(&occ, &tests) < 1e-12);
        let free = ModelConfig::trivial(g, 0.0);
        let (traj, _) = solve_variational(&free, &m0, 2.0, 0.02, SolverOptions::default()).unwrap();
        assert_eq!(mather_objective(&free, &occupation_measure(&traj, 1.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn smoothness_of_uniform_and_bump() {
        let g = TorusGrid::line(64);
        let s = smoothness(&ProbMeasure::uniform(g));
        assert_eq!((s.inv_density, s.grad_density, s.fisher), (1.0, 0.0, 0.0));
        let kappa = 2.0;
        let s = smoothness(&von_mises(g, 0.3, kappa));
        let i0 = bessel_i(0, kappa);
        let inv = i0 * kappa.exp();
        let c = ((1.0 + 4.0 * kappa * kappa).sqrt() - 1.0) / (2.0 * kappa);
        let grad = 2.0 * PI * kappa * (1.0 - c * c).sqrt() * (kappa * c).exp() / i0;
        let fisher = (2.0 * PI * kappa).powi(2) * bessel_i(1, kappa) / (kappa * i0);
        for (got, want) in [(s.inv_density, inv), (s.grad_density, grad), (s.fisher, fisher)] {
            assert!((got - want).abs() <= 0.02 * want, "{got} vs {want}");
        }
        let mut d = vec![2.0; 64];
        d[5] = 0.0;
        d[6] = 0.0;
        let total: f64 = d.iter().sum::<f64>() / 64.0;
        let holes = ProbMeasure::new(g, d.iter().map(|v| v / total).collect()).unwrap();
        let s = smoothness(&holes);
        assert!(s.inv_density.is_infinite() && s.fisher.is_infinite());
    }

    #[test]
    fn identity_equals_energy_along_pde_output() {
        let g = TorusGrid::line(32);
        let cfg = ModelConfig::kernel_benchmark(g);
        let m0 = von_mises(g, 0.5, 2.0);
        let (traj, _) = solve_fbs(&cfg, &m0, 3.0, 0.02, SolverOptions::with_tol(1e-10)).unwrap();
        let occ = occupation_measure(&traj, 1.0).unwrap();
        let gap = identity_energy_mismatch(&cfg, &occ, 2.6e-4).unwrap().unwrap();
        assert!(gap < 1e-12, "{gap}");
    }

    #[test]
    fn spike_smooths_after_burn_in() {
        let g = TorusGrid::line(32);
        let cfg = ModelConfig::kernel_benchmark(g);
        let mut d = vec![1e-3; 32];
        d[10] = 1.0;
        let spike = ProbMeasure::from_weights(g, d).unwrap();
        let (traj, _) = solve_variational(&cfg, &spike, 3.0, 0.02, SolverOptions::default()).unwrap();
        let early = OccupationMeasure::from_samples(
            (0..50)
                .map(|k| sample(traj.m()[k].clone(), traj.alpha()[k].clone()))
                .collect(),
            3.0,
            0.0,
        )
        .unwrap();
        let late = occupation_measure(&traj, 1.0).unwrap();
        assert!(smoothness_diagnostics(&early).inv_density > smoothness_diagnostics(&late).inv_density);
    }
}
