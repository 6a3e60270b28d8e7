//! The Lax-Oleinik operator τ_h on measure functionals, its algebraic laws,
//! corrector fixed points and calibration defects along long minimizers.
//!
//! Functionals are cylindrical closed forms, constants, or probe tables. A
//! table evaluates at the W1-nearest probe; when it stores flat derivatives it
//! adds the first-order correction ∫ δΨ/δm(q)·d(m − q), which is exact on the
//! probes and lets the solver see a terminal gradient.

use rayon::prelude::*;

use crate::ergodic::{CorrectorTable, Probe};
use crate::error::{Error, Result};
use crate::mather::CylindricalTest;
use crate::mfg::{self, SolverOptions, TerminalCost, Trajectory};
use crate::model::ModelConfig;
use crate::torus::{self, Field, ProbMeasure};

/// Values (and optionally flat derivatives) of a functional on a probe panel.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTable {
    pub probes: Vec<Probe>,
    pub values: Vec<f64>,
    pub gradients: Option<Vec<Field>>,
}

impl ProbeTable {
    pub fn new(probes: Vec<Probe>, values: Vec<f64>, gradients: Option<Vec<Field>>) -> Result<Self> {
        if probes.is_empty() || probes.len() != values.len() {
            return Err(Error::InvalidInput("a table needs one value per probe".into()));
        }
        if gradients.as_ref().is_some_and(|g| g.len() != probes.len()) {
            return Err(Error::InvalidInput("a table needs one gradient per probe".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table values must be finite".into()));
        }
        Ok(Self {
            probes,
            values,
            gradients,
        })
    }

    pub fn from_corrector(table: &CorrectorTable) -> Self {
        Self {
            probes: table.probes.clone(),
            values: table.chi_hat.clone(),
            gradients: Some(table.gradients.clone()),
        }
    }

    /// Index of the W1-nearest probe (first on ties) and its distance.
    pub fn nearest(&self, m: &ProbMeasure) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.probes.iter().enumerate() {
            let d = torus::wasserstein1(&p.measure, m).expect("table and measure share a grid");
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Value at m with the W1 distance to the probe it was read from.
    pub fn evaluate(&self, m: &ProbMeasure) -> (f64, f64) {
        let (i, d) = self.nearest(m);
        let mut v = self.values[i];
        if let Some(g) = &self.gradients {
            let q = self.probes[i].measure.density();
            let h = m.grid().cell_volume();
            v += g[i]
                .values()
                .iter()
                .zip(m.density().iter().zip(q))
                .map(|(gj, (a, b))| gj * (a - b))
                .sum::<f64>()
                * h;
        }
        (v, d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureFunctional {
    Constant(f64),
    /// scale·φ(∫ψ dm) + offset.
    Cylindrical {
        test: CylindricalTest,
        scale: f64,
        offset: f64,
    },
    Table(ProbeTable),
}

impl MeasureFunctional {
    pub fn cylindrical(test: CylindricalTest, scale: f64) -> Self {
        MeasureFunctional::Cylindrical {
            test,
            scale,
            offset: 0.0,
        }
    }

    /// Φ + c.
    pub fn shifted(&self, c: f64) -> Self {
        match self {
            MeasureFunctional::Constant(v) => MeasureFunctional::Constant(v + c),
            MeasureFunctional::Cylindrical { test, scale, offset } => MeasureFunctional::Cylindrical {
                test: test.clone(),
                scale: *scale,
                offset: offset + c,
            },
            MeasureFunctional::Table(t) => MeasureFunctional::Table(ProbeTable {
                probes: t.probes.clone(),
                values: t.values.iter().map(|v| v + c).collect(),
                gradients: t.gradients.clone(),
            }),
        }
    }

    pub fn evaluate(&self, m: &ProbMeasure) -> f64 {
        match self {
            MeasureFunctional::Constant(v) => *v,
            MeasureFunctional::Cylindrical { test, scale, offset } => scale * test.value(m) + offset,
            MeasureFunctional::Table(t) => t.evaluate(m).0,
        }
    }

    /// Distance from m to the probe a table reads from; zero for closed forms.
    pub fn interpolation_distance(&self, m: &ProbMeasure) -> f64 {
        match self {
            MeasureFunctional::Table(t) => t.nearest(m).1,
            _ => 0.0,
        }
    }
}

impl TerminalCost for MeasureFunctional {
    fn value(&self, m: &ProbMeasure) -> f64 {
        self.evaluate(m)
    }

    fn flat_derivative(&self, m: &ProbMeasure) -> Option<Field> {
        match self {
            MeasureFunctional::Constant(_) => None,
            MeasureFunctional::Cylindrical { test, scale, .. } => {
                let f = test.flat_derivative(m);
                Some(Field::new(*f.grid(), f.values().iter().map(|v| scale * v).collect()).expect("same grid"))
            }
            MeasureFunctional::Table(t) => t.gradients.as_ref().map(|g| g[t.nearest(m).0].clone()),
        }
    }
}

/// τ_hΦ(m0) with its optimal path.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxOleinik {
    pub value: f64,
    pub trajectory: Trajectory,
    /// Distance from m(h) to the probe a table functional was read from.
    pub endpoint_distance: f64,
}

/// inf over paths on [0,h] of running cost + Φ(m(h)), plus λ̂h.
pub fn lax_oleinik_path(
    cfg: &ModelConfig,
    phi: &MeasureFunctional,
    h: f64,
    m0: &ProbMeasure,
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<LaxOleinik> {
    if !(h >= dt) {
        return Err(Error::InvalidInput(format!("τ_h needs h >= dt, got h={h} dt={dt}")));
    }
    let (trajectory, report) = mfg::solve_variational_with(cfg, m0, h, dt, opts, Some(phi), None)?;
    let endpoint = trajectory.m().last().expect("at least one level");
    Ok(LaxOleinik {
        value: report.value + lambda_hat * h,
        endpoint_distance: phi.interpolation_distance(endpoint),
        trajectory,
    })
}

pub fn lax_oleinik(
    cfg: &ModelConfig,
    phi: &MeasureFunctional,
    h: f64,
    m0: &ProbMeasure,
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<f64> {
    lax_oleinik_path(cfg, phi, h, m0, lambda_hat, dt, opts).map(|r| r.value)
}

fn lax_oleinik_panel(
    cfg: &ModelConfig,
    phi: &MeasureFunctional,
    h: f64,
    probes: &[Probe],
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<Vec<LaxOleinik>> {
    probes
        .par_iter()
        .map(|p| {
            lax_oleinik_path(cfg, phi, h, &p.measure, lambda_hat, dt, opts).map_err(|e| e.context(format!("probe {}", p.id)))
        })
        .collect()
}

/// τ_hΦ materialized as a table on the given probes, with flat derivatives
/// taken from the adjoint of each solve.
pub fn materialize(
    cfg: &ModelConfig,
    phi: &MeasureFunctional,
    h: f64,
    probes: &[Probe],
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<ProbeTable> {
    let solved = lax_oleinik_panel(cfg, phi, h, probes, lambda_hat, dt, opts)?;
    let gradients = solved
        .iter()
        .map(|r| mfg::value_gradient(&r.trajectory).expect("variational output carries u"))
        .collect();
    ProbeTable::new(probes.to_vec(), solved.iter().map(|r| r.value).collect(), Some(gradients))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupReport {
    /// max over probes of |τ_{h1}(τ_{h2}Φ) − τ_{h1+h2}Φ|.
    pub gap: f64,
    /// Largest W1 distance between an endpoint m(h1) and the table probe it
    /// was read from.
    pub interpolation_error: f64,
    /// max over probes of |τ_{h1+h2}Φ|, the value scale.
    pub scale: f64,
    pub per_probe: Vec<f64>,
}

/// Composition law τ_{h1}∘τ_{h2} = τ_{h1+h2} on a probe panel. The inner
/// τ_{h2}Φ becomes a table on the panel enriched with the states m(h1) that
/// the one-shot optimal paths pass through.
#[allow(clippy::too_many_arguments)]
pub fn check_semigroup(
    cfg: &ModelConfig,
    phi: &MeasureFunctional,
    h1: f64,
    h2: f64,
    probes: &[Probe],
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<SemigroupReport> {
    let full = lax_oleinik_panel(cfg, phi, h1 + h2, probes, lambda_hat, dt, opts)?;
    let k1 = mfg::step_count(h1, dt)?;
    let mut enriched = probes.to_vec();
    for (p, r) in probes.iter().zip(&full) {
        enriched.push(Probe {
            id: format!("{}@{h1}", p.id),
            measure: r.trajectory.m()[k1].clone(),
        });
    }
    let inner = MeasureFunctional::Table(materialize(cfg, phi, h2, &enriched, lambda_hat, dt, opts)?);
    let outer = lax_oleinik_panel(cfg, &inner, h1, probes, lambda_hat, dt, opts)?;
    let per_probe: Vec<f64> = outer.iter().zip(&full).map(|(a, b)| (a.value - b.value).abs()).collect();
    Ok(SemigroupReport {
        gap: per_probe.iter().cloned().fold(0.0, f64::max),
        interpolation_error: outer.iter().map(|r| r.endpoint_distance).fold(0.0, f64::max),
        scale: full.iter().map(|r| r.value.abs()).fold(0.0, f64::max),
        per_probe,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonexpansiveReport {
    /// max over probes of |τ_hΦ − τ_hΨ|.
    pub lhs: f64,
    /// max of |Φ − Ψ| over the probes and the endpoints of both optimal paths.
    pub rhs: f64,
    /// max(lhs − rhs, 0).
    pub violation: f64,
    /// When Φ ≤ Ψ on the enriched panel: max over probes of (τ_hΦ − τ_hΨ)⁺.
    pub order_violation: Option<f64>,
}

/// Non-expansiveness and order preservation of τ_h on a probe panel.
#[allow(clippy::too_many_arguments)]
pub fn check_nonexpansive(
    cfg: &ModelConfig,
    phi: &MeasureFunctional,
    psi: &MeasureFunctional,
    h: f64,
    probes: &[Probe],
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<NonexpansiveReport> {
    let a = lax_oleinik_panel(cfg, phi, h, probes, lambda_hat, dt, opts)?;
    let b = lax_oleinik_panel(cfg, psi, h, probes, lambda_hat, dt, opts)?;
    let lhs = a.iter().zip(&b).map(|(x, y)| (x.value - y.value).abs()).fold(0.0, f64::max);
    let panel: Vec<&ProbMeasure> = probes
        .iter()
        .map(|p| &p.measure)
        .chain(a.iter().chain(&b).map(|r| r.trajectory.m().last().expect("nonempty")))
        .collect();
    let diffs: Vec<f64> = panel.iter().map(|m| phi.evaluate(m) - psi.evaluate(m)).collect();
    let rhs = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let order_violation = diffs.iter().all(|&d| d <= 0.0).then(|| {
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x.value - y.value).max(0.0))
            .fold(0.0, f64::max)
    });
    Ok(NonexpansiveReport {
        lhs,
        rhs,
        violation: (lhs - rhs).max(0.0),
        order_violation,
    })
}

/// ‖τ_hχ̂ − χ̂‖ over the table's own probes, and the range of χ̂.
pub fn fixed_point_gap(
    cfg: &ModelConfig,
    chi: &ProbeTable,
    h: f64,
    lambda_hat: f64,
    dt: f64,
    opts: SolverOptions,
) -> Result<(f64, f64)> {
    let phi = MeasureFunctional::Table(chi.clone());
    let solved = lax_oleinik_panel(cfg, &phi, h, &chi.probes, lambda_hat, dt, opts)?;
    let gap = solved
        .iter()
        .zip(&chi.values)
        .map(|(r, v)| (r.value - v).abs())
        .fold(0.0, f64::max);
    let hi = chi.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = chi.values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((gap, hi - lo))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationInterval {
    pub t1: f64,
    pub t2: f64,
    /// χ̂(m(t₁)) − [λ̂(t₂ − t₁) + cost(t₁, t₂) + χ̂(m(t₂))].
    pub defect: f64,
    /// Larger of the two distances to the probes χ̂ was read from.
    pub probe_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    /// The optimal path restricted to the window, with times in [−T, T].
    pub window: Trajectory,
    pub intervals: Vec<CalibrationInterval>,
    pub max_defect: f64,
    pub max_probe_distance: f64,
}

/// Solves the horizon-2T problem from m0 (time −T), restricts it to the
/// window [a, b] and evaluates the calibration defect on consecutive
/// subintervals of length `step`.
#[allow(clippy::too_many_arguments)]
pub fn extract_calibrated(
    cfg: &ModelConfig,
    m0: &ProbMeasure,
    horizon: f64,
    window: (f64, f64),
    step: f64,
    lambda_hat: f64,
    chi: &ProbeTable,
    dt: f64,
    opts: SolverOptions,
) -> Result<CalibrationReport> {
    let (a, b) = window;
    if !(-horizon < a && a <= b && b < horizon) {
        return Err(Error::InvalidInput(format!("window [{a}, {b}] must lie inside (−{horizon}, {horizon})")));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput("subinterval length must be positive".into()));
    }
    let (traj, _) = mfg::solve_variational(cfg, m0, 2.0 * horizon, dt, opts)?;
    let ka = mfg::step_count(a + horizon, dt)?;
    let kb = mfg::step_count(b + horizon, dt)?;
    let ks = mfg::step_count(step, dt)?.max(1);
    let mut cuts: Vec<usize> = (ka..kb).step_by(ks).collect();
    cuts.push(kb);
    cuts.dedup();
    let chi_at = |k: usize| {
        let m = &traj.m()[k];
        chi.evaluate(m)
    };
    let intervals: Vec<CalibrationInterval> = cuts
        .windows(2)
        .map(|w| {
            let (c1, d1) = chi_at(w[0]);
            let (c2, d2) = chi_at(w[1]);
            let span = (w[1] - w[0]) as f64 * dt;
            let cost = mfg::partial_cost(cfg, &traj, w[0], w[1]);
            CalibrationInterval {
                t1: traj.time(w[0]) - horizon,
                t2: traj.time(w[1]) - horizon,
                defect: c1 - (lambda_hat * span + cost + c2),
                probe_distance: d1.max(d2),
            }
        })
        .collect();
    let mut window_traj = traj.window(ka, kb);
    window_traj.t0 = a;
    Ok(CalibrationReport {
        window: window_traj,
        max_defect: intervals.iter().map(|i| i.defect.abs()).fold(0.0, f64::max),
        max_probe_distance: intervals.iter().map(|i| i.probe_distance).fold(0.0, f64::max),
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::{corrector_table, probe_panel, von_mises};
    use crate::mather::cylindrical_dictionary;
    use crate::torus::TorusGrid;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn small_panel(g: TorusGrid) -> Vec<Probe> {
        probe_panel(g, 3).into_iter().take(5).collect()
    }

    #[test]
    fn table_is_exact_on_its_probes() {
        let g = TorusGrid::line(16);
        let probes = small_panel(g);
        let grads = (0..probes.len()).map(|i| Field::from_fn(g, |x| (i as f64 + x[0]).sin())).collect();
        let t = ProbeTable::new(probes.clone(), vec![1.0, 2.0, 3.0, 4.0, 5.0], Some(grads)).unwrap();
        for (i, p) in probes.iter().enumerate() {
            assert_eq!(t.evaluate(&p.measure), (i as f64 + 1.0, 0.0));
        }
        assert!(ProbeTable::new(probes, vec![1.0], None).is_err());
    }

    #[test]
    fn trivial_model_laws() {
        let g = TorusGrid::line(16);
        let cfg = ModelConfig::trivial(g, 0.7);
        let zero = MeasureFunctional::Constant(0.0);
        let m0 = von_mises(g, 0.3, 2.0);
        assert!(lax_oleinik(&cfg, &zero, 0.5, &m0, -0.7, 0.05, opts()).unwrap().abs() < 1e-12);
        let rep = check_semigroup(&cfg, &zero, 0.25, 0.25, &small_panel(g), -0.7, 0.05, opts()).unwrap();
        assert!(rep.gap <= 1e-6);
        assert!(matches!(
            lax_oleinik(&cfg, &zero, 0.01, &m0, -0.7, 0.05, opts()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn additive_constants_and_shifted_pairs() {
        let g = TorusGrid::line(16);
        let cfg = ModelConfig::kernel_benchmark(g);
        let test = cylindrical_dictionary(g).unwrap().remove(1);
        let phi = MeasureFunctional::cylindrical(test, 0.2);
        let m0 = von_mises(g, 0.3, 2.0);
        let base = lax_oleinik(&cfg, &phi, 0.5, &m0, 0.0, 0.05, opts()).unwrap();
        let up = lax_oleinik(&cfg, &phi.shifted(0.3), 0.5, &m0, 0.0, 0.05, opts()).unwrap();
        assert!((up - base - 0.3).abs() < 1e-10);
        let probes = small_panel(g);
        let rep = check_nonexpansive(&cfg, &phi, &phi.shifted(0.3), 0.5, &probes, 0.0, 0.05, opts()).unwrap();
        assert!((rep.lhs - 0.3).abs() < 1e-10 && (rep.rhs - 0.3).abs() < 1e-12);
        assert!(rep.order_violation.unwrap() == 0.0);
        let same = check_nonexpansive(&cfg, &phi, &phi, 0.5, &probes, 0.0, 0.05, opts()).unwrap();
        assert_eq!(same.lhs, 0.0);
        let c = check_semigroup(&cfg, &MeasureFunctional::Constant(0.4), 0.25, 0.25, &probes, 0.0, 0.05, opts()).unwrap();
        assert!(c.gap <= 1e-10, "{}", c.gap);
    }

    #[test]
    fn composition_on_kernel_model() {
        let g = TorusGrid::line(16);
        let cfg = ModelConfig::kernel_benchmark(g);
        let test = cylindrical_dictionary(g).unwrap().remove(5);
        let phi = MeasureFunctional::cylindrical(test, 0.5);
        let rep = check_semigroup(&cfg, &phi, 0.5, 0.5, &small_panel(g), 0.0, 0.05, opts()).unwrap();
        assert!(rep.gap <= 0.05 * rep.scale, "{rep:?}");
    }

    #[test]
    fn corrector_is_nearly_fixed() {
        let g = TorusGrid::line(16);
        let cfg = ModelConfig::kernel_benchmark(g);
        let probes = small_panel(g);
        let lambda = crate::ergodic::estimate_lambda_slope(&cfg, &probes[0].measure, &[2.0, 3.0, 4.0], 0.05, opts())
            .unwrap()
            .slope
            .value;
        let table = corrector_table(&cfg, &probes, 4.0, lambda, 0.05, opts()).unwrap();
        let chi = ProbeTable::from_corrector(&table);
        let (gap, range) = fixed_point_gap(&cfg, &chi, 0.5, lambda, 0.05, opts()).unwrap();
        assert!(gap <= 0.02 * range, "{gap} vs {range}");
    }

    #[test]
    fn calibration_on_trivial_model_and_degenerate_window() {
        let g = TorusGrid::line(16);
        let cfg = ModelConfig::trivial(g, 0.7);
        let probes = small_panel(g);
        let table = corrector_table(&cfg, &probes, 1.0, -0.7, 0.05, opts()).unwrap();
        let chi = ProbeTable::from_corrector(&table);
        let m0 = von_mises(g, 0.3, 2.0);
        let rep = extract_calibrated(&cfg, &m0, 2.0, (-1.0, 1.0), 0.5, -0.7, &chi, 0.05, opts()).unwrap();
        assert_eq!(rep.intervals.len(), 4);
        assert!(rep.max_defect < 1e-12);
        let point = extract_calibrated(&cfg, &m0, 2.0, (0.0, 0.0), 0.5, -0.7, &chi, 0.05, opts()).unwrap();
        assert!(point.intervals.is_empty() && point.max_defect == 0.0);
        assert!(extract_calibrated(&cfg, &m0, 2.0, (-3.0, 0.0), 0.5, -0.7, &chi, 0.05, opts()).is_err());
    }
}
