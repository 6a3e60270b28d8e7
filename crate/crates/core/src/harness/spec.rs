use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mfg::SolverOptions;
use crate::model::{AssumptionConstants, ModelSpec};
use crate::particle::DEFAULT_NODE_BUDGET;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LambdaSlope,
    CellProblem,
    Energy,
    Corrector,
    Monotonicity,
    Mather,
    Semigroup,
    Calibrated,
    FullReport,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::LambdaSlope,
        ExperimentKind::CellProblem,
        ExperimentKind::Energy,
        ExperimentKind::Corrector,
        ExperimentKind::Monotonicity,
        ExperimentKind::Mather,
        ExperimentKind::Semigroup,
        ExperimentKind::Calibrated,
        ExperimentKind::FullReport,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            ExperimentKind::LambdaSlope => "lambda-slope",
            ExperimentKind::CellProblem => "cell-problem",
            ExperimentKind::Energy => "energy",
            ExperimentKind::Corrector => "corrector",
            ExperimentKind::Monotonicity => "monotonicity",
            ExperimentKind::Mather => "mather",
            ExperimentKind::Semigroup => "semigroup",
            ExperimentKind::Calibrated => "calibrated",
            ExperimentKind::FullReport => "full-report",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Numeric parameters shared by the experiments. Each kind reads the subset
/// it needs; the rest keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub dt: f64,
    pub tol: f64,
    pub fbs_tol: f64,
    pub max_iterations: usize,
    /// Horizons of the slope fit of λ.
    pub horizons: Vec<f64>,
    /// Horizon of single-solve experiments.
    pub horizon: f64,
    /// Initial measure: von Mises bump with this center and concentration.
    pub m0_center: f64,
    pub m0_kappa: f64,
    /// Use this λ̂ instead of fitting one.
    pub lambda_hat: Option<f64>,
    /// Largest particle number of the cell problem.
    pub particles: usize,
    pub cell_dt: f64,
    pub cell_tol: f64,
    pub corrector_horizons: Vec<f64>,
    pub times: Vec<f64>,
    pub burn_in: f64,
    pub h: f64,
    pub h1: f64,
    pub h2: f64,
    /// Horizon of the table χ̂ used by the calibration experiment.
    pub corrector_horizon: f64,
    pub calibration_horizons: Vec<f64>,
    pub window: [f64; 2],
    pub step: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            dt: 0.02,
            tol: 1e-8,
            fbs_tol: 1e-13,
            max_iterations: 5000,
            horizons: vec![8.0, 16.0, 24.0, 32.0],
            horizon: 8.0,
            m0_center: 0.5,
            m0_kappa: 2.0,
            lambda_hat: None,
            particles: 3,
            cell_dt: 0.05,
            cell_tol: 1e-10,
            corrector_horizons: vec![4.0, 8.0, 16.0],
            times: vec![0.0, 2.0, 4.0, 6.0],
            burn_in: 4.0,
            h: 0.5,
            h1: 0.5,
            h2: 0.5,
            corrector_horizon: 8.0,
            calibration_horizons: vec![8.0, 16.0],
            window: [-4.0, 4.0],
            step: 1.0,
        }
    }
}

impl Params {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iterations: self.max_iterations,
            ..SolverOptions::default()
        }
    }

    pub fn fbs_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.fbs_tol,
            ..self.solver_options()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default)]
    kind: Option<ExperimentKind>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    model: Option<ModelSpec>,
    #[serde(default)]
    assumptions: AssumptionConstants,
    #[serde(default)]
    params: Params,
}

pub const DEFAULT_SEED: u64 = 7;

/// A fully resolved experiment: what to run, on which model, where to write.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Absent only for `full-report`, whose checks fix their own models.
    pub model: Option<ModelSpec>,
    pub assumptions: AssumptionConstants,
    pub params: Params,
    /// Directory that relative model file paths are resolved against.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

fn config_error(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

impl ExperimentSpec {
    /// Parses config text. `kind` and `seed` from the command line take
    /// precedence; a conflicting `kind` in the file is an error.
    pub fn parse(
        text: &str,
        kind: Option<ExperimentKind>,
        seed: Option<u64>,
        base_dir: &Path,
        out_dir: &Path,
    ) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let file: SpecFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let key = if path != "." {
                path
            } else if let Some(span) = inner.span() {
                format!("(line {})", text[..span.start].matches('\n').count() + 1)
            } else {
                "(document)".to_string()
            };
            config_error(key, inner.message().trim().replace('\n', " "))
        })?;
        let kind = match (kind, file.kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(config_error("kind", format!("config declares `{b}` but `{a}` was requested")))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(config_error("kind", "no experiment kind given")),
        };
        let spec = Self {
            kind,
            seed: seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            model: file.model,
            assumptions: file.assumptions,
            params: file.params,
            base_dir: base_dir.to_path_buf(),
            out_dir: out_dir.to_path_buf(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path, kind: Option<ExperimentKind>, seed: Option<u64>, out_dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error("(file)", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, kind, seed, base, out_dir)
    }

    /// Grid points per axis; the model section's `n`, or 32 without a model.
    pub fn n(&self) -> usize {
        self.model.as_ref().map_or(32, |m| m.n)
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(config_error(format!("params.{key}"), format!("must be positive and finite, got {v}")))
            }
        };
        let horizon_list = |key: &str, hs: &[f64], min_len: usize| {
            if hs.len() < min_len {
                return Err(config_error(format!("params.{key}"), format!("needs at least {min_len} entries")));
            }
            if hs.iter().any(|h| !(h.is_finite() && *h > 0.0 && *h <= 64.0)) {
                return Err(config_error(format!("params.{key}"), "horizons must lie in (0, 64]"));
            }
            if hs.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_error(format!("params.{key}"), "horizons must increase"));
            }
            Ok(())
        };
        let n = self.n();
        if !(8..=256).contains(&n) {
            return Err(config_error("model.n", format!("grid size {n} outside [8, 256]")));
        }
        positive("dt", p.dt)?;
        positive("tol", p.tol)?;
        positive("fbs_tol", p.fbs_tol)?;
        positive("cell_dt", p.cell_dt)?;
        positive("cell_tol", p.cell_tol)?;
        positive("horizon", p.horizon)?;
        positive("step", p.step)?;
        positive("corrector_horizon", p.corrector_horizon)?;
        if p.max_iterations == 0 {
            return Err(config_error("params.max_iterations", "must be at least 1"));
        }
        if p.horizon > 64.0 {
            return Err(config_error("params.horizon", "horizon budget is 64"));
        }
        horizon_list("horizons", &p.horizons, 3)?;
        horizon_list("corrector_horizons", &p.corrector_horizons, 1)?;
        horizon_list("calibration_horizons", &p.calibration_horizons, 1)?;
        let steps = |key: &str, v: f64| {
            let k = (v / p.dt).round();
            if k < 1.0 || (k * p.dt - v).abs() > 1e-9 * v {
                return Err(config_error(format!("params.{key}"), format!("must be a positive multiple of dt = {}", p.dt)));
            }
            Ok(())
        };
        use ExperimentKind::*;
        if self.kind == Semigroup {
            for (key, v) in [("h", p.h), ("h1", p.h1), ("h2", p.h2)] {
                positive(key, v)?;
                steps(key, v)?;
            }
        }
        if self.kind == Mather && !(p.burn_in >= p.dt && p.burn_in < p.horizon) {
            return Err(config_error("params.burn_in", "must lie in [dt, horizon)"));
        }
        if self.kind == Monotonicity && p.times.iter().any(|t| !(*t >= 0.0 && *t < p.horizon)) {
            return Err(config_error("params.times", "sample times must lie in [0, horizon)"));
        }
        let [a, b] = p.window;
        let shortest = p.calibration_horizons.first().copied().unwrap_or(0.0);
        if self.kind == Calibrated && !(a < b && -shortest <= a && b <= shortest) {
            return Err(config_error("params.window", "window must be increasing and inside [−T, T]"));
        }
        if matches!(self.kind, CellProblem | FullReport)
            && (p.particles == 0 || (n as f64).powi(p.particles as i32) > DEFAULT_NODE_BUDGET as f64)
        {
            return Err(config_error(
                "params.particles",
                format!("need 1 ≤ N with n^N ≤ {DEFAULT_NODE_BUDGET} nodes"),
            ));
        }
        if !(p.m0_kappa >= 0.0 && p.m0_kappa.is_finite()) {
            return Err(config_error("params.m0_kappa", "must be nonnegative"));
        }
        if let Some(l) = p.lambda_hat {
            if !l.is_finite() {
                return Err(config_error("params.lambda_hat", "must be finite"));
            }
        }
        if self.kind != ExperimentKind::FullReport {
            let model = self.model.as_ref().ok_or_else(|| config_error("model", "this experiment needs a model"))?;
            for (key, file) in [("model.potential_file", &model.potential_file), ("model.kernel_file", &model.kernel_file)] {
                if let Some(f) = file {
                    if !self.base_dir.join(f).is_file() {
                        return Err(config_error(key, format!("{} does not exist", f.display())));
                    }
                }
            }
            model.build(model.n, self.assumptions, &self.base_dir)?;
        }
        Ok(())
    }

    /// SHA-256 over the resolved spec and the bytes of every referenced file.
    pub fn hash(&self) -> Result<String> {
        let file = SpecFile {
            kind: Some(self.kind),
            seed: Some(self.seed),
            model: self.model.clone(),
            assumptions: self.assumptions,
            params: self.params.clone(),
        };
        let text = toml::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        if let Some(m) = &self.model {
            for f in [&m.potential_file, &m.kernel_file].into_iter().flatten() {
                hasher.update(std::fs::read(self.base_dir.join(f))?);
            }
        }
        Ok(hex::encode(hasher.finalize()))
    }
}
