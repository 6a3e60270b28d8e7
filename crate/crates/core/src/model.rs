//! Hamiltonian, its Legendre conjugate, the potential coupling and the audit of
//! the standing regularity assumptions.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{self, Field, ProbMeasure, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    Quadratic,
    QuadraticPlusPotential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    Constant,
    Linear,
    QuadraticKernel,
}

/// The coupling functional 𝓕 on measures.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// 𝓕(m) = c₀.
    Constant(f64),
    /// 𝓕(m) = ∫ f dm.
    Linear(Field),
    /// 𝓕(m) = ∫∫ k(x,y) m(dx) m(dy), with k sampled row-major on grid × grid.
    QuadraticKernel(Vec<f64>),
}

impl Coupling {
    pub fn kind(&self) -> CouplingKind {
        match self {
            Coupling::Constant(_) => CouplingKind::Constant,
            Coupling::Linear(_) => CouplingKind::Linear,
            Coupling::QuadraticKernel(_) => CouplingKind::QuadraticKernel,
        }
    }
}

/// Constants of the convexity and growth assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionConstants {
    #[serde(default = "one")]
    pub convexity_lower: f64,
    #[serde(default = "one")]
    pub convexity_upper: f64,
    #[serde(default = "half")]
    pub theta: f64,
    #[serde(rename = "C", default = "two_pi")]
    pub growth_c: f64,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two_pi() -> f64 {
    2.0 * PI
}

impl Default for AssumptionConstants {
    fn default() -> Self {
        Self {
            convexity_lower: 1.0,
            convexity_upper: 1.0,
            theta: 0.5,
            growth_c: 2.0 * PI,
        }
    }
}

/// A validated model on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    grid: TorusGrid,
    hamiltonian_kind: HamiltonianKind,
    potential: Field,
    coupling: Coupling,
    constants: AssumptionConstants,
}

impl ModelConfig {
    pub fn new(
        hamiltonian_kind: HamiltonianKind,
        potential: Field,
        coupling: Coupling,
        constants: AssumptionConstants,
    ) -> Result<Self> {
        let grid = *potential.grid();
        let c = &constants;
        if !(c.convexity_lower > 0.0 && c.convexity_lower <= c.convexity_upper) {
            return Err(Error::InvalidInput(format!(
                "convexity bounds must satisfy 0 < lower <= upper, got {} and {}",
                c.convexity_lower, c.convexity_upper
            )));
        }
        if !(c.theta > 0.0 && c.theta < 1.0) {
            return Err(Error::InvalidInput(format!("theta must lie in (0,1), got {}", c.theta)));
        }
        if !(c.growth_c > 0.0) {
            return Err(Error::InvalidInput(format!("growth constant C must be positive, got {}", c.growth_c)));
        }
        if hamiltonian_kind == HamiltonianKind::Quadratic && potential.max_abs() != 0.0 {
            return Err(Error::InvalidInput("quadratic Hamiltonian requires a zero potential".into()));
        }
        match &coupling {
            Coupling::Constant(c0) if !c0.is_finite() => {
                return Err(Error::InvalidInput("c0 must be finite".into()))
            }
            Coupling::Linear(f) if f.grid() != &grid => {
                return Err(Error::GridMismatch("linear coupling field".into()))
            }
            Coupling::QuadraticKernel(k) => {
                let n = grid.len();
                if k.len() != n * n {
                    return Err(Error::InvalidInput(format!("kernel needs {} samples, got {}", n * n, k.len())));
                }
                for i in 0..n {
                    for j in 0..i {
                        if (k[i * n + j] - k[j * n + i]).abs() > 1e-12 {
                            return Err(Error::InvalidInput(format!("kernel is not symmetric at ({i},{j})")));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(Self {
            grid,
            hamiltonian_kind,
            potential,
            coupling,
            constants,
        })
    }

    /// Quadratic H with V ≡ 0 and 𝓕 ≡ c₀.
    pub fn trivial(grid: TorusGrid, c0: f64) -> Self {
        Self::new(
            HamiltonianKind::Quadratic,
            Field::zeros(grid),
            Coupling::Constant(c0),
            AssumptionConstants::default(),
        )
        .expect("trivial model is valid")
    }

    /// H = ½|p|² + a·cos(2πx), 𝓕(m) = ∫∫ b·cos(2π(x−y)) m m on a one-dimensional grid.
    pub fn cosine(grid: TorusGrid, potential_amp: f64, kernel_amp: f64) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        let kind = if potential_amp == 0.0 {
            HamiltonianKind::Quadratic
        } else {
            HamiltonianKind::QuadraticPlusPotential
        };
        let v = Field::from_fn(grid, |x| potential_amp * (2.0 * PI * x[0]).cos());
        Self::new(kind, v, Coupling::QuadraticKernel(cosine_kernel(grid, kernel_amp)), AssumptionConstants::default())
    }

    /// The nonmonotone benchmark: k(x,y) = −0.5·cos(2π(x−y)), V = 0.2·cos(2πx).
    pub fn kernel_benchmark(grid: TorusGrid) -> Self {
        Self::cosine(grid, 0.2, -0.5).expect("benchmark model is valid")
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn hamiltonian_kind(&self) -> HamiltonianKind {
        self.hamiltonian_kind
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    /// Copy of the model with different assumption constants.
    pub fn with_constants(&self, constants: AssumptionConstants) -> Result<Self> {
        Self::new(self.hamiltonian_kind, self.potential.clone(), self.coupling.clone(), constants)
    }

    /// Hex SHA-256 over the grid, kinds and all samples.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(format!("{}:{}:{:?}:{:?}:{:?}", self.grid.dim(), self.grid.points_per_axis(), self.hamiltonian_kind, self.coupling.kind(), self.constants));
        for v in self.potential.values() {
            h.update(v.to_le_bytes());
        }
        let samples: &[f64] = match &self.coupling {
            Coupling::Constant(c0) => std::slice::from_ref(c0),
            Coupling::Linear(f) => f.values(),
            Coupling::QuadraticKernel(k) => k,
        };
        for v in samples {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn potential_at(&self, x: &[f64]) -> f64 {
        match self.hamiltonian_kind {
            HamiltonianKind::Quadratic => 0.0,
            HamiltonianKind::QuadraticPlusPotential => self.potential.interpolate(x),
        }
    }

    pub(crate) fn potential_node(&self, idx: usize) -> f64 {
        self.potential.values()[idx]
    }

    pub fn hamiltonian(&self, x: &[f64], p: &[f64]) -> f64 {
        0.5 * norm2(p) + self.potential_at(x)
    }

    pub fn conjugate(&self, x: &[f64], a: &[f64]) -> f64 {
        0.5 * norm2(a) - self.potential_at(x)
    }

    pub fn dp_hamiltonian(&self, _x: &[f64], p: &[f64]) -> Vec<f64> {
        p.to_vec()
    }

    pub fn da_conjugate(&self, _x: &[f64], a: &[f64]) -> Vec<f64> {
        a.to_vec()
    }

    pub fn coupling_value(&self, m: &ProbMeasure) -> Result<f64> {
        if m.grid() != &self.grid {
            return Err(Error::GridMismatch("measure and model grids differ".into()));
        }
        Ok(self.coupling_density(m.density()))
    }

    /// 𝓕 evaluated on raw density samples (not required to be a probability).
    pub(crate) fn coupling_density(&self, m: &[f64]) -> f64 {
        let h = self.grid.cell_volume();
        match &self.coupling {
            Coupling::Constant(c0) => *c0,
            Coupling::Linear(f) => h * torus::pair(f.values(), m),
            Coupling::QuadraticKernel(k) => {
                let n = m.len();
                let mut acc = 0.0;
                for i in 0..n {
                    acc += m[i] * torus::pair(&k[i * n..(i + 1) * n], m);
                }
                acc * h * h
            }
        }
    }

    pub fn coupling_derivative(&self, m: &ProbMeasure) -> Result<Field> {
        if m.grid() != &self.grid {
            return Err(Error::GridMismatch("measure and model grids differ".into()));
        }
        Ok(Field::new(self.grid, self.coupling_derivative_density(m.density())).expect("sizes match"))
    }

    /// Flat derivative F(·,m), normalized to zero m-average.
    pub(crate) fn coupling_derivative_density(&self, m: &[f64]) -> Vec<f64> {
        let h = self.grid.cell_volume();
        let mut f = match &self.coupling {
            Coupling::Constant(_) => return vec![0.0; m.len()],
            Coupling::Linear(f) => f.values().to_vec(),
            Coupling::QuadraticKernel(k) => {
                let n = m.len();
                (0..n).map(|i| 2.0 * h * torus::pair(&k[i * n..(i + 1) * n], m)).collect()
            }
        };
        let mass = h * m.iter().sum::<f64>();
        let avg = h * torus::pair(&f, m) / mass;
        f.iter_mut().for_each(|v| *v -= avg);
        f
    }

    /// 𝓕 at the empirical measure (1/N)Σδ of particles sitting on grid nodes.
    pub fn coupling_empirical(&self, nodes: &[usize]) -> f64 {
        let n_p = nodes.len() as f64;
        match &self.coupling {
            Coupling::Constant(c0) => *c0,
            Coupling::Linear(f) => nodes.iter().map(|&i| f.values()[i]).sum::<f64>() / n_p,
            Coupling::QuadraticKernel(k) => {
                let n = self.grid.len();
                let mut acc = 0.0;
                for &i in nodes {
                    for &j in nodes {
                        acc += k[i * n + j];
                    }
                }
                acc / (n_p * n_p)
            }
        }
    }

    /// Checks the convexity bound, the growth of D_xH and the second-order
    /// growth bounds by finite differences on `sample_count` points (x,p),
    /// x on the grid nodes and |p_i| ≤ 10.
    pub fn audit_assumptions(&self, sample_count: usize) -> AssumptionReport {
        let g = self.grid;
        let d = g.dim();
        let h = g.spacing();
        let c = self.constants;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut checks = vec![
            AssumptionCheck::new("convexity"),
            AssumptionCheck::new("dx_growth"),
            AssumptionCheck::new("dxx_growth"),
            AssumptionCheck::new("dxp_growth"),
        ];
        let eps = 1e-3;
        let slack = 1e-6;
        for s in 0..sample_count {
            let x = g.coords(s % g.len());
            // the first sweep over the nodes uses p = 0, where growth bounds are tightest
            let p: Vec<f64> = if s < g.len() {
                vec![0.0; d]
            } else {
                (0..d).map(|_| rng.gen_range(-10.0..=10.0)).collect()
            };
            let pn = norm2(&p).sqrt();
            let hp = self.hamiltonian(&x, &p);
            for a in 0..d {
                let mut pp = p.clone();
                pp[a] += eps;
                let up = self.hamiltonian(&x, &pp);
                pp[a] -= 2.0 * eps;
                let dn = self.hamiltonian(&x, &pp);
                let hpp = (up - 2.0 * hp + dn) / (eps * eps);
                let margin = (hpp - c.convexity_lower).min(c.convexity_upper - hpp) + slack;
                checks[0].record(&x, &p, margin);

                let mut xp = x.clone();
                xp[a] += h;
                let hxp = self.hamiltonian(&xp, &p);
                let mut xm = x.clone();
                xm[a] -= h;
                let hxm = self.hamiltonian(&xm, &p);
                let dx = (hxp - hxm) / (2.0 * h);
                checks[1].record(&x, &p, c.growth_c * (1.0 + pn) - dx.abs());
                let dxx = (hxp - 2.0 * hp + hxm) / (h * h);
                checks[2].record(&x, &p, c.growth_c * (1.0 + pn).powf(1.0 + c.theta) - dxx.abs());

                let mut pp = p.clone();
                pp[a] += eps;
                let mut cross = 0.0;
                for (sx, sp) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                    let mut xs = x.clone();
                    xs[a] += sx * h;
                    let mut ps = p.clone();
                    ps[a] += sp * eps;
                    cross += sx * sp * self.hamiltonian(&xs, &ps);
                }
                let dxp = cross / (4.0 * h * eps);
                checks[3].record(&x, &p, c.growth_c * (1.0 + pn).powf(c.theta) - dxp.abs() + slack);
            }
        }
        AssumptionReport { checks }
    }
}

pub(crate) fn cosine_kernel(grid: TorusGrid, amp: f64) -> Vec<f64> {
    let n = grid.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = amp * (2.0 * PI * (grid.axis_coord(i) - grid.axis_coord(j))).cos();
        }
    }
    k
}

fn norm2(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum()
}

/// Outcome of one finite-difference assumption check.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Smallest margin seen (negative means violated) and where.
    pub worst_margin: f64,
    pub worst_x: Vec<f64>,
    pub worst_p: Vec<f64>,
    pub samples: usize,
}

impl AssumptionCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            pass: true,
            worst_margin: f64::INFINITY,
            worst_x: Vec::new(),
            worst_p: Vec::new(),
            samples: 0,
        }
    }

    fn record(&mut self, x: &[f64], p: &[f64], margin: f64) {
        self.samples += 1;
        self.pass &= margin >= 0.0;
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.worst_x = x.to_vec();
            self.worst_p = p.to_vec();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// File-level description of a model, independent of the grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: HamiltonianKind,
    pub coupling: CouplingKind,
    #[serde(default)]
    pub c0: Option<f64>,
    /// V(x) = potential_cos·cos(2πx).
    #[serde(default)]
    pub potential_cos: Option<f64>,
    /// Torus-field file holding V samples.
    #[serde(default)]
    pub potential_file: Option<PathBuf>,
    /// k(x,y) = kernel_cos·cos(2π(x−y)).
    #[serde(default)]
    pub kernel_cos: Option<f64>,
    /// Torus-field file (dim=2) holding k(x,y) samples.
    #[serde(default)]
    pub kernel_file: Option<PathBuf>,
    /// f(x) = linear_cos·cos(2πx) for the linear coupling.
    #[serde(default)]
    pub linear_cos: Option<f64>,
    /// Grid points per axis used when the model is instantiated.
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    32
}

impl ModelSpec {
    /// Instantiates the model on a one-dimensional grid with `n` points,
    /// interpolating file samples when their resolution differs.
    pub fn build(&self, n: usize, constants: AssumptionConstants, base_dir: &Path) -> Result<ModelConfig> {
        let grid = TorusGrid::new(1, n)?;
        let cfg_err = |key: &str, message: String| Error::Config { key: key.into(), message };
        let potential = match (self.kind, self.potential_cos, &self.potential_file) {
            (HamiltonianKind::Quadratic, None, None) => Field::zeros(grid),
            (HamiltonianKind::Quadratic, _, _) => {
                return Err(cfg_err("model.kind", "quadratic kind takes no potential".into()))
            }
            (_, Some(a), None) => Field::from_fn(grid, |x| a * (2.0 * PI * x[0]).cos()),
            (_, None, Some(path)) => {
                let f = read_field_file(&base_dir.join(path)).map_err(|e| cfg_err("model.potential_file", e.to_string()))?;
                Field::from_fn(grid, |x| f.interpolate(x))
            }
            _ => {
                return Err(cfg_err(
                    "model.potential_cos",
                    "give exactly one of potential_cos and potential_file".into(),
                ))
            }
        };
        let coupling = match self.coupling {
            CouplingKind::Constant => Coupling::Constant(
                self.c0.ok_or_else(|| cfg_err("model.c0", "constant coupling requires c0".into()))?,
            ),
            CouplingKind::Linear => {
                let a = self
                    .linear_cos
                    .ok_or_else(|| cfg_err("model.linear_cos", "linear coupling requires linear_cos".into()))?;
                Coupling::Linear(Field::from_fn(grid, |x| a * (2.0 * PI * x[0]).cos()))
            }
            CouplingKind::QuadraticKernel => match (self.kernel_cos, &self.kernel_file) {
                (Some(b), None) => Coupling::QuadraticKernel(cosine_kernel(grid, b)),
                (None, Some(path)) => {
                    let k = read_field_file(&base_dir.join(path)).map_err(|e| cfg_err("model.kernel_file", e.to_string()))?;
                    if k.grid().dim() != 2 {
                        return Err(cfg_err("model.kernel_file", "kernel file must have dim=2".into()));
                    }
                    let mut s = vec![0.0; n * n];
                    for i in 0..n {
                        for j in 0..n {
                            s[i * n + j] = k.interpolate(&[grid.axis_coord(i), grid.axis_coord(j)]);
                        }
                    }
                    for i in 0..n {
                        for j in 0..i {
                            let avg = 0.5 * (s[i * n + j] + s[j * n + i]);
                            if (s[i * n + j] - avg).abs() > 1e-12 {
                                return Err(cfg_err("model.kernel_file", "kernel is not symmetric".into()));
                            }
                            s[i * n + j] = avg;
                            s[j * n + i] = avg;
                        }
                    }
                    Coupling::QuadraticKernel(s)
                }
                _ => {
                    return Err(cfg_err(
                        "model.kernel_cos",
                        "give exactly one of kernel_cos and kernel_file".into(),
                    ))
                }
            },
        };
        ModelConfig::new(self.kind, potential, coupling, constants).map_err(|e| cfg_err("model", e.to_string()))
    }
}

fn read_field_file(path: &Path) -> Result<Field> {
    let file = std::fs::File::open(path)?;
    torus::read_field(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cos_potential(n: usize) -> ModelConfig {
        let g = TorusGrid::line(n);
        ModelConfig::new(
            HamiltonianKind::QuadraticPlusPotential,
            Field::from_fn(g, |x| (2.0 * PI * x[0]).cos()),
            Coupling::Constant(0.0),
            AssumptionConstants::default(),
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_values() {
        let g = TorusGrid::line(16);
        let q = ModelConfig::trivial(g, 0.0);
        assert_eq!(q.hamiltonian(&[0.3], &[0.0]), 0.0);
        assert_eq!(q.hamiltonian(&[0.3], &[2.0]), 2.0);
        assert_eq!(q.conjugate(&[0.3], &[0.0]), 0.0);
        let v = cos_potential(16);
        assert!((v.hamiltonian(&[0.0], &[0.0]) - 1.0).abs() < 1e-15);
        assert!((v.conjugate(&[0.0], &[0.0]) + 1.0).abs() < 1e-15);
        assert_eq!(v.dp_hamiltonian(&[0.1], &[1.5]), vec![1.5]);
        assert_eq!(v.da_conjugate(&[0.1], &[-0.5]), vec![-0.5]);
    }

    proptest! {
        #[test]
        fn fenchel_equality_and_inequality(x in 0.0..1.0f64, p in -10.0..10.0f64, a in -10.0..10.0f64) {
            let cfg = cos_potential(32);
            let q = cfg.dp_hamiltonian(&[x], &[p]);
            let eq = cfg.conjugate(&[x], &q) - (p * q[0] - cfg.hamiltonian(&[x], &[p]));
            prop_assert!(eq.abs() < 1e-10);
            prop_assert!(p * a <= cfg.hamiltonian(&[x], &[p]) + cfg.conjugate(&[x], &[a]) + 1e-12);
            let back = cfg.da_conjugate(&[x], &cfg.dp_hamiltonian(&[x], &[p]));
            prop_assert!((back[0] - p).abs() < 1e-10);
        }
    }

    #[test]
    fn coupling_values() {
        let g = TorusGrid::line(32);
        let m = ProbMeasure::from_weights(g, (0..32).map(|j| 1.0 + (j as f64 * 0.3).sin().abs()).collect()).unwrap();
        let c = ModelConfig::trivial(g, 0.7);
        assert_eq!(c.coupling_value(&m).unwrap(), 0.7);
        assert_eq!(c.coupling_derivative(&m).unwrap().max_abs(), 0.0);
        let ones = ModelConfig::new(
            HamiltonianKind::Quadratic,
            Field::zeros(g),
            Coupling::QuadraticKernel(vec![1.0; 32 * 32]),
            AssumptionConstants::default(),
        )
        .unwrap();
        assert!((ones.coupling_value(&m).unwrap() - 1.0).abs() < 1e-12);
        assert!(ones.coupling_derivative(&m).unwrap().max_abs() < 1e-12);
        let cosk = ModelConfig::cosine(g, 0.0, 1.0).unwrap();
        assert!(cosk.coupling_value(&ProbMeasure::uniform(g)).unwrap().abs() < 1e-10);
    }

    #[test]
    fn derivative_has_zero_average_and_matches_differences() {
        let g = TorusGrid::line(24);
        let cfg = ModelConfig::kernel_benchmark(g);
        let m = ProbMeasure::from_weights(g, (0..24).map(|j| (2.0 * PI * j as f64 / 24.0).cos().exp()).collect()).unwrap();
        let f = cfg.coupling_derivative(&m).unwrap();
        assert!(m.integrate(&f).unwrap().abs() < 1e-14);
        let delta: Vec<f64> = (0..24).map(|j| (2.0 * PI * 3.0 * j as f64 / 24.0).sin() + 0.3 * (j as f64 - 11.5) / 12.0).collect();
        let mean = delta.iter().sum::<f64>() / 24.0;
        let delta: Vec<f64> = delta.iter().map(|v| v - mean).collect();
        let eps = 1e-4;
        let plus: Vec<f64> = m.density().iter().zip(&delta).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = m.density().iter().zip(&delta).map(|(a, b)| a - eps * b).collect();
        let fd = (cfg.coupling_density(&plus) - cfg.coupling_density(&minus)) / (2.0 * eps);
        let exact = g.cell_volume() * torus::pair(f.values(), &delta);
        assert!((fd - exact).abs() <= 1e-6 * exact.abs());
    }

    #[test]
    fn empirical_coupling_includes_self_interaction() {
        let g = TorusGrid::line(8);
        let cfg = ModelConfig::kernel_benchmark(g);
        assert!((cfg.coupling_empirical(&[3]) + 0.5).abs() < 1e-15);
        let two = cfg.coupling_empirical(&[0, 4]);
        assert!((two - 0.25 * (-0.5 - 0.5 + 0.5 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs_rejected() {
        let g = TorusGrid::line(8);
        let bad = AssumptionConstants { convexity_lower: 0.0, ..Default::default() };
        assert!(ModelConfig::new(HamiltonianKind::Quadratic, Field::zeros(g), Coupling::Constant(0.0), bad).is_err());
        let bad = AssumptionConstants { theta: 1.0, ..Default::default() };
        assert!(ModelConfig::new(HamiltonianKind::Quadratic, Field::zeros(g), Coupling::Constant(0.0), bad).is_err());
        let mut k = cosine_kernel(g, 1.0);
        k[1] += 1e-6;
        assert!(ModelConfig::new(
            HamiltonianKind::Quadratic,
            Field::zeros(g),
            Coupling::QuadraticKernel(k),
            AssumptionConstants::default()
        )
        .is_err());
    }

    #[test]
    fn audit_plain_quadratic_passes() {
        let r = ModelConfig::trivial(TorusGrid::line(16), 0.0).audit_assumptions(500);
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.check("convexity").unwrap().samples, 500);
    }

    #[test]
    fn audit_potential_growth_threshold() {
        let cfg = cos_potential(64);
        let r = cfg.audit_assumptions(2000);
        assert!(r.check("dx_growth").unwrap().pass);
        assert!(r.check("convexity").unwrap().pass);
        let tight = cfg
            .with_constants(AssumptionConstants { growth_c: 0.9 * 2.0 * PI, ..Default::default() })
            .unwrap();
        let r = tight.audit_assumptions(2000);
        let dx = r.check("dx_growth").unwrap();
        assert!(!dx.pass);
        assert!(dx.worst_p[0].abs() < 1.0, "worst case should sit at small |p|: {dx:?}");
    }
}
