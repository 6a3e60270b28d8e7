//! Ergodic cell problem for N interacting particles on (𝕋¹)ᴺ and the
//! projected functional Wᴺ on measures.
//!
//! The cell problem
//!
//!   −Σᵢ Δᵢv + (1/N) Σᵢ H(xᵢ, N Dᵢv) − 𝓕(mᴺ_x) = λᴺ,   ∫v = 0,
//!
//! is solved by marching ∂ₜv = ΣΔᵢv − (1/N)ΣH(xᵢ, NDᵢv) + 𝓕(mᴺ_x) with
//! implicit diffusion until v(t) − v(t−dt) is constant in space; that constant
//! is −λᴺ·dt.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::torus::{self, Field, ProbMeasure, TorusGrid, VectorField};

pub const DEFAULT_NODE_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub dt: f64,
    /// Convergence threshold on the spread max − min of the increment rate.
    pub tol: f64,
    /// Longest marching time before giving up.
    pub max_time: f64,
    pub node_budget: usize,
    /// Debug variant: small-discount approximation with this rate instead of
    /// long-time marching.
    pub discount: Option<f64>,
}

impl Default for CellParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            tol: 1e-10,
            max_time: 200.0,
            node_budget: DEFAULT_NODE_BUDGET,
            discount: None,
        }
    }
}

/// εᴺ of the Glivenko-Cantelli estimate in dimension d.
pub fn glivenko_rate(d: usize, n_particles: usize) -> f64 {
    let n = n_particles as f64;
    match d {
        0..=3 => n.powf(-0.5),
        4 => n.powf(-0.5) * n.ln(),
        _ => n.powf(-2.0 / d as f64),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSolution {
    /// Tensor grid of dimension N over the one-dimensional particle grid.
    pub grid: TorusGrid,
    /// One-dimensional grid each particle lives on.
    pub axis: TorusGrid,
    pub n_particles: usize,
    pub v: Vec<f64>,
    pub lambda_n: f64,
    pub normalization_gap: f64,
    pub bernstein_sup: f64,
    pub symmetry_gap: f64,
    pub glivenko_rate: f64,
    pub steps: usize,
    /// Final spread of the increment rate.
    pub spread: f64,
}

impl ParticleSolution {
    pub fn bernstein_check(&self) -> f64 {
        self.bernstein_sup
    }

    pub fn value_at(&self, nodes: &[usize]) -> f64 {
        let idx: Vec<i64> = nodes.iter().map(|&j| j as i64).collect();
        self.v[self.grid.index(&idx)]
    }

    /// Writes v in the torus-field text format with `N=` in the header.
    pub fn write(&self, out: impl std::io::Write) -> Result<()> {
        torus::write_table(out, &self.grid, torus::TextKind::Field, &format!(" N={}", self.n_particles), &self.v)
    }
}

/// Real orthonormal eigenbasis of the periodic 3-point Laplacian on n points,
/// stored column by column with the matching eigenvalues.
struct AxisBasis {
    n: usize,
    q: Vec<f64>,
    eig: Vec<f64>,
}

impl AxisBasis {
    fn new(n: usize) -> Self {
        let h = 1.0 / n as f64;
        let mut q = vec![0.0; n * n];
        let mut eig = vec![0.0; n];
        let mut col = 0;
        let put = |q: &mut Vec<f64>, eig: &mut Vec<f64>, col: usize, f: &dyn Fn(usize) -> f64, k: usize| {
            for j in 0..n {
                q[j * n + col] = f(j);
            }
            let s = (PI * k as f64 / n as f64).sin();
            eig[col] = -4.0 * s * s / (h * h);
        };
        let nf = n as f64;
        put(&mut q, &mut eig, col, &|_| 1.0 / nf.sqrt(), 0);
        col += 1;
        for k in 1..n.div_ceil(2) {
            let c = (2.0 / nf).sqrt();
            put(&mut q, &mut eig, col, &|j| c * (2.0 * PI * (k * j) as f64 / nf).cos(), k);
            col += 1;
            put(&mut q, &mut eig, col, &|j| c * (2.0 * PI * (k * j) as f64 / nf).sin(), k);
            col += 1;
        }
        if n.is_multiple_of(2) {
            put(&mut q, &mut eig, col, &|j| if j % 2 == 0 { 1.0 } else { -1.0 } / nf.sqrt(), n / 2);
        }
        Self { n, q, eig }
    }

    /// Applies Qᵀ (forward) or Q (backward) along one axis of a tensor.
    fn apply(&self, data: &[f64], out: &mut [f64], stride: usize, forward: bool) {
        let n = self.n;
        let block = n * stride;
        out.par_chunks_mut(block).zip(data.par_chunks(block)).for_each(|(ob, db)| {
            for inner in 0..stride {
                for k in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let qv = if forward { self.q[j * n + k] } else { self.q[k * n + j] };
                        acc += qv * db[j * stride + inner];
                    }
                    ob[k * stride + inner] = acc;
                }
            }
        });
    }
}

struct Tensor {
    n_particles: usize,
    h: f64,
    plus: Vec<Vec<u32>>,
    minus: Vec<Vec<u32>>,
}

impl Tensor {
    fn new(grid: TorusGrid) -> Self {
        let d = grid.dim();
        let plus = (0..d)
            .map(|a| (0..grid.len()).map(|i| grid.shift(i, a, 1) as u32).collect())
            .collect();
        let minus = (0..d)
            .map(|a| (0..grid.len()).map(|i| grid.shift(i, a, -1) as u32).collect())
            .collect();
        Self {
            n_particles: d,
            h: grid.spacing(),
            plus,
            minus,
        }
    }

    fn grad_sq(&self, v: &[f64], i: usize) -> f64 {
        let inv = 0.5 / self.h;
        (0..self.n_particles)
            .map(|a| {
                let g = (v[self.plus[a][i] as usize] - v[self.minus[a][i] as usize]) * inv;
                g * g
            })
            .sum()
    }
}

/// Long-time marching solve of the cell problem on the model's grid.
pub fn solve_cell_problem(cfg: &ModelConfig, n_particles: usize, params: CellParams) -> Result<ParticleSolution> {
    let axis = *cfg.grid();
    if axis.dim() != 1 {
        return Err(Error::UnsupportedDimension(axis.dim()));
    }
    if n_particles == 0 {
        return Err(Error::InvalidInput("need at least one particle".into()));
    }
    let n = axis.points_per_axis();
    let nodes = (n as f64).powi(n_particles as i32);
    if nodes > params.node_budget as f64 {
        return Err(Error::BudgetExceeded {
            nodes: nodes.min(usize::MAX as f64) as usize,
            budget: params.node_budget,
        });
    }
    let grid = TorusGrid::new(n_particles, n)?;
    let tensor = Tensor::new(grid);
    let basis = AxisBasis::new(n);
    let len = grid.len();
    let np = n_particles as f64;
    let dt = params.dt;

    // x-dependent part of the source: (1/N)ΣV(xᵢ) − 𝓕(mᴺ_x)
    let source: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|i| {
            let idx = grid.multi_index(i);
            let vsum: f64 = idx.iter().map(|&j| cfg.potential_node(j)).sum::<f64>() / np;
            vsum - cfg.coupling_empirical(&idx)
        })
        .collect();

    // symbol of (1 + δ·dt) − dt·ΣΔᵢ in the tensor eigenbasis
    let shift = 1.0 + params.discount.unwrap_or(0.0) * dt;
    let symbol: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|i| {
            let idx = grid.multi_index(i);
            1.0 / (shift - dt * idx.iter().map(|&k| basis.eig[k]).sum::<f64>())
        })
        .collect();
    let solve = |rhs: &mut Vec<f64>, scratch: &mut Vec<f64>| {
        for a in 0..n_particles {
            basis.apply(rhs, scratch, grid.stride(a), true);
            std::mem::swap(rhs, scratch);
        }
        rhs.iter_mut().zip(&symbol).for_each(|(r, s)| *r *= s);
        for a in 0..n_particles {
            basis.apply(rhs, scratch, grid.stride(a), false);
            std::mem::swap(rhs, scratch);
        }
    };

    let max_steps = (params.max_time / dt).ceil() as usize;
    let mut v = vec![0.0; len];
    let mut rhs = vec![0.0; len];
    let mut scratch = vec![0.0; len];
    let mut steps = 0;
    let mut spread = f64::INFINITY;
    let mut rate_mean = 0.0;
    let mut history = Vec::new();
    while steps < max_steps {
        rhs.par_iter_mut().enumerate().for_each(|(i, r)| {
            let ham = 0.5 * np * tensor.grad_sq(&v, i);
            *r = v[i] - dt * (ham + source[i]);
        });
        solve(&mut rhs, &mut scratch);
        steps += 1;
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for (a, b) in rhs.iter().zip(&v) {
            let r = (a - b) / dt;
            lo = lo.min(r);
            hi = hi.max(r);
            sum += r;
        }
        std::mem::swap(&mut v, &mut rhs);
        if params.discount.is_some() {
            spread = hi.abs().max(lo.abs());
        } else {
            spread = hi - lo;
            rate_mean = sum / len as f64;
        }
        if steps % 50 == 0 {
            history.push(spread);
        }
        if !spread.is_finite() {
            break;
        }
        if spread <= params.tol {
            break;
        }
    }
    if !(spread <= params.tol) {
        return Err(Error::NonConvergence {
            method: "cell problem marching",
            iterations: steps,
            gap: spread,
            history,
        });
    }
    let mean = v.iter().sum::<f64>() / len as f64;
    let lambda_n = match params.discount {
        Some(delta) => -delta * mean,
        None => -rate_mean,
    };
    v.iter_mut().for_each(|x| *x -= mean);
    let normalization_gap = (v.iter().sum::<f64>() / len as f64).abs();
    let bernstein_sup = (0..len)
        .into_par_iter()
        .map(|i| np * tensor.grad_sq(&v, i))
        .reduce(|| 0.0, f64::max);
    let symmetry_gap = symmetry_gap(&grid, &v);
    Ok(ParticleSolution {
        grid,
        axis,
        n_particles,
        v,
        lambda_n,
        normalization_gap,
        bernstein_sup,
        symmetry_gap,
        glivenko_rate: glivenko_rate(1, n_particles),
        steps,
        spread,
    })
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// max over nodes x and all permutations σ of |v(x) − v(σx)|.
fn symmetry_gap(grid: &TorusGrid, v: &[f64]) -> f64 {
    let perms = permutations(grid.dim());
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let idx = grid.multi_index(i);
            perms
                .iter()
                .map(|p| {
                    let permuted: Vec<i64> = p.iter().map(|&a| idx[a] as i64).collect();
                    (v[i] - v[grid.index(&permuted)]).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn empirical(axis: TorusGrid, nodes: &[usize]) -> ProbMeasure {
    let mut w = vec![0.0; axis.len()];
    for &j in nodes {
        w[j] += 1.0;
    }
    ProbMeasure::from_weights(axis, w).expect("nonempty")
}

/// max over `pairs` random node pairs of |v(x) − v(y)| / W1(mᴺ_x, mᴺ_y),
/// skipping pairs whose empirical measures coincide.
pub fn lipschitz_wasserstein_check(sol: &ParticleSolution, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x: Vec<usize> = (0..sol.n_particles).map(|_| rng.gen_range(0..sol.axis.len())).collect();
        let y: Vec<usize> = (0..sol.n_particles).map(|_| rng.gen_range(0..sol.axis.len())).collect();
        worst = worst.max(pair_ratio(sol, &x, &y)?);
    }
    Ok(worst)
}

/// |v(x) − v(y)| / W1(mᴺ_x, mᴺ_y), or 0 when the empirical measures coincide.
pub fn pair_ratio(sol: &ParticleSolution, x: &[usize], y: &[usize]) -> Result<f64> {
    let d = torus::wasserstein1(&empirical(sol.axis, x), &empirical(sol.axis, y))?;
    if d <= 0.0 {
        return Ok(0.0);
    }
    Ok((sol.value_at(x) - sol.value_at(y)).abs() / d)
}

/// Wᴺ(m) = ∫ vᴺ Π m(dxᵢ) with its flat derivative, D_mWᴺ and the Laplacian
/// of the flat derivative (the same 3-point stencil as the cell problem).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub value: f64,
    pub flat: Field,
    pub dm: VectorField,
    pub div_dm: Field,
}

/// Contracts v against m on every axis except `keep`.
fn single_slot(sol: &ParticleSolution, m: &[f64], keep: usize) -> Vec<f64> {
    let n = sol.axis.points_per_axis();
    let h = sol.axis.spacing();
    let mut data = sol.v.clone();
    let mut dims: Vec<usize> = vec![n; sol.n_particles];
    // contract from the last axis backwards so strides stay simple
    for a in (0..sol.n_particles).rev() {
        if a == keep {
            continue;
        }
        let inner: usize = dims[a + 1..].iter().product();
        let outer: usize = dims[..a].iter().product();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..n {
                let w = m[j] * h;
                let src = &data[(o * n + j) * inner..(o * n + j + 1) * inner];
                let dst = &mut out[o * inner..(o + 1) * inner];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
            }
        }
        data = out;
        dims.remove(a);
    }
    data
}

pub fn project_wn(sol: &ParticleSolution, m: &ProbMeasure) -> Result<Projection> {
    if m.grid() != &sol.axis {
        return Err(Error::GridMismatch("probe measure and particle grid differ".into()));
    }
    let n = sol.axis.points_per_axis();
    let h = sol.axis.spacing();
    let mut flat = vec![0.0; n];
    for k in 0..sol.n_particles {
        let s = single_slot(sol, m.density(), k);
        flat.iter_mut().zip(&s).for_each(|(f, v)| *f += v);
    }
    let first = single_slot(sol, m.density(), 0);
    let value = h * torus::pair(&first, m.density());
    let flat = Field::new(sol.axis, flat).expect("sizes match");
    let dm = torus::gradient(&flat);
    let div_dm = torus::laplacian(&flat);
    Ok(Projection { value, flat, dm, div_dm })
}

/// −∫ div_y D_mWᴺ dm + ∫ H(y, D_mWᴺ) dm − 𝓕(m) − λᴺ.
pub fn subsolution_residual(cfg: &ModelConfig, sol: &ParticleSolution, m: &ProbMeasure) -> Result<f64> {
    if cfg.grid() != &sol.axis {
        return Err(Error::GridMismatch("model and particle grids differ".into()));
    }
    let p = project_wn(sol, m)?;
    let g = sol.axis;
    let mut acc = 0.0;
    for j in 0..g.len() {
        let x = g.coords(j);
        acc += (-p.div_dm.values()[j] + cfg.hamiltonian(&x, p.dm.at(j))) * m.density()[j];
    }
    Ok(acc * g.cell_volume() - cfg.coupling_value(m)? - sol.lambda_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_basis_is_orthonormal_eigenbasis() {
        for n in [6usize, 7] {
            let b = AxisBasis::new(n);
            let h = 1.0 / n as f64;
            for c1 in 0..n {
                for c2 in 0..n {
                    let d: f64 = (0..n).map(|j| b.q[j * n + c1] * b.q[j * n + c2]).sum();
                    assert!((d - if c1 == c2 { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
                for j in 0..n {
                    let l = (b.q[((j + 1) % n) * n + c1] - 2.0 * b.q[j * n + c1] + b.q[((j + n - 1) % n) * n + c1]) / (h * h);
                    assert!((l - b.eig[c1] * b.q[j * n + c1]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn trivial_model_solution() {
        let cfg = ModelConfig::trivial(TorusGrid::line(8), 0.7);
        for np in 1..=3 {
            let sol = solve_cell_problem(&cfg, np, CellParams::default()).unwrap();
            assert!((sol.lambda_n + 0.7).abs() < 1e-12);
            assert!(sol.v.iter().all(|x| x.abs() < 1e-14));
            assert_eq!(sol.bernstein_check(), 0.0);
            assert_eq!(lipschitz_wasserstein_check(&sol, 50, 1).unwrap(), 0.0);
            let m = crate::ergodic::von_mises(*cfg.grid(), 0.3, 2.0);
            assert!(subsolution_residual(&cfg, &sol, &m).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = ModelConfig::trivial(TorusGrid::line(64), 0.0);
        let p = CellParams { node_budget: 1000, ..Default::default() };
        assert!(matches!(solve_cell_problem(&cfg, 2, p), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn glivenko_cases() {
        assert_eq!(glivenko_rate(1, 4), 0.5);
        assert!((glivenko_rate(4, 4) - 0.5 * 4f64.ln()).abs() < 1e-15);
        assert!((glivenko_rate(8, 16) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kernel_model_two_particles() {
        let g = TorusGrid::line(16);
        let cfg = ModelConfig::kernel_benchmark(g);
        let sol = solve_cell_problem(&cfg, 2, CellParams::default()).unwrap();
        assert!(sol.normalization_gap <= 1e-8);
        assert!(sol.symmetry_gap <= 1e-10, "{}", sol.symmetry_gap);
        // permuted pair has zero distance and is skipped
        assert_eq!(pair_ratio(&sol, &[3, 9], &[9, 3]).unwrap(), 0.0);
        assert!(lipschitz_wasserstein_check(&sol, 200, 3).unwrap().is_finite());
        let p = project_wn(&sol, &ProbMeasure::uniform(g)).unwrap();
        assert!(p.value.abs() < 1e-12);
        // λᴺ bounded by the largest |H(x,0) − 𝓕(mᴺ)| over the grid
        let mut bound: f64 = 0.0;
        for i in 0..sol.grid.len() {
            let idx = sol.grid.multi_index(i);
            for &j in &idx {
                bound = bound.max((cfg.potential_node(j) - cfg.coupling_empirical(&idx)).abs());
            }
        }
        assert!(sol.lambda_n.abs() <= bound);
    }

    #[test]
    fn discount_variant_approaches_marching() {
        let g = TorusGrid::line(16);
        let cfg = ModelConfig::kernel_benchmark(g);
        let sol = solve_cell_problem(&cfg, 1, CellParams::default()).unwrap();
        let disc = solve_cell_problem(&cfg, 1, CellParams { discount: Some(1e-4), max_time: 1e6, dt: 1.0, ..Default::default() }).unwrap();
        assert!((sol.lambda_n - disc.lambda_n).abs() < 1e-3, "{} vs {}", sol.lambda_n, disc.lambda_n);
    }

    #[test]
    fn projection_matches_finite_differences() {
        let g = TorusGrid::line(12);
        let cfg = ModelConfig::kernel_benchmark(g);
        let sol = solve_cell_problem(&cfg, 3, CellParams::default()).unwrap();
        let m = crate::ergodic::von_mises(g, 0.4, 1.0);
        let p = project_wn(&sol, &m).unwrap();
        let delta: Vec<f64> = (0..12).map(|j| (2.0 * PI * 2.0 * j as f64 / 12.0).sin() + 0.2 * (2.0 * PI * j as f64 / 12.0).cos()).collect();
        let eps = 1e-3;
        let shifted = |s: f64| -> f64 {
            let d: Vec<f64> = m.density().iter().zip(&delta).map(|(a, b)| a + s * b).collect();
            let mm = ProbMeasure::from_solver(g, d);
            project_wn(&sol, &mm).unwrap().value
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let exact = g.spacing() * torus::pair(p.flat.values(), &delta);
        assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1e-12), "fd {fd} exact {exact}");
        let z = ParticleSolution { v: vec![0.0; sol.v.len()], ..sol.clone() };
        let pz = project_wn(&z, &m).unwrap();
        assert_eq!((pz.value, pz.dm.max_abs(), pz.div_dm.max_abs()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn text_dump_has_particle_header() {
        let cfg = ModelConfig::trivial(TorusGrid::line(5), 0.0);
        let sol = solve_cell_problem(&cfg, 2, CellParams::default()).unwrap();
        let mut buf = Vec::new();
        sol.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# torus-field v1 dim=2 n=5 kind=field N=2\n"));
        assert_eq!(text.lines().count(), 26);
    }
}
