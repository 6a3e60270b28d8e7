//! Periodic grids on the flat torus, centered finite differences, midpoint
//! quadrature and the exact 1-Wasserstein distance in one dimension.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Uniform periodic grid with `n` points per axis on the unit torus of dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 || n < 3 {
            return Err(Error::InvalidInput(format!(
                "grid needs dim >= 1 and n >= 3, got dim={dim} n={n}"
            )));
        }
        if (n as f64).powi(dim as i32) > usize::MAX as f64 / 16.0 {
            return Err(Error::InvalidInput(format!("grid {n}^{dim} is too large")));
        }
        Ok(Self { dim, n })
    }

    /// One-dimensional grid; panics only on `n < 3`, which is a programming error.
    pub fn line(n: usize) -> Self {
        Self::new(1, n).expect("n >= 3")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Row-major stride of `axis` (the last axis varies fastest).
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Flat index of a multi-index; each component wraps modulo n.
    pub fn index(&self, multi: &[i64]) -> usize {
        debug_assert_eq!(multi.len(), self.dim);
        let n = self.n as i64;
        multi
            .iter()
            .fold(0usize, |acc, &j| acc * self.n + j.rem_euclid(n) as usize)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Coordinate of a node along one axis.
    pub fn axis_coord(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .into_iter()
            .map(|j| self.axis_coord(j))
            .collect()
    }

    /// Neighbor of `idx` shifted by `offset` along `axis`, with periodic wrap.
    pub fn shift(&self, idx: usize, axis: usize, offset: i64) -> usize {
        let s = self.stride(axis);
        let j = (idx / s) % self.n;
        let nj = (j as i64 + offset).rem_euclid(self.n as i64) as usize;
        idx - j * s + nj * s
    }

    fn check(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "dim={} n={} vs dim={} n={}",
                self.dim, self.n, other.dim, other.n
            )));
        }
        Ok(())
    }
}

/// Scalar samples on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Midpoint integral over the torus.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Multilinear interpolation at an arbitrary point (coordinates taken modulo 1).
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.n as f64;
        let mut base = Vec::with_capacity(g.dim);
        let mut frac = Vec::with_capacity(g.dim);
        for &xi in x {
            let s = xi.rem_euclid(1.0) * n;
            let j = s.floor();
            base.push(j as i64);
            frac.push(s - j);
        }
        let mut acc = 0.0;
        let mut corner = vec![0i64; g.dim];
        for mask in 0..(1usize << g.dim) {
            let mut w = 1.0;
            for a in 0..g.dim {
                let up = (mask >> a) & 1 == 1;
                corner[a] = base[a] + up as i64;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * self.values[g.index(&corner)];
            }
        }
        acc
    }
}

/// A `d`-component vector per node, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * grid.dim() {
            return Err(Error::InvalidInput(format!(
                "vector field needs {} components, got {}",
                grid.len() * grid.dim(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len() * grid.dim()],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.values[idx * d..(idx + 1) * d]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Nonnegative histogram density with unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMeasure {
    grid: TorusGrid,
    density: Vec<f64>,
}

pub const MASS_TOLERANCE: f64 = 1e-12;

impl ProbMeasure {
    pub fn new(grid: TorusGrid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "measure needs {} values, got {}",
                grid.len(),
                density.len()
            )));
        }
        if let Some(v) = density.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("density value {v} is not a finite nonnegative number")));
        }
        let mass = density.iter().sum::<f64>() / grid.len() as f64;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!("total mass {mass} differs from 1")));
        }
        Ok(Self { grid, density })
    }

    /// Normalizes nonnegative weights to unit mass.
    pub fn from_weights(grid: TorusGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidInput("weight count differs from grid size".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("measure has zero total mass".into()));
        }
        let scale = grid.len() as f64 / total;
        Ok(Self {
            grid,
            density: weights.into_iter().map(|w| w * scale).collect(),
        })
    }

    pub fn uniform(grid: TorusGrid) -> Self {
        Self {
            grid,
            density: vec![1.0; grid.len()],
        }
    }

    /// Unit mass concentrated on a single node.
    pub fn dirac(grid: TorusGrid, idx: usize) -> Self {
        let mut density = vec![0.0; grid.len()];
        density[idx] = grid.len() as f64;
        Self { grid, density }
    }

    /// Solver output: mass is conserved by construction and tiny negative
    /// round-off is kept as is so that residuals stay honest.
    pub(crate) fn from_solver(grid: TorusGrid, density: Vec<f64>) -> Self {
        debug_assert_eq!(density.len(), grid.len());
        Self { grid, density }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min_density(&self) -> f64 {
        self.density.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// ∫ f dm.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.grid.check(f.grid())?;
        Ok(pair(f.values(), &self.density) * self.grid.cell_volume())
    }

    pub fn as_field(&self) -> Field {
        Field {
            grid: self.grid,
            values: self.density.clone(),
        }
    }
}

pub(crate) fn pair(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centered periodic differences.
pub fn gradient(f: &Field) -> VectorField {
    let g = *f.grid();
    let d = g.dim();
    let inv = 0.5 / g.spacing();
    let mut out = vec![0.0; g.len() * d];
    for i in 0..g.len() {
        for a in 0..d {
            out[i * d + a] = (f.values[g.shift(i, a, 1)] - f.values[g.shift(i, a, -1)]) * inv;
        }
    }
    VectorField { grid: g, values: out }
}

/// Centered periodic divergence, the exact negative adjoint of [`gradient`].
pub fn divergence(v: &VectorField) -> Field {
    let g = *v.grid();
    let d = g.dim();
    let inv = 0.5 / g.spacing();
    let mut out = vec![0.0; g.len()];
    for (i, o) in out.iter_mut().enumerate() {
        for a in 0..d {
            *o += (v.values[g.shift(i, a, 1) * d + a] - v.values[g.shift(i, a, -1) * d + a]) * inv;
        }
    }
    Field { grid: g, values: out }
}

/// Direct 2d+1 point periodic Laplacian.
pub fn laplacian(f: &Field) -> Field {
    let g = *f.grid();
    let inv = 1.0 / (g.spacing() * g.spacing());
    let mut out = vec![0.0; g.len()];
    for (i, o) in out.iter_mut().enumerate() {
        for a in 0..g.dim() {
            *o += (f.values[g.shift(i, a, 1)] - 2.0 * f.values[i] + f.values[g.shift(i, a, -1)]) * inv;
        }
    }
    Field { grid: g, values: out }
}

/// The composition `divergence(gradient(f))`, a wide stencil with spacing 2h.
///
/// The MFG solvers and the energy use this operator so that the discrete
/// Fokker-Planck and HJB steps are exact adjoints and summation by parts
/// holds without remainder.
pub fn composed_laplacian(f: &Field) -> Field {
    divergence(&gradient(f))
}

/// Exact 1-Wasserstein distance between histograms on the circle, with the
/// mass of each cell placed at its node.
pub fn wasserstein1(a: &ProbMeasure, b: &ProbMeasure) -> Result<f64> {
    a.grid.check(&b.grid)?;
    if a.grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(a.grid.dim()));
    }
    Ok(circle_w1(a.density(), b.density(), a.grid.spacing()))
}

/// W1 on the circle for densities on a uniform grid of spacing `h`:
/// h·Σ|G_j − median(G)| where G is the cumulative mass difference.
pub(crate) fn circle_w1(a: &[f64], b: &[f64], h: f64) -> f64 {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            acc += (x - y) * h;
            acc
        })
        .collect();
    let mut sorted = cdf.clone();
    sorted.sort_by(|x, y| x.total_cmp(y));
    let med = sorted[sorted.len() / 2];
    for c in cdf.iter_mut() {
        *c = (*c - med).abs();
    }
    h * cdf.iter().sum::<f64>()
}

/// Kind tag used in the text header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextKind {
    Field,
    Vector,
    Measure,
}

impl TextKind {
    fn as_str(&self) -> &'static str {
        match self {
            TextKind::Field => "field",
            TextKind::Vector => "vector",
            TextKind::Measure => "measure",
        }
    }
}

fn header(grid: &TorusGrid, kind: TextKind, extra: &str) -> String {
    format!(
        "# torus-field v1 dim={} n={} kind={}{}\n",
        grid.dim(),
        grid.points_per_axis(),
        kind.as_str(),
        extra
    )
}

fn write_rows(mut out: impl Write, head: String, values: &[f64], width: usize) -> Result<()> {
    let mut buf = head;
    for row in values.chunks(width) {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                buf.push('\t');
            }
            write!(buf, "{v}").expect("write to string");
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn write_field(out: impl Write, f: &Field) -> Result<()> {
    write_rows(out, header(f.grid(), TextKind::Field, ""), f.values(), 1)
}

pub fn write_vector(out: impl Write, v: &VectorField) -> Result<()> {
    write_rows(out, header(v.grid(), TextKind::Vector, ""), v.values(), v.grid().dim())
}

pub fn write_measure(out: impl Write, m: &ProbMeasure) -> Result<()> {
    write_rows(out, header(m.grid(), TextKind::Measure, ""), m.density(), 1)
}

/// Header fields of a torus-field text file, plus any extra `key=value` pairs.
#[derive(Debug, Clone)]
pub struct TextHeader {
    pub grid: TorusGrid,
    pub kind: TextKind,
    pub extra: Vec<(String, String)>,
}

pub(crate) fn write_table(out: impl Write, grid: &TorusGrid, kind: TextKind, extra: &str, values: &[f64]) -> Result<()> {
    write_rows(out, header(grid, kind, extra), values, 1)
}

/// Reads any torus-field text file, returning its header and the flat values.
pub fn read_text(input: impl BufRead) -> Result<(TextHeader, Vec<f64>)> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty input".into()))??;
    let mut parts = first.split_whitespace();
    if parts.next() != Some("#") || parts.next() != Some("torus-field") || parts.next() != Some("v1") {
        return Err(Error::Format(format!("bad header line `{first}`")));
    }
    let (mut dim, mut n, mut kind) = (None, None, None);
    let mut extra = Vec::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header token `{p}`")))?;
        let parse = |v: &str| v.parse::<usize>().map_err(|e| Error::Format(format!("{k}: {e}")));
        match k {
            "dim" => dim = Some(parse(v)?),
            "n" => n = Some(parse(v)?),
            "kind" => {
                kind = Some(match v {
                    "field" => TextKind::Field,
                    "vector" => TextKind::Vector,
                    "measure" => TextKind::Measure,
                    _ => return Err(Error::Format(format!("unknown kind `{v}`"))),
                })
            }
            _ => extra.push((k.to_string(), v.to_string())),
        }
    }
    let missing = |what: &str| Error::Format(format!("header lacks {what}"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let n = n.ok_or_else(|| missing("n"))?;
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let grid = TorusGrid::new(dim, n)?;
    let mut values = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split('\t') {
            values.push(
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("value `{tok}`: {e}")))?,
            );
        }
    }
    Ok((TextHeader { grid, kind, extra }, values))
}

pub fn read_field(input: impl BufRead) -> Result<Field> {
    let (h, v) = read_text(input)?;
    if h.kind != TextKind::Field {
        return Err(Error::Format("expected kind=field".into()));
    }
    Field::new(h.grid, v)
}

pub fn read_vector(input: impl BufRead) -> Result<VectorField> {
    let (h, v) = read_text(input)?;
    if h.kind != TextKind::Vector {
        return Err(Error::Format("expected kind=vector".into()));
    }
    VectorField::new(h.grid, v)
}

pub fn read_measure(input: impl BufRead) -> Result<ProbMeasure> {
    let (h, v) = read_text(input)?;
    if h.kind != TextKind::Measure {
        return Err(Error::Format("expected kind=measure".into()));
    }
    ProbMeasure::new(h.grid, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn indexing_wraps() {
        let g = TorusGrid::new(2, 5).unwrap();
        assert_eq!(g.index(&[0, -1]), 4);
        assert_eq!(g.index(&[5, 7]), 2);
        let i = g.index(&[3, 4]);
        assert_eq!(g.shift(i, 1, 1), g.index(&[3, 0]));
        assert_eq!(g.shift(i, 0, -4), g.index(&[4, 4]));
        assert_eq!(g.multi_index(i), vec![3, 4]);
        assert!((g.cell_volume() * g.len() as f64 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_sine() {
        let g = TorusGrid::line(64);
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let df = gradient(&f);
        let bound = (2.0 * PI).powi(3) / (6.0 * 64.0 * 64.0);
        for i in 0..64 {
            let exact = 2.0 * PI * (2.0 * PI * g.axis_coord(i)).cos();
            assert!((df.values()[i] - exact).abs() <= bound);
        }
    }

    #[test]
    fn divergence_of_cosine() {
        let g = TorusGrid::line(64);
        let v = VectorField::new(g, (0..64).map(|j| (2.0 * PI * g.axis_coord(j)).cos()).collect()).unwrap();
        let dv = divergence(&v);
        let bound = (2.0 * PI).powi(3) / (6.0 * 64.0 * 64.0);
        for i in 0..64 {
            assert!((dv.values()[i] + 2.0 * PI * (2.0 * PI * g.axis_coord(i)).sin()).abs() <= bound);
        }
    }

    #[test]
    fn sawtooth_gradient_is_defined_but_inaccurate_at_wrap() {
        let g = TorusGrid::line(16);
        let f = Field::new(g, (0..16).map(|j| j as f64 / 16.0).collect()).unwrap();
        let df = gradient(&f);
        assert!((df.values()[5] - 1.0).abs() < 1e-12);
        assert!((df.values()[0] - 1.0).abs() > 1.0);
    }

    #[test]
    fn laplacian_of_sine_and_constant() {
        let g = TorusGrid::line(64);
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let lf = laplacian(&f);
        let k2 = 4.0 * PI * PI;
        let bound = k2 * k2 / (12.0 * 64.0 * 64.0);
        for i in 0..64 {
            assert!((lf.values()[i] + k2 * f.values()[i]).abs() <= bound);
        }
        assert_eq!(laplacian(&Field::constant(g, 3.0)).max_abs(), 0.0);
        assert_eq!(gradient(&Field::constant(g, 3.0)).max_abs(), 0.0);
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let g = TorusGrid::new(2, 6).unwrap();
        let f = Field::from_fn(g, |x| x[0] * 3.0 + (x[1] * 7.0).sin());
        for i in 0..g.len() {
            assert!((f.interpolate(&g.coords(i)) - f.values()[i]).abs() < 1e-14);
        }
        let h = TorusGrid::line(8);
        let lin = Field::new(h, (0..8).map(|j| j as f64).collect()).unwrap();
        assert!((lin.interpolate(&[2.5 / 8.0]) - 2.5).abs() < 1e-12);
        assert!((lin.interpolate(&[-0.5 / 8.0]) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn antipodal_spikes() {
        let g = TorusGrid::line(64);
        let d = wasserstein1(&ProbMeasure::dirac(g, 0), &ProbMeasure::dirac(g, 32)).unwrap();
        assert!((d - 0.5).abs() <= 1.0 / 64.0);
        let d = wasserstein1(&ProbMeasure::dirac(g, 3), &ProbMeasure::dirac(g, 60)).unwrap();
        assert!((d - 7.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_rejects_two_dimensions() {
        let g = TorusGrid::new(2, 4).unwrap();
        let m = ProbMeasure::uniform(g);
        assert!(matches!(wasserstein1(&m, &m), Err(Error::UnsupportedDimension(2))));
    }

    #[test]
    fn measure_validation() {
        let g = TorusGrid::line(4);
        assert!(ProbMeasure::new(g, vec![1.0, 1.0, 1.0, 1.0]).is_ok());
        assert!(ProbMeasure::new(g, vec![2.0, 0.0, 2.0, 0.1]).is_err());
        assert!(ProbMeasure::new(g, vec![2.0, -0.5, 2.0, 0.5]).is_err());
        assert!(ProbMeasure::from_weights(g, vec![0.0; 4]).is_err());
        let m = ProbMeasure::from_weights(g, vec![1.0, 3.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.density(), &[1.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn text_round_trip() {
        let g = TorusGrid::line(7);
        let f = Field::from_fn(g, |x| (x[0] * 5.0).exp() / 3.0);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert!(buf.starts_with(b"# torus-field v1 dim=1 n=7 kind=field\n"));
        assert_eq!(read_field(&buf[..]).unwrap(), f);

        let g2 = TorusGrid::new(2, 3).unwrap();
        let v = VectorField::new(g2, (0..18).map(|k| k as f64 * 0.1).collect()).unwrap();
        let mut buf = Vec::new();
        write_vector(&mut buf, &v).unwrap();
        assert_eq!(read_vector(&buf[..]).unwrap(), v);

        let m = ProbMeasure::from_weights(g, vec![1.0, 2.0, 3.0, 0.0, 0.5, 0.25, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        write_measure(&mut buf, &m).unwrap();
        assert_eq!(read_measure(&buf[..]).unwrap(), m);
        assert!(read_field(&b"# nope\n1\n"[..]).is_err());
    }
}
