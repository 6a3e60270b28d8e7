use std::f64::consts::PI;

use crate::model::ModelConfig;
use crate::torus::ProbMeasure;

use super::TerminalCost;

/// Centered periodic difference (f[j+1] − f[j−1]) / 2h.
pub(crate) fn centered_diff(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let inv = 0.5 / h;
    for j in 0..n {
        let up = f[if j + 1 == n { 0 } else { j + 1 }];
        let dn = f[if j == 0 { n - 1 } else { j - 1 }];
        out[j] = (up - dn) * inv;
    }
}

/// div∘grad: (f[j+2] − 2f[j] + f[j−2]) / 4h².
pub(crate) fn composed_laplacian(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let inv = 0.25 / (h * h);
    for j in 0..n {
        out[j] = (f[(j + 2) % n] - 2.0 * f[j] + f[(j + n - 2) % n]) * inv;
    }
}

/// Discrete operators of one time step for a fixed model and dt.
pub(crate) struct Scheme<'a> {
    pub cfg: &'a ModelConfig,
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    /// First column of (I − dt·L)⁻¹, a symmetric circulant.
    inverse: Vec<f64>,
    potential: Vec<f64>,
}

impl<'a> Scheme<'a> {
    pub fn new(cfg: &'a ModelConfig, dt: f64) -> Self {
        let n = cfg.grid().points_per_axis();
        let h = cfg.grid().spacing();
        let symbol: Vec<f64> = (0..n)
            .map(|k| {
                let s = (2.0 * PI * k as f64 / n as f64).sin() / h;
                1.0 / (1.0 + dt * s * s)
            })
            .collect();
        let inverse = (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| (2.0 * PI * (k * j % n) as f64 / n as f64).cos() * symbol[k])
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        let potential = (0..n).map(|j| cfg.potential_node(j)).collect();
        Self {
            cfg,
            n,
            h,
            dt,
            inverse,
            potential,
        }
    }

    /// out = (I − dt·L)⁻¹ rhs.
    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            // c[(i−j) mod n], split to avoid the modulo in the inner loop
            for (j, r) in rhs[..=i].iter().enumerate() {
                acc += self.inverse[i - j] * r;
            }
            for (j, r) in rhs.iter().enumerate().take(n).skip(i + 1) {
                acc += self.inverse[n + i - j] * r;
            }
            *o = acc;
        }
    }

    pub fn hamiltonian(&self, j: usize, p: f64) -> f64 {
        0.5 * p * p + self.potential[j]
    }

    pub fn conjugate(&self, j: usize, a: f64) -> f64 {
        0.5 * a * a - self.potential[j]
    }

    pub fn dp_hamiltonian(&self, _j: usize, p: f64) -> f64 {
        p
    }

    pub fn da_conjugate(&self, _j: usize, a: f64) -> f64 {
        a
    }

    /// ∫ H*(x, a) dm + 𝓕(m).
    pub fn running_cost(&self, m: &[f64], a: &[f64]) -> f64 {
        let lag: f64 = (0..self.n).map(|j| self.conjugate(j, a[j]) * m[j]).sum();
        self.h * lag + self.cfg.coupling_density(m)
    }

    /// ∫ |H*(x, a)| dm + |𝓕(m)|.
    pub fn running_cost_magnitude(&self, m: &[f64], a: &[f64]) -> f64 {
        let lag: f64 = (0..self.n).map(|j| self.conjugate(j, a[j]).abs() * m[j]).sum();
        self.h * lag + self.cfg.coupling_density(m).abs()
    }

    pub fn forward_step(&self, m: &[f64], a: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        for j in 0..self.n {
            scratch[j] = m[j] * a[j];
        }
        centered_diff(scratch, self.h, out);
        for j in 0..self.n {
            scratch[j] = m[j] + self.dt * out[j];
        }
        self.solve(scratch, out);
    }

    pub fn forward(&self, m0: &[f64], alpha: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut ms = Vec::with_capacity(alpha.len() + 1);
        ms.push(m0.to_vec());
        let mut scratch = vec![0.0; self.n];
        for a in alpha {
            let mut next = vec![0.0; self.n];
            self.forward_step(ms.last().expect("nonempty"), a, &mut scratch, &mut next);
            ms.push(next);
        }
        ms
    }

    pub fn measure(&self, m: &[f64]) -> ProbMeasure {
        ProbMeasure::from_solver(*self.cfg.grid(), m.to_vec())
    }

    fn terminal_condition(&self, m_last: &[f64], terminal: Option<&dyn TerminalCost>) -> Vec<f64> {
        let mut u = vec![0.0; self.n];
        if let Some(f) = terminal.and_then(|t| t.flat_derivative(&self.measure(m_last))) {
            self.solve(f.values(), &mut u);
        }
        u
    }

    pub fn total_cost(&self, ms: &[Vec<f64>], alpha: &[Vec<f64>], terminal: Option<&dyn TerminalCost>) -> f64 {
        let running: f64 = alpha
            .iter()
            .enumerate()
            .map(|(k, a)| self.dt * self.running_cost(&ms[k], a))
            .sum();
        running + terminal.map_or(0.0, |t| t.value(&self.measure(ms.last().expect("nonempty"))))
    }

    /// Adjoint of the forward recursion for an arbitrary drift path:
    /// A u^k = u^{k+1} + dt·[H*(α^k) + F(m^k) − α^k·Du^{k+1}].
    pub fn adjoint(&self, ms: &[Vec<f64>], alpha: &[Vec<f64>], terminal: Option<&dyn TerminalCost>) -> Vec<Vec<f64>> {
        let steps = alpha.len();
        let mut us = vec![Vec::new(); steps + 1];
        us[steps] = self.terminal_condition(&ms[steps], terminal);
        let mut du = vec![0.0; self.n];
        let mut rhs = vec![0.0; self.n];
        for k in (0..steps).rev() {
            let f = self.cfg.coupling_derivative_density(&ms[k]);
            let next = &us[k + 1];
            centered_diff(next, self.h, &mut du);
            for j in 0..self.n {
                let a = alpha[k][j];
                rhs[j] = next[j] + self.dt * (self.conjugate(j, a) + f[j] - a * du[j]);
            }
            let mut u = vec![0.0; self.n];
            self.solve(&rhs, &mut u);
            us[k] = u;
        }
        us
    }

    /// Implicit HJB step with the optimal drift:
    /// A u^k = u^{k+1} + dt·[F(m^k) − H(x, Du^{k+1})]. Returns (u, α).
    pub fn hjb(&self, ms: &[Vec<f64>], terminal: Option<&dyn TerminalCost>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let steps = ms.len() - 1;
        let mut us = vec![Vec::new(); steps + 1];
        let mut alpha = vec![Vec::new(); steps];
        us[steps] = self.terminal_condition(&ms[steps], terminal);
        let mut rhs = vec![0.0; self.n];
        for k in (0..steps).rev() {
            let f = self.cfg.coupling_derivative_density(&ms[k]);
            let mut du = vec![0.0; self.n];
            centered_diff(&us[k + 1], self.h, &mut du);
            for j in 0..self.n {
                rhs[j] = us[k + 1][j] + self.dt * (f[j] - self.hamiltonian(j, du[j]));
            }
            let mut u = vec![0.0; self.n];
            self.solve(&rhs, &mut u);
            us[k] = u;
            alpha[k] = (0..self.n).map(|j| self.dp_hamiltonian(j, du[j])).collect();
        }
        (us, alpha)
    }

    /// Courant number dt·max|α|/h.
    pub fn courant(&self, alpha: &[Vec<f64>]) -> f64 {
        let amax = alpha.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        self.dt * amax / self.h
    }
}
