//! Truncated Becker-Doring system.
//!
//! Sizes `1..=N` are stored at indices `0..N`. The truncation sets
//! `beta_N = 0` so that no flux leaves the largest tracked size and the
//! mass `sum n C_n` is conserved exactly.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::rates::RateModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterState {
    pub concentrations: Vec<f64>,
    pub time: f64,
}

impl ClusterState {
    pub fn new(concentrations: Vec<f64>, time: f64) -> Result<Self> {
        if concentrations.len() < 2 {
            return domain("cluster state needs N >= 2");
        }
        if concentrations.iter().any(|c| !c.is_finite()) {
            return domain("cluster state has non-finite entries");
        }
        Ok(ClusterState { concentrations, time })
    }

    pub fn n_max(&self) -> usize {
        self.concentrations.len()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.concentrations.iter().all(|&c| c >= 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        total_mass(&self.concentrations)
    }
}

/// `sum_n n * C_n`.
pub fn total_mass(c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum()
}

/// Euclidean and mass-weighted norms of `a - b`.
pub fn diff_norms(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut e = 0.0;
    let mut m = 0.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let d = x - y;
        e += d * d;
        m += (i + 1) as f64 * d.abs();
    }
    (e.sqrt(), m)
}

/// Jacobian with a dense first row and column and a tridiagonal tail block.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrowhead {
    pub d11: f64,
    /// `J[0][j]` for `j = 1..N`.
    pub row: Vec<f64>,
    /// `J[i][0]` for `i = 1..N`.
    pub col: Vec<f64>,
    /// Tail block: `sub[k]` is `J[k+1][k]` in tail indices (`sub[0]` unused).
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Arrowhead {
    pub fn dim(&self) -> usize {
        self.diag.len() + 1
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        m[(0, 0)] = self.d11;
        for k in 0..n - 1 {
            m[(0, k + 1)] = self.row[k];
            m[(k + 1, 0)] = self.col[k];
            m[(k + 1, k + 1)] = self.diag[k];
            if k > 0 {
                m[(k + 1, k)] = self.sub[k];
            }
            if k + 1 < n - 1 {
                m[(k + 1, k + 2)] = self.sup[k];
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct BdSystem {
    model: RateModel,
    n: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl BdSystem {
    pub fn new(model: &RateModel, n_max: usize) -> Result<Self> {
        model.ensure_usable()?;
        if n_max < 2 {
            return domain("truncation size N must be >= 2");
        }
        let alpha: Vec<f64> = (1..=n_max).map(|n| model.alpha_n(n)).collect();
        let beta: Vec<f64> = (1..=n_max).map(|n| model.beta_n(n)).collect();
        if alpha.iter().chain(&beta).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return domain("rates must be finite and nonnegative");
        }
        Ok(BdSystem {
            model: model.clone(),
            n: n_max,
            alpha,
            beta,
        })
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn n_max(&self) -> usize {
        self.n
    }

    /// `alpha_n` for `n >= 1`; zero past the truncation.
    pub fn alpha(&self, n: usize) -> f64 {
        if n >= 1 && n <= self.n {
            self.alpha[n - 1]
        } else {
            0.0
        }
    }

    /// Truncated `beta_n` (`beta_N = 0`).
    pub fn beta(&self, n: usize) -> f64 {
        if n >= 1 && n < self.n {
            self.beta[n - 1]
        } else {
            0.0
        }
    }

    /// Untruncated `beta_n`.
    pub fn beta_raw(&self, n: usize) -> f64 {
        if n >= 1 && n <= self.n {
            self.beta[n - 1]
        } else {
            self.model.beta_n(n)
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return domain(format!("state length {len} does not match N = {}", self.n));
        }
        Ok(())
    }

    /// Full right-hand side written in flux form.
    pub fn rhs_full_into(&self, c: &[f64], out: &mut [f64]) {
        let n = self.n;
        let c1 = c[0];
        let mut sum_j = 0.0;
        let mut j_prev = 0.0;
        for k in 1..n {
            // J_k = beta_k C1 C_k - alpha_{k+1} C_{k+1}, stored for size k at index k-1.
            let j = self.beta[k - 1] * c1 * c[k - 1] - self.alpha[k] * c[k];
            if k == 1 {
                out[0] = -j;
            } else {
                out[k - 1] = j_prev - j;
            }
            sum_j += j;
            j_prev = j;
        }
        out[0] -= sum_j;
        out[n - 1] = j_prev;
    }

    pub fn rhs_full(&self, state: &ClusterState) -> Result<Vec<f64>> {
        self.check_len(state.n_max())?;
        let mut out = vec![0.0; self.n];
        self.rhs_full_into(&state.concentrations, &mut out);
        Ok(out)
    }

    /// Linear tail dynamics with the monomer frozen at `c1`, acting on
    /// `(C_2, ..., C_N)`. The `beta_1 c1^2` inflow into size 2 is included.
    pub fn rhs_tail_into(&self, c1: f64, tail: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut j_prev = self.beta[0] * c1 * c1 - self.alpha[1] * tail[0];
        for k in 2..n {
            let j = self.beta[k - 1] * c1 * tail[k - 2] - self.alpha[k] * tail[k - 1];
            out[k - 2] = j_prev - j;
            j_prev = j;
        }
        out[n - 2] = j_prev;
    }

    pub fn rhs_linear_tail(&self, c1_fixed: f64, state: &ClusterState) -> Result<Vec<f64>> {
        self.check_len(state.n_max())?;
        if !(c1_fixed >= 0.0) {
            return domain("c1_fixed must be nonnegative");
        }
        let mut out = vec![0.0; self.n];
        self.rhs_tail_into(c1_fixed, &state.concentrations[1..], &mut out[1..]);
        Ok(out)
    }

    /// Tridiagonal generator of the tail dynamics `(sub, diag, sup)` and the
    /// constant inflow into size 2.
    pub fn tail_generator(&self, c1: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
        let m = self.n - 1;
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        for k in 0..m {
            let size = k + 2;
            diag[k] = -(self.beta(size) * c1 + self.alpha(size));
            if k > 0 {
                sub[k] = self.beta(size - 1) * c1;
            }
            if k + 1 < m {
                sup[k] = self.alpha(size + 1);
            }
        }
        (sub, diag, sup, self.beta(1) * c1 * c1)
    }

    /// `A(b) v` for the truncated system; `rhs_full(C) = A(C_1) C`.
    pub fn apply_a(&self, b: f64, v: &[f64]) -> Result<Vec<f64>> {
        self.apply_a_impl(b, v, true)
    }

    /// `A(b) v` with the true `beta_N`: the projection of the infinite
    /// operator onto the first `N` sizes.
    pub fn apply_a_projected(&self, b: f64, v: &[f64]) -> Result<Vec<f64>> {
        self.apply_a_impl(b, v, false)
    }

    fn apply_a_impl(&self, b: f64, v: &[f64], truncated: bool) -> Result<Vec<f64>> {
        if !(b >= 0.0) {
            return domain(format!("A(b) needs b >= 0, got {b}"));
        }
        self.check_len(v.len())?;
        let n = self.n;
        let beta = |k: usize| if truncated { self.beta(k) } else { self.beta_raw(k) };
        let mut out = vec![0.0; n];
        let mut first = -2.0 * beta(1) * b * v[0] + self.alpha(2) * v[1];
        for k in 2..=n {
            first += (self.alpha(k) - beta(k) * b) * v[k - 1];
            let mut w = beta(k - 1) * b * v[k - 2] - (beta(k) * b + self.alpha(k)) * v[k - 1];
            if k < n {
                w += self.alpha(k + 1) * v[k];
            }
            out[k - 1] = w;
        }
        out[0] = first;
        Ok(out)
    }

    /// Dense matrix of `A(b)` (truncated).
    pub fn a_matrix(&self, b: f64) -> Result<DMatrix<f64>> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply_a(b, &e)?;
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        Ok(m)
    }

    /// Exact Jacobian of [`BdSystem::rhs_full`].
    pub fn jacobian(&self, c: &[f64]) -> Arrowhead {
        let n = self.n;
        let c1 = c[0];
        let mut d11 = -4.0 * self.beta(1) * c1;
        let mut row = vec![0.0; n - 1];
        let mut col = vec![0.0; n - 1];
        let mut sub = vec![0.0; n - 1];
        let mut diag = vec![0.0; n - 1];
        let mut sup = vec![0.0; n - 1];
        for size in 2..=n {
            let k = size - 2;
            d11 -= self.beta(size) * c[size - 1];
            row[k] = -self.beta(size) * c1 + self.alpha(size) + if size == 2 { self.alpha(2) } else { 0.0 };
            col[k] = if size == 2 {
                2.0 * self.beta(1) * c1 - self.beta(2) * c[1]
            } else {
                self.beta(size - 1) * c[size - 2] - self.beta(size) * c[size - 1]
            };
            diag[k] = -(self.beta(size) * c1 + self.alpha(size));
            if size > 2 {
                sub[k] = self.beta(size - 1) * c1;
            }
            if size < n {
                sup[k] = self.alpha(size + 1);
            }
        }
        Arrowhead {
            d11,
            row,
            col,
            sub,
            diag,
            sup,
        }
    }

    pub fn jacobian_bd(&self, state: &ClusterState) -> Result<Arrowhead> {
        self.check_len(state.n_max())?;
        Ok(self.jacobian(&state.concentrations))
    }

    /// `H1` constant `B` measured over sizes `1..=N+1`.
    pub fn bound_b(&self) -> f64 {
        let mut b: f64 = 0.0;
        for k in 1..=self.n {
            b = b
                .max((self.model.alpha_n(k + 1) - self.model.alpha_n(k)).abs())
                .max((self.model.beta_n(k + 1) - self.model.beta_n(k)).abs());
        }
        b
    }

    /// `delta_1 = lambda + beta_1 b`,
    /// `delta_n = lambda + beta_n b + alpha_n - (beta_{n-1} b + alpha_n)^2 / (4 delta_{n-1})`.
    pub fn delta_sequence(&self, b: f64, lambda: f64, len: usize) -> Result<Vec<f64>> {
        let m = &self.model;
        let mut out = Vec::with_capacity(len);
        let mut prev = lambda + m.beta_n(1) * b;
        if !(prev > 0.0) {
            return Err(Error::DeltaBreakdown { index: 1, value: prev });
        }
        out.push(prev);
        for n in 2..=len {
            let t = m.beta_n(n - 1) * b + m.alpha_n(n);
            let d = lambda + m.beta_n(n) * b + m.alpha_n(n) - 0.25 * t * t / prev;
            if !(d > 0.0) {
                return Err(Error::DeltaBreakdown { index: n, value: d });
            }
            out.push(d);
            prev = d;
        }
        Ok(out)
    }

    /// `<(A(b) - lambda I) v, v>` for the projected (untruncated) operator.
    pub fn dissipativity_probe(&self, b: f64, v: &[f64], lambda: f64) -> Result<f64> {
        let av = self.apply_a_projected(b, v)?;
        Ok(av.iter().zip(v).map(|(a, x)| (a - lambda * x) * x).sum())
    }

    pub fn dissipativity_report(&self, b: f64, probes: &[Vec<f64>]) -> Result<DissipativityReport> {
        let lam = lambda_b(self.bound_b(), b, self.alpha(2));
        let delta_seq = self.delta_sequence(b, lam, self.n)?;
        let min_delta = delta_seq.iter().cloned().fold(f64::INFINITY, f64::min);
        let lower_bound_ok = delta_seq
            .iter()
            .enumerate()
            .all(|(i, d)| *d >= 0.5 * (self.model.alpha_n(i + 2) + self.model.beta_n(i + 1) * b) * (1.0 - 1e-12));
        let probe_values = probes
            .iter()
            .map(|v| self.dissipativity_probe(b, v, lam))
            .collect::<Result<Vec<_>>>()?;
        Ok(DissipativityReport {
            lambda_b: lam,
            delta_seq,
            min_delta,
            probe_values,
            lower_bound_ok,
        })
    }
}

/// `lambda_b = max(B (1 + b), alpha_2) / 2`.
pub fn lambda_b(bound_b: f64, b: f64, alpha2: f64) -> f64 {
    0.5 * (bound_b * (1.0 + b)).max(alpha2)
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipativityReport {
    pub lambda_b: f64,
    pub delta_seq: Vec<f64>,
    pub min_delta: f64,
    pub probe_values: Vec<f64>,
    pub lower_bound_ok: bool,
}
