//! Time integration for stiff truncated systems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bd::{Arrowhead, BdSystem};
use crate::error::{domain, Error, Result};
use crate::util::thomas;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Extrapolated implicit Euler of order 4 with adaptive steps.
    ImplicitAdaptive,
    ExplicitRK4,
    MatrixExponentialOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// `null` in JSON means unbounded.
    #[serde(with = "unbounded")]
    pub max_step: f64,
    pub initial_step: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Reject accepted-step candidates with a component below `-atol`.
    pub enforce_nonnegative: bool,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::ImplicitAdaptive,
            rtol: 1e-6,
            atol: 1e-12,
            max_step: f64::INFINITY,
            initial_step: 1e-6,
            newton_tol: 1e-3,
            max_newton_iters: 8,
            enforce_nonnegative: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Solver("rtol and atol must be positive".into()));
        }
        if self.max_newton_iters < 1 {
            return Err(Error::Solver("max_newton_iters must be >= 1".into()));
        }
        if !(self.initial_step > 0.0 && self.max_step > 0.0) {
            return Err(Error::Solver("step sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Structured Jacobian of an ODE right-hand side.
#[derive(Debug, Clone)]
pub enum Jacobian {
    Dense(DMatrix<f64>),
    Arrowhead(Arrowhead),
    Tridiagonal {
        sub: Vec<f64>,
        diag: Vec<f64>,
        sup: Vec<f64>,
    },
}

impl Jacobian {
    /// Solves `(I - h J) x = r` in place.
    fn solve_shifted(&self, h: f64, r: &mut [f64]) -> Result<()> {
        match self {
            Jacobian::Dense(j) => {
                let n = j.nrows();
                let m = DMatrix::identity(n, n) - j * h;
                let x = m
                    .lu()
                    .solve(&DVector::from_column_slice(r))
                    .ok_or_else(|| Error::Internal("singular Newton matrix".into()))?;
                r.copy_from_slice(x.as_slice());
                Ok(())
            }
            Jacobian::Tridiagonal { sub, diag, sup } => {
                let s: Vec<f64> = sub.iter().map(|v| -h * v).collect();
                let d: Vec<f64> = diag.iter().map(|v| 1.0 - h * v).collect();
                let u: Vec<f64> = sup.iter().map(|v| -h * v).collect();
                thomas(&s, &d, &u, r)
            }
            Jacobian::Arrowhead(a) => {
                let s: Vec<f64> = a.sub.iter().map(|v| -h * v).collect();
                let d: Vec<f64> = a.diag.iter().map(|v| 1.0 - h * v).collect();
                let u: Vec<f64> = a.sup.iter().map(|v| -h * v).collect();
                let mut y = r[1..].to_vec();
                thomas(&s, &d, &u, &mut y)?;
                let mut z: Vec<f64> = a.col.iter().map(|v| -h * v).collect();
                thomas(&s, &d, &u, &mut z)?;
                let m11 = 1.0 - h * a.d11;
                let mut uy = 0.0;
                let mut uz = 0.0;
                for k in 0..y.len() {
                    uy += -h * a.row[k] * y[k];
                    uz += -h * a.row[k] * z[k];
                }
                let x1 = (r[0] - uy) / (m11 - uz);
                if !x1.is_finite() {
                    return Err(Error::Internal("singular bordered system".into()));
                }
                r[0] = x1;
                for k in 0..y.len() {
                    r[k + 1] = y[k] - z[k] * x1;
                }
                Ok(())
            }
        }
    }
}

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    fn jacobian(&self, _t: f64, _y: &[f64]) -> Option<Jacobian> {
        None
    }
    /// Constant matrix `A` when the system is `y' = A y`.
    fn linear_matrix(&self) -> Option<DMatrix<f64>> {
        None
    }
}

/// Full Becker-Doring dynamics.
pub struct BdFull<'a>(pub &'a BdSystem);

impl OdeSystem for BdFull<'_> {
    fn dim(&self) -> usize {
        self.0.n_max()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.0.rhs_full_into(y, dy);
    }
    fn jacobian(&self, _t: f64, y: &[f64]) -> Option<Jacobian> {
        Some(Jacobian::Arrowhead(self.0.jacobian(y)))
    }
}

/// Linear tail dynamics on `(C_2, ..., C_N, 1)`.
///
/// The trailing constant component carries the `beta_1 c1^2` inflow so the
/// system is homogeneous linear and fits the matrix exponential oracle.
pub struct BdTail<'a> {
    pub sys: &'a BdSystem,
    pub c1: f64,
    gen: (Vec<f64>, Vec<f64>, Vec<f64>, f64),
}

impl<'a> BdTail<'a> {
    pub fn new(sys: &'a BdSystem, c1: f64) -> Self {
        BdTail {
            sys,
            c1,
            gen: sys.tail_generator(c1),
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        let m = self.sys.n_max() - 1;
        let (sub, diag, sup, inflow) = &self.gen;
        let mut a = DMatrix::zeros(m + 1, m + 1);
        for k in 0..m {
            a[(k, k)] = diag[k];
            if k > 0 {
                a[(k, k - 1)] = sub[k];
            }
            if k + 1 < m {
                a[(k, k + 1)] = sup[k];
            }
        }
        a[(0, m)] = *inflow;
        a
    }
}

impl OdeSystem for BdTail<'_> {
    fn dim(&self) -> usize {
        self.sys.n_max()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let m = self.sys.n_max() - 1;
        let (sub, diag, sup, inflow) = &self.gen;
        for k in 0..m {
            let mut v = diag[k] * y[k];
            v += if k > 0 { sub[k] * y[k - 1] } else { inflow * y[m] };
            if k + 1 < m {
                v += sup[k] * y[k + 1];
            }
            dy[k] = v;
        }
        dy[m] = 0.0;
    }
    fn jacobian(&self, _t: f64, _y: &[f64]) -> Option<Jacobian> {
        Some(Jacobian::Dense(self.matrix()))
    }
    fn linear_matrix(&self) -> Option<DMatrix<f64>> {
        Some(self.matrix())
    }
}

/// Tail dynamics on `(C_2, ..., C_N)` with the inflow as a source term.
/// Cheaper than [`BdTail`] for the implicit solver: its Jacobian is tridiagonal.
pub struct BdTailAffine<'a> {
    pub sys: &'a BdSystem,
    pub c1: f64,
    gen: (Vec<f64>, Vec<f64>, Vec<f64>, f64),
}

impl<'a> BdTailAffine<'a> {
    pub fn new(sys: &'a BdSystem, c1: f64) -> Self {
        BdTailAffine {
            sys,
            c1,
            gen: sys.tail_generator(c1),
        }
    }
}

impl OdeSystem for BdTailAffine<'_> {
    fn dim(&self) -> usize {
        self.sys.n_max() - 1
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.sys.rhs_tail_into(self.c1, y, dy);
    }
    fn jacobian(&self, _t: f64, _y: &[f64]) -> Option<Jacobian> {
        let (sub, diag, sup, _) = &self.gen;
        Some(Jacobian::Tridiagonal {
            sub: sub.clone(),
            diag: diag.clone(),
            sup: sup.clone(),
        })
    }
}

/// Linear BD dynamics on sizes `lo..=N` with frozen monomers and no
/// population below `lo`.
#[derive(Debug, Clone)]
pub struct BdBlock {
    pub lo: usize,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl BdBlock {
    pub fn new(sys: &BdSystem, c1: f64, lo: usize) -> Result<Self> {
        let n = sys.n_max();
        if lo < 2 || lo >= n {
            return domain("block needs 2 <= lo < N");
        }
        let m = n - lo + 1;
        let (mut sub, mut diag, mut sup) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for k in 0..m {
            let size = lo + k;
            diag[k] = -(sys.beta(size) * c1 + sys.alpha(size));
            if k > 0 {
                sub[k] = sys.beta(size - 1) * c1;
            }
            if k + 1 < m {
                sup[k] = sys.alpha(size + 1);
            }
        }
        Ok(BdBlock { lo, sub, diag, sup })
    }
}

impl OdeSystem for BdBlock {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let m = y.len();
        for k in 0..m {
            let mut v = self.diag[k] * y[k];
            if k > 0 {
                v += self.sub[k] * y[k - 1];
            }
            if k + 1 < m {
                v += self.sup[k] * y[k + 1];
            }
            dy[k] = v;
        }
    }
    fn jacobian(&self, _t: f64, _y: &[f64]) -> Option<Jacobian> {
        Some(Jacobian::Tridiagonal {
            sub: self.sub.clone(),
            diag: self.diag.clone(),
            sup: self.sup.clone(),
        })
    }
    fn linear_matrix(&self) -> Option<DMatrix<f64>> {
        let m = self.diag.len();
        let mut a = DMatrix::zeros(m, m);
        for k in 0..m {
            a[(k, k)] = self.diag[k];
            if k > 0 {
                a[(k, k - 1)] = self.sub[k];
            }
            if k + 1 < m {
                a[(k, k + 1)] = self.sup[k];
            }
        }
        Some(a)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub steps: usize,
    pub rejections: usize,
    pub jacobian_evals: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One row per sample time.
    pub states: Vec<Vec<f64>>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Integrates from `times[0]` and records the state at every entry of `times`.
pub fn integrate(sys: &dyn OdeSystem, y0: &[f64], times: &[f64], cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if times.len() < 2 {
        return domain("need a start time and at least one output time");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("output times must be strictly increasing");
    }
    if y0.len() != sys.dim() {
        return domain("initial state has wrong dimension");
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: times[0] });
    }
    match cfg.method {
        Method::ImplicitAdaptive => implicit_adaptive(sys, y0, times, cfg),
        Method::ExplicitRK4 => rk4(sys, y0, times, cfg),
        Method::MatrixExponentialOracle => expm_oracle(sys, y0, times),
    }
}

pub fn integrate_span(sys: &dyn OdeSystem, y0: &[f64], t0: f64, t1: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    integrate(sys, y0, &[t0, t1], cfg)
}

fn check_finite(y: &[f64], t: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t })
    }
}

struct Implicit<'a> {
    sys: &'a dyn OdeSystem,
    cfg: &'a SolverConfig,
    stats: SolverStats,
    f: Vec<f64>,
}

impl Implicit<'_> {
    /// Extrapolation tableau of implicit Euler with substeps 1, 2, 3, 4.
    /// Returns the order-4 value and the scaled difference to the order-3 one.
    fn extrapolate(&mut self, t: f64, y0: &[f64], h: f64) -> Result<Option<(Vec<f64>, f64)>> {
        let n = y0.len();
        let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(SUBSTEPS.len());
        for (j, &m) in SUBSTEPS.iter().enumerate() {
            let hs = h / m as f64;
            let mut y = y0.to_vec();
            for k in 0..m {
                match self.euler(t + k as f64 * hs, &y, hs)? {
                    Some(v) => y = v,
                    None => return Ok(None),
                }
            }
            let mut row = vec![y];
            for k in 1..=j {
                let r = SUBSTEPS[j] as f64 / SUBSTEPS[j - k] as f64 - 1.0;
                let prev = &rows[j - 1][k - 1];
                let cur = &row[k - 1];
                row.push((0..n).map(|i| cur[i] + (cur[i] - prev[i]) / r).collect());
            }
            rows.push(row);
        }
        let last = rows.pop().unwrap();
        let (best, lower) = (&last[last.len() - 1], &last[last.len() - 2]);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let sc = self.cfg.atol + self.cfg.rtol * best[i].abs().max(y0[i].abs());
            err = err.max((best[i] - lower[i]).abs() / sc);
        }
        Ok(Some((best.clone(), err)))
    }

    /// One implicit Euler step; `None` when Newton fails to converge.
    fn euler(&mut self, t: f64, y0: &[f64], h: f64) -> Result<Option<Vec<f64>>> {
        let n = y0.len();
        let t1 = t + h;
        let jac = match self.sys.jacobian(t1, y0) {
            Some(j) => j,
            None => Jacobian::Dense(fd_jacobian(self.sys, t1, y0)),
        };
        self.stats.jacobian_evals += 1;
        let mut y = y0.to_vec();
        let mut g = vec![0.0; n];
        for _ in 0..self.cfg.max_newton_iters {
            self.sys.rhs(t1, &y, &mut self.f);
            self.stats.rhs_evals += 1;
            check_finite(&self.f, t1)?;
            for i in 0..n {
                g[i] = -(y[i] - y0[i] - h * self.f[i]);
            }
            if jac.solve_shifted(h, &mut g).is_err() {
                return Ok(None);
            }
            let mut norm: f64 = 0.0;
            for i in 0..n {
                y[i] += g[i];
                let sc = self.cfg.atol + self.cfg.rtol * y[i].abs().max(y0[i].abs());
                norm = norm.max(g[i].abs() / sc);
            }
            if !norm.is_finite() {
                return Ok(None);
            }
            if norm <= self.cfg.newton_tol {
                return Ok(Some(y));
            }
        }
        Ok(None)
    }
}

fn fd_jacobian(sys: &dyn OdeSystem, t: f64, y: &[f64]) -> DMatrix<f64> {
    let n = y.len();
    let mut j = DMatrix::zeros(n, n);
    let mut f0 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    sys.rhs(t, y, &mut f0);
    let mut yp = y.to_vec();
    for c in 0..n {
        let h = 1e-7 * (1.0 + y[c].abs());
        yp[c] = y[c] + h;
        sys.rhs(t, &yp, &mut f1);
        for r in 0..n {
            j[(r, c)] = (f1[r] - f0[r]) / h;
        }
        yp[c] = y[c];
    }
    j
}

const SUBSTEPS: [usize; 4] = [1, 2, 3, 4];

fn implicit_adaptive(sys: &dyn OdeSystem, y0: &[f64], times: &[f64], cfg: &SolverConfig) -> Result<Trajectory> {
    let n = y0.len();
    let mut st = Implicit {
        sys,
        cfg,
        stats: SolverStats::default(),
        f: vec![0.0; n],
    };
    let mut y = y0.to_vec();
    let mut t = times[0];
    let t_end = *times.last().unwrap();
    let floor = 1e-14 * (t_end - t).max(t.abs()).max(1e-300);
    let mut h = cfg.initial_step.min(cfg.max_step).min(t_end - t);
    let mut out_times = vec![t];
    let mut states = vec![y.clone()];
    for &target in &times[1..] {
        while t < target {
            let remaining = target - t;
            let mut step = h.min(cfg.max_step);
            let last = step >= remaining * (1.0 - 1e-12);
            if last {
                step = remaining;
            }
            let (cand, err) = match st.extrapolate(t, &y, step)? {
                Some(r) => r,
                None => {
                    st.stats.rejections += 1;
                    h = 0.25 * step;
                    if h < floor {
                        return Err(Error::NewtonFailure { t, step: h });
                    }
                    continue;
                }
            };
            check_finite(&cand, t + step)?;
            let negative = cfg.enforce_nonnegative && cand.iter().any(|v| *v < -cfg.atol);
            if err <= 1.0 && !negative {
                t = if last { target } else { t + step };
                y = cand;
                st.stats.steps += 1;
                let fac = if err > 0.0 {
                    (0.9 * err.powf(-0.25)).clamp(0.2, 4.0)
                } else {
                    4.0
                };
                // Keep the pre-truncation step when the target clipped it.
                h = if last { h.max(step * fac) } else { step * fac };
            } else {
                st.stats.rejections += 1;
                let fac = if negative {
                    0.25
                } else {
                    (0.9 * err.powf(-0.25)).clamp(0.2, 0.9)
                };
                h = step * fac;
                if h < floor {
                    return Err(Error::NewtonFailure { t, step: h });
                }
            }
        }
        out_times.push(target);
        states.push(y.clone());
    }
    Ok(Trajectory {
        times: out_times,
        states,
        stats: st.stats,
    })
}

fn rk4(sys: &dyn OdeSystem, y0: &[f64], times: &[f64], cfg: &SolverConfig) -> Result<Trajectory> {
    let n = y0.len();
    let h_nom = if cfg.max_step.is_finite() {
        cfg.max_step
    } else {
        cfg.initial_step
    };
    let mut stats = SolverStats::default();
    let mut y = y0.to_vec();
    let mut out_times = vec![times[0]];
    let mut states = vec![y.clone()];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let steps = (span / h_nom * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for s in 0..steps {
            let t = w[0] + s as f64 * h;
            sys.rhs(t, &y, &mut k1);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            sys.rhs(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            sys.rhs(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * k3[i];
            }
            sys.rhs(t + h, &tmp, &mut k4);
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            stats.rhs_evals += 4;
            stats.steps += 1;
            check_finite(&y, t + h)?;
        }
        out_times.push(w[1]);
        states.push(y.clone());
    }
    Ok(Trajectory {
        times: out_times,
        states,
        stats,
    })
}

fn expm_oracle(sys: &dyn OdeSystem, y0: &[f64], times: &[f64]) -> Result<Trajectory> {
    let a = sys
        .linear_matrix()
        .ok_or_else(|| Error::Solver("matrix exponential oracle needs a linear system".into()))?;
    if a.nrows() > 65 {
        return Err(Error::Solver(format!(
            "matrix exponential oracle limited to N <= 64, got {}",
            a.nrows()
        )));
    }
    let v0 = DVector::from_column_slice(y0);
    let mut states = vec![y0.to_vec()];
    for &t in &times[1..] {
        let e = (&a * (t - times[0])).exp();
        let y = &e * &v0;
        check_finite(y.as_slice(), t)?;
        states.push(y.as_slice().to_vec());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        stats: SolverStats::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
        fn linear_matrix(&self) -> Option<DMatrix<f64>> {
            Some(DMatrix::from_element(1, 1, -1.0))
        }
    }

    struct Zero;
    impl OdeSystem for Zero {
        fn dim(&self) -> usize {
            3
        }
        fn rhs(&self, _t: f64, _y: &[f64], dy: &mut [f64]) {
            dy.fill(0.0);
        }
    }

    #[test]
    fn zero_rhs_is_constant() {
        let y0 = [1.0, -2.0, 3.0];
        for method in [Method::ImplicitAdaptive, Method::ExplicitRK4] {
            let cfg = SolverConfig {
                method,
                max_step: 0.1,
                ..Default::default()
            };
            let tr = integrate(&Zero, &y0, &[0.0, 0.5, 1.0], &cfg).unwrap();
            assert!(tr.states.iter().all(|s| s == &y0));
        }
    }

    #[test]
    fn exponential_decay() {
        let e = (-1f64).exp();
        let cfg = SolverConfig {
            rtol: 1e-8,
            atol: 1e-14,
            ..Default::default()
        };
        let tr = integrate_span(&Decay, &[1.0], 0.0, 1.0, &cfg).unwrap();
        assert!((tr.last()[0] - e).abs() < 1e-8 * 10.0, "{}", tr.last()[0] - e);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        let cfg = SolverConfig {
            method: Method::ExplicitRK4,
            max_step: 1e-2,
            ..Default::default()
        };
        let tr = integrate_span(&Decay, &[1.0], 0.0, 1.0, &cfg).unwrap();
        assert!((tr.last()[0] - e).abs() < 1e-9);
        let cfg = SolverConfig {
            method: Method::MatrixExponentialOracle,
            ..Default::default()
        };
        let tr = integrate_span(&Decay, &[1.0], 0.0, 1.0, &cfg).unwrap();
        assert!((tr.last()[0] - e).abs() < 1e-15);
    }

    #[test]
    fn arrowhead_solve_matches_dense() {
        let a = Arrowhead {
            d11: -3.0,
            row: vec![0.5, -0.2, 0.1, 0.3],
            col: vec![1.0, -0.4, 0.2, 0.0],
            sub: vec![0.0, 0.6, 0.7, 0.8],
            diag: vec![-2.0, -2.5, -1.5, -1.0],
            sup: vec![0.9, 0.3, 0.2, 0.0],
        };
        let h = 0.37;
        let r = vec![1.0, 2.0, -1.0, 0.5, 0.25];
        let mut x = r.clone();
        Jacobian::Arrowhead(a.clone()).solve_shifted(h, &mut x).unwrap();
        let m = DMatrix::identity(5, 5) - a.to_dense() * h;
        let back = &m * DVector::from_column_slice(&x);
        for i in 0..5 {
            assert!((back[i] - r[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn block_matches_expm() {
        let model = crate::rates::RateModel::power_law(0.5, 1.5, 1.0 / 3.0, 1.0).unwrap();
        let sys = BdSystem::new(&model, 40).unwrap();
        let block = BdBlock::new(&sys, 1.0, 10).unwrap();
        assert_eq!(block.dim(), 31);
        assert!(BdBlock::new(&sys, 1.0, 40).is_err());
        let y0: Vec<f64> = (0..31).map(|k| (-((k as f64 - 8.0) / 3.0).powi(2)).exp()).collect();
        let oracle = SolverConfig {
            method: Method::MatrixExponentialOracle,
            ..Default::default()
        };
        let a = integrate_span(&block, &y0, 0.0, 2.0, &oracle).unwrap();
        let cfg = SolverConfig {
            rtol: 1e-9,
            atol: 1e-14,
            ..Default::default()
        };
        let b = integrate_span(&block, &y0, 0.0, 2.0, &cfg).unwrap();
        for (u, v) in a.last().iter().zip(b.last()) {
            assert!((u - v).abs() < 1e-7, "{u} vs {v}");
        }
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = SolverConfig {
            rtol: 0.0,
            ..Default::default()
        };
        assert!(integrate_span(&Decay, &[1.0], 0.0, 1.0, &cfg).is_err());
        let cfg = SolverConfig::default();
        assert!(integrate_span(&Decay, &[1.0], 1.0, 0.5, &cfg).is_err());
    }
}
