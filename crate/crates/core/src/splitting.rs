//! Lie-Trotter splitting: closed-form monomer flow, linear tail flow, and the
//! composed step.

use rayon::prelude::*;
use serde::Serialize;

use crate::bd::{total_mass, Arrowhead, BdSystem, ClusterState};
use crate::error::{domain, Error, Result};
use crate::ode::{integrate, integrate_span, BdFull, BdTail, BdTailAffine, Jacobian, Method, OdeSystem, SolverConfig};
use crate::table::ResultTable;
use crate::util::loglog_slope;

/// Coefficients of `du/dt = -a u^2 - b u + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonomerFlowCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub delta: f64,
    /// `c = 0`: the closed form has a removable singularity.
    pub degenerate: bool,
}

impl MonomerFlowCoeffs {
    pub fn from_abc(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::DegenerateMonomerFlow);
        }
        if !(b >= 0.0 && c >= 0.0) {
            return domain("monomer flow needs b, c >= 0");
        }
        let disc = (b * b + 4.0 * a * c).sqrt();
        let (r_plus, r_minus) = if disc > 0.0 {
            (2.0 * c / (b + disc), -(b + disc) / (2.0 * a))
        } else {
            (0.0, 0.0)
        };
        Ok(MonomerFlowCoeffs {
            a,
            b,
            c,
            r_plus,
            r_minus,
            delta: disc,
            degenerate: c == 0.0,
        })
    }
}

/// `a = 2 beta_1`, `b = sum beta_n u_n`, `c = sum alpha_n u_n + alpha_2 u_2`
/// over the tail `(u_2, ..., u_N)`.
pub fn monomer_flow_coeffs(sys: &BdSystem, tail: &[f64]) -> Result<MonomerFlowCoeffs> {
    if tail.len() + 1 != sys.n_max() {
        return domain("tail length must be N - 1");
    }
    if tail.iter().any(|v| *v < 0.0) {
        return domain("tail must be nonnegative");
    }
    let mut b = 0.0;
    let mut c = sys.alpha(2) * tail[0];
    for (k, u) in tail.iter().enumerate() {
        b += sys.beta(k + 2) * u;
        c += sys.alpha(k + 2) * u;
    }
    MonomerFlowCoeffs::from_abc(2.0 * sys.beta(1), b, c)
}

/// Exact flow of `du/dt = -a u^2 - b u + c` after time `dt`.
pub fn phi_flow(k: &MonomerFlowCoeffs, u0: f64, dt: f64) -> f64 {
    if dt == 0.0 {
        return u0;
    }
    let (a, b) = (k.a, k.b);
    if k.degenerate {
        if b == 0.0 {
            return u0 / (1.0 + a * u0 * dt);
        }
        let e = (-b * dt).exp();
        return b * u0 * e / (b - a * u0 * (-b * dt).exp_m1());
    }
    let e = (-k.delta * dt).exp();
    if e < 1e-300 {
        return k.r_plus;
    }
    let one_m_e = -(-k.delta * dt).exp_m1();
    let (rp, rm) = (k.r_plus, k.r_minus);
    let num = u0 * (rp - rm * e) - rp * rm * one_m_e;
    let den = u0 * one_m_e + rp * e - rm;
    num / den
}

/// Advances the tail `(C_2, ..., C_N)` by `dt` with the monomer frozen.
pub fn chi_flow(sys: &BdSystem, c1: f64, tail: &[f64], dt: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    if !(c1 >= 0.0) {
        return domain("c1_fixed must be nonnegative");
    }
    if !(dt >= 0.0) {
        return domain("dt must be nonnegative");
    }
    if tail.len() + 1 != sys.n_max() {
        return domain("tail length must be N - 1");
    }
    if dt == 0.0 {
        return Ok(tail.to_vec());
    }
    match cfg.method {
        Method::MatrixExponentialOracle => {
            let ode = BdTail::new(sys, c1);
            let mut y0 = tail.to_vec();
            y0.push(1.0);
            let tr = integrate_span(&ode, &y0, 0.0, dt, cfg)?;
            let mut y = tr.last().to_vec();
            y.pop();
            Ok(y)
        }
        _ => {
            let ode = BdTailAffine::new(sys, c1);
            Ok(integrate_span(&ode, tail, 0.0, dt, cfg)?.last().to_vec())
        }
    }
}

/// Full dynamics restricted to the sizes in `lo..=hi`; all other sizes are
/// frozen.
struct Masked<'a> {
    sys: &'a BdSystem,
    lo: usize,
    hi: usize,
}

impl OdeSystem for Masked<'_> {
    fn dim(&self) -> usize {
        self.sys.n_max()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.sys.rhs_full_into(y, dy);
        for (i, d) in dy.iter_mut().enumerate() {
            if i + 1 < self.lo || i + 1 > self.hi {
                *d = 0.0;
            }
        }
    }
    fn jacobian(&self, _t: f64, y: &[f64]) -> Option<Jacobian> {
        let mut a: Arrowhead = self.sys.jacobian(y);
        if self.lo > 1 {
            a.d11 = 0.0;
            a.row.fill(0.0);
        }
        for k in 0..a.diag.len() {
            let size = k + 2;
            if size < self.lo || size > self.hi {
                a.col[k] = 0.0;
                a.sub[k] = 0.0;
                a.diag[k] = 0.0;
                a.sup[k] = 0.0;
            }
        }
        Some(Jacobian::Arrowhead(a))
    }
}

/// Configuration of a splitting step.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    /// Solver for the linear tail flow.
    pub chi: SolverConfig,
    /// Sizes `1..=split_index` form the first sub-dynamics. Index 1 is the
    /// monomer/tail splitting with the closed-form monomer flow.
    pub split_index: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            chi: SolverConfig::default(),
            split_index: 1,
        }
    }
}

/// One Lie-Trotter step: monomer flow with the tail frozen, then the tail
/// flow with the updated monomer concentration.
pub fn lie_trotter_step(sys: &BdSystem, state: &ClusterState, dt: f64, cfg: &SplitConfig) -> Result<ClusterState> {
    if !(dt > 0.0) {
        return domain("dt must be positive");
    }
    if state.n_max() != sys.n_max() {
        return domain("state size does not match system");
    }
    let c = &state.concentrations;
    let k = cfg.split_index;
    if k == 1 {
        let coeffs = monomer_flow_coeffs(sys, &c[1..])?;
        let c1 = phi_flow(&coeffs, c[0], dt);
        let tail = chi_flow(sys, c1, &c[1..], dt, &cfg.chi)?;
        let mut out = Vec::with_capacity(c.len());
        out.push(c1);
        out.extend(tail);
        return ClusterState::new(out, state.time + dt);
    }
    if k >= sys.n_max() {
        return domain("split index must be below N");
    }
    let mut cfg_nl = cfg.chi.clone();
    if cfg_nl.method == Method::MatrixExponentialOracle {
        cfg_nl.method = Method::ImplicitAdaptive;
    }
    let first = Masked { sys, lo: 1, hi: k };
    let y = integrate_span(&first, c, 0.0, dt, &cfg_nl)?.last().to_vec();
    let second = Masked {
        sys,
        lo: k + 1,
        hi: sys.n_max(),
    };
    let y = integrate_span(&second, &y, 0.0, dt, &cfg_nl)?.last().to_vec();
    ClusterState::new(y, state.time + dt)
}

/// Errors of the split scheme against a reference over a fixed horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub dt: Vec<f64>,
    /// `sup_n ||u(n dt) - u^n||_2`.
    pub err_l2: Vec<f64>,
    /// `sup_n ||u(n dt) - u^n||_inf / ||u(n dt)||_inf`.
    pub err_rel_sup: Vec<f64>,
    /// `sup_n sum_k k |u_k(n dt) - u^n_k|`.
    pub err_mass: Vec<f64>,
    pub slope: f64,
}

impl ConvergenceStudy {
    pub fn to_table(&self) -> Result<ResultTable> {
        let mut t = ResultTable::new();
        t.push_real("dt", self.dt.clone())?;
        t.push_real("err_l2", self.err_l2.clone())?;
        t.push_real("err_rel_sup", self.err_rel_sup.clone())?;
        t.push_real("err_mass", self.err_mass.clone())?;
        t.push_real("slope", vec![self.slope; self.dt.len()])?;
        t.add_summary("slope", self.slope);
        Ok(t)
    }
}

/// Runs the split scheme for every `dt` and compares with the full dynamics
/// integrated by `reference`. Each `dt` must divide `horizon`.
pub fn convergence_study(
    sys: &BdSystem,
    u0: &[f64],
    horizon: f64,
    dt_list: &[f64],
    split: &SplitConfig,
    reference: &SolverConfig,
) -> Result<ConvergenceStudy> {
    if dt_list.len() < 2 {
        return domain("need at least two time steps");
    }
    let steps: Vec<usize> = dt_list
        .iter()
        .map(|dt| {
            let s = horizon / dt;
            if (s - s.round()).abs() > 1e-9 * s {
                domain(format!("horizon / dt = {s} is not an integer"))
            } else {
                Ok(s.round() as usize)
            }
        })
        .collect::<Result<_>>()?;
    let finest = *steps.iter().max().unwrap();
    if steps.iter().any(|s| !finest.is_multiple_of(*s)) {
        return domain("all step counts must divide the finest one");
    }
    let times: Vec<f64> = (0..=finest).map(|i| horizon * i as f64 / finest as f64).collect();
    let reference = integrate(&BdFull(sys), u0, &times, reference)?;

    let rows: Vec<(f64, f64, f64)> = steps
        .par_iter()
        .map(|&s| -> Result<(f64, f64, f64)> {
            let dt = horizon / s as f64;
            let stride = finest / s;
            let mut state = ClusterState::new(u0.to_vec(), 0.0)?;
            let (mut e2, mut er, mut em) = (0f64, 0f64, 0f64);
            for i in 1..=s {
                state = lie_trotter_step(sys, &state, dt, split)?;
                let r = &reference.states[i * stride];
                let (mut l2, mut linf, mut rinf, mut lm) = (0.0, 0f64, 0f64, 0.0);
                for (k, (a, b)) in state.concentrations.iter().zip(r).enumerate() {
                    let d = (a - b).abs();
                    l2 += d * d;
                    linf = linf.max(d);
                    rinf = rinf.max(b.abs());
                    lm += (k + 1) as f64 * d;
                }
                e2 = e2.max(l2.sqrt());
                er = er.max(linf / rinf);
                em = em.max(lm);
            }
            Ok((e2, er, em))
        })
        .collect::<Result<_>>()?;
    let err_l2: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let slope = loglog_slope(dt_list, &err_l2);
    Ok(ConvergenceStudy {
        dt: dt_list.to_vec(),
        err_l2,
        err_rel_sup: rows.iter().map(|r| r.1).collect(),
        err_mass: rows.iter().map(|r| r.2).collect(),
        slope,
    })
}

/// Upper bound `Q(0) exp(2 c1 K dt)` on the tail-flow mass.
pub fn chi_mass_bound(c1: f64, tail: &[f64], dt: f64, growth_k: f64) -> f64 {
    let mut full = vec![c1];
    full.extend_from_slice(tail);
    total_mass(&full) * (2.0 * c1 * growth_k * dt).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::RateModel;
    use std::sync::Arc;

    fn rk_scalar(k: &MonomerFlowCoeffs, u0: f64, t: f64) -> f64 {
        let n = 20000;
        let h = t / n as f64;
        let f = |u: f64| -k.a * u * u - k.b * u + k.c;
        let mut u = u0;
        for _ in 0..n {
            let k1 = f(u);
            let k2 = f(u + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h * k2);
            let k4 = f(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        u
    }

    #[test]
    fn phi_examples() {
        let k = MonomerFlowCoeffs::from_abc(2.0, 1.0, 2.0).unwrap();
        assert_eq!(phi_flow(&k, 0.3, 0.0), 0.3);
        assert!((phi_flow(&k, k.r_plus, 5.0) - k.r_plus).abs() < 1e-15);
        let v = phi_flow(&k, 0.3, 0.7);
        assert!((v / rk_scalar(&k, 0.3, 0.7) - 1.0).abs() < 1e-10);
        assert!((k.r_plus * k.r_minus + k.c / k.a).abs() < 1e-14);
        assert!((k.r_plus + k.r_minus + k.b / k.a).abs() < 1e-14);
    }

    #[test]
    fn degenerate_branches() {
        let k = MonomerFlowCoeffs::from_abc(2.0, 0.0, 0.0).unwrap();
        assert!(k.degenerate);
        assert!((phi_flow(&k, 0.5, 2.0) - 0.5 / 3.0).abs() < 1e-15);
        let k = MonomerFlowCoeffs::from_abc(2.0, 1.5, 0.0).unwrap();
        assert!((phi_flow(&k, 0.4, 0.9) / rk_scalar(&k, 0.4, 0.9) - 1.0).abs() < 1e-10);
        assert!(matches!(
            MonomerFlowCoeffs::from_abc(0.0, 1.0, 1.0),
            Err(Error::DegenerateMonomerFlow)
        ));
    }

    #[test]
    fn coeffs_by_hand() {
        let mut m = RateModel::custom(Arc::new(|_| 1.0), Arc::new(|_| 1.0), 0.0, 1.0).unwrap();
        m.verify(10);
        let sys = BdSystem::new(&m, 5).unwrap();
        let k = monomer_flow_coeffs(&sys, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!((k.a, k.b, k.c), (2.0, 1.0, 2.0));
        let k = monomer_flow_coeffs(&sys, &[0.0; 4]).unwrap();
        assert!(k.degenerate && k.b == 0.0 && k.c == 0.0);
    }

    #[test]
    fn chi_identity_cases() {
        let m = RateModel::power_law(0.0, 1.0, 0.5, 1.0).unwrap();
        let sys = BdSystem::new(&m, 8).unwrap();
        let tail = vec![0.1, 0.2, 0.0, 0.3, 0.0, 0.1, 0.05];
        let cfg = SolverConfig::default();
        assert_eq!(chi_flow(&sys, 0.5, &tail, 0.0, &cfg).unwrap(), tail);
        let out = chi_flow(&sys, 0.0, &tail, 3.0, &cfg).unwrap();
        for (a, b) in out.iter().zip(&tail) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn chi_implicit_matches_expm() {
        let m = RateModel::power_law(0.6, 1.0, 0.5, 1.0).unwrap();
        let sys = BdSystem::new(&m, 16).unwrap();
        let tail: Vec<f64> = (0..15).map(|i| 0.1 / (1.0 + i as f64)).collect();
        let imp = SolverConfig {
            rtol: 1e-10,
            atol: 1e-14,
            ..Default::default()
        };
        let ex = SolverConfig {
            method: Method::MatrixExponentialOracle,
            ..Default::default()
        };
        let a = chi_flow(&sys, 0.8, &tail, 0.5, &imp).unwrap();
        let b = chi_flow(&sys, 0.8, &tail, 0.5, &ex).unwrap();
        let sup = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-9, "{sup}");
    }

    #[test]
    fn split_index_generalization_runs() {
        let m = RateModel::power_law(0.5, 1.0, 0.5, 1.0).unwrap();
        let sys = BdSystem::new(&m, 10).unwrap();
        let mut c = vec![0.0; 10];
        c[0] = 1.0;
        c[3] = 0.1;
        let s = ClusterState::new(c, 0.0).unwrap();
        let cfg = SplitConfig {
            split_index: 3,
            ..Default::default()
        };
        let out = lie_trotter_step(&sys, &s, 0.01, &cfg).unwrap();
        let tight = SolverConfig {
            rtol: 1e-10,
            atol: 1e-14,
            ..Default::default()
        };
        let r = integrate_span(&BdFull(&sys), &s.concentrations, 0.0, 0.01, &tight).unwrap();
        let err = out
            .concentrations
            .iter()
            .zip(r.last())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        assert!(out.is_nonnegative());
    }
}
