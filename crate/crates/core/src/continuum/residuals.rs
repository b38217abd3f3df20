use serde::Serialize;

use super::DiffusionSolution;
use crate::characteristics::CharacteristicMap;
use crate::error::{domain, Error, Result};
use crate::table::ResultTable;
use crate::util::loglog_slope;

/// `C_hat_n(t)` sampled along backward characteristics.
#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    pub n: Vec<usize>,
    /// `NaN` where the point lies outside the characteristic domain.
    pub values: Vec<f64>,
    pub violations: Vec<(usize, String)>,
}

impl Reconstruction {
    pub fn to_table(&self, t: f64) -> Result<ResultTable> {
        let mut tab = ResultTable::new();
        tab.meta("time", crate::table::fmt_f64(t));
        tab.meta("violations", self.violations.len());
        tab.push_int("n", self.n.iter().map(|&n| n as i64).collect())?;
        tab.push_real("c_hat", self.values.clone())?;
        Ok(tab)
    }
}

fn c_hat(map: &CharacteristicMap, sol: &DiffusionSolution, t: f64, x: f64) -> Result<f64> {
    sol.eval(t, map.q_map(t, x)?)
}

fn c_smooth(map: &CharacteristicMap, sol: &DiffusionSolution, t: f64, x: f64) -> Result<f64> {
    sol.eval_smooth(t, map.q_map(t, x)?)
}

pub fn reconstruct_c_hat(
    map: &CharacteristicMap,
    sol: &DiffusionSolution,
    ns: &[usize],
    t: f64,
) -> Result<Reconstruction> {
    sol.field_at(t)?;
    let mut values = Vec::with_capacity(ns.len());
    let mut violations = Vec::new();
    for &n in ns {
        match c_hat(map, sol, t, n as f64) {
            Ok(v) => values.push(v),
            Err(e @ (Error::OutsideCharacteristicDomain { .. } | Error::Domain(_))) => {
                values.push(f64::NAN);
                violations.push((n, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Reconstruction {
        n: ns.to_vec(),
        values,
        violations,
    })
}

/// Discrete residual `dC_hat_n/dt - [BD bracket at n]`, with the time
/// derivative taken from the snapshots at `t - ds` and `t + ds`.
pub fn residual_rn(map: &CharacteristicMap, sol: &DiffusionSolution, n: usize, t: f64, ds: f64) -> Result<f64> {
    if n < 2 {
        return domain("residual needs n >= 2");
    }
    if !(ds > 0.0) {
        return domain("snapshot cadence must be positive");
    }
    let model = map.model();
    let c1 = model.c1;
    let x = n as f64;
    let dt = (c_hat(map, sol, t + ds, x)? - c_hat(map, sol, t - ds, x)?) / (2.0 * ds);
    let (cm, c0, cp) = (
        c_hat(map, sol, t, x - 1.0)?,
        c_hat(map, sol, t, x)?,
        c_hat(map, sol, t, x + 1.0)?,
    );
    let bracket =
        model.beta_n(n - 1) * c1 * cm - (model.beta_n(n) * c1 + model.alpha_n(n)) * c0 + model.alpha_n(n + 1) * cp;
    Ok(dt - bracket)
}

fn x_step(map: &CharacteristicMap, sol: &DiffusionSolution, t: f64, x: f64) -> Result<f64> {
    let q = map.q_map(t, x)?;
    let mesh = &sol.field_at(t)?.mesh;
    if !(q >= mesh.first() && q <= mesh.last()) {
        return domain(format!("Q(t, x) = {q} lies outside the mesh"));
    }
    Ok((4.0 * mesh.local_spacing(q)).max(0.01 * x))
}

/// Continuum residual `dC/dt + d(F C)/dx - 1/2 d2(D C)/dx2` for
/// `C(t, x) = c(t, Q(t, x))`, by centered differences.
pub fn residual_rc(map: &CharacteristicMap, sol: &DiffusionSolution, t: f64, x: f64, ds: f64) -> Result<f64> {
    if !(ds > 0.0) {
        return domain("snapshot cadence must be positive");
    }
    let model = map.model();
    let h = x_step(map, sol, t, x)?;
    let c = |t: f64, x: f64| c_smooth(map, sol, t, x);
    let dt = (c(t + ds, x)? - c(t - ds, x)?) / (2.0 * ds);
    let (cm, c0, cp) = (c(t, x - h)?, c(t, x)?, c(t, x + h)?);
    let flux = (model.f(x + h) * cp - model.f(x - h) * cm) / (2.0 * h);
    let diff = (model.d(x + h) * cp - 2.0 * model.d(x) * c0 + model.d(x - h) * cm) / (h * h);
    Ok(dt + flux - 0.5 * diff)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub order: usize,
    pub q: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Points above the noise floor that entered the fit.
    pub used: Vec<bool>,
    pub slope: f64,
    /// `max |d^n c| q^(n gamma / 2)` over the used points.
    pub envelope: f64,
}

/// Fits `log |d^n c / dq^n|` against `log q` at time `t`.
pub fn derivative_decay_probe(sol: &DiffusionSolution, t: f64, order: usize, qs: &[f64]) -> Result<DecayFit> {
    if !(1..=3).contains(&order) {
        return domain("derivative order must be 1, 2 or 3");
    }
    let field = sol.field_at(t)?;
    let mesh = &field.mesh;
    let scale = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let f = |q: f64| sol.eval_smooth(t, q);
    let mut derivative = Vec::with_capacity(qs.len());
    let mut used = Vec::with_capacity(qs.len());
    for &q in qs {
        let h = mesh.local_spacing(q).max(0.01 * q.abs());
        let reach = if order == 3 { 2.0 * h } else { h };
        if q - reach < mesh.first() || q + reach > mesh.last() {
            return domain(format!("probe point q = {q} too close to the mesh boundary"));
        }
        let d = match order {
            1 => (f(q + h)? - f(q - h)?) / (2.0 * h),
            2 => (f(q + h)? - 2.0 * f(q)? + f(q - h)?) / (h * h),
            _ => (f(q + 2.0 * h)? - 2.0 * f(q + h)? + 2.0 * f(q - h)? - f(q - 2.0 * h)?) / (2.0 * h * h * h),
        };
        derivative.push(d);
        let ok = d.abs() >= 1e-13 * scale && d != 0.0;
        if !ok {
            log::debug!("order {order} derivative at q = {q} below noise floor");
        }
        used.push(ok);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = qs
        .iter()
        .zip(&derivative)
        .zip(&used)
        .filter(|(_, u)| **u)
        .map(|((q, d), _)| (*q, *d))
        .unzip();
    if xs.len() < 2 {
        return domain("fewer than two probe points above the noise floor");
    }
    let slope = loglog_slope(&xs, &ys);
    let e = order as f64 * sol.gamma / 2.0;
    let envelope = xs.iter().zip(&ys).fold(0.0f64, |m, (q, d)| m.max(d.abs() * q.powf(e)));
    Ok(DecayFit {
        order,
        q: qs.to_vec(),
        derivative,
        used,
        slope,
        envelope,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisRatios {
    pub x: Vec<f64>,
    /// `|(1/x) dC/dx| / |d2C/dx2|`.
    pub first: Vec<f64>,
    /// `|(1/x) C| / |dC/dx|`.
    pub second: Vec<f64>,
    pub first_decreasing: bool,
    pub second_decreasing: bool,
}

/// Non-increasing up to a relative tolerance between neighbours.
fn decreasing(v: &[f64], tol: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
}

pub fn hypothesis_ratios(
    map: &CharacteristicMap,
    sol: &DiffusionSolution,
    t: f64,
    xs: &[f64],
) -> Result<HypothesisRatios> {
    let mut first = Vec::with_capacity(xs.len());
    let mut second = Vec::with_capacity(xs.len());
    for &x in xs {
        let h = x_step(map, sol, t, x)?;
        let (cm, c0, cp) = (
            c_smooth(map, sol, t, x - h)?,
            c_smooth(map, sol, t, x)?,
            c_smooth(map, sol, t, x + h)?,
        );
        let cx = (cp - cm) / (2.0 * h);
        let cxx = (cp - 2.0 * c0 + cm) / (h * h);
        first.push((cx / x).abs() / cxx.abs());
        second.push((c0 / x).abs() / cx.abs());
    }
    Ok(HypothesisRatios {
        x: xs.to_vec(),
        first_decreasing: decreasing(&first, 0.05),
        second_decreasing: decreasing(&second, 0.05),
        first,
        second,
    })
}
