//! Transport change of variables: `G(x) = int_M^x dy / F(y)`, its inverse,
//! the backward/forward characteristic maps and the domain `Z_M`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rates::RateModel;
use crate::util::{geomspace, integrate_gk, monotone_root};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapMode {
    AnalyticPowerLaw,
    Numeric,
}

const NUMERIC_NODES: usize = 4096;
const NUMERIC_XMAX: f64 = 1e6;
const QUAD_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CharacteristicMap {
    model: RateModel,
    m: f64,
    mode: MapMode,
    lambda0: f64,
    nodes: Vec<f64>,
    g_nodes: Vec<f64>,
}

impl CharacteristicMap {
    pub fn new(model: &RateModel, m: f64, mode: MapMode) -> Result<Self> {
        model.ensure_usable()?;
        if !(m > 0.0 && m.is_finite()) {
            return domain("M must be positive");
        }
        match mode {
            MapMode::AnalyticPowerLaw => {
                let lambda0 = model
                    .lambda0()
                    .ok_or_else(|| Error::Domain("analytic mode needs a power-law model".into()))?;
                if !(lambda0 > 0.0) {
                    let (a0, b0) = model.prefactors().unwrap();
                    return Err(Error::Subsaturated {
                        supply: b0 * model.c1,
                        emission: a0,
                    });
                }
                Ok(CharacteristicMap {
                    model: model.clone(),
                    m,
                    mode,
                    lambda0,
                    nodes: vec![],
                    g_nodes: vec![],
                })
            }
            MapMode::Numeric => {
                if m < 1.0 {
                    return domain("numeric mode needs M >= 1");
                }
                let xmax = NUMERIC_XMAX.max(10.0 * m);
                let nodes = geomspace(m, xmax, NUMERIC_NODES);
                let mut g_nodes = Vec::with_capacity(nodes.len());
                let mut acc = 0.0;
                g_nodes.push(0.0);
                for w in nodes.windows(2) {
                    if !(model.f(w[0]) > 0.0) {
                        return domain(format!("F is not positive at x = {}", w[0]));
                    }
                    acc += integrate_gk(|y| 1.0 / model.f(y), w[0], w[1], QUAD_RTOL);
                    g_nodes.push(acc);
                }
                if !(model.f(xmax) > 0.0) {
                    return domain(format!("F is not positive at x = {xmax}"));
                }
                Ok(CharacteristicMap {
                    model: model.clone(),
                    m,
                    mode,
                    lambda0: f64::NAN,
                    nodes,
                    g_nodes,
                })
            }
        }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn mode(&self) -> MapMode {
        self.mode
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn g(&self, x: f64) -> Result<f64> {
        if !(x >= self.m) {
            return domain(format!("G needs x >= M, got x = {x}"));
        }
        Ok(self.g_unchecked(x))
    }

    pub fn g_inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return domain(format!("G^-1 needs y >= 0, got y = {y}"));
        }
        Ok(self.g_inv_unchecked(y))
    }

    /// `g = 1/F`.
    pub fn g_density(&self, x: f64) -> f64 {
        1.0 / self.model.f(x)
    }

    pub(crate) fn g_unchecked(&self, x: f64) -> f64 {
        match self.mode {
            MapMode::AnalyticPowerLaw => {
                let e = 1.0 - self.model.gamma;
                (x.powf(e) - self.m.powf(e)) / (self.lambda0 * e)
            }
            MapMode::Numeric => {
                let last = self.nodes.len() - 1;
                let i = if x >= self.nodes[last] {
                    last
                } else {
                    self.nodes.partition_point(|&v| v <= x).saturating_sub(1)
                };
                let base = self.g_nodes[i];
                if x == self.nodes[i] {
                    base
                } else {
                    base + integrate_gk(|y| 1.0 / self.model.f(y), self.nodes[i], x, QUAD_RTOL)
                }
            }
        }
    }

    pub(crate) fn g_inv_unchecked(&self, y: f64) -> f64 {
        match self.mode {
            MapMode::AnalyticPowerLaw => {
                let e = 1.0 - self.model.gamma;
                (self.m.powf(e) + self.lambda0 * e * y).powf(1.0 / e)
            }
            MapMode::Numeric => {
                if y <= 0.0 {
                    return self.m;
                }
                let last = self.nodes.len() - 1;
                let (lo, hi) = if y >= self.g_nodes[last] {
                    let mut lo = self.nodes[last];
                    let mut hi = 2.0 * lo;
                    while self.g_unchecked(hi) < y {
                        lo = hi;
                        hi *= 2.0;
                    }
                    (lo, hi)
                } else {
                    let i = self.g_nodes.partition_point(|&v| v <= y).saturating_sub(1);
                    (self.nodes[i], self.nodes[i + 1])
                };
                let tol = 1e-15 * hi;
                monotone_root(|x| self.g_unchecked(x) - y, lo, hi, tol)
            }
        }
    }

    /// `(t, x)` lies in `Z_M`: `x >= M` and `0 <= t <= G(x)`.
    pub fn in_domain(&self, t: f64, x: f64) -> bool {
        x >= self.m && t >= 0.0 && t <= self.g_unchecked(x) + 1e-12 * (1.0 + t) && !(t > 0.0 && x == self.m)
    }

    /// Backward characteristic `Q(t, x) = G^-1(G(x) - t)`.
    pub fn q_map(&self, t: f64, x: f64) -> Result<f64> {
        if !self.in_domain(t, x) {
            return Err(Error::OutsideCharacteristicDomain { t, x });
        }
        if t == 0.0 {
            return Ok(x);
        }
        Ok(self.g_inv_unchecked((self.g_unchecked(x) - t).max(0.0)))
    }

    /// Forward characteristic `X(t, q) = G^-1(G(q) + t)`.
    pub fn x_map(&self, t: f64, q: f64) -> Result<f64> {
        if !(t >= 0.0 && q >= self.m) {
            return Err(Error::OutsideCharacteristicDomain { t, x: q });
        }
        if t == 0.0 {
            return Ok(q);
        }
        Ok(self.g_inv_unchecked(self.g_unchecked(q) + t))
    }

    /// `dQ/dx (t, x) = F(Q) / F(x)`.
    pub fn dq_dx(&self, t: f64, x: f64) -> Result<f64> {
        let q = self.q_map(t, x)?;
        Ok(self.model.f(q) / self.model.f(x))
    }

    pub fn remainder_rf1(&self, t: f64, x: f64) -> Result<f64> {
        let q = self.q_map(t, x)?;
        Ok(self.model.f(q) / self.model.f(x) - 1.0)
    }

    pub fn remainder_rf2(&self, t: f64, x: f64) -> Result<f64> {
        let q = self.q_map(t, x)?;
        let r = self.model.f(q) / self.model.f(x);
        Ok(r * r - 1.0)
    }

    pub fn remainder_rd1(&self, t: f64, x: f64) -> Result<f64> {
        let q = self.q_map(t, x)?;
        Ok(self.model.d(q) / self.model.d(x) - 1.0)
    }

    /// Measured constants `rho1 = max G(x) x^(gamma-1)` over `xs` and
    /// `rho2 = max G^-1(y) y^(-1/(1-gamma))` over `ys > 0`.
    pub fn envelope_constants(&self, xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
        let e = 1.0 - self.model.gamma;
        let mut rho1: f64 = 0.0;
        for &x in xs {
            rho1 = rho1.max(self.g(x)? * x.powf(-e));
        }
        let mut rho2: f64 = 0.0;
        for &y in ys {
            if y > 0.0 {
                rho2 = rho2.max(self.g_inverse(y)? / y.powf(1.0 / e));
            }
        }
        Ok((rho1, rho2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> CharacteristicMap {
        let m = RateModel::power_law(0.0, 1.0, 0.5, 1.0).unwrap();
        CharacteristicMap::new(&m, 1.0, MapMode::AnalyticPowerLaw).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let c = example();
        assert_eq!(c.g(1.0).unwrap(), 0.0);
        assert!((c.g(4.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((c.g_inverse(2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((c.q_map(2.0, 4.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((c.x_map(2.0, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(c.q_map(0.0, 7.0).unwrap(), 7.0);
        assert_eq!(c.x_map(0.0, 7.0).unwrap(), 7.0);
        assert!(c.g(0.5).is_err());
        assert!(c.g_inverse(-1.0).is_err());
    }

    #[test]
    fn domain_membership() {
        let c = example();
        assert!(c.in_domain(0.0, 1.0));
        assert!(c.in_domain(2.0, 4.0));
        assert!(!c.in_domain(2.01, 4.0));
        assert!(!c.in_domain(0.1, 1.0));
        assert!(matches!(
            c.q_map(2.01, 4.0),
            Err(Error::OutsideCharacteristicDomain { .. })
        ));
    }

    #[test]
    fn remainders() {
        let m = RateModel::power_law(0.5, 1.5, 1.0 / 3.0, 1.0).unwrap();
        let c = CharacteristicMap::new(&m, 20.0, MapMode::AnalyticPowerLaw).unwrap();
        assert_eq!(c.remainder_rf1(0.0, 100.0).unwrap(), 0.0);
        assert_eq!(c.remainder_rd1(0.0, 100.0).unwrap(), 0.0);
        let r1 = c.remainder_rf1(3.0, 500.0).unwrap();
        let r2 = c.remainder_rf2(3.0, 500.0).unwrap();
        assert!((r2 - ((r1 + 1.0).powi(2) - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn numeric_matches_analytic() {
        let m = RateModel::power_law(0.5, 1.5, 1.0 / 3.0, 1.0).unwrap();
        let a = CharacteristicMap::new(&m, 20.0, MapMode::AnalyticPowerLaw).unwrap();
        let n = CharacteristicMap::new(&m, 20.0, MapMode::Numeric).unwrap();
        for x in [20.0, 21.5, 300.0, 1e4, 9e5, 3e6] {
            let (ga, gn) = (a.g(x).unwrap(), n.g(x).unwrap());
            assert!((ga - gn).abs() <= 1e-8 * ga.max(1e-300), "{x}: {ga} vs {gn}");
        }
        for y in [0.5, 10.0, 1e3, 2e4] {
            let x = n.g_inverse(y).unwrap();
            assert!((n.g(x).unwrap() / y - 1.0).abs() < 1e-10);
        }
    }
}
