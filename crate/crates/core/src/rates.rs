//! Absorption/emission coefficients and the derived drift, diffusion and
//! noise amplitude functions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::util::geomspace;

/// Boltzmann constant in eV/K.
pub const K_B: f64 = 8.617_333_262e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Diffusion coefficient of mobile clusters [m^2/s].
    pub diff_coeff: f64,
    /// Atomic volume [m^3].
    pub atomic_volume: f64,
    /// Vacancy formation energy [eV].
    pub formation_energy: f64,
    /// Temperature [K].
    pub temperature: f64,
    pub omega: f64,
}

impl PhysicalParams {
    pub fn beta0(&self, gamma: f64) -> f64 {
        (48.0 * PI * PI / (self.atomic_volume * self.atomic_volume)).powf(gamma) * self.diff_coeff
    }

    pub fn alpha0(&self, gamma: f64) -> f64 {
        self.beta0(gamma) * (-self.formation_energy / (K_B * self.temperature)).exp()
    }
}

pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CustomRates {
    pub alpha: RateFn,
    pub beta: RateFn,
}

impl fmt::Debug for CustomRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomRates { .. }")
    }
}

#[derive(Debug, Clone)]
pub enum RateKind {
    Physical(PhysicalParams),
    PowerLaw { alpha0: f64, beta0: f64 },
    Custom(CustomRates),
}

#[derive(Debug, Clone)]
pub struct RateModel {
    pub kind: RateKind,
    pub gamma: f64,
    pub c1: f64,
    custom_checked: bool,
}

impl RateModel {
    pub fn power_law(alpha0: f64, beta0: f64, gamma: f64, c1: f64) -> Result<Self> {
        if !(alpha0 >= 0.0 && beta0 >= 0.0) {
            return domain("power-law prefactors must be nonnegative");
        }
        Self::build(RateKind::PowerLaw { alpha0, beta0 }, gamma, c1)
    }

    pub fn physical(params: PhysicalParams, gamma: f64, c1: f64) -> Result<Self> {
        let ok = params.diff_coeff >= 0.0
            && params.atomic_volume > 0.0
            && params.temperature > 0.0
            && params.formation_energy.is_finite()
            && params.omega.is_finite();
        if !ok {
            return domain("invalid physical rate parameters");
        }
        Self::build(RateKind::Physical(params), gamma, c1)
    }

    /// A user-supplied model. It must pass through [`RateModel::verify`]
    /// before the solvers accept it.
    pub fn custom(alpha: RateFn, beta: RateFn, gamma: f64, c1: f64) -> Result<Self> {
        Self::build(RateKind::Custom(CustomRates { alpha, beta }), gamma, c1)
    }

    fn build(kind: RateKind, gamma: f64, c1: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&gamma) {
            return domain(format!("gamma = {gamma} outside [0, 1/2]"));
        }
        if !(c1 >= 0.0 && c1.is_finite()) {
            return domain(format!("c1 = {c1} must be finite and nonnegative"));
        }
        Ok(RateModel {
            kind,
            gamma,
            c1,
            custom_checked: false,
        })
    }

    pub fn with_c1(&self, c1: f64) -> Result<Self> {
        if !(c1 >= 0.0 && c1.is_finite()) {
            return domain(format!("c1 = {c1} must be finite and nonnegative"));
        }
        let mut m = self.clone();
        m.c1 = c1;
        Ok(m)
    }

    /// Runs the assumption checks and, for custom models, marks the model
    /// usable by the solvers when no rate is negative or non-finite.
    pub fn verify(&mut self, n_max: usize) -> AssumptionReport {
        let report = check_assumptions(self, n_max);
        if report.rates_nonnegative && report.bound_b.is_finite() && report.growth_k.is_finite() {
            self.custom_checked = true;
        }
        report
    }

    pub fn ensure_usable(&self) -> Result<()> {
        match self.kind {
            RateKind::Custom(_) if !self.custom_checked => Err(Error::UncheckedCustomModel),
            _ => Ok(()),
        }
    }

    pub fn is_power_law(&self) -> bool {
        matches!(self.kind, RateKind::PowerLaw { .. })
    }

    /// `(alpha0, beta0)` prefactors for the parametric families.
    pub fn prefactors(&self) -> Option<(f64, f64)> {
        match &self.kind {
            RateKind::PowerLaw { alpha0, beta0 } => Some((*alpha0, *beta0)),
            RateKind::Physical(p) => Some((p.alpha0(self.gamma), p.beta0(self.gamma))),
            RateKind::Custom(_) => None,
        }
    }

    /// `lambda0 = beta0*C1 - alpha0` for the power-law family.
    pub fn lambda0(&self) -> Option<f64> {
        match self.kind {
            RateKind::PowerLaw { alpha0, beta0 } => Some(beta0 * self.c1 - alpha0),
            _ => None,
        }
    }

    pub fn alpha_discrete(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return domain("cluster size must be >= 1");
        }
        Ok(self.alpha_n(n))
    }

    pub fn beta_discrete(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return domain("cluster size must be >= 1");
        }
        Ok(self.beta_n(n))
    }

    pub(crate) fn alpha_n(&self, n: usize) -> f64 {
        let x = n as f64;
        match &self.kind {
            RateKind::PowerLaw { alpha0, .. } => alpha0 * x.powf(self.gamma),
            RateKind::Physical(p) => {
                let r = x.powf(self.gamma);
                p.alpha0(self.gamma) * r * (p.omega / r).exp()
            }
            RateKind::Custom(c) => (c.alpha)(x),
        }
    }

    pub(crate) fn beta_n(&self, n: usize) -> f64 {
        let x = n as f64;
        match &self.kind {
            RateKind::PowerLaw { beta0, .. } => beta0 * x.powf(self.gamma),
            RateKind::Physical(p) => p.beta0(self.gamma) * x.powf(self.gamma),
            RateKind::Custom(c) => (c.beta)(x),
        }
    }

    pub fn alpha_cont(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return domain(format!("x = {x} < 1"));
        }
        Ok(self.alpha_x(x))
    }

    pub fn beta_cont(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return domain(format!("x = {x} < 1"));
        }
        Ok(self.beta_x(x))
    }

    pub(crate) fn alpha_x(&self, x: f64) -> f64 {
        match &self.kind {
            RateKind::PowerLaw { alpha0, .. } => alpha0 * x.powf(self.gamma),
            RateKind::Physical(p) => {
                p.alpha0(self.gamma) * (x - 1.0).powf(self.gamma) * (p.omega / x.powf(self.gamma)).exp()
            }
            RateKind::Custom(c) => (c.alpha)(x),
        }
    }

    pub(crate) fn beta_x(&self, x: f64) -> f64 {
        match &self.kind {
            RateKind::PowerLaw { beta0, .. } => beta0 * x.powf(self.gamma),
            RateKind::Physical(p) => p.beta0(self.gamma) * x.powf(self.gamma),
            RateKind::Custom(c) => (c.beta)(x),
        }
    }

    pub fn drift_f(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return domain(format!("x = {x} < 1"));
        }
        Ok(self.f(x))
    }

    pub fn diffusion_d(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return domain(format!("x = {x} < 1"));
        }
        Ok(self.d(x))
    }

    /// Unchecked drift `F(x) = beta(x) C1 - alpha(x)`.
    pub(crate) fn f(&self, x: f64) -> f64 {
        self.beta_x(x) * self.c1 - self.alpha_x(x)
    }

    /// Unchecked diffusion `D(x) = beta(x) C1 + alpha(x)`.
    pub(crate) fn d(&self, x: f64) -> f64 {
        self.beta_x(x) * self.c1 + self.alpha_x(x)
    }

    pub fn sigma(&self, q: f64) -> Result<f64> {
        let d = self.diffusion_d(q)?;
        if d < 0.0 {
            return Err(Error::Internal(format!("negative diffusion {d} at q = {q}")));
        }
        Ok(d.sqrt())
    }

    /// `(sigma0, sigma_b)` with `sigma0 = q^(gamma/2)`, `sigma0 * sigma_b = sigma`.
    pub fn sigma_split(&self, q: f64) -> Result<(f64, f64)> {
        let d = self.diffusion_d(q)?;
        if d < 0.0 {
            return Err(Error::Internal(format!("negative diffusion {d} at q = {q}")));
        }
        let qg = q.powf(self.gamma);
        Ok((qg.sqrt(), (d / qg).sqrt()))
    }

    /// Smallest probed `M >= 1` with `F` positive and increasing on `[M, 100 M]`.
    ///
    /// For the power-law family every `M > 0` works once `lambda0 > 0`, so the
    /// requested value is returned.
    pub fn minimal_size_m(&self, requested: f64) -> Result<f64> {
        match &self.kind {
            RateKind::PowerLaw { alpha0, beta0 } => {
                let supply = beta0 * self.c1;
                if supply <= *alpha0 {
                    return Err(Error::Subsaturated {
                        supply,
                        emission: *alpha0,
                    });
                }
                if !(requested > 0.0) {
                    return domain("requested M must be positive");
                }
                Ok(requested)
            }
            RateKind::Physical(p) => {
                let (a0, b0) = (p.alpha0(self.gamma), p.beta0(self.gamma));
                let supply = b0 * self.c1;
                if supply <= a0 {
                    return Err(Error::Subsaturated { supply, emission: a0 });
                }
                if self.gamma == 0.0 {
                    return domain("physical minimal size needs gamma > 0");
                }
                let mut m = 1f64;
                if p.omega > 0.0 {
                    m = m.max((p.omega / (supply / a0).ln()).powf(1.0 / self.gamma));
                }
                self.grid_verify(m.max(requested.max(1.0)))
            }
            RateKind::Custom(_) => {
                self.ensure_usable()?;
                self.grid_verify(requested.max(1.0))
            }
        }
    }

    fn grid_verify(&self, start: f64) -> Result<f64> {
        let mut m = start;
        for _ in 0..2000 {
            if self.positive_increasing_on(m, 100.0 * m, 256) {
                return Ok(m);
            }
            m *= 1.05;
        }
        let (emission, supply) = (self.alpha_x(m), self.beta_x(m) * self.c1);
        Err(Error::Subsaturated { supply, emission })
    }

    fn positive_increasing_on(&self, a: f64, b: f64, n: usize) -> bool {
        let fs: Vec<f64> = geomspace(a, b, n).into_iter().map(|x| self.f(x)).collect();
        fs[0] > 0.0
            && fs
                .windows(2)
                .all(|w| w[1] > w[0] || (self.gamma == 0.0 && w[1] == w[0]))
    }
}

/// Measured structural constants of a rate model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub n_max: usize,
    pub m: f64,
    /// `max |alpha_{n+1}-alpha_n|, |beta_{n+1}-beta_n|`.
    pub bound_b: f64,
    /// `max alpha_n / n^gamma, beta_n / n^gamma`.
    pub growth_k: f64,
    pub k_minus: f64,
    pub k_plus: f64,
    pub sigma_b_min: f64,
    pub sigma_b_max: f64,
    pub rates_nonnegative: bool,
    pub h1_ok: bool,
    pub growth_ok: bool,
    pub f_positive: bool,
    pub f_increasing: bool,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.rates_nonnegative && self.h1_ok && self.growth_ok && self.f_positive && self.f_increasing
    }
}

pub fn check_assumptions(model: &RateModel, n_max: usize) -> AssumptionReport {
    let n_max = n_max.max(2);
    let g = model.gamma;
    let mut nonneg = true;
    let mut b: f64 = 0.0;
    let mut k: f64 = 0.0;
    let (mut a_prev, mut b_prev) = (model.alpha_n(1), model.beta_n(1));
    for n in 1..=n_max {
        let (a, be) = (model.alpha_n(n), model.beta_n(n));
        if !(a >= 0.0 && be >= 0.0) {
            nonneg = false;
        }
        if n > 1 {
            b = b.max((a - a_prev).abs()).max((be - b_prev).abs());
        }
        let r = (n as f64).powf(g);
        k = k.max(a / r).max(be / r);
        a_prev = a;
        b_prev = be;
    }

    let m = match model.kind {
        RateKind::Custom(_) => grid_start_for_custom(model),
        _ => model.minimal_size_m(1.0).unwrap_or(1.0),
    };
    let hi = (n_max as f64).max(m * (1.0 + 1e-9));
    let xs = geomspace(m, hi, 512);
    let mut k_minus = f64::INFINITY;
    let mut k_plus = f64::NEG_INFINITY;
    let mut sb_min = f64::INFINITY;
    let mut sb_max = f64::NEG_INFINITY;
    let mut f_positive = true;
    let mut f_increasing = true;
    let mut prev = f64::NEG_INFINITY;
    for &x in &xs {
        let f = model.f(x);
        let r = x.powf(g);
        k_minus = k_minus.min(f / r);
        k_plus = k_plus.max(f / r);
        let sb = (model.d(x) / r).sqrt();
        sb_min = sb_min.min(sb);
        sb_max = sb_max.max(sb);
        if !(f > 0.0) {
            f_positive = false;
        }
        if f < prev || (f == prev && g > 0.0) {
            f_increasing = false;
        }
        prev = f;
    }
    AssumptionReport {
        n_max,
        m,
        bound_b: b,
        growth_k: k,
        k_minus,
        k_plus,
        sigma_b_min: sb_min,
        sigma_b_max: sb_max,
        rates_nonnegative: nonneg,
        h1_ok: nonneg && b.is_finite(),
        growth_ok: nonneg && k.is_finite(),
        f_positive,
        f_increasing,
    }
}

fn grid_start_for_custom(model: &RateModel) -> f64 {
    let mut m = 1.0;
    for _ in 0..400 {
        if model.positive_increasing_on(m, 100.0 * m, 256) {
            return m;
        }
        m *= 1.05;
    }
    1.0
}

/// `sigma = sqrt(D)` on `[M, inf)`, extended below `M` by a C^2 blend of its
/// quadratic Taylor polynomial at `M` into the constant `sigma(M)` over
/// `[M-2, M]`, and held constant below `M-2`.
#[derive(Debug, Clone)]
pub struct ExtendedSigma {
    model: RateModel,
    m: f64,
    s0: f64,
    s1: f64,
    s2: f64,
    constant: Option<f64>,
}

impl ExtendedSigma {
    pub fn new(model: &RateModel, m: f64) -> Result<Self> {
        model.ensure_usable()?;
        if !(m >= 1.0) {
            return domain("extension point M must be >= 1");
        }
        let sig = |q: f64| model.d(q).max(0.0).sqrt();
        let h = 1e-3 * m;
        let v: Vec<f64> = (0..4).map(|i| sig(m + i as f64 * h)).collect();
        let s0 = v[0];
        if !(s0 > 0.0) {
            return domain(format!("sigma(M) = {s0} is not positive"));
        }
        let s1 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        let s2 = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h);
        let constant = (model.is_power_law() && model.gamma == 0.0).then_some(s0);
        let ext = ExtendedSigma {
            model: model.clone(),
            m,
            s0,
            s1,
            s2,
            constant,
        };
        for i in 0..=200 {
            let q = m - 2.0 + 2.0 * i as f64 / 200.0;
            if !(ext.eval(q) > 0.0) {
                return domain(format!("sigma extension not positive at q = {q}"));
            }
        }
        Ok(ext)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.model.gamma
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn eval(&self, q: f64) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        if q >= self.m {
            return self.model.d(q).max(0.0).sqrt();
        }
        if q <= self.m - 2.0 {
            return self.s0;
        }
        let tau = (q - (self.m - 2.0)) / 2.0;
        let w = tau * tau * tau * (tau * (6.0 * tau - 15.0) + 10.0);
        let dq = q - self.m;
        let taylor = self.s0 + self.s1 * dq + 0.5 * self.s2 * dq * dq;
        w * taylor + (1.0 - w) * self.s0
    }

    /// Central-difference derivative.
    pub fn eval_prime(&self, q: f64) -> f64 {
        let h = 1e-5 * q.abs().max(1.0);
        (self.eval(q + h) - self.eval(q - h)) / (2.0 * h)
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn eval_sq(&self, q: f64) -> f64 {
        let s = self.eval(q);
        s * s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_physical(omega: f64) -> PhysicalParams {
        PhysicalParams {
            diff_coeff: 1.83e-13,
            atomic_volume: 1.205e-29,
            formation_energy: 1.7,
            temperature: 823.0,
            omega,
        }
    }

    #[test]
    fn power_law_values() {
        let m = RateModel::power_law(1.0, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(m.alpha_discrete(4).unwrap(), 2.0);
        assert_eq!(m.beta_cont(4.0).unwrap(), 4.0);
        assert_eq!(m.drift_f(4.0).unwrap(), 2.0);
        assert_eq!(m.diffusion_d(4.0).unwrap(), 6.0);
        assert_eq!(m.drift_f(1.0).unwrap(), 1.0);
        let z = RateModel::power_law(0.0, 1.0, 1.0 / 3.0, 1.0).unwrap();
        assert_eq!(z.alpha_discrete(7).unwrap(), 0.0);
        assert!(m.alpha_discrete(0).is_err());
        assert!(m.alpha_cont(0.5).is_err());
    }

    #[test]
    fn sigma_values() {
        let m = RateModel::power_law(1.0, 2.0, 0.5, 1.0).unwrap();
        assert!((m.sigma(4.0).unwrap() - 6f64.sqrt()).abs() < 1e-15);
        let (s0, sb) = m.sigma_split(4.0).unwrap();
        assert!((s0 - 2f64.sqrt()).abs() < 1e-15);
        assert!((sb - 3f64.sqrt()).abs() < 1e-15);
        let flat = RateModel::power_law(1.0, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(flat.sigma_split(17.0).unwrap().0, 1.0);
    }

    #[test]
    fn physical_formula() {
        let p = example_physical(0.0);
        let m = RateModel::physical(p, 1.0 / 3.0, 1e-6).unwrap();
        let pref = (48.0 * PI * PI / (1.205e-29f64 * 1.205e-29)).powf(1.0 / 3.0) * 1.83e-13;
        let a1 = pref * (-1.7 / (K_B * 823.0)).exp();
        assert!((m.alpha_discrete(1).unwrap() / a1 - 1.0).abs() < 1e-14);
        assert!((m.beta_discrete(8).unwrap() / (2.0 * pref) - 1.0).abs() < 1e-14);
        assert_eq!(m.alpha_cont(1.0).unwrap(), 0.0);
    }

    #[test]
    fn physical_alpha1_regression() {
        let m = RateModel::physical(example_physical(1.0), 1.0 / 3.0, 1e-6).unwrap();
        let a1 = m.alpha_discrete(1).unwrap();
        assert!((a1 / 2.868_799_058_814_187_7e-3 - 1.0).abs() < 1e-12, "{a1:.16e}");
    }

    #[test]
    fn minimal_m_cases() {
        let pl = RateModel::power_law(1.0, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(pl.minimal_size_m(1.0).unwrap(), 1.0);
        let sub = RateModel::power_law(2.0, 1.0, 0.5, 1.0).unwrap();
        assert!(matches!(sub.minimal_size_m(1.0), Err(Error::Subsaturated { .. })));

        let p = example_physical(1.0);
        let (a0, b0) = (p.alpha0(1.0 / 3.0), p.beta0(1.0 / 3.0));
        let c1 = std::f64::consts::E * a0 / b0;
        let m = RateModel::physical(p, 1.0 / 3.0, c1).unwrap();
        let mm = m.minimal_size_m(1.0).unwrap();
        assert!(mm >= 1.0);
        assert!(m.positive_increasing_on(mm, 100.0 * mm, 256));
        let low = RateModel::physical(p, 1.0 / 3.0, 0.5 * a0 / b0).unwrap();
        assert!(low.minimal_size_m(1.0).is_err());
    }

    #[test]
    fn assumption_report_power_law() {
        let m = RateModel::power_law(1.0, 2.0, 0.5, 1.0).unwrap();
        let r = check_assumptions(&m, 1000);
        assert!((r.k_minus - 1.0).abs() < 1e-12 && (r.k_plus - 1.0).abs() < 1e-12);
        assert!(r.all_ok());
        let z = RateModel::power_law(0.0, 0.0, 0.5, 1.0).unwrap();
        let r = check_assumptions(&z, 100);
        assert_eq!(r.bound_b, 0.0);
        assert_eq!(r.growth_k, 0.0);
        assert!(!r.f_positive);
    }

    #[test]
    fn custom_requires_verification() {
        let a: RateFn = Arc::new(|x: f64| x.sqrt());
        let b: RateFn = Arc::new(|x: f64| 3.0 * x.sqrt());
        let mut m = RateModel::custom(a, b, 0.5, 1.0).unwrap();
        assert!(matches!(m.ensure_usable(), Err(Error::UncheckedCustomModel)));
        let r = m.verify(200);
        assert!(r.h1_ok);
        assert!(m.ensure_usable().is_ok());
    }

    #[test]
    fn extended_sigma_is_smooth_and_positive() {
        let m = RateModel::power_law(0.5, 1.5, 0.5, 1.0).unwrap();
        let e = ExtendedSigma::new(&m, 20.0).unwrap();
        assert_eq!(e.eval(25.0), m.sigma(25.0).unwrap());
        assert_eq!(e.eval(-100.0), e.eval(17.0));
        let h = 1e-4;
        let left = (e.eval(20.0) - e.eval(20.0 - h)) / h;
        let right = (e.eval(20.0 + h) - e.eval(20.0)) / h;
        assert!((left - right).abs() < 1e-3);
        for i in 0..100 {
            assert!(e.eval(15.0 + 0.1 * i as f64) > 0.0);
        }
    }
}
