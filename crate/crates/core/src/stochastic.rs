//! Monte Carlo oracle for the diffusion problem: Euler-Maruyama paths of
//! `dX = sigma(X) dW`, Feynman-Kac estimates, and the Lamperti-transformed
//! additive-noise process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rates::ExtendedSigma;
use crate::util::{integrate_gk, monotone_root, Pchip};

const BLOCK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_samples: usize,
    pub dt_sde: f64,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return domain("n_samples must be at least 2");
        }
        if !(self.dt_sde > 0.0) {
            return domain("dt_sde must be positive");
        }
        if self.antithetic && !self.n_samples.is_multiple_of(2) {
            return domain("antithetic sampling needs an even sample count");
        }
        Ok(())
    }

    fn steps(&self, t: f64) -> (usize, f64) {
        if t <= 0.0 {
            return (0, 0.0);
        }
        let k = ((t / self.dt_sde) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (k, t / k as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Per-sample generator: stream `index` of the ChaCha8 key derived from `seed`.
fn sample_rng(base: &ChaCha8Rng, index: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(index);
    rng.set_word_pos(0);
    rng
}

enum Dynamics<'a> {
    Euler(&'a ExtendedSigma),
    Lamperti(&'a LampertiTable),
}

impl Dynamics<'_> {
    fn start(&self, x0: f64) -> f64 {
        match self {
            Dynamics::Euler(_) => x0,
            Dynamics::Lamperti(l) => l.phi(x0),
        }
    }

    #[inline]
    fn step(&self, s: f64, h: f64, sqrt_h: f64, xi: f64) -> f64 {
        match self {
            Dynamics::Euler(sig) => s + sig.eval(s) * sqrt_h * xi,
            Dynamics::Lamperti(l) => s + l.psi(s) * h + sqrt_h * xi,
        }
    }

    fn finish(&self, s: f64) -> f64 {
        match self {
            Dynamics::Euler(_) => s,
            Dynamics::Lamperti(l) => l.phi_inverse_fast(s),
        }
    }
}

/// Terminal states of one path per starting point, all driven by the same
/// increments (`sign` flips them for the antithetic partner).
fn run_path(dyn_: &Dynamics, starts: &[f64], out: &mut [f64], k: usize, h: f64, rng: &mut ChaCha8Rng, sign: f64) {
    let sqrt_h = h.sqrt();
    for (o, &s0) in out.iter_mut().zip(starts) {
        *o = s0;
    }
    for _ in 0..k {
        let xi: f64 = rng.sample::<f64, _>(StandardNormal) * sign;
        for o in out.iter_mut() {
            *o = dyn_.step(*o, h, sqrt_h, xi);
        }
    }
    for o in out.iter_mut() {
        *o = dyn_.finish(*o);
    }
}

fn terminal_samples(dyn_: &Dynamics, x0: f64, t: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (k, h) = cfg.steps(t);
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = [dyn_.start(x0)];
    let n = cfg.n_samples;
    let blocks: Vec<Vec<f64>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut v = Vec::with_capacity(BLOCK);
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let (stream, sign) = if cfg.antithetic {
                    (i / 2, if i % 2 == 0 { 1.0 } else { -1.0 })
                } else {
                    (i, 1.0)
                };
                let mut rng = sample_rng(&base, stream as u64);
                let mut out = [0.0];
                run_path(dyn_, &start, &mut out, k, h, &mut rng, sign);
                v.push(out[0]);
            }
            v
        })
        .collect();
    let samples: Vec<f64> = blocks.into_iter().flatten().collect();
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample { index: i });
    }
    Ok(samples)
}

/// Euler-Maruyama terminal values of `dX = sigma(X) dW`, `X_0 = x0`.
pub fn simulate_sde(sigma: &ExtendedSigma, x0: f64, t: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    terminal_samples(&Dynamics::Euler(sigma), x0, t, cfg)
}

/// Estimates `E[c0(X_t) | X_0 = x]` at each `x`, with common random numbers
/// across starting points.
fn feynman_kac(
    dyn_: &Dynamics,
    c0: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    xs: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    cfg.validate()?;
    if t <= 0.0 {
        return Ok(xs
            .iter()
            .map(|&x| McEstimate {
                mean: c0(x),
                stderr: 0.0,
                n_samples: cfg.n_samples,
            })
            .collect());
    }
    let (k, h) = cfg.steps(t);
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<f64> = xs.iter().map(|&x| dyn_.start(x)).collect();
    let shifts: Vec<f64> = xs.iter().map(|&x| c0(x)).collect();
    let p = xs.len();
    // Independent units: single samples, or antithetic pairs averaged.
    let units = if cfg.antithetic {
        cfg.n_samples / 2
    } else {
        cfg.n_samples
    };
    type Acc = (Vec<f64>, Vec<f64>, Option<usize>);
    let blocks: Vec<Acc> = (0..units.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let (mut s1, mut s2) = (vec![0.0; p], vec![0.0; p]);
            let mut bad = None;
            let mut out = vec![0.0; p];
            let mut out2 = vec![0.0; p];
            for u in b * BLOCK..((b + 1) * BLOCK).min(units) {
                let mut rng = sample_rng(&base, u as u64);
                run_path(dyn_, &starts, &mut out, k, h, &mut rng, 1.0);
                if cfg.antithetic {
                    let mut rng = sample_rng(&base, u as u64);
                    run_path(dyn_, &starts, &mut out2, k, h, &mut rng, -1.0);
                }
                for j in 0..p {
                    let v = if cfg.antithetic {
                        0.5 * (c0(out[j]) + c0(out2[j]))
                    } else {
                        c0(out[j])
                    };
                    if !v.is_finite() && bad.is_none() {
                        bad = Some(if cfg.antithetic { 2 * u } else { u });
                    }
                    let d = v - shifts[j];
                    s1[j] += d;
                    s2[j] += d * d;
                }
            }
            (s1, s2, bad)
        })
        .collect();
    let (mut s1, mut s2) = (vec![0.0; p], vec![0.0; p]);
    for (b1, b2, bad) in &blocks {
        if let Some(i) = bad {
            return Err(Error::NonFiniteSample { index: *i });
        }
        for j in 0..p {
            s1[j] += b1[j];
            s2[j] += b2[j];
        }
    }
    let nu = units as f64;
    Ok((0..p)
        .map(|j| {
            let m = s1[j] / nu;
            let var = ((s2[j] - nu * m * m) / (nu - 1.0)).max(0.0);
            McEstimate {
                mean: shifts[j] + m,
                stderr: (var / nu).sqrt(),
                n_samples: cfg.n_samples,
            }
        })
        .collect())
}

pub fn feynman_kac_estimate(
    sigma: &ExtendedSigma,
    c0: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    x: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(feynman_kac(&Dynamics::Euler(sigma), c0, t, &[x], cfg)?[0])
}

/// Feynman-Kac estimates at several points; the estimates are correlated
/// but each is unbiased with its own standard error.
pub fn feynman_kac_many(
    sigma: &ExtendedSigma,
    c0: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    xs: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    feynman_kac(&Dynamics::Euler(sigma), c0, t, xs, cfg)
}

fn breakpoints(sigma: &ExtendedSigma, a: f64, b: f64) -> Vec<f64> {
    let (lo, hi) = (a.min(b), a.max(b));
    let mut pts = vec![lo];
    for c in [sigma.m() - 2.0, sigma.m()] {
        if c > lo && c < hi {
            pts.push(c);
        }
    }
    pts.push(hi);
    pts
}

/// `phi(x) = int_0^x ds / sigma(s)`.
pub fn lamperti_phi(sigma: &ExtendedSigma, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let pts = breakpoints(sigma, 0.0, x);
    let mut acc = 0.0;
    for w in pts.windows(2) {
        for q in [w[0], 0.5 * (w[0] + w[1]), w[1]] {
            if !(sigma.eval(q) > 0.0) {
                return domain(format!("sigma is not positive at q = {q}"));
            }
        }
        acc += integrate_gk(|s| 1.0 / sigma.eval(s), w[0], w[1], 1e-13);
    }
    Ok(if x > 0.0 { acc } else { -acc })
}

pub fn lamperti_phi_inverse(sigma: &ExtendedSigma, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.0);
    }
    let f = |x: f64| lamperti_phi(sigma, x).unwrap_or(f64::NAN) - y;
    let mut step = y.abs() * sigma.eval(0.0).max(1.0);
    let (mut lo, mut hi) = if y > 0.0 { (0.0, step) } else { (-step, 0.0) };
    for _ in 0..200 {
        let (flo, fhi) = (f(lo), f(hi));
        if flo.is_nan() || fhi.is_nan() {
            return domain("sigma is not positive on the bracket");
        }
        if flo <= 0.0 && fhi >= 0.0 {
            let tol = 1e-14 * (1.0 + hi.abs().max(lo.abs()));
            return Ok(monotone_root(f, lo, hi, tol));
        }
        step *= 2.0;
        if fhi < 0.0 {
            lo = hi;
            hi += step;
        } else {
            hi = lo;
            lo -= step;
        }
    }
    domain(format!("could not bracket phi^-1({y})"))
}

/// Tabulated Lamperti map for path simulation on a fixed range.
pub struct LampertiTable {
    sigma: ExtendedSigma,
    x: Vec<f64>,
    y: Vec<f64>,
    inverse: Pchip,
    psi_y: Vec<f64>,
    psi_v: Vec<f64>,
}

impl LampertiTable {
    pub fn new(sigma: &ExtendedSigma, x_lo: f64, x_hi: f64, nodes: usize) -> Result<Self> {
        if !(x_hi > x_lo) || nodes < 16 {
            return domain("Lamperti table needs x_lo < x_hi and at least 16 nodes");
        }
        let x = crate::util::linspace(x_lo, x_hi, nodes);
        let mut y = Vec::with_capacity(nodes);
        y.push(lamperti_phi(sigma, x_lo)?);
        for w in x.windows(2) {
            let mut acc = 0.0;
            for s in breakpoints(sigma, w[0], w[1]).windows(2) {
                acc += integrate_gk(|q| 1.0 / sigma.eval(q), s[0], s[1], 1e-13);
            }
            y.push(y.last().unwrap() + acc);
        }
        let inverse = Pchip::new(y.clone(), x.clone())?;
        let psi_v: Vec<f64> = x.iter().map(|&q| -0.5 * sigma.eval_prime(q)).collect();
        Ok(LampertiTable {
            sigma: sigma.clone(),
            psi_y: y.clone(),
            x,
            y,
            inverse,
            psi_v,
        })
    }

    fn phi(&self, x: f64) -> f64 {
        lamperti_phi(&self.sigma, x).unwrap_or(f64::NAN)
    }

    /// Interpolated inverse, extended linearly beyond the table.
    fn phi_inverse_fast(&self, y: f64) -> f64 {
        let n = self.y.len();
        if y < self.y[0] {
            self.x[0] + (y - self.y[0]) * self.sigma.eval(self.x[0])
        } else if y > self.y[n - 1] {
            self.x[n - 1] + (y - self.y[n - 1]) * self.sigma.eval(self.x[n - 1])
        } else {
            self.inverse.eval(y)
        }
    }

    /// Drift `Psi(y) = -1/2 sigma'(phi^-1(y))`, linear between table nodes.
    #[inline]
    pub fn psi(&self, y: f64) -> f64 {
        let n = self.psi_y.len();
        if y <= self.psi_y[0] {
            return self.psi_v[0];
        }
        if y >= self.psi_y[n - 1] {
            return self.psi_v[n - 1];
        }
        let i = crate::util::locate(&self.psi_y, y);
        let s = (y - self.psi_y[i]) / (self.psi_y[i + 1] - self.psi_y[i]);
        self.psi_v[i] + s * (self.psi_v[i + 1] - self.psi_v[i])
    }
}

/// Simulates `dY = Psi(Y) dt + dW` from `Y_0 = phi(x0)` and returns `phi^-1(Y_t)`.
pub fn simulate_lamperti_sde(table: &LampertiTable, x0: f64, t: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    terminal_samples(&Dynamics::Lamperti(table), x0, t, cfg)
}

pub fn feynman_kac_lamperti(
    table: &LampertiTable,
    c0: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    xs: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    feynman_kac(&Dynamics::Lamperti(table), c0, t, xs, cfg)
}

/// Mean and unbiased variance with a shift for numerical stability.
pub fn sample_moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let k = v[0];
    let (s1, s2) = v
        .iter()
        .fold((0.0, 0.0), |(a, b), x| (a + (x - k), b + (x - k) * (x - k)));
    let m = s1 / n;
    (k + m, (s2 - n * m * m) / (n - 1.0))
}
