use super::{Field, SchemeConfig};
use crate::error::{domain, Error, Result};
use crate::rates::ExtendedSigma;
use crate::util::{locate, thomas, Pchip};

/// Time-indexed solution of the non-divergence diffusion problem.
#[derive(Debug, Clone)]
pub struct DiffusionSolution {
    /// Initial field, requested snapshots and final field, sorted by time.
    pub snapshots: Vec<Field>,
    pub gamma: f64,
    interps: Vec<Pchip>,
    pub steps: usize,
}

impl DiffusionSolution {
    pub fn final_field(&self) -> &Field {
        self.snapshots.last().unwrap()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.time).collect()
    }

    fn index(&self, t: f64) -> Result<usize> {
        self.snapshots
            .iter()
            .position(|f| (f.time - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .ok_or_else(|| Error::InsufficientSnapshots(format!("no snapshot stored at t = {t}")))
    }

    pub fn field_at(&self, t: f64) -> Result<&Field> {
        Ok(&self.snapshots[self.index(t)?])
    }

    /// Monotone cubic interpolation of the snapshot at time `t`.
    pub fn eval(&self, t: f64, q: f64) -> Result<f64> {
        let i = self.index(t)?;
        let mesh = &self.snapshots[i].mesh;
        if !(q >= mesh.first() && q <= mesh.last()) {
            return domain(format!("q = {q} lies outside the mesh"));
        }
        Ok(self.interps[i].eval(q))
    }

    /// Four-point Lagrange interpolation of the snapshot at time `t`, used for
    /// derivative estimates.
    pub fn eval_smooth(&self, t: f64, q: f64) -> Result<f64> {
        let f = self.field_at(t)?;
        let x = f.mesh.nodes();
        if !(q >= x[0] && q <= x[x.len() - 1]) {
            return domain(format!("q = {q} lies outside the mesh"));
        }
        let i = locate(x, q).saturating_sub(1).min(x.len() - 4);
        let mut s = 0.0;
        for a in i..i + 4 {
            let mut l = 1.0;
            for b in i..i + 4 {
                if a != b {
                    l *= (q - x[b]) / (x[a] - x[b]);
                }
            }
            s += l * f.values[a];
        }
        Ok(s)
    }
}

/// Advances `dc/dt = 1/2 sigma^2(q) d2c/dq2` (non-divergence form).
pub fn solve_diffusion(
    sigma: &ExtendedSigma,
    initial: &Field,
    t_end: f64,
    cfg: &SchemeConfig,
) -> Result<DiffusionSolution> {
    cfg.validate()?;
    let t0 = initial.time;
    if !(t_end >= t0) {
        return domain("t_end precedes the initial time");
    }
    let mesh = initial.mesh.clone();
    let x = mesh.nodes();
    let n = x.len();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for j in 1..n - 1 {
        let (hl, hr) = (x[j] - x[j - 1], x[j + 1] - x[j]);
        let s = sigma.eval_sq(x[j]);
        lo[j] = s / ((hl + hr) * hl);
        hi[j] = s / ((hl + hr) * hr);
    }
    let theta = cfg.theta;
    if theta == 0.0 {
        let stable = (1..n - 1).map(|j| 1.0 / (lo[j] + hi[j])).fold(f64::INFINITY, f64::min);
        if cfg.dt > stable {
            return Err(Error::Cfl {
                dt: cfg.dt,
                stable_dt: stable,
            });
        }
    }
    let (left0, right0) = (initial.values[0], initial.values[n - 1]);
    let mut c = initial.values.clone();
    let mut t = t0;
    let mut steps = 0;
    let mut snapshots = vec![initial.clone()];
    let m = n - 2;
    let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);

    for ev in cfg.events(t0, t_end) {
        let span = ev - t;
        if span > 0.0 {
            let k = ((span / cfg.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = span / k as f64;
            for i in 1..=k {
                let t_new = if i == k { ev } else { t + h };
                let mut next = c.clone();
                next[0] = cfg.left.value(t_new, left0);
                next[n - 1] = cfg.right.value(t_new, right0);
                let lap = |v: &[f64], j: usize| lo[j] * (v[j - 1] - v[j]) + hi[j] * (v[j + 1] - v[j]);
                if theta == 0.0 {
                    for j in 1..n - 1 {
                        next[j] = c[j] + h * lap(&c, j);
                    }
                } else {
                    for r in 0..m {
                        let j = r + 1;
                        sub[r] = -theta * h * lo[j];
                        sup[r] = -theta * h * hi[j];
                        diag[r] = 1.0 + theta * h * (lo[j] + hi[j]);
                        rhs[r] = c[j] + (1.0 - theta) * h * lap(&c, j);
                    }
                    rhs[0] += theta * h * lo[1] * next[0];
                    rhs[m - 1] += theta * h * hi[n - 2] * next[n - 1];
                    thomas(&sub, &diag, &sup, &mut rhs)?;
                    next[1..n - 1].copy_from_slice(&rhs);
                }
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { t: t_new });
                }
                c = next;
                t = t_new;
                steps += 1;
            }
        }
        if ev > t0 {
            snapshots.push(Field {
                mesh: mesh.clone(),
                values: c.clone(),
                time: ev,
            });
        }
    }
    let interps = snapshots.iter().map(|f| f.interpolator()).collect::<Result<Vec<_>>>()?;
    log::debug!("diffusion solve: {steps} steps, {} snapshots", snapshots.len());
    Ok(DiffusionSolution {
        snapshots,
        gamma: sigma.gamma(),
        interps,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::continuum::{Boundary, Mesh};
    use crate::rates::RateModel;

    fn unit_sigma() -> ExtendedSigma {
        // gamma = 0: sigma^2 = alpha0 + beta0*C1 = 1
        let m = RateModel::power_law(0.25, 0.75, 0.0, 1.0).unwrap();
        ExtendedSigma::new(&m, 1.0).unwrap()
    }

    #[test]
    fn heat_kernel() {
        let sigma = unit_sigma();
        let mesh = Arc::new(Mesh::uniform(-20.0, 20.0, 4000).unwrap());
        let init = Field::from_fn(mesh.clone(), |q| (-q * q / 2.0).exp(), 0.0).unwrap();
        let cfg = SchemeConfig {
            theta: 0.5,
            dt: 0.005,
            ..Default::default()
        };
        let t = 1.0;
        let sol = solve_diffusion(&sigma, &init, t, &cfg).unwrap();
        let mut err: f64 = 0.0;
        for (j, &q) in mesh.nodes().iter().enumerate() {
            let exact = (1.0 + t).powf(-0.5) * (-q * q / (2.0 * (1.0 + t))).exp();
            err = err.max((sol.final_field().values[j] - exact).abs());
        }
        assert!(err < 0.005 * (1.0 + t).powf(-0.5), "{err}");
    }

    #[test]
    fn constant_and_max_principle() {
        let sigma = unit_sigma();
        let mesh = Arc::new(Mesh::uniform(0.0, 10.0, 50).unwrap());
        let cst = Field::from_fn(mesh.clone(), |_| 3.0, 0.0).unwrap();
        let cfg = SchemeConfig {
            left: Boundary::HoldInitial,
            right: Boundary::HoldInitial,
            ..Default::default()
        };
        let sol = solve_diffusion(&sigma, &cst, 1.0, &cfg).unwrap();
        assert!(sol.final_field().values.iter().all(|v| (v - 3.0).abs() < 1e-13));

        let rough = Field::from_fn(mesh.clone(), |q| if (3.0..4.0).contains(&q) { 1.0 } else { 0.0 }, 0.0).unwrap();
        for dt in [1e-3, 0.1, 10.0] {
            let cfg = SchemeConfig {
                dt,
                snapshot_times: vec![0.5, 1.0, 1.5],
                ..Default::default()
            };
            let sol = solve_diffusion(&sigma, &rough, 2.0, &cfg).unwrap();
            for w in sol.snapshots.windows(2) {
                let mx = |f: &Field| f.values.iter().cloned().fold(f64::MIN, f64::max);
                let mn = |f: &Field| f.values.iter().cloned().fold(f64::MAX, f64::min);
                assert!(mx(&w[1]) <= mx(&w[0]) + 1e-10);
                assert!(mn(&w[1]) >= mn(&w[0]) - 1e-10);
            }
        }
    }

    #[test]
    fn snapshot_lookup() {
        let sigma = unit_sigma();
        let mesh = Arc::new(Mesh::uniform(0.0, 10.0, 50).unwrap());
        let f = Field::from_fn(mesh, |q| q.sin(), 0.0).unwrap();
        let cfg = SchemeConfig::default().with_triplet(0.5, 0.1);
        let sol = solve_diffusion(&sigma, &f, 1.0, &cfg).unwrap();
        assert_eq!(sol.snapshots.len(), 5);
        assert!(sol.field_at(0.4).is_ok());
        assert!(matches!(sol.field_at(0.3), Err(Error::InsufficientSnapshots(_))));
        assert!(sol.eval(0.0, 11.0).is_err());
        let q = 2.345;
        assert!((sol.eval_smooth(0.0, q).unwrap() - q.sin()).abs() < 1e-4);
    }
}
