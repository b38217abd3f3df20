use super::{Advection, Field, SchemeConfig};
use crate::error::{domain, Error, Result};
use crate::rates::RateModel;
use crate::util::thomas;

#[derive(Debug, Clone)]
pub struct FpSolution {
    pub field: Field,
    /// Fields at the requested snapshot times, in increasing order.
    pub snapshots: Vec<Field>,
    /// Time-integrated flux entering through the two boundaries.
    pub boundary_inflow: f64,
    pub steps: usize,
}

impl FpSolution {
    /// Change of the interior integral minus the accumulated boundary inflow.
    pub fn conservation_defect(&self, initial: &Field) -> f64 {
        self.field.interior_integral() - initial.interior_integral() - self.boundary_inflow
    }
}

/// Advances `dC/dt = -d(F C)/dx + 1/2 d2(D C)/dx2` in conservative finite-volume form.
pub fn solve_fp(model: &RateModel, initial: &Field, t_end: f64, cfg: &SchemeConfig) -> Result<FpSolution> {
    transport(model, initial, t_end, cfg, true)
}

/// Pure transport `dC/dt = -d(F C)/dx`.
pub fn solve_lsw(model: &RateModel, initial: &Field, t_end: f64, cfg: &SchemeConfig) -> Result<FpSolution> {
    transport(model, initial, t_end, cfg, false)
}

/// Face coefficients: flux through face `j+1/2` is `a[j] C_j + b[j] C_{j+1}`.
struct Faces {
    a: Vec<f64>,
    b: Vec<f64>,
    f: Vec<f64>,
}

fn faces(model: &RateModel, x: &[f64], advection: Advection, diffusion: bool) -> Faces {
    let n = x.len();
    let d: Vec<f64> = if diffusion {
        x.iter().map(|&v| model.d(v)).collect()
    } else {
        vec![0.0; n]
    };
    let mut a = vec![0.0; n - 1];
    let mut b = vec![0.0; n - 1];
    let mut f = vec![0.0; n - 1];
    for j in 0..n - 1 {
        let h = x[j + 1] - x[j];
        let fj = model.f(0.5 * (x[j] + x[j + 1]));
        f[j] = fj;
        let (fa, fb) = match advection {
            Advection::Central => (0.5 * fj, 0.5 * fj),
            Advection::Upwind | Advection::Limited => (fj.max(0.0), fj.min(0.0)),
        };
        a[j] = fa + 0.5 * d[j] / h;
        b[j] = fb - 0.5 * d[j + 1] / h;
    }
    Faces { a, b, f }
}

fn van_leer(r: f64) -> f64 {
    (r + r.abs()) / (1.0 + r.abs())
}

/// Face fluxes for the current state, including the limited correction.
fn fluxes(fc: &Faces, c: &[f64], limited: bool) -> Vec<f64> {
    let n = c.len();
    let mut phi: Vec<f64> = (0..n - 1).map(|j| fc.a[j] * c[j] + fc.b[j] * c[j + 1]).collect();
    if limited {
        for j in 1..n - 1 {
            if fc.f[j] > 0.0 {
                let dn = c[j + 1] - c[j];
                let up = c[j] - c[j - 1];
                let r = if dn != 0.0 { up / dn } else { 0.0 };
                phi[j] += 0.5 * fc.f[j] * van_leer(r) * dn;
            }
        }
    }
    phi
}

/// Largest explicit step that keeps the update monotone.
fn stable_dt(fc: &Faces, w: &[f64], limited: bool) -> f64 {
    let n = w.len();
    let mut dt = f64::INFINITY;
    for j in 1..n - 1 {
        let out = fc.a[j] - fc.b[j - 1];
        if out > 0.0 {
            dt = dt.min(w[j] / out);
        }
    }
    if limited {
        dt * 0.5
    } else {
        dt
    }
}

fn transport(
    model: &RateModel,
    initial: &Field,
    t_end: f64,
    cfg: &SchemeConfig,
    diffusion: bool,
) -> Result<FpSolution> {
    model.ensure_usable()?;
    cfg.validate()?;
    let mesh = initial.mesh.clone();
    let x = mesh.nodes();
    if x[0] < 1.0 {
        return domain("continuum mesh must start at x >= 1");
    }
    if !initial.is_nonnegative() {
        return domain("initial field must be nonnegative");
    }
    let t0 = initial.time;
    if !(t_end >= t0) {
        return domain("t_end precedes the initial time");
    }
    let n = x.len();
    let w = mesh.dual_widths();
    let limited = cfg.advection == Advection::Limited;
    let fc = faces(model, x, cfg.advection, diffusion);
    let theta = cfg.theta;
    if theta == 0.0 {
        let s = stable_dt(&fc, &w, limited);
        if cfg.dt > s {
            return Err(Error::Cfl {
                dt: cfg.dt,
                stable_dt: s,
            });
        }
    }
    let (left0, right0) = (initial.values[0], initial.values[n - 1]);

    let mut c = initial.values.clone();
    let mut t = t0;
    let mut inflow = 0.0;
    let mut steps = 0;
    let mut snapshots = Vec::new();
    let m = n - 2;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];

    for ev in cfg.events(t0, t_end) {
        let span = ev - t;
        if span > 0.0 {
            let k = ((span / cfg.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = span / k as f64;
            for i in 1..=k {
                let t_new = if i == k { ev } else { t + h };
                let phi_old = fluxes(&fc, &c, limited);
                let mut next = c.clone();
                next[0] = cfg.left.value(t_new, left0);
                next[n - 1] = cfg.right.value(t_new, right0);
                if theta == 0.0 {
                    for j in 1..n - 1 {
                        next[j] = c[j] + h * (phi_old[j - 1] - phi_old[j]) / w[j];
                    }
                } else {
                    for r in 0..m {
                        let j = r + 1;
                        sub[r] = -theta * fc.a[j - 1];
                        diag[r] = w[j] / h + theta * (fc.a[j] - fc.b[j - 1]);
                        sup[r] = theta * fc.b[j];
                        rhs[r] = w[j] / h * c[j] + (1.0 - theta) * (phi_old[j - 1] - phi_old[j]);
                    }
                    rhs[0] += theta * fc.a[0] * next[0];
                    rhs[m - 1] -= theta * fc.b[n - 2] * next[n - 1];
                    thomas(&sub, &diag, &sup, &mut rhs)?;
                    next[1..n - 1].copy_from_slice(&rhs);
                }
                let phi_new = fluxes(&fc, &next, limited);
                let net = |p: &[f64]| p[0] - p[n - 2];
                inflow += h * if theta == 0.0 {
                    net(&phi_old)
                } else {
                    theta * net(&phi_new) + (1.0 - theta) * net(&phi_old)
                };
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { t: t_new });
                }
                c = next;
                t = t_new;
                steps += 1;
            }
        }
        if ev < t_end || cfg.snapshot_times.contains(&ev) {
            snapshots.push(Field {
                mesh: mesh.clone(),
                values: c.clone(),
                time: ev,
            });
        }
    }
    log::debug!("transport solve: {steps} steps to t = {t}, boundary inflow {inflow:e}");
    Ok(FpSolution {
        field: Field {
            mesh,
            values: c,
            time: t_end.max(t0),
        },
        snapshots,
        boundary_inflow: inflow,
        steps,
    })
}
