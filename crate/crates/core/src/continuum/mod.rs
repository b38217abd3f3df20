//! Continuum approximations: Fokker-Planck, its pure-transport limit, and the
//! pure diffusion reformulation, with residual and decay diagnostics.

mod diffusion;
mod fp;
mod residuals;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::table::ResultTable;
use crate::util::{geomspace, linspace, Pchip};

pub use diffusion::{solve_diffusion, DiffusionSolution};
pub use fp::{solve_fp, solve_lsw, FpSolution};
pub use residuals::{
    derivative_decay_probe, hypothesis_ratios, reconstruct_c_hat, residual_rc, residual_rn, DecayFit, HypothesisRatios,
    Reconstruction,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Spacing {
    Uniform,
    Geometric,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    spacing: Spacing,
}

impl Mesh {
    /// `cells + 1` uniform nodes on `[a, b]`.
    pub fn uniform(a: f64, b: f64, cells: usize) -> Result<Self> {
        Self::build(linspace(a, b, cells + 1), Spacing::Uniform)
    }

    /// `cells + 1` geometric nodes on `[a, b]`, `a > 0`.
    pub fn geometric(a: f64, b: f64, cells: usize) -> Result<Self> {
        if !(a > 0.0) {
            return domain("geometric mesh needs a > 0");
        }
        Self::build(geomspace(a, b, cells + 1), Spacing::Geometric)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        Self::build(nodes, Spacing::Custom)
    }

    fn build(nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if nodes.len() < 9 {
            return domain("mesh needs at least 8 cells");
        }
        if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("mesh nodes must be finite and strictly increasing");
        }
        Ok(Mesh { nodes, spacing })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Width of the cell containing `x`.
    pub fn local_spacing(&self, x: f64) -> f64 {
        let i = crate::util::locate(&self.nodes, x);
        self.nodes[i + 1] - self.nodes[i]
    }

    /// Dual-cell widths of the interior nodes (zero at the two ends).
    pub fn dual_widths(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w = vec![0.0; n];
        for j in 1..n - 1 {
            w[j] = 0.5 * (self.nodes[j + 1] - self.nodes[j - 1]);
        }
        w
    }
}

/// Values of a continuum density on a mesh at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != mesh.len() {
            return domain("field length does not match mesh");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("field has non-finite values");
        }
        Ok(Field { mesh, values, time })
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64) -> f64, time: f64) -> Result<Self> {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        Self::new(mesh, values, time)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }

    /// `sum_j C_j w_j` over interior nodes with dual-cell widths `w_j`.
    pub fn interior_integral(&self) -> f64 {
        self.mesh
            .dual_widths()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn interpolator(&self) -> Result<Pchip> {
        Pchip::new(self.mesh.nodes().to_vec(), self.values.clone())
    }

    /// Interior integral, mean and variance.
    pub fn moments(&self) -> (f64, f64, f64) {
        let w = self.mesh.dual_widths();
        let x = self.mesh.nodes();
        let m0: f64 = w.iter().zip(&self.values).map(|(w, v)| w * v).sum();
        let m1: f64 = (0..x.len()).map(|j| w[j] * self.values[j] * x[j]).sum::<f64>() / m0;
        let var: f64 = (0..x.len())
            .map(|j| w[j] * self.values[j] * (x[j] - m1).powi(2))
            .sum::<f64>()
            / m0;
        (m0, m1, var)
    }

    pub fn to_table(&self) -> Result<ResultTable> {
        let mut t = ResultTable::new();
        t.meta("time", crate::table::fmt_f64(self.time));
        t.meta("mesh_nodes", self.mesh.len());
        t.meta("mesh_spacing", format!("{:?}", self.mesh.spacing()));
        t.meta("mesh_range", format!("[{}, {}]", self.mesh.first(), self.mesh.last()));
        t.push_real("x_or_q", self.mesh.nodes().to_vec())?;
        t.push_real("value", self.values.clone())?;
        Ok(t)
    }
}

/// Dirichlet boundary value policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    Dirichlet(f64),
    /// Keep the initial boundary value.
    HoldInitial,
    /// Piecewise-linear in time, held constant outside the given range.
    TimeSeries {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Boundary {
    pub fn value(&self, t: f64, initial: f64) -> f64 {
        match self {
            Boundary::Dirichlet(v) => *v,
            Boundary::HoldInitial => initial,
            Boundary::TimeSeries { times, values } => {
                if times.is_empty() {
                    return initial;
                }
                if t <= times[0] {
                    return values[0];
                }
                let n = times.len();
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let i = crate::util::locate(times, t);
                let s = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + s * (values[i + 1] - values[i])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Boundary::TimeSeries { times, values } = self {
            if times.len() != values.len() || times.windows(2).any(|w| !(w[1] > w[0])) {
                return domain("boundary time series needs matching, increasing times");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Advection {
    /// First-order upwind.
    Upwind,
    /// Second-order centered.
    Central,
    /// Upwind with a van Leer limited correction; explicit stepping only.
    Limited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    /// 1 = implicit Euler, 0.5 = Crank-Nicolson, 0 = explicit.
    pub theta: f64,
    pub dt: f64,
    pub advection: Advection,
    pub left: Boundary,
    pub right: Boundary,
    /// Times (besides the final one) at which the solution is recorded.
    pub snapshot_times: Vec<f64>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            theta: 1.0,
            dt: 1e-2,
            advection: Advection::Upwind,
            left: Boundary::Dirichlet(0.0),
            right: Boundary::Dirichlet(0.0),
            snapshot_times: Vec::new(),
        }
    }
}

impl SchemeConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return domain("theta must lie in [0, 1]");
        }
        if !(self.dt > 0.0) {
            return domain("dt must be positive");
        }
        if self.advection == Advection::Limited && self.theta != 0.0 {
            return domain("the limited advection flux is only available with explicit stepping");
        }
        self.left.validate()?;
        self.right.validate()
    }

    /// Sorted event times in `(0, t_end]` that the stepper must hit.
    fn events(&self, t0: f64, t_end: f64) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .snapshot_times
            .iter()
            .cloned()
            .filter(|t| *t > t0 && *t < t_end)
            .collect();
        ev.push(t_end);
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev.dedup();
        ev
    }

    /// Snapshot times `t - ds, t, t + ds` appended for centered differences.
    pub fn with_triplet(mut self, t: f64, ds: f64) -> Self {
        self.snapshot_times.extend([t - ds, t, t + ds]);
        self
    }
}
