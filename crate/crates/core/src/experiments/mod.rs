//! Scenario runner: parses experiment specs, runs the pipelines and writes
//! result tables.

mod config;
mod schema;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::*;
pub use schema::schema;

use crate::bd::{total_mass, BdSystem};
use crate::characteristics::{CharacteristicMap, MapMode};
use crate::continuum::{
    derivative_decay_probe, hypothesis_ratios, residual_rc, residual_rn, solve_diffusion, solve_fp, solve_lsw,
    DiffusionSolution, Field, Mesh,
};
use crate::error::{Error, Result};
use crate::ode::{integrate_span, BdBlock, BdFull};
use crate::rates::{check_assumptions, ExtendedSigma, RateModel};
use crate::splitting::{convergence_study, SplitConfig};
use crate::stochastic::{feynman_kac_many, McConfig};
use crate::table::ResultTable;
use crate::util::loglog_slope;

/// Error norms of `a - b` over sizes `n >= n0`; index `i` holds size `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub sup: f64,
    /// `sum n |a_n - b_n|`.
    pub mass_l1: f64,
    /// `max n |a_n - b_n|`.
    pub mass_sup: f64,
}

pub fn compare_fields(a: &[f64], b: &[f64], n0: usize) -> Result<ErrorNorms> {
    if a.len() != b.len() {
        return Err(Error::Domain("compared vectors differ in length".into()));
    }
    let mut e = ErrorNorms {
        l1: 0.0,
        l2: 0.0,
        sup: 0.0,
        mass_l1: 0.0,
        mass_sup: 0.0,
    };
    for (i, (x, y)) in a.iter().zip(b).enumerate().skip(n0.max(1) - 1) {
        let d = (x - y).abs();
        let n = (i + 1) as f64;
        e.l1 += d;
        e.l2 += d * d;
        e.sup = e.sup.max(d);
        e.mass_l1 += n * d;
        e.mass_sup = e.mass_sup.max(n * d);
    }
    e.l2 = e.l2.sqrt();
    Ok(e)
}

pub fn spec_hash(spec: &ExperimentSpec) -> String {
    hex::encode(Sha256::digest(spec.canonical_json().as_bytes()))
}

/// Runs a validated spec and returns its table with provenance metadata.
pub fn run(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let model = spec.model.build()?;
    log::info!("running {} ({})", spec.name, spec.scenario.name());
    let mut table = match &spec.scenario {
        Scenario::BdReference(s) => bd_reference(&model, s)?,
        Scenario::SplittingConvergence(s) => splitting(&model, s)?,
        Scenario::FpVsBdVsLsw(s) => fp_vs_bd_vs_lsw(&model, s)?,
        Scenario::DiffusionResiduals(s) => diffusion_residuals(&model, s)?,
        Scenario::DecayProbe(s) => decay_probe(&model, s)?,
        Scenario::McCrossCheck(s) => mc_cross_check(&model, s, spec.seed)?,
        Scenario::AssumptionAudit(s) => assumption_audit(&model, s, spec.seed)?,
    };
    let mut meta = vec![
        ("name".to_string(), spec.name.clone()),
        ("scenario".to_string(), spec.scenario.name().to_string()),
        ("spec_hash".to_string(), spec_hash(spec)),
        ("spec".to_string(), spec.canonical_json()),
        ("seed".to_string(), spec.seed.to_string()),
        ("clusterkin_version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ];
    meta.append(&mut table.metadata);
    table.metadata = meta;
    Ok(table)
}

/// Runs a spec and writes `<out_dir>/<output or name.csv>` plus a
/// `.walltime` sidecar, returning the CSV path.
pub fn run_to_dir(spec: &ExperimentSpec, out_dir: &Path) -> Result<PathBuf> {
    let start = Instant::now();
    let table = run(spec)?;
    let wall = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(out_dir)?;
    let file = spec
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.name)));
    let path = out_dir.join(file);
    table.write_csv(&path)?;
    let mut side = path.clone().into_os_string();
    side.push(".walltime");
    std::fs::write(PathBuf::from(side), format!("{wall:.6}\n"))?;
    log::info!("wrote {} in {wall:.2} s", path.display());
    Ok(path)
}

/// Largest size touched by a scenario; used as the truncation for audits.
pub fn scenario_extent(s: &Scenario) -> usize {
    match s {
        Scenario::BdReference(s) => s.n_max,
        Scenario::SplittingConvergence(s) => s.n_max,
        Scenario::FpVsBdVsLsw(s) => s.n_max,
        Scenario::DiffusionResiduals(s) => s.setup.q_max.ceil() as usize,
        Scenario::DecayProbe(s) => s.setup.q_max.ceil() as usize,
        Scenario::McCrossCheck(s) => s.setup.q_max.ceil() as usize,
        Scenario::AssumptionAudit(s) => s.n_max,
    }
}

/// Assumption checks for the spec's model only, without running the scenario.
pub fn audit(spec: &ExperimentSpec) -> Result<serde_json::Value> {
    spec.validate()?;
    let model = spec.model.build()?;
    let n_max = scenario_extent(&spec.scenario).max(2);
    let report = check_assumptions(&model, n_max);
    let m = match model.minimal_size_m(1.0) {
        Ok(m) => serde_json::json!(m),
        Err(e) => serde_json::json!(e.to_string()),
    };
    Ok(serde_json::json!({
        "name": spec.name,
        "spec_hash": spec_hash(spec),
        "all_ok": report.all_ok(),
        "minimal_size_m": m,
        "report": report,
    }))
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn bd_reference(model: &RateModel, s: &BdReference) -> Result<ResultTable> {
    let sys = BdSystem::new(model, s.n_max)?;
    let c0 = s.initial.sizes(s.n_max);
    let c = if s.horizon == 0.0 {
        c0.clone()
    } else {
        integrate_span(&BdFull(&sys), &c0, 0.0, s.horizon, &s.solver)?
            .last()
            .to_vec()
    };
    let (m0, m1) = (total_mass(&c0), total_mass(&c));
    let tail: f64 = c
        .iter()
        .enumerate()
        .skip(s.n_max / 2)
        .map(|(i, v)| (i + 1) as f64 * v)
        .sum();
    let mut t = ResultTable::new();
    t.meta("horizon", crate::table::fmt_f64(s.horizon));
    t.push_int("n", (1..=s.n_max as i64).collect())?;
    t.push_real("c_initial", c0)?;
    t.push_real("c_final", c)?;
    t.add_summary("mass_initial", m0);
    t.add_summary("mass_final", m1);
    t.add_summary(
        "mass_drift_rel",
        if m0 != 0.0 { (m1 - m0).abs() / m0 } else { m1.abs() },
    );
    t.add_summary("tail_mass_rel", if m0 != 0.0 { tail / m0 } else { tail });
    Ok(t)
}

fn splitting(model: &RateModel, s: &SplittingConvergence) -> Result<ResultTable> {
    let sys = BdSystem::new(model, s.n_max)?;
    let u0 = s.initial.sizes(s.n_max);
    let split = SplitConfig {
        chi: s.chi.clone(),
        split_index: s.split_index,
    };
    let study = convergence_study(&sys, &u0, s.horizon, &s.dt_list, &split, &s.reference)?;
    study.to_table()
}

fn characteristic_map(model: &RateModel, m: f64, mode: MapMode) -> Result<CharacteristicMap> {
    let mode = if model.is_power_law() { mode } else { MapMode::Numeric };
    CharacteristicMap::new(model, m, mode)
}

/// Outcome of the FP / LSW / BD comparison at the final time.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub horizon: f64,
    /// Sizes `n0..=N`.
    pub n: Vec<usize>,
    pub bd: Vec<f64>,
    pub fp: Vec<f64>,
    pub lsw: Vec<f64>,
    pub fp_err: ErrorNorms,
    pub lsw_err: ErrorNorms,
}

pub fn compare_fp_bd_lsw(model: &RateModel, s: &FpVsBdVsLsw) -> Result<Comparison> {
    let (n0, n_max) = (s.n0, s.n_max);
    let map = characteristic_map(model, n0 as f64, MapMode::AnalyticPowerLaw)?;
    let horizon = match s.horizon {
        Horizon::Time(t) => t,
        Horizon::FractionOfG(f) => f * map.g(n_max as f64)?,
    };
    let sys = BdSystem::new(model, n_max)?;
    let block = BdBlock::new(&sys, model.c1, n0)?;
    let y0: Vec<f64> = (n0..=n_max).map(|n| s.initial.eval(n as f64)).collect();
    let bd = if horizon == 0.0 {
        y0
    } else {
        integrate_span(&block, &y0, 0.0, horizon, &s.bd_solver)?.last().to_vec()
    };

    let mesh = Arc::new(Mesh::uniform(n0 as f64, n_max as f64, (n_max - n0) * s.cells_per_unit)?);
    let init = Field::from_fn(mesh, |x| s.initial.eval(x), 0.0)?;
    let fp = solve_fp(model, &init, horizon, &s.scheme)?.field;
    let lsw = solve_lsw(model, &init, horizon, &s.scheme)?.field;
    let at_sizes = |f: &Field| -> Vec<f64> { (n0..=n_max).map(|n| f.values[(n - n0) * s.cells_per_unit]).collect() };
    let (fp, lsw) = (at_sizes(&fp), at_sizes(&lsw));
    let pad = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n0 - 1];
        out.extend_from_slice(v);
        out
    };
    let (bdf, fpf, lswf) = (pad(&bd), pad(&fp), pad(&lsw));
    Ok(Comparison {
        horizon,
        n: (n0..=n_max).collect(),
        fp_err: compare_fields(&fpf, &bdf, n0)?,
        lsw_err: compare_fields(&lswf, &bdf, n0)?,
        bd,
        fp,
        lsw,
    })
}

fn fp_vs_bd_vs_lsw(model: &RateModel, s: &FpVsBdVsLsw) -> Result<ResultTable> {
    let c = compare_fp_bd_lsw(model, s)?;
    let mut t = ResultTable::new();
    t.meta("horizon", crate::table::fmt_f64(c.horizon));
    t.meta("n0", s.n0);
    t.push_int("n", c.n.iter().map(|&n| n as i64).collect())?;
    t.push_real("C_bd", c.bd.clone())?;
    t.push_real("C_fp", c.fp.clone())?;
    t.push_real("C_lsw", c.lsw.clone())?;
    for (tag, e) in [("fp", c.fp_err), ("lsw", c.lsw_err)] {
        t.add_summary(&format!("{tag}_l1"), e.l1);
        t.add_summary(&format!("{tag}_l2"), e.l2);
        t.add_summary(&format!("{tag}_sup"), e.sup);
        t.add_summary(&format!("{tag}_mass_l1"), e.mass_l1);
    }
    let beats = c.fp_err.l1 < c.lsw_err.l1 && c.fp_err.l2 < c.lsw_err.l2 && c.fp_err.sup < c.lsw_err.sup;
    t.add_summary("fp_beats_lsw", flag(beats));
    Ok(t)
}

struct DiffusionRun {
    m: f64,
    sigma: ExtendedSigma,
    solution: DiffusionSolution,
}

fn run_diffusion(model: &RateModel, s: &DiffusionSetup, extra: &[f64]) -> Result<DiffusionRun> {
    let m = match s.m {
        Some(m) => m,
        None => model.minimal_size_m(1.0)?,
    };
    let sigma = ExtendedSigma::new(model, m)?;
    let q_min = s.q_min.unwrap_or(m);
    let mesh = Arc::new(Mesh::uniform(q_min, s.q_max, s.cells)?);
    let init = Field::from_fn(mesh, |q| s.initial.eval(q), 0.0)?;
    let mut scheme = s.scheme.clone();
    scheme.snapshot_times.extend_from_slice(extra);
    let t_end = extra.iter().cloned().fold(s.t, f64::max);
    let solution = solve_diffusion(&sigma, &init, t_end, &scheme)?;
    Ok(DiffusionRun { m, sigma, solution })
}

/// Residual, remainder and ratio probes along `xs` at time `t`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualStudy {
    pub x: Vec<f64>,
    pub r_c: Vec<f64>,
    pub r_n: Vec<f64>,
    pub r_f1: Vec<f64>,
    pub ratio_first: Vec<f64>,
    pub ratio_second: Vec<f64>,
    pub slope_rc: f64,
    pub slope_rn: f64,
    pub slope_rf1: f64,
    pub ratio_first_decreasing: bool,
    pub ratio_second_decreasing: bool,
    pub gamma: f64,
}

fn abs_slope(x: &[f64], y: &[f64]) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(_, v)| **v != 0.0)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if xs.len() < 2 {
        return f64::NAN;
    }
    loglog_slope(&xs, &ys)
}

pub fn residual_study(model: &RateModel, s: &DiffusionResiduals) -> Result<ResidualStudy> {
    let (t, ds) = (s.setup.t, s.snapshot_cadence);
    let run = run_diffusion(model, &s.setup, &[t - ds, t, t + ds])?;
    let map = characteristic_map(model, run.m, s.setup.map_mode)?;
    let xs: Vec<f64> = s.probes.points();
    let (mut r_c, mut r_n, mut r_f1) = (vec![], vec![], vec![]);
    for &x in &xs {
        r_c.push(residual_rc(&map, &run.solution, t, x, ds)?);
        r_n.push(residual_rn(&map, &run.solution, x.round() as usize, t, ds)?);
        r_f1.push(map.remainder_rf1(t, x)?);
    }
    let ratios = hypothesis_ratios(&map, &run.solution, t, &xs)?;
    let sizes: Vec<f64> = xs.iter().map(|x| x.round()).collect();
    Ok(ResidualStudy {
        slope_rc: abs_slope(&xs, &r_c),
        slope_rn: abs_slope(&sizes, &r_n),
        slope_rf1: abs_slope(&xs, &r_f1),
        ratio_first_decreasing: ratios.first_decreasing,
        ratio_second_decreasing: ratios.second_decreasing,
        ratio_first: ratios.first,
        ratio_second: ratios.second,
        gamma: run.sigma.gamma(),
        x: xs,
        r_c,
        r_n,
        r_f1,
    })
}

fn diffusion_residuals(model: &RateModel, s: &DiffusionResiduals) -> Result<ResultTable> {
    let r = residual_study(model, s)?;
    let mut t = ResultTable::new();
    t.meta("time", crate::table::fmt_f64(s.setup.t));
    t.meta("snapshot_cadence", crate::table::fmt_f64(s.snapshot_cadence));
    t.push_real("x", r.x.clone())?;
    t.push_real("r_c", r.r_c.clone())?;
    t.push_real("r_n", r.r_n.clone())?;
    t.push_real("r_f1", r.r_f1.clone())?;
    t.push_real("ratio_first", r.ratio_first.clone())?;
    t.push_real("ratio_second", r.ratio_second.clone())?;
    t.add_summary("gamma", r.gamma);
    t.add_summary("slope_rc", r.slope_rc);
    t.add_summary("slope_rn", r.slope_rn);
    t.add_summary("slope_rf1", r.slope_rf1);
    t.add_summary("ratio_first_decreasing", flag(r.ratio_first_decreasing));
    t.add_summary("ratio_second_decreasing", flag(r.ratio_second_decreasing));
    Ok(t)
}

pub fn decay_fits(model: &RateModel, s: &DecayProbe) -> Result<Vec<crate::continuum::DecayFit>> {
    let run = run_diffusion(model, &s.setup, &[])?;
    let qs = s.probes.points();
    (1..=3)
        .map(|order| derivative_decay_probe(&run.solution, s.setup.t, order, &qs))
        .collect()
}

fn decay_probe(model: &RateModel, s: &DecayProbe) -> Result<ResultTable> {
    let fits = decay_fits(model, s)?;
    let mut t = ResultTable::new();
    t.meta("time", crate::table::fmt_f64(s.setup.t));
    t.push_real("q", fits[0].q.clone())?;
    for f in &fits {
        t.push_real(&format!("d{}", f.order), f.derivative.clone())?;
        t.push_int(&format!("used{}", f.order), f.used.iter().map(|&u| u as i64).collect())?;
    }
    for f in &fits {
        t.add_summary(&format!("slope_{}", f.order), f.slope);
        t.add_summary(&format!("envelope_{}", f.order), f.envelope);
    }
    t.add_summary("gamma", model.gamma);
    Ok(t)
}

/// Monte Carlo versus PDE values at the probe points.
#[derive(Debug, Clone, Serialize)]
pub struct McComparison {
    pub q: Vec<f64>,
    pub mc_mean: Vec<f64>,
    pub mc_stderr: Vec<f64>,
    pub pde: Vec<f64>,
    /// Heat-kernel value when the noise amplitude is constant and the initial
    /// profile Gaussian, `NaN` otherwise.
    pub exact: Vec<f64>,
    pub bound: Vec<f64>,
    pub within: Vec<bool>,
    pub dq: f64,
}

fn closed_form(model: &RateModel, sigma: &ExtendedSigma, init: &InitialSpec, t: f64, q: f64) -> f64 {
    match init {
        InitialSpec::Gaussian {
            center,
            width,
            amplitude,
        } if model.is_power_law() && model.gamma == 0.0 => {
            let v = width * width + sigma.eval_sq(q) * t;
            amplitude * width / v.sqrt() * (-(q - center).powi(2) / (2.0 * v)).exp()
        }
        _ => f64::NAN,
    }
}

pub fn mc_comparison(model: &RateModel, s: &McCrossCheck, seed: u64) -> Result<McComparison> {
    let t = s.setup.t;
    let run = run_diffusion(model, &s.setup, &[])?;
    let field = run.solution.final_field();
    let dq = (field.mesh.last() - field.mesh.first()) / s.setup.cells as f64;
    let cfg = McConfig {
        n_samples: s.n_samples,
        dt_sde: s.dt_sde,
        seed,
        antithetic: s.antithetic,
    };
    let init = s.setup.initial.clone();
    let c0 = move |q: f64| init.eval(q);
    let est = feynman_kac_many(&run.sigma, &c0, t, &s.probes, &cfg)?;
    let allowance = s.allowance * (s.dt_sde + dq * dq);
    let mut out = McComparison {
        q: s.probes.clone(),
        mc_mean: vec![],
        mc_stderr: vec![],
        pde: vec![],
        exact: vec![],
        bound: vec![],
        within: vec![],
        dq,
    };
    for (&q, e) in s.probes.iter().zip(&est) {
        let pde = run.solution.eval(t, q)?;
        let bound = 3.0 * e.stderr + allowance;
        out.mc_mean.push(e.mean);
        out.mc_stderr.push(e.stderr);
        out.pde.push(pde);
        out.exact.push(closed_form(model, &run.sigma, &s.setup.initial, t, q));
        out.within.push((e.mean - pde).abs() <= bound);
        out.bound.push(bound);
    }
    Ok(out)
}

fn mc_cross_check(model: &RateModel, s: &McCrossCheck, seed: u64) -> Result<ResultTable> {
    let c = mc_comparison(model, s, seed)?;
    let mut t = ResultTable::new();
    t.meta("time", crate::table::fmt_f64(s.setup.t));
    t.meta("n_samples", s.n_samples);
    t.meta("dt_sde", crate::table::fmt_f64(s.dt_sde));
    t.push_real("q", c.q.clone())?;
    t.push_real("mc_mean", c.mc_mean.clone())?;
    t.push_real("mc_stderr", c.mc_stderr.clone())?;
    t.push_real("pde", c.pde.clone())?;
    t.push_real("exact", c.exact.clone())?;
    t.push_real("bound", c.bound.clone())?;
    t.push_int("within", c.within.iter().map(|&w| w as i64).collect())?;
    t.add_summary("n_within", c.within.iter().filter(|w| **w).count() as f64);
    t.add_summary("n_probes", c.q.len() as f64);
    t.add_summary("dq", c.dq);
    Ok(t)
}

fn assumption_audit(model: &RateModel, s: &AssumptionAudit, seed: u64) -> Result<ResultTable> {
    let report = check_assumptions(model, s.n_max);
    let m = model.minimal_size_m(s.m)?;
    let sys = BdSystem::new(model, s.n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec<f64>> = (0..s.dissipativity_probes)
        .map(|_| (0..s.n_max).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let diss = sys.dissipativity_report(model.c1, &probes)?;
    let max_probe = diss.probe_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut t = ResultTable::new();
    let ns: Vec<usize> = (1..=s.n_max).collect();
    t.push_int("n", ns.iter().map(|&n| n as i64).collect())?;
    t.push_real("alpha", ns.iter().map(|&n| sys.alpha(n)).collect())?;
    t.push_real("beta", ns.iter().map(|&n| sys.beta_raw(n)).collect())?;
    t.push_real(
        "drift",
        ns.iter()
            .map(|&n| model.drift_f(n as f64))
            .collect::<Result<Vec<_>>>()?,
    )?;
    t.push_real("delta", diss.delta_seq.clone())?;
    t.add_summary("h1_ok", flag(report.h1_ok));
    t.add_summary("growth_ok", flag(report.growth_ok));
    t.add_summary("rates_nonnegative", flag(report.rates_nonnegative));
    t.add_summary("f_positive", flag(report.f_positive));
    t.add_summary("f_increasing", flag(report.f_increasing));
    t.add_summary("all_ok", flag(report.all_ok()));
    t.add_summary("bound_b", report.bound_b);
    t.add_summary("growth_k", report.growth_k);
    t.add_summary("minimal_size_m", m);
    t.add_summary("lambda_b", diss.lambda_b);
    t.add_summary("min_delta", diss.min_delta);
    t.add_summary("delta_lower_bound_ok", flag(diss.lower_bound_ok));
    t.add_summary("max_dissipativity_probe", max_probe);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compare_fields_basics() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let z = compare_fields(&a, &a, 1).unwrap();
        assert_eq!((z.l1, z.l2, z.sup, z.mass_l1), (0.0, 0.0, 0.0, 0.0));
        let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        let e = compare_fields(&a, &b, 2).unwrap();
        assert_eq!(e.l1, 1.5);
        assert_eq!(e.mass_l1, 0.5 * (2.0 + 3.0 + 4.0));
        let r = compare_fields(&a, &b, 4).unwrap();
        assert!(r.l1 <= e.l1 && r.l2 <= e.l2 && r.sup <= e.sup);
        assert!(compare_fields(&a, &b[..3], 1).is_err());
    }

    fn spec(scenario: &str) -> ExperimentSpec {
        ExperimentSpec::from_json(&format!(
            r#"{{"schema_version": 1, "name": "t", "model": {{"kind": "power_law", "alpha0": 0.5, "beta0": 1.5, "gamma": 0.3333333333333333, "c1": 1.0}}, "scenario": {scenario}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn zero_horizon_returns_initial_data() {
        let s = spec(
            r#"{"BdReference": {"n_max": 50, "horizon": 0.0, "initial": {"kind": "gaussian", "center": 10, "width": 2, "amplitude": 1}}}"#,
        );
        let t = run(&s).unwrap();
        assert_eq!(t.real("c_initial").unwrap(), t.real("c_final").unwrap());
        assert_eq!(t.summary_value("mass_drift_rel"), Some(0.0));
        assert_eq!(t.metadata[2].1, spec_hash(&s));
    }

    #[test]
    fn small_fp_comparison() {
        let s = spec(
            r#"{"FpVsBdVsLsw": {"n_max": 400, "n0": 20, "horizon": {"fraction_of_g": 0.3},
                "initial": {"kind": "gaussian", "center": 60, "width": 8, "amplitude": 1},
                "scheme": {"theta": 0.5, "dt": 0.05, "advection": "Central"}}}"#,
        );
        let t = run(&s).unwrap();
        assert_eq!(t.summary_value("fp_beats_lsw"), Some(1.0));
        assert_eq!(t.n_rows(), 381);
    }

    #[test]
    fn audit_and_splitting_run() {
        let s = spec(r#"{"AssumptionAudit": {"n_max": 200, "m": 20, "dissipativity_probes": 20}}"#);
        let t = run(&s).unwrap();
        assert_eq!(t.summary_value("h1_ok"), Some(1.0));
        assert!(t.summary_value("max_dissipativity_probe").unwrap() <= 1e-12);
        let s = spec(
            r#"{"SplittingConvergence": {"n_max": 30, "horizon": 0.5, "dt_list": [0.1, 0.05, 0.025],
                "initial": {"kind": "monomers_only", "c1": 1.0},
                "chi": {"method": "MatrixExponentialOracle"}, "reference": {"rtol": 1e-10, "atol": 1e-14}}}"#,
        );
        let t = run(&s).unwrap();
        let slope = t.summary_value("slope").unwrap();
        assert!((slope - 1.0).abs() < 0.25, "{slope}");
    }

    #[test]
    fn audit_reports_power_law_model() {
        let s =
            spec(r#"{"BdReference": {"n_max": 100, "horizon": 0.0, "initial": {"kind": "monomers_only", "c1": 1.0}}}"#);
        let a = audit(&s).unwrap();
        assert_eq!(a["all_ok"], serde_json::json!(true));
        assert_eq!(a["report"]["n_max"], serde_json::json!(100));
    }

    #[test]
    fn run_to_dir_writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let s =
            spec(r#"{"BdReference": {"n_max": 20, "horizon": 0.1, "initial": {"kind": "monomers_only", "c1": 1.0}}}"#);
        let p = run_to_dir(&s, dir.path()).unwrap();
        let first = std::fs::read(&p).unwrap();
        assert!(dir.path().join("t.csv.walltime").exists());
        let p2 = run_to_dir(&s, dir.path()).unwrap();
        assert_eq!(first, std::fs::read(p2).unwrap());
    }
}
