//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line.

use std::time::Instant;

use clusterkin::bd::{total_mass, BdSystem};
use clusterkin::characteristics::{CharacteristicMap, MapMode};
use clusterkin::experiments::{compare_fp_bd_lsw, decay_fits, mc_comparison, residual_study, ExperimentSpec, Scenario};
use clusterkin::ode::{integrate_span, BdFull, Method, SolverConfig};
use clusterkin::splitting::{convergence_study, phi_flow, MonomerFlowCoeffs, SplitConfig};
use clusterkin::RateModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const THIRD: f64 = 1.0 / 3.0;

fn desk_model() -> RateModel {
    RateModel::power_law(0.5, 1.5, THIRD, 1.0).unwrap()
}

fn spec(model: &str, scenario: &str) -> (RateModel, ExperimentSpec) {
    let s = ExperimentSpec::from_json(&format!(
        r#"{{"schema_version": 1, "name": "acceptance", "seed": 1, "model": {model}, "scenario": {scenario}}}"#
    ))
    .unwrap();
    (s.model.build().unwrap(), s)
}

fn power_law_json(gamma: f64, alpha0: f64, beta0: f64) -> String {
    format!(r#"{{"kind": "power_law", "alpha0": {alpha0}, "beta0": {beta0}, "gamma": {gamma:.17}, "c1": 1.0}}"#)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mass_conservation() -> Outcome {
    let n_max = 2000;
    let sys = BdSystem::new(&desk_model(), n_max).unwrap();
    let mut c0 = vec![0.0; n_max];
    c0[0] = 1.0;
    let cfg = SolverConfig {
        rtol: 1e-10,
        atol: 1e-16,
        ..SolverConfig::default()
    };
    let c = integrate_span(&BdFull(&sys), &c0, 0.0, 20.0, &cfg)
        .unwrap()
        .last()
        .to_vec();
    let q0 = total_mass(&c0);
    let drift = (total_mass(&c) - q0).abs() / q0;
    let tail: f64 = c
        .iter()
        .enumerate()
        .skip(n_max / 2)
        .map(|(i, v)| (i + 1) as f64 * v)
        .sum();
    outcome(
        drift <= 1e-8 && tail < 1e-10 * q0,
        format!("t = 20, relative drift {drift:.2e}, tail mass {tail:.2e}"),
    )
}

fn splitting_order() -> Outcome {
    let sys = BdSystem::new(&desk_model(), 60).unwrap();
    let mut u0 = vec![0.0; 60];
    u0[0] = 1.0;
    let dts: Vec<f64> = (0..6).map(|k| 2.5e-3 / 2f64.powi(k)).collect();
    let split = SplitConfig {
        chi: SolverConfig {
            method: Method::MatrixExponentialOracle,
            ..SolverConfig::default()
        },
        split_index: 1,
    };
    let reference = SolverConfig {
        rtol: 1e-12,
        atol: 1e-16,
        ..SolverConfig::default()
    };
    let study = convergence_study(&sys, &u0, 0.25, &dts, &split, &reference).unwrap();
    let finest = *study.err_rel_sup.last().unwrap();
    outcome(
        (0.8..=1.2).contains(&study.slope) && finest < 1e-4,
        format!("slope {:.3}, finest relative sup error {finest:.2e}", study.slope),
    )
}

/// Dormand-Prince 5(4) for `u' = -a u^2 - b u + c`.
fn dopri(a: f64, b: f64, c: f64, u0: f64, t_end: f64) -> f64 {
    let f = |u: f64| -a * u * u - b * u + c;
    let (mut t, mut u, mut h) = (0.0, u0, 1e-4 * t_end);
    while t < t_end {
        h = h.min(t_end - t);
        let k1 = f(u);
        let k2 = f(u + h * (k1 / 5.0));
        let k3 = f(u + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
        let k4 = f(u + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
        let k5 =
            f(u + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4));
        let k6 = f(u + h
            * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4
                - 5103.0 / 18656.0 * k5));
        let u5 = u + h
            * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
        let k7 = f(u5);
        let u4 = u + h
            * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4 - 92097.0 / 339200.0 * k5
                + 187.0 / 2100.0 * k6
                + k7 / 40.0);
        let err = (u5 - u4).abs() / (1e-14 * u5.abs().max(u.abs()) + 1e-300);
        if err <= 1.0 {
            t += h;
            u = u5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    u
}

fn phi_flow_exact() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_oracle, mut worst_semigroup) = (0f64, 0f64);
    for i in 0..100 {
        let a = rng.random_range(0.1..5.0);
        let b = rng.random_range(0.0..5.0);
        let c = if i % 10 == 0 { 0.0 } else { rng.random_range(0.0..5.0) };
        let u0 = rng.random_range(0.0..5.0);
        let t = rng.random_range(0.01..3.0);
        let k = MonomerFlowCoeffs::from_abc(a, b, c).unwrap();
        let exact = phi_flow(&k, u0, t);
        let oracle = dopri(a, b, c, u0, t);
        worst_oracle = worst_oracle.max((exact - oracle).abs() / oracle.abs().max(1e-300));
        let s = rng.random_range(0.0..t);
        let composed = phi_flow(&k, phi_flow(&k, u0, s), t - s);
        worst_semigroup = worst_semigroup.max((composed - exact).abs() / exact.abs().max(1e-300));
    }
    outcome(
        worst_oracle <= 1e-10 && worst_semigroup <= 1e-12,
        format!("oracle {worst_oracle:.2e}, semigroup {worst_semigroup:.2e}"),
    )
}

fn dissipativity() -> Outcome {
    let n_max = 10_000;
    let model = desk_model();
    let sys = BdSystem::new(&model, n_max).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let probes: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..n_max).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let r = sys.dissipativity_report(model.c1, &probes).unwrap();
    let max_probe = r.probe_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        max_probe <= 1e-12 && r.lower_bound_ok,
        format!("max probe {max_probe:.3e}, delta lower bound {}", r.lower_bound_ok),
    )
}

fn characteristics() -> Outcome {
    let model = desk_model();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 20.0;
    let mut worst = [0f64; 2];
    for (slot, mode) in [MapMode::AnalyticPowerLaw, MapMode::Numeric].into_iter().enumerate() {
        let map = CharacteristicMap::new(&model, m, mode).unwrap();
        for _ in 0..1000 {
            let x = m * (rng.random_range(0.0..1.0) * (1e4f64 / m).ln()).exp();
            let t = rng.random_range(0.0..1.0) * map.g(x).unwrap();
            let back = map.x_map(t, map.q_map(t, x).unwrap()).unwrap();
            worst[slot] = worst[slot].max((back - x).abs() / x);
        }
    }
    let unit = RateModel::power_law(0.0, 1.0, 0.5, 1.0).unwrap();
    let map = CharacteristicMap::new(&unit, 1.0, MapMode::AnalyticPowerLaw).unwrap();
    let (q, x) = (map.q_map(2.0, 4.0).unwrap(), map.x_map(2.0, 1.0).unwrap());
    outcome(
        worst[0] <= 1e-10 && worst[1] <= 1e-6 && (q - 1.0).abs() <= 1e-12 && (x - 4.0).abs() <= 1e-12,
        format!(
            "round trip analytic {:.2e}, numeric {:.2e}, Q(2,4) = {q}, X(2,1) = {x}",
            worst[0], worst[1]
        ),
    )
}

fn residual_spec(gamma: f64) -> (RateModel, clusterkin::experiments::DiffusionResiduals) {
    let (model, s) = spec(
        &power_law_json(gamma, 0.5, 1.5),
        r#"{"DiffusionResiduals": {
            "setup": {"m": 20, "q_min": 1, "q_max": 30000, "cells": 100000, "t": 2.0,
                      "initial": {"kind": "exponential", "scale": 2000, "amplitude": 1},
                      "scheme": {"theta": 0.5, "dt": 0.01, "left": "HoldInitial", "right": "HoldInitial"}},
            "snapshot_cadence": 0.05,
            "probes": {"lo": 100, "hi": 10000, "count": 12}}}"#,
    );
    match s.scenario {
        Scenario::DiffusionResiduals(r) => (model, r),
        _ => unreachable!(),
    }
}

fn remainders() -> (Outcome, Outcome) {
    let (mut ok6, mut ok10) = (true, true);
    let (mut d6, mut d10) = (vec![], vec![]);
    for gamma in [THIRD, 0.5] {
        let (model, s) = residual_spec(gamma);
        let r = residual_study(&model, &s).unwrap();
        ok6 &=
            r.slope_rc <= gamma - 1.0 + 0.15 && r.slope_rn <= -gamma / 2.0 + 0.15 && r.slope_rf1 <= gamma - 1.0 + 0.1;
        ok10 &= r.ratio_first_decreasing && r.ratio_second_decreasing;
        d6.push(format!(
            "gamma {gamma:.3}: R_C {:.2}, R_n {:.2}, R_F1 {:.2}",
            r.slope_rc, r.slope_rn, r.slope_rf1
        ));
        d10.push(format!(
            "gamma {gamma:.3}: first {}, second {}",
            r.ratio_first_decreasing, r.ratio_second_decreasing
        ));
    }
    (outcome(ok6, d6.join("; ")), outcome(ok10, d10.join("; ")))
}

fn derivative_decay() -> Outcome {
    let (model, s) = spec(
        &power_law_json(0.5, 0.5, 1.5),
        r#"{"DecayProbe": {
            "setup": {"m": 20, "q_min": 1, "q_max": 30000, "cells": 100000, "t": 2.0,
                      "initial": {"kind": "gaussian", "center": 0, "width": 600, "amplitude": 1},
                      "scheme": {"theta": 0.5, "dt": 0.01, "left": "HoldInitial", "right": "HoldInitial"}},
            "probes": {"lo": 100, "hi": 10000, "count": 12}}}"#,
    );
    let Scenario::DecayProbe(d) = &s.scenario else {
        unreachable!()
    };
    let fits = decay_fits(&model, d).unwrap();
    let pass = fits.iter().all(|f| f.slope <= -(f.order as f64) * 0.25 + 0.2);
    let detail: Vec<String> = fits
        .iter()
        .map(|f| {
            format!(
                "n={} slope {:.2} ({} pts)",
                f.order,
                f.slope,
                f.used.iter().filter(|u| **u).count()
            )
        })
        .collect();
    outcome(pass, detail.join(", "))
}

fn monte_carlo() -> Outcome {
    let (model, s) = spec(
        &power_law_json(0.0, 0.5, 0.5),
        r#"{"McCrossCheck": {
            "setup": {"m": 1, "q_min": -30, "q_max": 30, "cells": 6000, "t": 1.0,
                      "initial": {"kind": "gaussian", "center": 0, "width": 1, "amplitude": 1},
                      "scheme": {"theta": 0.5, "dt": 0.001}},
            "n_samples": 1000000, "dt_sde": 0.001, "antithetic": true,
            "probes": [-3.0, -2.7, -2.4, -2.1, -1.8, -1.5, -1.2, -0.9, -0.6, -0.3,
                       0.15, 0.45, 0.75, 1.05, 1.35, 1.65, 1.95, 2.25, 2.55, 2.85]}}"#,
    );
    let Scenario::McCrossCheck(mc) = &s.scenario else {
        unreachable!()
    };
    let c = mc_comparison(&model, mc, s.seed).unwrap();
    let t = mc.setup.t;
    let mut closed_ok = true;
    let mut worst_z = 0f64;
    for (i, &q) in c.q.iter().enumerate() {
        let exact = (1.0 + t).powf(-0.5) * (-q * q / (2.0 * (1.0 + t))).exp();
        let z = (c.mc_mean[i] - exact).abs() / c.mc_stderr[i];
        worst_z = worst_z.max(z);
        closed_ok &= z <= 3.0;
    }
    let within = c.within.iter().filter(|w| **w).count();
    outcome(
        within == c.q.len() && closed_ok,
        format!(
            "{within}/{} probes within bound, worst closed-form deviation {worst_z:.2} stderr",
            c.q.len()
        ),
    )
}

fn fp_beats_lsw() -> Outcome {
    let (model, s) = spec(
        &power_law_json(THIRD, 0.5, 1.5),
        r#"{"FpVsBdVsLsw": {
            "n_max": 4000, "n0": 20, "horizon": {"fraction_of_g": 0.5},
            "initial": {"kind": "gaussian", "center": 100, "width": 15, "amplitude": 1},
            "cells_per_unit": 1,
            "scheme": {"theta": 0.5, "dt": 0.05, "advection": "Central"},
            "bd_solver": {"method": "ImplicitAdaptive", "rtol": 1e-8, "atol": 1e-14}}}"#,
    );
    let Scenario::FpVsBdVsLsw(f) = &s.scenario else {
        unreachable!()
    };
    let c = compare_fp_bd_lsw(&model, f).unwrap();
    let (fp, lsw) = (c.fp_err, c.lsw_err);
    outcome(
        fp.l1 < lsw.l1 && fp.l2 < lsw.l2 && fp.sup < lsw.sup,
        format!(
            "FP L1/L2/sup {:.2e}/{:.2e}/{:.2e}, LSW {:.2e}/{:.2e}/{:.2e}",
            fp.l1, fp.l2, fp.sup, lsw.l1, lsw.l2, lsw.sup
        ),
    )
}

fn timed(id: usize, name: &'static str, f: impl FnOnce() -> Outcome) -> (usize, &'static str, Outcome, f64) {
    let start = Instant::now();
    let o = f();
    (id, name, o, start.elapsed().as_secs_f64())
}

fn main() {
    let mut results = vec![
        timed(1, "mass conservation", mass_conservation),
        timed(2, "splitting order", splitting_order),
        timed(3, "monomer flow closed form", phi_flow_exact),
        timed(4, "dissipativity", dissipativity),
        timed(5, "characteristic identities", characteristics),
    ];
    let start = Instant::now();
    let (r6, r10) = remainders();
    results.push((6, "remainder scalings", r6, start.elapsed().as_secs_f64()));
    results.push((10, "heuristic ratios", r10, 0.0));
    results.push(timed(7, "derivative decay", derivative_decay));
    results.push(timed(8, "Monte Carlo cross-check", monte_carlo));
    results.push(timed(9, "FP beats LSW", fp_beats_lsw));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (id, name, o, secs) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("criterion {id:>2} {tag} {name} [{secs:.1} s]: {}", o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
