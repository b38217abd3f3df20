use std::sync::Arc;

use clusterkin::bd::{total_mass, BdSystem};
use clusterkin::characteristics::{CharacteristicMap, MapMode};
use clusterkin::continuum::{solve_diffusion, solve_fp, Advection, Boundary, Field, Mesh, SchemeConfig};
use clusterkin::experiments::compare_fields;
use clusterkin::ode::{integrate_span, BdFull, SolverConfig};
use clusterkin::splitting::{phi_flow, MonomerFlowCoeffs};
use clusterkin::table::fmt_f64;
use clusterkin::{ExtendedSigma, RateModel};
use proptest::prelude::*;

fn model(gamma: f64, ratio: f64) -> RateModel {
    RateModel::power_law(0.5, 0.5 * ratio, gamma, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn bd_conserves_mass(
        gamma in 0.0f64..=0.5,
        ratio in 1.2f64..4.0,
        c in prop::collection::vec(0.0f64..1.0, 20),
        t in 0.01f64..2.0,
    ) {
        let sys = BdSystem::new(&model(gamma, ratio), 20).unwrap();
        let cfg = SolverConfig { rtol: 1e-9, atol: 1e-14, ..SolverConfig::default() };
        let out = integrate_span(&BdFull(&sys), &c, 0.0, t, &cfg).unwrap();
        let (m0, m1) = (total_mass(&c), total_mass(out.last()));
        prop_assert!((m1 - m0).abs() <= 1e-9 * m0.max(1e-12));
    }

    #[test]
    fn monomer_flow_semigroup_and_bounds(
        a in 0.1f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0,
        u0 in 0.0f64..5.0, s in 0.0f64..2.0, t in 0.0f64..2.0,
    ) {
        let k = MonomerFlowCoeffs::from_abc(a, b, c).unwrap();
        let whole = phi_flow(&k, u0, s + t);
        let split = phi_flow(&k, phi_flow(&k, u0, s), t);
        prop_assert!((whole - split).abs() <= 1e-11 * whole.abs().max(1e-12));
        prop_assert!(whole >= 0.0);
        let lo = u0.min(k.r_plus);
        let hi = u0.max(k.r_plus);
        prop_assert!(whole >= lo * (1.0 - 1e-12) && whole <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn characteristic_round_trip(gamma in 0.05f64..=0.5, ratio in 1.2f64..5.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let map = CharacteristicMap::new(&model(gamma, ratio), 5.0, MapMode::AnalyticPowerLaw).unwrap();
        let x = 5.0 * (u * 2000f64.ln()).exp();
        let t = v * map.g(x).unwrap();
        let back = map.x_map(t, map.q_map(t, x).unwrap()).unwrap();
        prop_assert!((back - x).abs() <= 1e-10 * x);
    }

    #[test]
    fn dissipativity_probe_nonpositive(gamma in 0.0f64..=0.5, ratio in 1.2f64..4.0, v in prop::collection::vec(-1.0f64..1.0, 50)) {
        let m = model(gamma, ratio);
        let sys = BdSystem::new(&m, 50).unwrap();
        let r = sys.dissipativity_report(m.c1, &[v]).unwrap();
        prop_assert!(r.probe_values[0] <= 1e-12);
    }

    #[test]
    fn fp_conserves_with_boundary_flux(
        center in 30.0f64..60.0,
        width in 3.0f64..10.0,
        theta in prop::sample::select(vec![0.5, 1.0]),
        advection in prop::sample::select(vec![Advection::Upwind, Advection::Central]),
    ) {
        let mesh = Arc::new(Mesh::uniform(10.0, 120.0, 440).unwrap());
        let init = Field::from_fn(mesh, |x| (-(x - center).powi(2) / (2.0 * width * width)).exp(), 0.0).unwrap();
        let cfg = SchemeConfig { theta, dt: 0.02, advection, ..SchemeConfig::default() };
        let sol = solve_fp(&model(1.0 / 3.0, 3.0), &init, 2.0, &cfg).unwrap();
        prop_assert!(sol.conservation_defect(&init).abs() <= 1e-10);
    }

    #[test]
    fn diffusion_maximum_principle(
        gamma in 0.0f64..=0.5,
        values in prop::collection::vec(0.0f64..1.0, 12),
        dt in prop::sample::select(vec![1e-3, 0.1, 5.0]),
    ) {
        let sigma = ExtendedSigma::new(&model(gamma, 3.0), 2.0).unwrap();
        let mesh = Arc::new(Mesh::uniform(1.0, 100.0, 220).unwrap());
        let knots: Vec<f64> = (0..values.len()).map(|i| 1.0 + 99.0 * i as f64 / (values.len() - 1) as f64).collect();
        let interp = clusterkin::util::Pchip::new(knots, values.clone()).unwrap();
        let init = Field::from_fn(mesh, |q| interp.eval(q), 0.0).unwrap();
        let (lo, hi) = init.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let cfg = SchemeConfig { theta: 1.0, dt, left: Boundary::HoldInitial, right: Boundary::HoldInitial, ..SchemeConfig::default() };
        let sol = solve_diffusion(&sigma, &init, 10.0, &cfg).unwrap();
        for v in &sol.final_field().values {
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn compare_fields_restriction(a in prop::collection::vec(-1.0f64..1.0, 40), b in prop::collection::vec(-1.0f64..1.0, 40), n0 in 1usize..15) {
        let full = compare_fields(&a, &b, n0).unwrap();
        let part = compare_fields(&a, &b, 2 * n0).unwrap();
        prop_assert!(part.l1 <= full.l1 && part.l2 <= full.l2 && part.sup <= full.sup && part.mass_l1 <= full.mass_l1);
        let zero = compare_fields(&a, &a, n0).unwrap();
        prop_assert_eq!(zero.l1 + zero.l2 + zero.sup + zero.mass_l1 + zero.mass_sup, 0.0);
    }

    #[test]
    fn float_format_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let back: f64 = fmt_f64(v).parse().unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }
}

#[test]
fn constant_shift_norms() {
    let a = vec![1.0; 10];
    let b: Vec<f64> = a.iter().map(|v| v + 0.25).collect();
    let e = compare_fields(&a, &b, 4).unwrap();
    assert_eq!(e.l1, 7.0 * 0.25);
    assert_eq!(e.sup, 0.25);
}
