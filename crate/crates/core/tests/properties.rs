use boundstate_lab::functionals::{aux_from_state, connection_residual};
use boundstate_lab::ladder::{classify, node_count_of_alpha};
use boundstate_lab::{count_nodes, detect_events, integrate, FieldParams, IntegratorControls, ProblemParams, StopPolicy};
use proptest::prelude::*;

fn field() -> impl Strategy<Value = FieldParams> {
    prop_oneof![Just((3u32, 3.0)), Just((3, 1.5)), Just((4, 2.0)), Just((5, 1.3))]
        .prop_map(|(n, p)| FieldParams::new(n, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_never_increases(fp in field(), alpha in 0.2f64..30.0) {
        let c = IntegratorControls { r_max: 20.0, ..Default::default() };
        let t = integrate(&ProblemParams::new(fp, alpha).with_controls(c), StopPolicy::full_range()).unwrap();
        for w in t.samples.windows(2) {
            let (e0, e1) = (t.energy_at(&w[0]), t.energy_at(&w[1]));
            prop_assert!(e1 <= e0 + 1e-9 * e0.abs().max(1.0));
        }
    }

    #[test]
    fn node_count_is_nondecreasing(fp in field(), a in 1.5f64..25.0, d in 0.01f64..5.0) {
        let c = IntegratorControls::default();
        let (lo, hi) = (node_count_of_alpha(&fp, a, &c).unwrap(), node_count_of_alpha(&fp, a + d, &c).unwrap());
        if lo.is_final && hi.is_final {
            prop_assert!(hi.count >= lo.count);
        }
    }

    #[test]
    fn zeros_and_critical_points_interlace(fp in field(), alpha in 2.0f64..40.0) {
        let c = IntegratorControls { r_max: 30.0, ..Default::default() };
        let t = integrate(&ProblemParams::new(fp, alpha).with_controls(c), StopPolicy::classify()).unwrap();
        let pp = detect_events(&t).unwrap();
        for (i, w) in pp.zeros_u.windows(2).enumerate() {
            prop_assert!(w[0] < pp.crits_u[i] && pp.crits_u[i] < w[1]);
        }
        for (c, u) in pp.crits_u.iter().zip(&pp.crit_values) {
            prop_assert!(u.abs() > pp.alpha_lower, "critical value {u} at {c} below the lower threshold");
        }
    }

    #[test]
    fn connection_identity_holds_pointwise(fp in field(), alpha in 1.6f64..20.0, frac in 0.05f64..0.95) {
        let c = IntegratorControls { r_max: 10.0, ..Default::default() };
        let t = integrate(&ProblemParams::new(fp, alpha).with_controls(c), StopPolicy::full_range()).unwrap();
        let s = t.eval(t.r_start() + frac * (t.r_stop() - t.r_start())).unwrap();
        if let Some(res) = connection_residual(&fp, &s) {
            prop_assert!(res < 1e-9, "{res}");
        }
    }

    #[test]
    fn pohozaev_quantities_positive_before_first_zero(fp in field(), alpha in 2.0f64..30.0) {
        let c = IntegratorControls { r_max: 30.0, ..Default::default() };
        let t = integrate(&ProblemParams::new(fp, alpha).with_controls(c), StopPolicy::classify()).unwrap();
        let pp = detect_events(&t).unwrap();
        if let Some(&z1) = pp.zeros_u.first() {
            let r0 = boundstate_lab::functionals::inner_probe_radius(&fp, alpha);
            for s in t.samples.iter().filter(|s| s.r > r0 && s.r <= z1) {
                let a = aux_from_state(&fp, s);
                prop_assert!(a.e > 0.0 && a.p > 0.0 && a.q > 0.0 && a.m > 0.0, "at r = {}", s.r);
            }
        }
    }

    #[test]
    fn classification_agrees_with_node_count(fp in field(), alpha in 0.2f64..25.0) {
        let pp = ProblemParams::new(fp, alpha);
        let class = classify(&pp).unwrap();
        let t = integrate(&pp, StopPolicy::energy_only()).unwrap();
        if let Ok(n) = count_nodes(&t) {
            prop_assert_eq!(class.node_count(), n);
        }
    }
}
