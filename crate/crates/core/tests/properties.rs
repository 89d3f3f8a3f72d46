use proptest::prelude::*;

use qdd_core::multi_sensor::{
    evaluate, evaluate_numeric, fc_density_independent, fc_density_joint, ChannelModel, CorrelatedChannel, SensorSpec,
    SystemSpec,
};
use qdd_core::numerics::{
    integrate_2d, normal_mass, q_function, Component2D, Covariance2D, Grid2D, Mixture2D,
};
use qdd_core::one_sensor::{binary_report_pe, lemma2_regime, one_sensor_pe, RegimeKind};
use qdd_core::optimizer::power_residual;
use qdd_core::sensor::{
    m0_limit, sensor_rates, solve_m1_under_power, udd_energy, Prior, RatePair, RootSign, SensingModel, SensorRule,
};

fn sensing(mu: f64, sigma_s: f64) -> SensingModel {
    SensingModel::new(mu, sigma_s).unwrap()
}

/// Error of "decide H1 iff the received value falls on `m1`'s side of `tz`".
fn pe_at_threshold(r: &RatePair, m0: f64, m1: f64, p: &Prior, sigma_c: f64, tz: f64) -> f64 {
    let up = |m: f64| q_function((tz - m) / sigma_c);
    let down = |m: f64| q_function((m - tz) / sigma_c);
    let (h1_0, h1_1, h0_0, h0_1) = if m1 > m0 {
        (up(m0), up(m1), down(m0), down(m1))
    } else {
        (down(m0), down(m1), up(m0), up(m1))
    };
    p.pi0() * ((1.0 - r.pf) * h1_0 + r.pf * h1_1) + p.pi1() * ((1.0 - r.pd) * h0_0 + r.pd * h0_1)
}

fn rule_strategy() -> impl Strategy<Value = (f64, f64, f64, f64, f64, bool)> {
    // (pi1, sigma_s, t, m0 fraction of its box, sigma_c, root sign)
    (0.05..0.95f64, 0.2..3.0f64, -3.0..3.0f64, -0.99..0.99f64, 0.1..5.0f64, any::<bool>())
}

fn feasible_rule(pi1: f64, sigma_s: f64, t: f64, frac: f64, positive: bool) -> (Prior, SensingModel, SensorRule) {
    let (p, s) = (Prior::new(pi1).unwrap(), sensing(1.0, sigma_s));
    // An unbounded box (p_m0 = 0) is capped the way the optimizer caps it.
    let m0 = frac * m0_limit(t, &s, &p).min(4.0 * udd_energy(&s).sqrt());
    let sign = if positive { RootSign::Positive } else { RootSign::Negative };
    let m1 = solve_m1_under_power(m0, t, &s, &p, sign).unwrap();
    (p, s, SensorRule::new(t, m0, m1).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn q_symmetry(u in -40.0..40.0f64) {
        prop_assert!((q_function(u) + q_function(-u) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn q_decreasing(u in -10.0..10.0f64, d in 0.0..5.0f64) {
        prop_assert!(q_function(u + d) <= q_function(u));
    }

    #[test]
    fn normal_mass_additive(a in -6.0..6.0f64, b in 0.0..4.0f64, c in 0.0..4.0f64, m in -2.0..2.0f64, s in 0.1..3.0f64) {
        let whole = normal_mass(a, a + b + c, m, s);
        let parts = normal_mass(a, a + b, m, s) + normal_mass(a + b, a + b + c, m, s);
        prop_assert!((0.0..=1.0).contains(&whole));
        prop_assert!((whole - parts).abs() <= 1e-12);
    }

    #[test]
    fn rho_zero_density_factorizes(
        m in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 1..4),
        s1 in 0.2..2.0f64, s2 in 0.2..2.0f64, z1 in -4.0..4.0f64, z2 in -4.0..4.0f64,
    ) {
        // Product of two one-dimensional mixtures, written as a 2-D mixture.
        let w = 1.0 / (m.len() * m.len()) as f64;
        let comps = m.iter().flat_map(|a| m.iter().map(move |b| Component2D { weight: w, mean1: a.0, mean2: b.1 })).collect();
        let joint = Mixture2D::new(comps, Covariance2D::new(s1, s2, 0.0).unwrap()).unwrap();
        let prod = joint.marginal1().pdf(z1) * joint.marginal2().pdf(z2);
        prop_assert!((joint.pdf(z1, z2) - prod).abs() <= 1e-12 * prod.max(1e-300) + 1e-300);
    }

    #[test]
    fn sensor_rates_ordered_and_monotone(mu in 0.1..3.0f64, ss in 0.1..3.0f64, t in -5.0..5.0f64, d in 0.0..2.0f64) {
        let s = sensing(mu, ss);
        let (r, r2) = (sensor_rates(t, &s), sensor_rates(t + d, &s));
        prop_assert!(r.pd >= r.pf);
        prop_assert!(r2.pd <= r.pd && r2.pf <= r.pf);
        prop_assert!(s.log_likelihood_ratio(t + d) >= s.log_likelihood_ratio(t));
    }

    #[test]
    fn pe_bounded_by_prior_only_error((pi1, ss, t, frac, sc, pos) in rule_strategy()) {
        let (p, s, rule) = feasible_rule(pi1, ss, t, frac, pos);
        if rule.m0() != rule.m1() {
            let pe = one_sensor_pe(&rule, &p, &s, sc).unwrap().pe;
            prop_assert!(pe <= p.prior_only_error() + 1e-12);
        }
    }

    #[test]
    fn pe_nondecreasing_in_channel_noise((pi1, ss, t, frac, sc, pos) in rule_strategy(), k in 1.0..3.0f64) {
        let (p, s, rule) = feasible_rule(pi1, ss, t, frac, pos);
        if rule.m0() != rule.m1() {
            let a = one_sensor_pe(&rule, &p, &s, sc).unwrap().pe;
            let b = one_sensor_pe(&rule, &p, &s, sc * k).unwrap().pe;
            prop_assert!(a <= b + 1e-12, "{a} > {b}");
        }
    }

    #[test]
    fn fc_threshold_is_locally_optimal((pi1, ss, t, frac, sc, pos) in rule_strategy(), d in -0.5..0.5f64) {
        let (p, s, rule) = feasible_rule(pi1, ss, t, frac, pos);
        prop_assume!(rule.m0() != rule.m1());
        let r = sensor_rates(t, &s);
        let e = one_sensor_pe(&rule, &p, &s, sc).unwrap();
        if e.regime.kind == RegimeKind::Threshold {
            let tz = e.regime.t_z.unwrap();
            prop_assert!((pe_at_threshold(&r, rule.m0(), rule.m1(), &p, sc, tz) - e.pe).abs() <= 1e-12);
            let moved = pe_at_threshold(&r, rule.m0(), rule.m1(), &p, sc, tz + d);
            prop_assert!(moved >= e.pe - 1e-12, "moving t_z by {d} improved pe from {} to {moved}", e.pe);
        }
    }

    #[test]
    fn constant_regimes_return_prior_errors(pf in 0.0..1.0f64, gap in 0.0..1.0f64, pi1 in 0.05..0.95f64, sc in 0.1..4.0f64) {
        let pd = pf + gap * (1.0 - pf);
        prop_assume!(pd > pf);
        let (r, p) = (RatePair::new(pf, pd).unwrap(), Prior::new(pi1).unwrap());
        let e = binary_report_pe(&r, -1.0, 1.0, &p, sc).unwrap();
        match lemma2_regime(&r, p.eta()).unwrap().kind {
            RegimeKind::AlwaysH0 => prop_assert_eq!(e.pe, p.pi1()),
            RegimeKind::AlwaysH1 => prop_assert_eq!(e.pe, p.pi0()),
            RegimeKind::Threshold => prop_assert!(e.pe <= p.prior_only_error() + 1e-12),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn solved_levels_meet_the_power_budget((pi1, ss, t, frac, _sc, pos) in rule_strategy()) {
        let (p, s, rule) = feasible_rule(pi1, ss, t, frac, pos);
        prop_assert!(power_residual(&rule, &s, &p) <= 1e-9);
    }
}

fn two_sensor_spec(pi1: f64, ss: f64, a: (f64, f64, f64), b: (f64, f64, f64), sc: (f64, f64)) -> SystemSpec {
    let (p, s) = (Prior::new(pi1).unwrap(), sensing(1.0, ss));
    let rule = |(t, frac, sign): (f64, f64, f64)| {
        let m0 = frac * m0_limit(t, &s, &p).min(4.0 * udd_energy(&s).sqrt());
        let root = if sign > 0.0 { RootSign::Positive } else { RootSign::Negative };
        SensorRule::new(t, m0, solve_m1_under_power(m0, t, &s, &p, root).unwrap()).unwrap()
    };
    SystemSpec::new(
        p,
        vec![SensorSpec::quantized(s, rule(a)), SensorSpec::quantized(s, rule(b))],
        ChannelModel::Independent(vec![sc.0, sc.1]),
    )
    .unwrap()
}

fn level() -> impl Strategy<Value = (f64, f64, f64)> {
    (-2.0..2.0f64, -0.9..0.9f64, prop_oneof![Just(1.0), Just(-1.0)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn two_sensor_routes_agree(pi1 in 0.1..0.9f64, ss in 0.3..2.5f64, a in level(), b in level(), s1 in 0.2..3.0f64, s2 in 0.2..3.0f64) {
        let spec = two_sensor_spec(pi1, ss, a, b, (s1, s2));
        let analytic = evaluate(&spec, Grid2D::DEFAULT_POINTS).unwrap();
        let grid = evaluate_numeric(&spec, Grid2D::DEFAULT_POINTS, 1e-10).unwrap();
        prop_assert!((analytic - grid).abs() <= 1e-6, "{analytic} vs {grid}");
        prop_assert!(analytic <= spec.prior.prior_only_error() + 1e-6);
    }

    #[test]
    fn second_sensor_never_hurts(pi1 in 0.1..0.9f64, ss in 0.3..2.5f64, a in level(), b in level(), s1 in 0.2..3.0f64, s2 in 0.2..3.0f64) {
        let spec = two_sensor_spec(pi1, ss, a, b, (s1, s2));
        let one = SystemSpec::new(spec.prior, vec![spec.sensors[0]], ChannelModel::iid(s1, 1)).unwrap();
        let (pe2, pe1) = (evaluate(&spec, 801).unwrap(), evaluate(&one, 801).unwrap());
        prop_assert!(pe2 <= pe1 + 1e-6, "{pe2} > {pe1}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rho_zero_channel_is_the_product(pi1 in 0.1..0.9f64, ss in 0.3..2.5f64, a in level(), b in level(), sc in 0.2..3.0f64, z1 in -4.0..4.0f64, z2 in -4.0..4.0f64) {
        let ind = two_sensor_spec(pi1, ss, a, b, (sc, sc));
        let cor = SystemSpec::new(ind.prior, ind.sensors.clone(), ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(0.0, sc, sc).unwrap())).unwrap();
        let marg = fc_density_independent(&ind).unwrap();
        let (j0, j1) = fc_density_joint(&cor).unwrap();
        let p0 = marg[0].0.pdf(z1) * marg[1].0.pdf(z2);
        let p1 = marg[0].1.pdf(z1) * marg[1].1.pdf(z2);
        prop_assert!((j0.pdf(z1, z2) - p0).abs() <= 1e-12 * p0 + 1e-300);
        prop_assert!((j1.pdf(z1, z2) - p1).abs() <= 1e-12 * p1 + 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn joint_density_integrates_to_one(pi1 in 0.1..0.9f64, ss in 0.3..2.5f64, a in level(), b in level(), sc in 0.2..3.0f64, rho in -0.95..0.95f64) {
        let ind = two_sensor_spec(pi1, ss, a, b, (sc, sc));
        let cor = SystemSpec::new(ind.prior, ind.sensors.clone(), ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(rho, sc, 1.3 * sc).unwrap())).unwrap();
        let (j0, j1) = fc_density_joint(&cor).unwrap();
        for m in [&j0, &j1] {
            let grid = Grid2D::covering(&[m], [801, 801]).unwrap();
            let total = integrate_2d(|x, y| m.pdf(x, y), &grid);
            prop_assert!((total - 1.0).abs() <= 1e-5, "{total}");
        }
    }
}
