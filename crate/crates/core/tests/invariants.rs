use pilotwave::constraints::DerivedIntegral;
use pilotwave::dynamics::Recording;
use pilotwave::equilibrium::{compare_distribution, sample_initial, PlaneDensity};
use pilotwave::*;
use proptest::prelude::*;

fn unit_pair() -> impl Strategy<Value = (f64, f64)> {
    // Angles away from a = ±b and from the zero-flux diagonal.
    (0.05f64..0.7).prop_union(0.87..1.5).prop_map(|phi| (phi.cos(), phi.sin()))
}

fn params(a: f64, b: f64, n: i64) -> PlanePairParams {
    validate_plane_params(&PlanePairConfig::new(a, b, 1.0, n)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn validation_is_idempotent((a, b) in unit_pair(), p in 0.2f64..5.0, n in 1i64..20) {
        let v = validate_plane_params(&PlanePairConfig::new(a, b, p, n)).unwrap();
        let again = validate_plane_params(&v.to_config()).unwrap();
        prop_assert_eq!(v, again);
    }

    #[test]
    fn probability_flux_is_constant((a, b) in unit_pair(), d1 in -30.0f64..30.0, d2 in -30.0f64..30.0) {
        let p = params(a, b, 10);
        let flux = |d: f64| prob_density_plane(d, &p).unwrap() * relative_velocity_plane(d, &p).unwrap();
        let (f1, f2) = (flux(d1), flux(d2));
        prop_assert!((f1 - f2).abs() <= 1e-12 * f1.abs().max(1e-300));
    }

    #[test]
    fn particle_velocities_are_opposite((a, b) in unit_pair(), d in -30.0f64..30.0) {
        let p = params(a, b, 10);
        let v = velocity_plane(d, &p).unwrap();
        prop_assert_eq!(v.as_slice()[0], -v.as_slice()[1]);
        prop_assert_eq!(v.as_slice()[0].signum(), (a * a - b * b).signum());
    }

    #[test]
    fn analytic_velocity_matches_phase_gradient((a, b) in unit_pair(), d in -20.0f64..20.0, x in -5.0f64..5.0, t in 0.0f64..3.0) {
        let p = params(a, b, 10);
        let cfg = Configuration::from_relative(d, x, t);
        let phase = |c: &Configuration| phase_plane(c, &p);
        match numeric_velocity(&phase, &cfg, 1e-5, p.constants()) {
            Ok(num) => {
                let exact = velocity_plane(d, &p).unwrap();
                prop_assert!(num.relative_error(&exact) < 1e-6);
            }
            // Stencil straddling the phase branch cut is a reported failure, not a wrong answer.
            Err(EvalError::StencilFailure { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn center_of_mass_is_conserved((a, b) in unit_pair(), d in -20.0f64..20.0, x in -10.0f64..10.0, t1 in 0.5f64..8.0) {
        let p = params(a, b, 10);
        let traj = integrate_trajectory(
            &Configuration::from_relative(d, x, 0.0),
            &PlaneField::periodic(p),
            (0.0, t1),
            &IntegratorSettings::default(),
            &[],
        ).unwrap();
        for s in &traj.samples {
            prop_assert!((s.center_of_mass().unwrap() - x).abs() < 1e-8);
        }
    }

    #[test]
    fn derived_integral_is_conserved((a, b) in unit_pair(), d in -10.0f64..10.0, t1 in 0.5f64..3.0) {
        let p = params(a, b, 10);
        let g = DerivedIntegral::new(&p).unwrap();
        let settings = IntegratorSettings { rel_tol: 1e-11, abs_tol: 1e-13, ..Default::default() };
        let traj = integrate_trajectory(
            &Configuration::from_relative(d, 0.0, 0.0),
            &PlaneField::periodic(p),
            (0.0, t1),
            &settings,
            &[],
        ).unwrap();
        let r = conserved_residual(&traj, |c: &Configuration| g.value(c.delta().unwrap(), c.time()));
        prop_assert!(r < 1e-7, "residual {}", r);
    }

    #[test]
    fn integration_is_reversible((a, b) in unit_pair(), d in -5.0f64..5.0, t1 in 0.5f64..4.0) {
        let p = params(a, b, 10);
        let settings = IntegratorSettings { rel_tol: 1e-11, abs_tol: 1e-13, recording: Recording::Endpoints, ..Default::default() };
        let field = PlaneField::periodic(p);
        let fwd = integrate_trajectory(&Configuration::from_relative(d, 0.0, 0.0), &field, (0.0, t1), &settings, &[]).unwrap();
        let back = integrate_trajectory(fwd.last(), &field, (t1, 0.0), &settings, &[]).unwrap();
        prop_assert!((back.last().delta().unwrap() - d).abs() < 1e-7);
    }

    #[test]
    fn twoslit_mirror_velocities_are_mirrored(x in 0.5f64..5.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
        let ps = validate_twoslit_params(&TwoSlitConfig::default()).unwrap();
        let cfg = Configuration::pair_3d([x, y, z], [x, -y, z], 0.0);
        if let Ok(v) = velocity_twoslit(&cfg, &ps) {
            let v = v.as_slice();
            let scale = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            prop_assert!((v[0] - v[3]).abs() <= 1e-12 * scale);
            prop_assert!((v[1] + v[4]).abs() <= 1e-12 * scale);
            prop_assert!((v[2] - v[5]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn comparison_ranges_hold(seed in any::<u64>(), n in 10usize..400, bins in 8usize..64) {
        let p = params(0.8, 0.6, 3);
        let cmp = compare_distribution(&sample_initial(&p, n, seed), &PlaneDensity::new(p), bins).unwrap();
        prop_assert!((0.0..=2.0).contains(&cmp.l1_distance));
        prop_assert!((0.0..=1.0).contains(&cmp.ks_statistic));
        prop_assert_eq!(cmp.sample_count, n);
    }
}
