use std::sync::Arc;

use proptest::prelude::*;

use choquard_core::experiments::concentration_metrics;
use choquard_core::fibering::{fiber_maximize, gaussian};
use choquard_core::functionals::{autonomous_identity_residual, g_elem, h_elem, Problem};
use choquard_core::{
    Config, Field, GridSpec, NonlinSpec, NonlinVariant, PotentialSpec, PotentialVariant, RieszPlan,
};

fn small_grid() -> GridSpec {
    GridSpec::new(3, 12.0, 16).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn elementary_functions_are_nonnegative(t in 1e-3f64..1e3, dim in 3usize..=6, frac in 0.01f64..0.99) {
        let alpha = frac * dim as f64;
        prop_assert!(g_elem(t, dim, alpha) >= -1e-14);
        prop_assert!(h_elem(t, dim, alpha) >= -1e-14);
    }

    #[test]
    fn autonomous_identity_holds(
        a in 1e-3f64..1e2, l2 in 1e-3f64..1e2, d in 1e-3f64..1e2,
        v_inf in 0.1f64..10.0, lambda in 0.5f64..=1.0, t in 0.1f64..10.0,
        dim in 3usize..=5, frac in 0.05f64..0.95,
    ) {
        let (r, s) = autonomous_identity_residual(a, l2, d, v_inf, lambda, t, dim, frac * dim as f64);
        prop_assert!(r.abs() <= 1e-12 * s, "residual {r:e}, scale {s:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn riesz_operator_is_symmetric_and_positive(seed in any::<u64>(), alpha in 0.5f64..2.5) {
        use rand::{Rng, SeedableRng};
        let grid = GridSpec::new(3, 6.0, 8).unwrap();
        let plan = RieszPlan::new(grid, alpha).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || Field::from_values(grid, (0..grid.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let (f, g) = (draw(), draw());
        let fg = plan.convolve(&f).unwrap().dot(&g);
        let gf = plan.convolve(&g).unwrap().dot(&f);
        prop_assert!((fg - gf).abs() <= 1e-12 * fg.abs());
        prop_assert!(plan.convolve(&f).unwrap().dot(&f) > 0.0);
    }

    #[test]
    fn fiber_is_anchored_and_maximized(amp in 0.5f64..4.0, width in 1.0f64..2.5, lambda in 0.5f64..=1.0) {
        let grid = small_grid();
        let plan = Arc::new(RieszPlan::new(grid, 2.0).unwrap());
        let pot = PotentialSpec::new(PotentialVariant::InverseQuadratic { a: 3.0, b: 1.0 }, 3, 2.0).unwrap();
        let nl = NonlinSpec::new(NonlinVariant::Pekar, 3, 2.0).unwrap();
        let p = Problem::new(plan, pot, nl, lambda, 1.0).unwrap();
        let u = gaussian(&grid, amp, width, &[0.0; 3]);
        let fiber = p.fiber(&u).unwrap();
        let (zeta, _) = fiber.eval(1.0).unwrap();
        prop_assert_eq!(zeta, p.breakdown(&u).unwrap().energy());
        let max = fiber_maximize(&fiber).unwrap();
        prop_assert!(max.slope.abs() <= 1e-8 * fiber.scale());
        for t in [0.5 * max.t_star, 0.9 * max.t_star, 1.1 * max.t_star, 2.0 * max.t_star] {
            prop_assert!(fiber.eval(t).unwrap().0 <= max.zeta_star);
        }
    }

    #[test]
    fn centroid_follows_translation(shift in -3.0f64..3.0, width in 0.8f64..1.6) {
        let grid = GridSpec::new(3, 16.0, 32).unwrap();
        let c = concentration_metrics(&gaussian(&grid, 1.0, width, &[shift, 0.0, 0.0])).unwrap();
        prop_assert!((c.centroid[0] - shift).abs() < grid.spacing());
        prop_assert!(c.centroid[1].abs() < 1e-12 && c.centroid[2].abs() < 1e-12);
    }

    #[test]
    fn resolved_config_round_trips(
        length in 8.0f64..32.0, half in 4usize..32, alpha in 0.2f64..2.8,
        a in 1.5f64..5.0, b in 0.1f64..1.0, lambda in 0.5f64..=1.0, variant in 0usize..4,
    ) {
        let points = 2 * half;
        let potential = match variant {
            0 => format!(r#"{{"variant":"constant","Vinf":{a}}}"#),
            1 => format!(r#"{{"variant":"remark14_i","a":{a},"b":{b}}}"#),
            2 => format!(r#"{{"variant":"exponential_well","a":{a},"b":{b}}}"#),
            _ => format!(r#"{{"variant":"remark110","a":{a},"b":{b},"beta":1.5}}"#),
        };
        let text = format!(
            r#"{{"grid":{{"N":3,"L":{length},"n":{points}}},"potential":{potential},
               "nonlinearity":{{"variant":"pekar"}},"alpha":{alpha},"lambda":{lambda}}}"#
        );
        let parsed = Config::from_json(&text);
        prop_assume!(parsed.is_ok(), "variant constraints rejected the parameters");
        let resolved = parsed.unwrap().resolved().unwrap();
        let again = Config::from_json(&resolved.to_json()).unwrap();
        prop_assert_eq!(&again, &resolved);
        prop_assert_eq!(again.resolved().unwrap(), resolved);
    }
}
