use proptest::prelude::*;

use negcurv::green::radial_green;
use negcurv::poisson::{barrier_check, m0};
use negcurv::ricciflow::{flow_step, Bump, RadialStencil, Scheme};
use negcurv::WarpedModel;

fn h2() -> WarpedModel {
    WarpedModel::hyperbolic(2, -1.0)
        .unwrap()
        .certify(20.0)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn radial_green_matches_closed_form(r in 0.05f64..10.0) {
        let exact = (1.0 / (0.5 * r).tanh()).ln() / (2.0 * std::f64::consts::PI);
        let g = radial_green(&h2(), r).unwrap();
        prop_assert!((g - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn planar_green_is_scale_invariant(r in 0.1f64..5.0, kappa in 0.5f64..2.0) {
        let m = WarpedModel::hyperbolic(2, -kappa * kappa).unwrap().certify(20.0).unwrap();
        let g = radial_green(&m, r).unwrap();
        let g1 = radial_green(&h2(), kappa * r).unwrap();
        prop_assert!((g - g1).abs() <= 1e-6 * g1);
    }

    #[test]
    fn radial_green_decreases(r in 0.1f64..6.0, dr in 0.01f64..2.0) {
        let m = WarpedModel::perturbed(2, 0.1).unwrap().certify(20.0).unwrap();
        prop_assert!(radial_green(&m, r).unwrap() > radial_green(&m, r + dr).unwrap());
    }

    #[test]
    fn barrier_holds_on_the_hyperbolic_plane(eps in 0.2f64..3.0) {
        let radii: Vec<f64> = (1..=512).map(|i| i as f64 / 16.0).collect();
        prop_assert!(barrier_check(&h2(), eps, &radii).unwrap().pass);
    }

    #[test]
    fn band_index_grows_with_the_pole_radius(a in 1.5f64..20.0, c0 in 0.5f64..2.0, r in 0.0f64..5.0) {
        prop_assert!(m0(a, 0.0, c0, r + 0.5) >= m0(a, 0.0, c0, r));
    }

    #[test]
    fn background_is_a_fixed_point(frac in 0.1f64..1.0, semi in any::<bool>()) {
        let m = WarpedModel::hyperbolic(2, -0.5).unwrap();
        let stencil = RadialStencil::new(&m, 8.0, 64).unwrap();
        let w = vec![0.0; 65];
        let dt = frac * stencil.explicit_limit(&w);
        let scheme = if semi { Scheme::SemiImplicit } else { Scheme::Explicit };
        let next = flow_step(&w, dt, &stencil, scheme).unwrap();
        prop_assert!(next.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn bump_is_supported_in_its_ball(amp in -1.0f64..1.0, width in 0.5f64..3.0, r in 0.0f64..10.0) {
        let b = Bump { amp, center: 0.0, width };
        let (w, _, _) = b.eval(r);
        if r >= width {
            prop_assert_eq!(w, 0.0);
        } else {
            prop_assert!(w.abs() <= amp.abs() + 1e-15);
        }
    }
}
