//! Values frozen from closed forms and independent hand computations.

use std::f64::consts::{LN_2, PI};

use approx::assert_relative_eq;
use negcurv::green::radial_green;
use negcurv::poisson::certificates::barrier_constants;
use negcurv::poisson::{barrier_check, claim_bound, m0};
use negcurv::ricciflow::{curvature_conformal, curvature_warped, BACKGROUND_CURVATURE};
use negcurv::spectrum::lambda1_lower_bound;
use negcurv::{RadialField, WarpedModel};

fn h2() -> WarpedModel {
    WarpedModel::hyperbolic(2, -1.0)
        .unwrap()
        .certify(20.0)
        .unwrap()
}

#[test]
fn hyperbolic_green_functions() {
    let m = h2();
    for (r, g) in [
        (0.5, 0.223_903_807_5),
        (1.0, 0.122_857_562_7),
        (4.0, 0.005_830_700_98),
    ] {
        assert_relative_eq!(radial_green(&m, r).unwrap(), g, max_relative = 1e-8);
        assert_relative_eq!(
            g,
            (1.0 / (0.5 * r as f64).tanh()).ln() / (2.0 * PI),
            max_relative = 1e-8
        );
    }
    let h3 = WarpedModel::hyperbolic(3, -1.0)
        .unwrap()
        .certify(20.0)
        .unwrap();
    for r in [0.5, 1.0, 3.0] {
        let exact = (1.0 / f64::tanh(r) - 1.0) / (4.0 * PI);
        assert_relative_eq!(radial_green(&h3, r).unwrap(), exact, max_relative = 1e-6);
    }
}

#[test]
fn perturbed_pinching_constants() {
    let m = WarpedModel::perturbed(2, 0.1)
        .unwrap()
        .certify(20.0)
        .unwrap();
    assert_relative_eq!(m.a_sq.unwrap(), 1.6, max_relative = 1e-6);
    assert_relative_eq!(m.b_sq.unwrap(), 0.925_08, max_relative = 1e-4);
    assert_relative_eq!(
        lambda1_lower_bound(&m).unwrap(),
        0.925_08 / 4.0,
        max_relative = 1e-4
    );
}

#[test]
fn claim_bound_value() {
    let l: f64 = 1.0;
    let by_hand = 4.0 * (0.5 * (1.0 + 2.0 * LN_2 / l) + 4.0 / (LN_2 * l));
    assert_relative_eq!(by_hand, 27.855_709_376, max_relative = 1e-9);
    assert_relative_eq!(
        claim_bound(1.0, 0.25, (-1.0f64).exp()),
        by_hand,
        max_relative = 1e-12
    );
}

#[test]
fn first_band_index() {
    // ceil(1 + max(2(B + C0) r + 2 log A, B r + log A)) with A = 8.14, B = 0, C0 = 1.06.
    let expected = [6, 8, 10, 12];
    for (r, m) in expected.iter().enumerate() {
        assert_eq!(m0(8.14, 0.0, 1.06, r as f64), *m);
    }
}

#[test]
fn barrier_on_the_hyperbolic_plane() {
    let (r0, alpha) = barrier_constants(1.0, 1.0);
    assert_eq!((r0, alpha), (4.0, 0.5));
    let radii: Vec<f64> = (1..=2048).map(|i| i as f64 / 32.0).collect();
    for eps in [0.5, 1.0, 2.0] {
        let rep = barrier_check(&h2(), eps, &radii).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn background_scalar_curvature_is_minus_one() {
    let m = WarpedModel::hyperbolic(2, BACKGROUND_CURVATURE).unwrap();
    let w = RadialField {
        r0: 0.0,
        h: 8.0 / 256.0,
        values: vec![0.0; 257],
    };
    let conformal = curvature_conformal(&w, &m).unwrap();
    let warped = curvature_warped(&w, &m).unwrap();
    for (i, r) in conformal.values.iter().enumerate() {
        assert_relative_eq!(*r, -1.0, epsilon = 1e-12);
        // The pole is undefined and the outer node uses one-sided differences.
        if i > 0 && i + 1 < warped.values.len() {
            assert_relative_eq!(warped.values[i], -1.0, epsilon = 1e-4);
        }
    }
}
