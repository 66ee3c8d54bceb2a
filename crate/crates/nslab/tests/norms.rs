use nslab::fields::{presets, Magnitude, Scalar, ScaledVector};
use nslab::geometry::{AnnulusDecomposition, QuadratureSpec};
use nslab::norms::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn ctx() -> NormContext {
    NormContext::analytic(QuadratureSpec::default())
}

#[test]
fn constant_on_ball_closed_form() {
    let f = Scalar(|_: [f64; 3]| 1.7);
    let region = Region::Ball { center: [0.3, 0.0, -1.0], radius: 0.8 };
    for p in [1.0, 2.0, 3.0] {
        let r = lp_norm(&f, &region, p, &ctx()).unwrap();
        let exact = 1.7 * region.measure().powf(1.0 / p);
        assert!((r.value - exact).abs() < 1e-12 * exact, "{p}: {} {exact}", r.value);
    }
    let w = weak_lp_norm(&f, &region, 3.0, &ctx()).unwrap();
    assert!((w.value - 1.7 * region.measure().cbrt()).abs() < 1e-2);
}

#[test]
fn inverse_radius_shells_are_flat() {
    let inv = presets::inverse_radius_field;
    let rep = herz_norm(&Magnitude(&inv), &HerzParams::kp(3.0, HerzFlavor::ShellSup), &AnnulusDecomposition::new(-4, 4).unwrap(), &ctx(), None).unwrap();
    let exact = (4.0 * PI * 2f64.ln()).cbrt();
    assert_eq!(rep.breakdown.len(), 9);
    for e in &rep.breakdown {
        assert!((e.value - exact).abs() < 1e-10, "{}: {}", e.label, e.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // ‖f‖_{L^{p,∞}} ≤ ‖f‖_{L^p} on any quadrature rule
    #[test]
    fn weak_norm_below_strong(a in 0.1f64..3.0, b in -2.0f64..2.0, p in 1.0f64..4.0) {
        let f = Scalar(move |x: [f64; 3]| a * (b * x[0]).sin() + x[1] * x[2]);
        let region = Region::Shell { center: [0.0; 3], inner: 0.5, outer: 1.5 };
        let s = lp_norm(&f, &region, p, &ctx()).unwrap().value;
        let w = weak_lp_norm(&f, &region, p, &ctx()).unwrap().value;
        prop_assert!(w <= s * (1.0 + 1e-12));
    }

    // dyadic rescaling permutes the shells, so K_p is invariant to roundoff
    #[test]
    fn kp_invariant_under_dyadic_scaling(j in -2i32..=2, p in 1.5f64..5.0, w in 0.5f64..2.0) {
        let f = move |x: [f64; 3]| {
            let g = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (w * w)).exp();
            [g, g * x[0], 0.0]
        };
        let decomp = AnnulusDecomposition::new(-12, 12).unwrap();
        let kp = HerzParams::kp(p, HerzFlavor::ShellSup);
        let a = herz_norm(&Magnitude(&f), &kp, &decomp, &ctx(), None).unwrap().value;
        let fs = ScaledVector::new(&f, 2f64.powi(j)).unwrap();
        let b = herz_norm(&Magnitude(&fs), &kp, &decomp, &ctx(), None).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}
