use nslab::grid::{GridSpec, ScalarField, SpectralField};
use nslab::pressure::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_trace_free_symmetric_and_homogeneous(x in prop::array::uniform3(-3.0f64..3.0), lam in 0.2f64..5.0) {
        prop_assume!(x.iter().map(|c| c * c).sum::<f64>() > 1e-4);
        let k = kernel_k(x).unwrap();
        let kl = kernel_k(x.map(|c| c * lam)).unwrap();
        let scale = k.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        prop_assert!((k[0][0] + k[1][1] + k[2][2]).abs() <= 1e-14 * scale);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((k[i][j] - k[j][i]).abs() <= 1e-15 * scale);
                prop_assert!((kl[i][j] * lam.powi(3) - k[i][j]).abs() <= 1e-12 * scale);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn global_pressure_solves_poisson(a in -1.0f64..1.0, b in -1.0f64..1.0, k in 1i32..4) {
        let g = GridSpec::periodic_2pi(16);
        let kf = k as f64;
        let v = SpectralField::from_fn(g, |x| [a * (kf * x[1]).sin() + x[2].cos(), b * x[0].sin(), (x[0] + kf * x[1]).cos()]).leray_project();
        let p = global_pressure(&v);
        prop_assert!(poisson_residual(&v, &p) <= 1e-12);
        prop_assert!(p.mean().abs() <= 1e-14);
    }
}

#[test]
fn kernel_on_axis() {
    let k = kernel_k([1.0, 0.0, 0.0]).unwrap();
    let c = 1.0 / (4.0 * std::f64::consts::PI);
    assert!((k[0][0] - 2.0 * c).abs() < 1e-15 && (k[1][1] + c).abs() < 1e-15 && k[0][1] == 0.0);
    assert!(kernel_k([0.0; 3]).is_err());
}

#[test]
fn shear_flow_pressure_is_zero() {
    let g = GridSpec::periodic_2pi(16);
    let v = SpectralField::from_fn(g, |x| [x[1].sin(), 0.0, (2.0 * x[0]).cos()]);
    assert!(global_pressure(&v).max_diff(&ScalarField::zeros(g)) < 1e-14);
}

#[test]
fn exponent_gate() {
    assert!(check_pressure_exponents(2.0, 1.5).is_ok());
    assert!(check_pressure_exponents(2.0, 2.0).is_err());
}
