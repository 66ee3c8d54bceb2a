use nslab::grid::{GridSpec, SpectralField};
use nslab::localization::*;
use nslab::LabError;

fn opts(h: f64) -> BogovskiiOptions {
    BogovskiiOptions { h: Some(h), ..Default::default() }
}

#[test]
fn constant_field_contract() {
    let c = CutoffSpec::new(0.5, 1.0).unwrap();
    let v = |_: [f64; 3]| [1.0, -0.5, 0.25];
    let mut ratios = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0] {
        let rep = bogovskii_correct(&v, [0.1, 0.2, 0.3], &c, 2.0, &opts(h)).unwrap();
        assert!(rep.div_residual <= 1e-8);
        assert!(rep.core_defect <= 1e-10);
        assert!(rep.support_leak <= 1e-10);
        ratios.push(rep.ratio);
    }
    assert!((ratios[0] / ratios[1] - 1.0).abs() < 0.05, "{ratios:?}");
}

#[test]
fn shear_field_contract() {
    let c = CutoffSpec::new(0.5, 1.0).unwrap();
    let v = |x: [f64; 3]| [x[1].sin(), 0.0, 0.0];
    let rep = bogovskii_correct(&v, [0.3, 0.2, 0.1], &c, 2.0, &opts(1.0 / 32.0)).unwrap();
    assert!(rep.div_residual <= 1e-8);
    assert!(rep.core_defect <= 1e-10);
    assert!(rep.support_leak <= 1e-10);
}

#[test]
fn constant_depends_on_ratio_only() {
    let v = |x: [f64; 3]| [x[1].sin(), x[2].cos(), 0.3];
    let small = bogovskii_correct(&v, [0.0; 3], &CutoffSpec::new(0.5, 1.0).unwrap(), 2.0, &opts(1.0 / 32.0)).unwrap();
    let vs = |x: [f64; 3]| v(x.map(|c| c / 2.0));
    let big = bogovskii_correct(&vs, [0.0; 3], &CutoffSpec::new(1.0, 2.0).unwrap(), 2.0, &opts(1.0 / 16.0)).unwrap();
    assert!((small.ratio / big.ratio - 1.0).abs() < 0.05);
}

#[test]
fn non_solenoidal_input_is_rejected() {
    let c = CutoffSpec::new(0.5, 1.0).unwrap();
    let v = |x: [f64; 3]| x;
    assert!(matches!(bogovskii_correct(&v, [0.0; 3], &c, 2.0, &opts(1.0 / 16.0)), Err(LabError::CompatibilityViolation(_))));
}

#[test]
fn newtonian_correction_contract() {
    let g = GridSpec::periodic_2pi(64);
    let c = CutoffSpec::new(1.0, 4.0).unwrap();
    let x0 = [3.0, 3.0, 3.0];
    let zero = newtonian_correction(&SpectralField::zeros(g), x0, &c).unwrap();
    assert_eq!(zero.grad_eta.max_coeff(), 0.0);
    let swirl = SpectralField::from_fn(g, |x| {
        let d = [x[0] - x0[0], x[1] - x0[1]];
        let w = (-(d[0] * d[0] + d[1] * d[1]) * 2.0).exp();
        [-d[1] * w, d[0] * w, 0.0]
    });
    let rep = newtonian_correction(&swirl, x0, &c).unwrap();
    assert!(rep.grad_eta.max_coeff() < 1e-12);
    let u = SpectralField::from_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
    let rep = newtonian_correction(&u, x0, &c).unwrap();
    assert!(rep.div_residual <= 1e-8, "{:e}", rep.div_residual);
    assert!(rep.core_correction.is_finite() && rep.div_residual_spectral.is_finite());
}
