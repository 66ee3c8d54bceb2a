use nslab::grid::{GridSpec, SpectralField};
use nslab::semigroup::*;
use nslab::LabError;
use proptest::prelude::*;

#[test]
fn phi0_of_constant_forcing_is_exact() {
    let g = GridSpec::periodic_2pi(16);
    let k = 2.0;
    let f = SpectralField::from_fn(g, |x| [0.0, 0.0, (k * x[1]).sin()]);
    let times = time_mesh(0.5, 8);
    let series: Vec<SpectralField> = times.iter().map(|_| f.clone()).collect();
    let t = 0.37;
    let r = phi0(&times, &series, t).unwrap();
    let want = f.scaled((1.0 - (-k * k * t).exp()) / (k * k));
    assert!(r.field.max_diff(&want) < 1e-15);
    assert!(r.quad_error < 1e-15);
    assert!(matches!(phi0(&times[..3], &series[..3], 0.1), Err(LabError::MeshTooCoarse(3))));
}

#[test]
fn kato_on_zero_data_and_gate() {
    let g = GridSpec::periodic_2pi(8);
    let z = kato_picard(&SpectralField::zeros(g), 0.5, &PicardOptions { steps: 8, ..Default::default() }).unwrap();
    assert!(z.state.converged && z.sup_sqrt_t_linf == 0.0);
    let big = SpectralField::from_fn(g, |x| [0.0, 10.0 * x[0].sin(), 0.0]);
    assert!(matches!(kato_picard(&big, 0.5, &PicardOptions::default()), Err(LabError::GateViolation(_))));
}

#[test]
fn picard_table_columns() {
    let g = GridSpec::periodic_2pi(8);
    let v = SpectralField::from_fn(g, |x| [0.0, 1e-3 * x[0].sin() * x[2].cos(), 1e-3 * x[1].cos()]).leray_project();
    let k = kato_picard(&v, 0.5, &PicardOptions { steps: 16, ..Default::default() }).unwrap();
    assert!(k.state.converged);
    assert!(k.state.to_csv(false).lines().next().unwrap() == "k,diff_norm,ratio");
    assert_eq!(k.state.to_csv(true).lines().count(), k.state.rows.len() + 1);
}

#[test]
fn perturbed_horizon_gate() {
    let g = GridSpec::periodic_2pi(8);
    let w0 = SpectralField::from_fn(g, |x| [0.0, x[0].sin(), 0.0]);
    let inp = PerturbedInputs { a: None, xi: [0.5, 0.0, 0.0], f0: None, big_f: None };
    let opts = PicardOptions { steps: 8, horizon: 0.5, ..Default::default() };
    assert!(matches!(perturbed_stokes_picard(&w0, &inp, 1.0, &opts), Err(LabError::GateViolation(_))));
    let far = PerturbedInputs { xi: [2.0, 0.0, 0.0], ..inp };
    assert!(matches!(perturbed_stokes_picard(&w0, &far, 0.1, &opts), Err(LabError::GateViolation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oseen_gradient_is_parabolically_homogeneous(x in prop::array::uniform3(-4.0f64..4.0), t in 0.01f64..4.0, lam in 0.3f64..3.0) {
        prop_assume!(x.iter().map(|c| c * c).sum::<f64>() > 1e-3);
        let a = oseen_gradient(x, t).unwrap();
        let b = oseen_gradient(x.map(|c| c * lam), lam * lam * t).unwrap();
        let scale = a.iter().flatten().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((lam.powi(4) * b[k][i][j] - a[k][i][j]).abs() <= 1e-9 * scale);
                    prop_assert!((a[k][i][j] - a[k][j][i]).abs() <= 1e-15 * scale);
                }
            }
        }
    }

    #[test]
    fn admissible_triples_have_nonnegative_t_power(q in 1.5f64..10.0, frac in 0.05f64..1.0) {
        let lower = 1.0 + frac * (q - 1.0);
        let a = admissibility_check(&ExponentTriple { op: DuhamelOp::Phi1, q, lower, horizon: 1.0 });
        if a.accepted {
            prop_assert!(a.t_power >= 0.0);
        } else {
            prop_assert!(a.margin < 0.0);
        }
    }
}
