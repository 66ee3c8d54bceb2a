use nslab::grid::{GridSpec, SpectralField};
use nslab::semigroup::heat_flow;
use proptest::prelude::*;

/// A few low modes with the given amplitudes and wave vectors.
fn field(g: GridSpec, modes: &[([i32; 3], [f64; 3])]) -> SpectralField {
    SpectralField::from_fn(g, |x| {
        let mut v = [0.0; 3];
        for (k, a) in modes {
            let ph = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
            for c in 0..3 {
                v[c] += a[c] * (ph + c as f64).sin();
            }
        }
        v
    })
}

fn modes() -> impl Strategy<Value = Vec<([i32; 3], [f64; 3])>> {
    prop::collection::vec((prop::array::uniform3(-4i32..=4), prop::array::uniform3(-1.0f64..1.0)), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leray_is_an_orthogonal_projection(m in modes()) {
        let g = GridSpec::periodic_2pi(16);
        let v = field(g, &m);
        let p = v.leray_project();
        let scale = v.max_coeff().max(1e-300);
        prop_assert!(p.leray_project().max_diff(&p) <= 1e-14 * scale);
        prop_assert!(p.divergence_residual() <= 1e-12);
        let q = v.sub(&p);
        prop_assert!(p.inner(&q).abs() <= 1e-14 * v.inner(&v).max(1e-300));
        prop_assert!((v.energy() - p.energy() - q.energy()).abs() <= 1e-13 * v.energy().max(1e-300));
    }

    #[test]
    fn heat_semigroup_composes(m in modes(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let g = GridSpec::periodic_2pi(16);
        let v = field(g, &m);
        let a = heat_flow(&heat_flow(&v, s).unwrap(), t).unwrap();
        let b = heat_flow(&v, s + t).unwrap();
        prop_assert!(a.max_diff(&b) <= 1e-14 * v.max_coeff().max(1e-300));
        prop_assert!(b.energy() <= v.energy() * (1.0 + 1e-14));
    }

    #[test]
    fn physical_round_trip(m in modes()) {
        let g = GridSpec::periodic_2pi(16);
        let v = field(g, &m);
        let w = SpectralField::from_physical(g, &v.to_physical());
        prop_assert!(w.max_diff(&v) <= 1e-14 * v.max_coeff().max(1e-300));
        prop_assert!(v.hermitian_defect() <= 1e-14);
    }
}

#[test]
fn grid_spec_validation() {
    assert!(GridSpec::new(1.0, 12, 2.0 / 3.0).is_err());
    assert!(GridSpec::new(1.0, 4, 2.0 / 3.0).is_err());
    assert!(GridSpec::new(-1.0, 16, 2.0 / 3.0).is_err());
    assert!(GridSpec::new(1.0, 16, 2.0 / 3.0).is_ok());
}

#[test]
fn single_mode_decays_by_e_to_the_minus_k_squared_t() {
    let g = GridSpec::new(4.0, 32, 2.0 / 3.0).unwrap();
    let k = 3.0 * g.k0();
    let v = SpectralField::from_fn(g, |x| [0.0, (k * x[0]).cos(), 0.0]);
    let t = 0.05;
    let h = heat_flow(&v, t).unwrap();
    assert!(h.max_diff(&v.scaled((-k * k * t).exp())) < 1e-15);
}
