use nslab::grid::{GridSpec, SpectralField};
use nslab::io::*;
use nslab::solver::{evolve, SolverOptions};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn field_file_round_trip(a in -2.0f64..2.0, b in -2.0f64..2.0, t in 0.0f64..10.0) {
        let g = GridSpec::new(3.0, 8, 2.0 / 3.0).unwrap();
        let k = g.k0();
        let v = SpectralField::from_fn(g, |x| [a * (k * x[1]).sin(), b * (k * x[2]).cos(), (k * x[0]).sin()]).with_time(t);
        let f = FieldFile::from_velocity(&v);
        let back = FieldFile::from_bytes(&f.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back.header.time.to_bits(), t.to_bits());
        prop_assert!(back.velocity().unwrap().max_diff(&v) <= 1e-15);
    }
}

#[test]
fn bad_magic_is_rejected() {
    let g = GridSpec::periodic_2pi(8);
    let mut bytes = FieldFile::from_velocity(&SpectralField::zeros(g)).to_bytes().unwrap();
    bytes[0] = b'X';
    assert!(FieldFile::from_bytes(&bytes).is_err());
}

#[test]
fn ledger_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let g = GridSpec::periodic_2pi(8);
    let v0 = SpectralField::from_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
    let led = evolve(&v0, &SolverOptions { dt: 0.01, t_end: 0.05, cadence: 1, ..Default::default() }).unwrap();
    write_ledger(&led, d.path()).unwrap();
    let back = read_ledger(d.path()).unwrap();
    assert_eq!(back.snapshots.len(), led.snapshots.len());
    for (a, b) in back.snapshots.iter().zip(&led.snapshots) {
        assert_eq!(a.time.to_bits(), b.time.to_bits());
        assert!(a.velocity.max_diff(&b.velocity) <= 1e-15);
        assert!(a.pressure.max_diff(&b.pressure) <= 1e-15);
    }
    // a snapshot whose grid disagrees with the manifest is refused
    let other = FieldFile::from_velocity(&SpectralField::zeros(GridSpec::periodic_2pi(16)));
    let m = read_manifest(d.path()).unwrap();
    other.write(&d.path().join(&m.files[1])).unwrap();
    assert!(read_ledger(d.path()).is_err());
}
