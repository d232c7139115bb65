use atomarray::geometry::{apply_disorder, build_2d, DisorderSpec};
use atomarray::greens::{coupling, dyadic_green, DipoleOrientation, LatticeParams};
use atomarray::io::{format_value, read_pulse_csv, write_pulse_csv, Provenance};
use atomarray::memory::PulseShape;
use atomarray::model1d::{
    cooperativity_from_reflectivity, g2_zero, reflection_amplitude, resonant_reflectivity,
    transmission_amplitude, InterfaceParams,
};
use atomarray::C64;
use proptest::prelude::*;

fn separation() -> impl Strategy<Value = [f64; 3]> {
    [-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64].prop_filter("away from the origin", |r| {
        r.iter().map(|x| x * x).sum::<f64>() > 1e-4
    })
}

proptest! {
    #[test]
    fn green_is_symmetric_and_even(r in separation()) {
        let g = dyadic_green(r).unwrap();
        let back = dyadic_green([-r[0], -r[1], -r[2]]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((g[i][j] - g[j][i]).norm() <= 1e-12 * g[i][j].norm().max(1.0));
                prop_assert!((g[i][j] - back[i][j]).norm() <= 1e-12 * g[i][j].norm().max(1.0));
            }
        }
    }

    #[test]
    fn coupling_is_reciprocal(r in separation()) {
        for e in [DipoleOrientation::x(), DipoleOrientation::circular()] {
            let fwd = coupling(r, &e).unwrap();
            let bwd = coupling([-r[0], -r[1], -r[2]], &e).unwrap();
            prop_assert!((fwd - bwd).norm() <= 1e-12 * fwd.norm().max(1.0));
        }
    }

    #[test]
    fn interface_conserves_energy(
        target in 0.01..10.0f64,
        loss in 0.0..10.0f64,
        detuning in -50.0..50.0f64,
    ) {
        let p = InterfaceParams::new(target, loss).unwrap();
        let r = reflection_amplitude(&p, detuning).norm_sqr();
        let t = transmission_amplitude(&p, detuning).norm_sqr();
        prop_assert!(r + t <= 1.0 + 1e-12);
        if loss == 0.0 {
            prop_assert!((r + t - 1.0).abs() < 1e-12);
        }
        let peak = reflection_amplitude(&p, p.collective_shift).norm();
        prop_assert!(reflection_amplitude(&p, detuning).norm() <= peak + 1e-12);
    }

    #[test]
    fn resonant_reflectivity_inverts(c in 1e-3..1e4f64) {
        let r0 = resonant_reflectivity(c);
        prop_assert!((0.0..1.0).contains(&r0));
        prop_assert!((cooperativity_from_reflectivity(r0) - c).abs() <= 1e-9 * c.max(1.0) * (1.0 + c));
        let p = InterfaceParams::from_cooperativity(c, 1.0).unwrap();
        prop_assert!((reflection_amplitude(&p, p.collective_shift).norm() - r0).abs() < 1e-12);
    }

    #[test]
    fn antibunching_deepens_with_reflectivity(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(g2_zero(hi) <= g2_zero(lo));
        prop_assert!((0.0..=1.0).contains(&g2_zero(lo)));
    }

    #[test]
    fn float_cells_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(format_value(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn pulse_csv_round_trips(
        t0 in -10.0..10.0f64,
        dt in 1e-3..1.0f64,
        samples in prop::collection::vec((-1e3..1e3f64, -1e-6..1e-6f64), 2..50),
    ) {
        let values: Vec<C64> = samples.iter().map(|&(re, im)| C64::new(re, im)).collect();
        let pulse = PulseShape::new(t0, dt, values).unwrap();
        let mut buf = Vec::new();
        write_pulse_csv(&mut buf, &pulse, &Provenance::new("abc", vec![1])).unwrap();
        let back = read_pulse_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.values, &pulse.values);
        prop_assert!((back.t0 - t0).abs() < 1e-12);
        prop_assert!((back.dt - dt).abs() < 1e-9 * dt);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn disorder_is_keyed_by_seed_and_realization(seed in any::<u64>(), sigma in 0.001..0.1f64) {
        let lat = LatticeParams::planar(0.6).unwrap();
        let ordered = build_2d(&lat, 4).unwrap();
        let spec = DisorderSpec::normal(sigma, 2, seed);
        let a = apply_disorder(&ordered, &spec, 0).unwrap();
        let again = apply_disorder(&ordered, &spec, 0).unwrap();
        let other = apply_disorder(&ordered, &spec, 1).unwrap();
        prop_assert_eq!(&a.positions, &again.positions);
        prop_assert_ne!(&a.positions, &other.positions);
        prop_assert_eq!(a.len(), ordered.len());
    }
}
