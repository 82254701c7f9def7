use num_complex::Complex64;
use proptest::prelude::*;

use strichartz_core::fields::io::{decode_binary, decode_csv, encode_binary, encode_csv};
use strichartz_core::flows::{gaussian_evolve_closed, heat_evolve_open, schrodinger_evolve, FlowParams, GaussianSpec};
use strichartz_core::forms::lambda_heat;
use strichartz_core::monotone::reflect;
use strichartz_core::norms::{q_flow, strichartz_norm, MixedNormSpec};
use strichartz_core::{make_grid, Field};

fn bump(centre: f64, width: f64, amp: f64) -> Field {
    let g = make_grid(1, 16.0, 256).unwrap();
    Field::from_nonnegative_fn(g, |x| amp * (-width * (x[0] - centre).powi(2)).exp()).unwrap()
}

fn pair(c1: f64, w1: f64, c2: f64, w2: f64) -> Field {
    let g = make_grid(1, 16.0, 256).unwrap();
    Field::from_nonnegative_fn(g, |x| (-w1 * (x[0] - c1).powi(2)).exp() + 0.5 * (-w2 * (x[0] - c2).powi(2)).exp()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn heat_flow_keeps_mass_and_sign(c in -3.0..3.0f64, w in 0.3..3.0f64, t in 0.01..4.0f64) {
        let f = bump(c, w, 1.0);
        let mass = f.integrate().unwrap().re;
        let u = heat_evolve_open(&f, t).unwrap();
        prop_assert!((u.integrate().unwrap().re - mass).abs() <= 1e-9 * mass);
        prop_assert!(u.samples().iter().all(|z| z.re >= -1e-12 * u.peak()));
    }

    #[test]
    fn heat_flow_matches_closed_form(w in 0.3..3.0f64, t in 0.01..2.0f64) {
        let g = make_grid(1, 16.0, 256).unwrap();
        let spec = GaussianSpec::new(Complex64::new(1.0, 0.0), vec![0.5], Complex64::new(w, 0.0)).unwrap();
        let exact = gaussian_evolve_closed(&spec, &FlowParams::heat(t).unwrap()).unwrap();
        let u = heat_evolve_open(&spec.sample(&g).unwrap(), t).unwrap();
        let err = u.max_abs_diff(&exact.sample(u.grid()).unwrap()).unwrap();
        prop_assert!(err <= 1e-9, "err {err}");
    }

    #[test]
    fn schrodinger_flow_is_unitary(c in -2.0..2.0f64, w in 0.5..3.0f64, s in -0.3..0.3f64) {
        let f = bump(c, w, 1.0);
        let u = schrodinger_evolve(&f, s).unwrap();
        let (a, b) = (f.lq_norm(2.0).unwrap(), u.lq_norm(2.0).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn strichartz_norm_is_homogeneous(amp in 0.1..5.0f64, c in -2.0..2.0f64) {
        let spec = MixedNormSpec::new(1, 6.0, 6.0).unwrap();
        let base = strichartz_norm(&bump(0.0, 1.0, 1.0), &spec).unwrap();
        let scaled = strichartz_norm(&bump(c, 1.0, amp), &spec).unwrap();
        prop_assert!((scaled - amp * base).abs() <= 1e-8 * amp * base);
    }

    #[test]
    fn gaussians_pin_q_flow(w in 0.5..2.0f64, t in 0.05..5.0f64) {
        let f = bump(0.3, w, 1.0);
        let spec = MixedNormSpec::new(1, 6.0, 6.0).unwrap();
        let level = spec.sharp_constant().unwrap() * f.lq_norm(2.0).unwrap();
        let q = q_flow(&f, &spec, t).unwrap();
        prop_assert!((q - level).abs() <= 1e-6 * level, "{q} vs {level}");
    }

    #[test]
    fn q_flow_never_decreases(c1 in -2.0..0.0f64, c2 in 0.5..2.5f64, w1 in 0.5..2.0f64, w2 in 0.5..2.0f64) {
        let f = pair(c1, w1, c2, w2);
        let spec = MixedNormSpec::new(1, 6.0, 6.0).unwrap();
        let values: Vec<f64> = [0.05, 0.3, 2.0].iter().map(|t| q_flow(&f, &spec, *t).unwrap()).collect();
        prop_assert!(values.windows(2).all(|v| v[1] >= v[0] * (1.0 - 1e-6)), "{values:?}");
        prop_assert!(*values.last().unwrap() <= spec.sharp_constant().unwrap() * f.lq_norm(2.0).unwrap() * (1.0 + 1e-6));
    }

    #[test]
    fn lambda_heat_is_bounded_by_masses(c1 in -2.0..2.0f64, c2 in -2.0..2.0f64, t in 0.01..5.0f64) {
        let f1 = bump(c1, 1.0, 1.0);
        let f2 = bump(c2, 2.0, 1.0);
        let l = lambda_heat(&f1, &f2, t).unwrap();
        let bound = (f1.integrate().unwrap().re * f2.integrate().unwrap().re).sqrt();
        prop_assert!(l > 0.0 && l <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn reflection_is_an_involution(c in -3.0..3.0f64) {
        let f = bump(c, 1.0, 1.0);
        prop_assert_eq!(reflect(&reflect(&f)).into_samples(), f.into_samples());
    }

    #[test]
    fn binary_and_csv_round_trip(values in prop::collection::vec((-1e6..1e6f64, -1e6..1e6f64), 16)) {
        let g = make_grid(1, 3.0, 16).unwrap();
        let f = Field::new(g, values.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap();
        prop_assert_eq!(decode_binary(&encode_binary(&f)).unwrap().into_samples(), f.samples().to_vec());
        prop_assert_eq!(decode_csv(&encode_csv(&f).unwrap()).unwrap().into_samples(), f.samples().to_vec());
    }
}

#[test]
fn two_dimensional_gaussian_pins_q_flow() {
    let g = make_grid(2, 8.0, 128).unwrap();
    let f = Field::from_nonnegative_fn(g, |x| (-1.5 * (x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
    let spec = MixedNormSpec::new(2, 4.0, 4.0).unwrap();
    let level = spec.sharp_constant().unwrap() * f.lq_norm(2.0).unwrap();
    for t in [0.01, 1.0, 10.0] {
        let q = q_flow(&f, &spec, t).unwrap();
        assert!((q - level).abs() <= 1e-6 * level, "t {t}: {q} vs {level}");
    }
}

#[test]
fn schrodinger_flow_refuses_to_wrap_around() {
    let err = schrodinger_evolve(&bump(0.0, 0.5, 1.0), 1.0).unwrap_err();
    assert!(matches!(err, strichartz_core::Error::Aliasing { .. }), "{err:?}");
}
