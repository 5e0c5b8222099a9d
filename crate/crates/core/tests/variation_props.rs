use proptest::prelude::*;
use varcz::variation::{
    hvar_real, jump_count, jump_count_real, oracle_variation_jump, r_variation, window_jumps_real,
    window_variations_real, Sample,
};

fn seq(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..=max_len)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn oracle_agrees_on_uniform_samples(a in seq(12), r in prop::sample::select(vec![1.0, 2.0, 3.0]),
                                        lambda in prop::sample::select(vec![0.1, 0.5, 1.0])) {
        let s = Sample::from_real(&a).unwrap();
        for homogeneous in [true, false] {
            let (v, n) = oracle_variation_jump(&s, r, lambda, homogeneous).unwrap();
            prop_assert!(close(v, r_variation(&s, r, homogeneous).unwrap()));
            prop_assert_eq!(n, jump_count(&s, lambda).unwrap());
        }
    }

    #[test]
    fn variation_nonincreasing_in_r(a in seq(40), r in 1.0f64..6.0, dr in 0.0f64..3.0) {
        let s = Sample::from_real(&a).unwrap();
        let lo = r_variation(&s, r, true).unwrap();
        let hi = r_variation(&s, r + dr, true).unwrap();
        prop_assert!(hi <= lo * (1.0 + 1e-12));
    }

    #[test]
    fn jumps_nonincreasing_in_lambda(a in seq(40), l in 0.01f64..1.0, dl in 0.0f64..1.0) {
        let s = Sample::from_real(&a).unwrap();
        prop_assert!(jump_count(&s, l + dl).unwrap() <= jump_count(&s, l).unwrap());
    }

    #[test]
    fn invariant_under_shift_and_negation(a in seq(30), c in -5.0f64..5.0, r in 1.0f64..4.0, l in 0.05f64..1.0) {
        let s = Sample::from_real(&a).unwrap();
        let c = (c * 8.0).round() / 8.0;
        let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let v = r_variation(&s, r, true).unwrap();
        for b in [shifted, neg] {
            let t = Sample::from_real(&b).unwrap();
            prop_assert!(close(v, r_variation(&t, r, true).unwrap()));
            prop_assert_eq!(jump_count(&s, l).unwrap(), jump_count(&t, l).unwrap());
        }
    }

    #[test]
    fn superadditive_over_shared_endpoint(a in seq(30), cut in 0usize..30, r in 1.0f64..4.0) {
        let k = cut % a.len();
        let whole = r_variation(&Sample::from_real(&a).unwrap(), r, true).unwrap().powf(r);
        let left = r_variation(&Sample::from_real(&a[..=k]).unwrap(), r, true).unwrap().powf(r);
        let right = r_variation(&Sample::from_real(&a[k..]).unwrap(), r, true).unwrap().powf(r);
        prop_assert!(whole >= (left + right) * (1.0 - 1e-12));
    }

    #[test]
    fn jump_variation_inequality(a in seq(60), r in 1.0f64..8.0, lambda in 0.001f64..2.0) {
        let s = Sample::from_real(&a).unwrap();
        let n = jump_count(&s, lambda).unwrap() as f64;
        prop_assert!(lambda * n.powf(1.0 / r) <= r_variation(&s, r, true).unwrap());
    }

    #[test]
    fn fast_real_paths_match(a in seq(80), r in 1.0f64..5.0, lambda in 0.01f64..1.5) {
        let s = Sample::from_real(&a).unwrap();
        prop_assert!(close(hvar_real(&a, r), r_variation(&s, r, true).unwrap()));
        prop_assert_eq!(jump_count_real(&a, lambda), jump_count(&s, lambda).unwrap());
    }

    #[test]
    fn window_routines_match_slices(a in seq(50), end_frac in 0.0f64..1.0, r in 1.0f64..4.0, lambda in 0.05f64..1.0) {
        let end = ((a.len() - 1) as f64 * end_frac) as usize;
        let starts: Vec<usize> = (0..=end).collect();
        let vars = window_variations_real(&a, end, &starts, r);
        let jumps = window_jumps_real(&a, end, &starts, lambda);
        for &s in &starts {
            let w = Sample::from_real(&a[s..=end]).unwrap();
            prop_assert!(close(vars[s], r_variation(&w, r, true).unwrap()));
            prop_assert_eq!(jumps[s], jump_count(&w, lambda).unwrap());
        }
    }
}

#[test]
fn complex_samples_use_modulus() {
    use num_complex::Complex64;
    let a = vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(1.0, 1.0)];
    let s = Sample::from_complex(a).unwrap();
    // Best chain: 0 -> 1+i, length sqrt 2, beats 1 + 1 only for r > 2.
    assert!((r_variation(&s, 1.0, true).unwrap() - 2.0).abs() < 1e-15);
    assert!((r_variation(&s, 4.0, true).unwrap() - 4f64.powf(0.25)).abs() < 1e-15);
    assert_eq!(jump_count(&s, 0.99).unwrap(), 2);
    assert_eq!(jump_count(&s, 1.0).unwrap(), 1);
}
