use proptest::prelude::*;
use std::sync::Arc;
use varcz::dyadic::{build_shifted_grid, CubeSystem};
use varcz::martingale::{
    cz_decompose, difference, dyadic_maximal, expectation, greedy_stopping, level_set_measure,
    martingale_jump_majorant,
};
use varcz::space::build_euclidean_grid;
use varcz::variation::jump_count_real;
use varcz::GridFunction;

fn system(side: usize, shift: u8) -> CubeSystem {
    let space = Arc::new(build_euclidean_grid(1, side, 1.0 / side as f64).unwrap());
    build_shifted_grid(space, &[shift], (-(side.trailing_zeros() as i32), 1)).unwrap()
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coarser_expectation_wins(v in values(64), shift in 0u8..3, k in -6i32..=1, l in -6i32..=1) {
        let sys = system(64, shift);
        let f = GridFunction::from_real(&v).unwrap();
        let a = expectation(&sys, &expectation(&sys, &f, l).unwrap(), k).unwrap();
        let b = expectation(&sys, &f, k.max(l)).unwrap();
        prop_assert!(a.sub(&b).norm_inf() < 1e-12);
    }

    #[test]
    fn differences_are_orthogonal_projections(v in values(64), k in -6i32..1, l in -6i32..1) {
        let sys = system(64, 0);
        let f = GridFunction::from_real(&v).unwrap();
        let dl = difference(&sys, &f, l).unwrap();
        let dkdl = difference(&sys, &dl, k).unwrap();
        if k == l {
            prop_assert!(dkdl.sub(&dl).norm_inf() < 1e-12);
        } else {
            prop_assert!(dkdl.norm_inf() < 1e-12);
        }
    }

    #[test]
    fn maximal_function_weak_type(v in values(128), lambda in 0.05f64..4.0) {
        let sys = system(128, 1);
        let f = GridFunction::from_real(&v).unwrap();
        let m = dyadic_maximal(&sys, &f).unwrap();
        for (x, &mx) in m.iter().enumerate() {
            prop_assert!(mx >= v[x].abs() - 1e-12);
        }
        let l1 = f.norm_l1(sys.space());
        prop_assert!(level_set_measure(&sys, &m, lambda) <= l1 / lambda * (1.0 + 1e-12));
    }

    #[test]
    fn stops_leave_no_large_moves(v in values(64), x in 0usize..64, lambda in 0.1f64..4.0) {
        let sys = system(64, 0);
        let f = GridFunction::from_real(&v).unwrap();
        let seq = greedy_stopping(&sys, &f, x, lambda, sys.k_max()).unwrap();
        let e = |k: i32| expectation(&sys, &f, k).unwrap().get(x);
        prop_assert_eq!(seq.scales[0], sys.k_max());
        let mut bounds = seq.scales.clone();
        bounds.push(sys.k_min() - 1);
        for w in bounds.windows(2) {
            let base = e(w[0]);
            for k in (w[1] + 1)..w[0] {
                prop_assert!((e(k) - base).norm() <= lambda / 8.0);
            }
            if w[1] >= sys.k_min() {
                prop_assert!((e(w[1]) - base).norm() > lambda / 8.0);
            }
        }
    }

    #[test]
    fn cz_invariants(v in values(128), scale in 0.1f64..5.0) {
        let sys = system(128, 2);
        let f = GridFunction::from_real(&v).unwrap();
        let l1 = f.norm_l1(sys.space());
        let lambda = l1 * scale;
        let cz = cz_decompose(&sys, &f, lambda).unwrap();
        prop_assert!(cz.reconstruct().sub(&f).norm_inf() < 1e-12);
        prop_assert!(cz.bad_measure(&sys) <= l1 / lambda);
        for b in &cz.bad {
            let s: f64 = b.values.iter().map(|&(x, z)| z.re * sys.space().weight(x)).sum();
            prop_assert!(s.abs() < 1e-12);
        }
    }
}

#[test]
fn cz_spike_selects_maximal_ancestor() {
    let sys = system(64, 0);
    let n = 64;
    let mut f = GridFunction::zeros(n);
    f.set(5, 40.0.into());
    let cz = cz_decompose(&sys, &f, 1.0).unwrap();
    assert_eq!(cz.bad.len(), 1);
    let q = &sys.cubes()[cz.bad[0].cube];
    // Mass 40/64; averages over cubes of side 2^k are (40/64)/2^k.
    // Largest cube with average > 1 has side 1/2.
    assert_eq!(q.scale, -1);
    assert!(q.members.contains(&5));
}

#[test]
fn majorant_sees_large_jumps() {
    let sys = system(64, 0);
    let v: Vec<f64> = (0..64).map(|i| ((i * 37 % 64) as f64 / 16.0).sin() * 3.0).collect();
    let f = GridFunction::from_real(&v).unwrap();
    let lambda = 0.5;
    let mut worst = f64::INFINITY;
    for x in 0..64 {
        let e: Vec<f64> = sys.scales().rev().map(|k| expectation(&sys, &f, k).unwrap().get(x).re).collect();
        let n = jump_count_real(&e, lambda / 2.0);
        let inner = sys.cube_of(x, sys.k_min());
        let outer = sys.cube_of(x, sys.k_max());
        let m = martingale_jump_majorant(&sys, &f, x, lambda, inner, outer).unwrap();
        assert_eq!(martingale_jump_majorant(&sys, &f, x, lambda, outer, outer).unwrap(), 0.0);
        if n > 0 {
            worst = worst.min(m / ((lambda / 2.0) * (n as f64).sqrt() / 8.0));
        }
    }
    assert!(worst.is_finite() && worst > 0.0, "measured constant {worst}");
}
