mod common;

use common::{grid_minimize, two_arm_closed_form};
use htbandit::ftrl::*;
use htbandit::rng::RoundStream;
use proptest::prelude::*;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn matches_grid_oracle_on_random_instances() {
    let mut rng = RoundStream::new(2024);
    for i in 0..200 {
        let k = 2 + i % 2;
        let l: Vec<f64> = (0..k).map(|_| 40.0 * rng.uniform() - 20.0).collect();
        let s = 0.5 + 20.0 * rng.uniform();
        let sol = solve_log_barrier(&CumulativeLoss::new(l.clone()).unwrap(), s, 1e-12).unwrap();
        let grid = grid_minimize(&l, s);
        assert!(max_abs_diff(sol.point.as_slice(), &grid) < 1e-4, "L={l:?} S={s}");
        assert!(sol.residual <= 1e-12);
    }
}

#[test]
fn matches_two_arm_closed_form() {
    let mut rng = RoundStream::new(7);
    for _ in 0..2000 {
        let l = [200.0 * rng.uniform() - 100.0, 200.0 * rng.uniform() - 100.0];
        let s = 0.01 + 50.0 * rng.uniform();
        let sol = solve_log_barrier(&CumulativeLoss::new(l.to_vec()).unwrap(), s, 1e-12).unwrap();
        let cf = two_arm_closed_form(l, s);
        assert!(max_abs_diff(sol.point.as_slice(), &cf) < 1e-9, "L={l:?} S={s}");
    }
}

#[test]
fn closed_form_agrees_with_quadratic_example() {
    let x = two_arm_closed_form([0.0, 10.0], 4.0);
    let u = -1.0 + 41f64.sqrt();
    assert!((x[0] - 4.0 / u).abs() < 1e-15);
    assert!((x[1] - 4.0 / (u + 10.0)).abs() < 1e-15);
}

#[test]
fn extreme_gaps_stay_on_the_simplex() {
    for &(gap, s) in &[(1e6, 4.0), (1e12, 0.5), (0.0, 1e-6), (1e-14, 1e6)] {
        for k in [2usize, 5, 50] {
            let mut l = vec![gap; k];
            l[0] = 0.0;
            let sol = solve_log_barrier(&CumulativeLoss::new(l).unwrap(), s, 1e-12).unwrap();
            let sum: f64 = sol.point.as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(sol.point.as_slice().iter().all(|&p| p > 0.0));
        }
    }
}

fn losses(k: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, k)
}

proptest! {
    #[test]
    fn translation_invariance(l in losses(2..8), s in 0.1f64..100.0, c in -1e3f64..1e3) {
        let a = solve_log_barrier(&CumulativeLoss::new(l.clone()).unwrap(), s, 1e-12).unwrap();
        let shifted: Vec<f64> = l.iter().map(|v| v + c).collect();
        let b = solve_log_barrier(&CumulativeLoss::new(shifted).unwrap(), s, 1e-12).unwrap();
        prop_assert!(max_abs_diff(a.point.as_slice(), b.point.as_slice()) < 1e-9);
        prop_assert!((b.multiplier - a.multiplier - c).abs() < 1e-9 * (1.0 + c.abs() + a.multiplier.abs()));
    }

    #[test]
    fn multiplier_lies_in_bracket(l in losses(2..8), s in 0.1f64..100.0) {
        let sol = solve_log_barrier(&CumulativeLoss::new(l.clone()).unwrap(), s, 1e-12).unwrap();
        let k = l.len() as f64;
        let min_l = l.iter().copied().fold(f64::INFINITY, f64::min);
        let u = min_l - sol.multiplier;
        prop_assert!(u >= s * (1.0 - 1e-12) && u <= k * s * (1.0 + 1e-12));
        prop_assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn bregman_is_non_negative(l in losses(2..6), d in losses(2..6), s in 0.1f64..100.0) {
        let k = l.len().min(d.len());
        let x = solve_log_barrier(&CumulativeLoss::new(l[..k].to_vec()).unwrap(), s, 1e-12).unwrap().point;
        let z = solve_log_barrier(&CumulativeLoss::new(d[..k].to_vec()).unwrap(), s, 1e-12).unwrap().point;
        let div = bregman_divergence_log_barrier(s, x.as_slice(), z.as_slice()).unwrap();
        prop_assert!(div >= 0.0);
        prop_assert_eq!(bregman_divergence_log_barrier(s, x.as_slice(), x.as_slice()).unwrap(), 0.0);
    }

    #[test]
    fn solution_minimizes_objective_locally(l in losses(2..5), s in 0.1f64..50.0, i in 0usize..4, j in 0usize..4, eps in 1e-6f64..1e-3) {
        let k = l.len();
        let (i, j) = (i % k, j % k);
        prop_assume!(i != j);
        let x = solve_log_barrier(&CumulativeLoss::new(l.clone()).unwrap(), s, 1e-12).unwrap().point.into_vec();
        let f = |x: &[f64]| -> f64 { l.iter().zip(x).map(|(a, b)| a * b - s * b.ln()).sum() };
        let mut y = x.clone();
        let step = eps * x[j].min(x[i]);
        y[i] += step;
        y[j] -= step;
        prop_assert!(f(&y) >= f(&x) - 1e-9 * (1.0 + f(&x).abs()));
    }
}
