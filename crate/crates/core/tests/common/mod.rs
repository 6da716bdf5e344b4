#![allow(dead_code)]

use htbandit::env::{EnvironmentSpec, ThreePointArm};

/// Closed-form two-arm log-barrier solution, written to avoid cancellation.
///
/// With `d = |L_1 - L_0|` and `u = min L - Z`, the normalization
/// `S/u + S/(u + d) = 1` is the quadratic `u^2 + (d - 2S) u - S d = 0`.
pub fn two_arm_closed_form(l: [f64; 2], s: f64) -> [f64; 2] {
    let d = (l[1] - l[0]).abs();
    let b = 2.0 * s - d;
    let root = (d * d + 4.0 * s * s).sqrt();
    let u = if b >= 0.0 { 0.5 * (b + root) } else { 2.0 * s * d / (root - b) };
    let near = s / u;
    let far = s / (u + d);
    if l[0] <= l[1] {
        [near, far]
    } else {
        [far, near]
    }
}

fn objective(l: &[f64], s: f64, x: &[f64]) -> f64 {
    l.iter().zip(x).map(|(li, xi)| li * xi - s * xi.ln()).sum()
}

/// Minimizes the FTRL objective over a simplex grid, zooming in around the
/// best cell until the step is below `1e-7`.
pub fn grid_minimize(l: &[f64], s: f64) -> Vec<f64> {
    match l.len() {
        2 => {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut best = 0.5;
            for _ in 0..12 {
                let step = (hi - lo) / 200.0;
                let mut best_v = f64::INFINITY;
                for j in 0..=200 {
                    let a = lo + j as f64 * step;
                    if a <= 0.0 || a >= 1.0 {
                        continue;
                    }
                    let v = objective(l, s, &[a, 1.0 - a]);
                    if v < best_v {
                        best_v = v;
                        best = a;
                    }
                }
                lo = (best - 2.0 * step).max(0.0);
                hi = (best + 2.0 * step).min(1.0);
            }
            vec![best, 1.0 - best]
        }
        3 => {
            let mut center = [0.5, 0.5];
            let mut radius = 0.5f64;
            for _ in 0..14 {
                let n = 60;
                let step = 2.0 * radius / n as f64;
                let mut best_v = f64::INFINITY;
                let mut best = center;
                for i in 0..=n {
                    for j in 0..=n {
                        let a = center[0] - radius + i as f64 * step;
                        let b = center[1] - radius + j as f64 * step;
                        let c = 1.0 - a - b;
                        if a <= 0.0 || b <= 0.0 || c <= 0.0 {
                            continue;
                        }
                        let v = objective(l, s, &[a, b, c]);
                        if v < best_v {
                            best_v = v;
                            best = [a, b];
                        }
                    }
                }
                center = best;
                radius = 3.0 * step;
            }
            vec![center[0], center[1], 1.0 - center[0] - center[1]]
        }
        k => panic!("grid oracle supports K = 2 or 3, got {k}"),
    }
}

/// `E[X 1{|X| > M}]` summed directly over the three atoms.
pub fn direct_truncated(arm: &ThreePointArm, level: f64) -> f64 {
    let (mu, m, p) = (arm.mean, arm.spread, arm.tail_prob);
    [(mu - m, p / 2.0), (mu, 1.0 - p), (mu + m, p / 2.0)]
        .iter()
        .filter(|(v, w)| *w > 0.0 && v.abs() > level)
        .map(|(v, w)| v * w)
        .sum()
}

/// Dense-grid verdict on truncated non-negativity: every level on a fine grid
/// and on both sides of each atom magnitude.
pub fn dense_truncation_oracle(arm: &ThreePointArm) -> bool {
    let mags = [
        (arm.mean - arm.spread).abs(),
        arm.mean.abs(),
        (arm.mean + arm.spread).abs(),
    ];
    let top = mags.iter().copied().fold(0.0, f64::max) + 1.0;
    let mut levels: Vec<f64> = (0..=20_000).map(|i| top * i as f64 / 20_000.0).collect();
    for &a in &mags {
        for eps in [1e-12, 1e-9, 1e-6] {
            levels.push((a - eps * a.max(1.0)).max(0.0));
            levels.push(a + eps * a.max(1.0));
        }
        levels.push(a);
    }
    levels.iter().all(|&lv| direct_truncated(arm, lv) >= 0.0)
}

pub fn two_arm_env(alpha: f64, tail_prob: f64) -> EnvironmentSpec {
    EnvironmentSpec::stochastic(
        vec![
            ThreePointArm::new(0.0, 10.0, tail_prob).unwrap(),
            ThreePointArm::new(0.5, 10.0, tail_prob).unwrap(),
        ],
        alpha,
        1.0,
    )
    .unwrap()
}

/// `K` arms: arm 0 with mean 0, the rest with mean 0.5, all with spread 10.
pub fn k_arm_env(k: usize, alpha: f64, tail_prob: f64) -> EnvironmentSpec {
    let arms = (0..k)
        .map(|i| ThreePointArm::new(if i == 0 { 0.0 } else { 0.5 }, 10.0, tail_prob).unwrap())
        .collect();
    EnvironmentSpec::stochastic(arms, alpha, 1.0).unwrap()
}

/// Tail probability per heavy-tail index that keeps every arm of the test
/// environments within `E|X|^alpha <= 1`.
pub fn tail_prob_for(alpha: f64) -> f64 {
    if alpha <= 1.2 {
        0.02
    } else if alpha <= 1.5 {
        0.01
    } else {
        0.005
    }
}
