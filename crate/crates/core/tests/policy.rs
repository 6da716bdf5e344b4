use htbandit::ftrl::CumulativeLoss;
use htbandit::policy::*;
use htbandit::rng::RoundStream;

/// `E[l~] = l_skip` coordinatewise when the arm is drawn from `x`.
#[test]
fn importance_weighted_estimate_is_unbiased() {
    let mut state = init(3, 1000).unwrap();
    state.losses = CumulativeLoss::new(vec![0.0, 3.0, 7.0]).unwrap();
    let x = action_distribution(&state).unwrap();
    let raw = [0.8, -1.5, 40.0];
    let expected: Vec<f64> = (0..3)
        .map(|i| skip_clip(raw[i], skip_threshold(&state, &x, i)).unwrap().skipped_loss)
        .collect();
    assert_eq!(expected[2], 0.0, "the large loss is skipped");

    let n = 100_000;
    let mut rng = RoundStream::new(5);
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    for _ in 0..n {
        let arm = sample_arm(&x, rng.uniform());
        let (_, upd) = observe(&state, &x, arm, raw[arm]).unwrap();
        for i in 0..3 {
            sum[i] += upd.estimated_loss[i];
            sq[i] += upd.estimated_loss[i] * upd.estimated_loss[i];
        }
    }
    for i in 0..3 {
        let mean = sum[i] / n as f64;
        let se = ((sq[i] / n as f64 - mean * mean) / (n - 1) as f64).sqrt();
        assert!(
            (mean - expected[i]).abs() <= 3.0 * se.max(1e-15),
            "arm {i}: {mean} vs {} (se {se})",
            expected[i]
        );
    }
}

#[test]
fn scale_never_decreases_and_skip_law_is_exact() {
    let mut state = init(4, 500).unwrap();
    let mut rng = RoundStream::new(9);
    let factor = skip_growth_factor(state.k_log_t());
    for _ in 0..500 {
        let x = action_distribution(&state).unwrap();
        let arm = sample_arm(&x, rng.uniform());
        let loss = if rng.uniform() < 0.05 { 100.0 } else { rng.uniform() };
        let (next, upd) = observe(&state, &x, arm, loss).unwrap();
        assert!(next.scale_sq >= state.scale_sq);
        assert!(next.scale_sq <= 2.0 * state.scale_sq);
        if upd.outcome.was_skipped {
            assert_eq!(next.scale_sq, state.scale_sq * factor);
        }
        state = next;
    }
}
