//! Yardstick policies: a parameter-aware truncated-mean UCB and uniform play.

use std::collections::BTreeMap;

use crate::error::{domain, ensure_finite, Result};

/// Truncated-mean UCB for losses. Unlike uniINF it is told `(alpha, sigma)`.
///
/// At round `t > K` it plays the arm minimizing
/// `truncated_mean_i - 4 sigma (ln t / n_i)^(1 - 1/alpha)`, where observations
/// with `|x| > sigma (n_i / ln t)^(1/alpha)` are dropped from the sum.
#[derive(Debug, Clone)]
pub struct TruncatedUcbState {
    /// Round about to be played, 1-based.
    pub t: u64,
    pub alpha: f64,
    pub sigma: f64,
    pub counts: Vec<u64>,
    pub observations: Vec<Vec<f64>>,
    // Observations grouped by |x|: key is the bit pattern of |x| (monotone for
    // non-negative floats), value the sum of the observations with that magnitude.
    by_magnitude: Vec<BTreeMap<u64, f64>>,
}

impl TruncatedUcbState {
    pub fn new(k: usize, alpha: f64, sigma: f64) -> Result<Self> {
        if k < 2 {
            return Err(domain(format!("need K >= 2 arms, got {k}")));
        }
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(domain(format!("alpha must lie in (1, 2], got {alpha}")));
        }
        ensure_finite("sigma", sigma)?;
        if sigma < 0.0 {
            return Err(domain(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self {
            t: 1,
            alpha,
            sigma,
            counts: vec![0; k],
            observations: vec![Vec::new(); k],
            by_magnitude: vec![BTreeMap::new(); k],
        })
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    /// Records the loss seen on `arm` in the current round and advances `t`.
    pub fn observe(&mut self, arm: usize, loss: f64) -> Result<()> {
        ensure_finite("loss", loss)?;
        if arm >= self.num_arms() {
            return Err(domain(format!("arm {arm} out of range")));
        }
        self.counts[arm] += 1;
        self.observations[arm].push(loss);
        *self.by_magnitude[arm].entry(loss.abs().to_bits()).or_insert(0.0) += loss;
        self.t += 1;
        Ok(())
    }

    /// Mean of the observations on `arm` with magnitude at most `level`,
    /// divided by the full pull count.
    pub fn truncated_mean(&self, arm: usize, level: f64) -> f64 {
        let n = self.counts[arm];
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = if level.is_nan() || level < 0.0 {
            0.0
        } else {
            self.by_magnitude[arm]
                .range(..=level.to_bits())
                .map(|(_, s)| s)
                .sum()
        };
        sum / n as f64
    }

    /// Lower confidence index of `arm` at the current round.
    pub fn index(&self, arm: usize) -> f64 {
        let n = self.counts[arm] as f64;
        let log_t = (self.t as f64).ln();
        let level = self.sigma * (n / log_t).powf(1.0 / self.alpha);
        let width = 4.0 * self.sigma * (log_t / n).powf(1.0 - 1.0 / self.alpha);
        self.truncated_mean(arm, level) - width
    }

    /// Arm to play this round.
    pub fn select(&self) -> usize {
        let k = self.num_arms();
        if self.t <= k as u64 {
            return (self.t - 1) as usize;
        }
        let mut best = 0;
        let mut best_index = self.index(0);
        for arm in 1..k {
            let idx = self.index(arm);
            if idx < best_index {
                best = arm;
                best_index = idx;
            }
        }
        best
    }
}

/// Records the previous round's observation, if any, and returns the next arm.
pub fn truncated_ucb_step(state: &mut TruncatedUcbState, last: Option<(usize, f64)>) -> Result<usize> {
    if let Some((arm, loss)) = last {
        state.observe(arm, loss)?;
    }
    Ok(state.select())
}

/// Uniform play by inverse CDF: `floor(u K)`, clamped to the last arm.
pub fn uniform_random_step(k: usize, u: f64) -> usize {
    ((u * k as f64) as usize).min(k - 1)
}
