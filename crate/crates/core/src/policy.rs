//! The uniINF policy: log-barrier FTRL driven by skipped, importance-weighted
//! losses, with a learning-rate scale that grows with clipped losses.
//!
//! The policy only ever sees the loss of the arm it played. It never receives
//! the heavy-tail parameters of the environment.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_finite, Error, Result};
use crate::ftrl::{solve_log_barrier_with, CumulativeLoss, SimplexPoint, SolverConfig};

/// Initial learning-rate scale `S_1`.
pub const INITIAL_SCALE: f64 = 4.0;
/// Lower clamp on `1 - x_i` in the skip threshold.
pub const ONE_MINUS_X_CLAMP: f64 = 1e-15;
/// Probabilities below this make the importance weight meaningless.
pub const MIN_PLAYED_PROB: f64 = 1e-300;

/// Round state of the policy. Updates return a fresh value.
#[derive(Debug, Clone, PartialEq)]
pub struct UniInfState {
    /// Current round, 1-based. Equals `horizon + 1` once play is over.
    pub t: u64,
    pub k: usize,
    pub horizon: u64,
    /// `S_t^2`. The scale is updated through its square, which keeps the
    /// skip-round growth ratio exact to rounding.
    pub scale_sq: f64,
    pub losses: CumulativeLoss,
    pub solver: SolverConfig,
}

impl UniInfState {
    /// Learning-rate scale `S_t`.
    pub fn scale(&self) -> f64 {
        self.scale_sq.sqrt()
    }

    /// `K * ln T`, the denominator of the scale update.
    pub fn k_log_t(&self) -> f64 {
        self.k as f64 * (self.horizon as f64).ln()
    }
}

/// The result of skipping and clipping one raw loss at threshold `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipClipOutcome {
    pub threshold: f64,
    pub skipped_loss: f64,
    pub clipped_loss: f64,
    pub was_skipped: bool,
}

/// Everything `observe` derived from one round of feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundUpdate {
    /// Importance-weighted skipped loss; nonzero only at the played arm.
    pub estimated_loss: Vec<f64>,
    pub next_scale: f64,
    pub next_scale_sq: f64,
    pub outcome: SkipClipOutcome,
}

pub fn init(k: usize, horizon: u64) -> Result<UniInfState> {
    if k < 2 {
        return Err(domain(format!("uniINF needs K >= 2 arms, got {k}")));
    }
    if horizon < 2 {
        return Err(domain(format!("horizon must be at least 2, got {horizon}")));
    }
    Ok(UniInfState {
        t: 1,
        k,
        horizon,
        scale_sq: INITIAL_SCALE * INITIAL_SCALE,
        losses: CumulativeLoss::zeros(k),
        solver: SolverConfig::default(),
    })
}

/// The FTRL action `x_t` for the current state.
pub fn action_distribution(state: &UniInfState) -> Result<SimplexPoint> {
    Ok(solve_log_barrier_with(&state.losses, state.scale(), state.solver)?.point)
}

/// Inverse-CDF sampling: the smallest `i` whose cumulative probability exceeds `u`.
pub fn sample_arm(x: &SimplexPoint, u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in x.as_slice().iter().enumerate() {
        acc += p;
        if acc > u {
            return i;
        }
    }
    x.len() - 1
}

/// Action-dependent skip threshold `C_{t,i} = S_t / (4 (1 - x_i))`.
pub fn skip_threshold(state: &UniInfState, x: &SimplexPoint, arm: usize) -> f64 {
    threshold_for(state.scale(), x[arm])
}

pub(crate) fn threshold_for(scale: f64, x_i: f64) -> f64 {
    scale / (4.0 * (1.0 - x_i).max(ONE_MINUS_X_CLAMP))
}

pub fn skip_clip(raw_loss: f64, threshold: f64) -> Result<SkipClipOutcome> {
    ensure_finite("loss", raw_loss)?;
    ensure_finite("C", threshold)?;
    if threshold <= 0.0 {
        return Err(domain(format!("threshold must be positive, got {threshold}")));
    }
    let was_skipped = raw_loss.abs() >= threshold;
    Ok(SkipClipOutcome {
        threshold,
        skipped_loss: if was_skipped { 0.0 } else { raw_loss },
        clipped_loss: raw_loss.clamp(-threshold, threshold),
        was_skipped,
    })
}

/// Next value of `S^2`.
///
/// A skipped loss is clipped at exactly `C`, so `clip^2 (1 - x)^2 = S^2 / 16`
/// and the update collapses to `S^2 (1 + 1 / (16 K ln T))`; that closed form is
/// used directly on skip rounds.
pub fn next_scale_sq(scale_sq: f64, outcome: &SkipClipOutcome, one_minus_x: f64, k_log_t: f64) -> f64 {
    if outcome.was_skipped {
        scale_sq * skip_growth_factor(k_log_t)
    } else {
        let c = outcome.clipped_loss * one_minus_x;
        scale_sq + c * c / k_log_t
    }
}

/// `1 + 1 / (16 K ln T)`, the ratio `S_{t+1}^2 / S_t^2` on a skip round.
pub fn skip_growth_factor(k_log_t: f64) -> f64 {
    1.0 + 1.0 / (16.0 * k_log_t)
}

/// Feeds back the loss of the played arm and advances the state by one round.
pub fn observe(
    state: &UniInfState,
    x: &SimplexPoint,
    arm: usize,
    raw_loss: f64,
) -> Result<(UniInfState, RoundUpdate)> {
    ensure_finite("loss", raw_loss)?;
    if x.len() != state.k {
        return Err(domain(format!("x has {} arms, state has {}", x.len(), state.k)));
    }
    if arm >= state.k {
        return Err(domain(format!("arm {arm} out of range for K = {}", state.k)));
    }
    if state.t > state.horizon {
        return Err(domain(format!("horizon {} already exhausted", state.horizon)));
    }
    let x_arm = x[arm];
    if x_arm < MIN_PLAYED_PROB {
        return Err(domain(format!(
            "played arm probability {x_arm:e} is below {MIN_PLAYED_PROB:e}"
        )));
    }

    let outcome = skip_clip(raw_loss, skip_threshold(state, x, arm))?;

    let mut estimated_loss = vec![0.0; state.k];
    estimated_loss[arm] = outcome.skipped_loss / x_arm;
    let losses = state.losses.add(&estimated_loss).map_err(|e| match e {
        Error::NonFiniteInput(m) => Error::NonFiniteInput(format!("cumulative loss overflow: {m}")),
        other => other,
    })?;

    let scale_sq = next_scale_sq(state.scale_sq, &outcome, 1.0 - x_arm, state.k_log_t());
    let next = UniInfState {
        t: state.t + 1,
        k: state.k,
        horizon: state.horizon,
        scale_sq,
        losses,
        solver: state.solver,
    };
    let update = RoundUpdate {
        estimated_loss,
        next_scale: next.scale(),
        next_scale_sq: scale_sq,
        outcome,
    };
    Ok((next, update))
}

/// Posterior point `z_t`: the FTRL solution under the old scale `S_t` after the
/// round's estimated loss has been added. Diagnostic only.
pub fn posterior_point(state_before: &UniInfState, update: &RoundUpdate) -> Result<SimplexPoint> {
    let losses = state_before.losses.add(&update.estimated_loss)?;
    Ok(solve_log_barrier_with(&losses, state_before.scale(), state_before.solver)?.point)
}
