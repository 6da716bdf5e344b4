//! Trajectory runner, pseudo-regret accounting, and Monte-Carlo aggregation.
//!
//! Regret is computed from the environment's known means, which integrates out
//! the loss noise exactly and leaves only the policy's own randomness to the
//! Monte-Carlo average.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{AuditReport, AuditRound, Auditor};
use crate::baselines::{uniform_random_step, TruncatedUcbState};
use crate::env::{
    check_moment_bound, check_truncated_nonneg, gap_vector, sample_loss_vector, EnvironmentSpec,
};
use crate::error::{domain, Error, Result};
use crate::ftrl::{adjusted_benchmark, bregman_divergence_log_barrier, shift_for_increment, SimplexPoint};
use crate::policy::{self, UniInfState};
use crate::rng::RoundStream;

/// Which policy a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PolicySpec {
    #[serde(rename = "uniinf")]
    UniInf,
    /// Parameter-aware baseline; missing parameters are taken from the environment.
    TruncatedUcb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    UniformRandom,
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::UniInf => "uniinf",
            PolicySpec::TruncatedUcb { .. } => "truncated_ucb",
            PolicySpec::UniformRandom => "uniform_random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Compute `z_t`, Div, Shift, and SkipErr each round and audit them.
    pub diagnostics: bool,
    /// Keep every [`RoundRecord`] in the result (requires `diagnostics`).
    pub keep_records: bool,
}

impl RunOptions {
    pub fn diagnostics() -> Self {
        Self {
            diagnostics: true,
            keep_records: false,
        }
    }

    pub fn with_records() -> Self {
        Self {
            diagnostics: true,
            keep_records: true,
        }
    }
}

/// Diagnostics for one uniINF round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: u64,
    pub arm: usize,
    /// The benchmark arm `i*`.
    pub best: usize,
    pub x: SimplexPoint,
    pub z: Option<SimplexPoint>,
    pub scale: f64,
    pub next_scale: f64,
    pub scale_sq: f64,
    pub next_scale_sq: f64,
    pub threshold: f64,
    pub raw_loss: f64,
    pub skipped_loss: f64,
    pub clipped_loss: f64,
    pub was_skipped: bool,
    pub div: f64,
    pub shift: f64,
    /// `l_{t,i_t} 1{|l_{t,i_t}| >= C_{t,i_t}}`.
    pub skip_err: f64,
}

impl RoundRecord {
    pub fn suboptimal(&self) -> bool {
        self.arm != self.best
    }

    pub fn x_best(&self) -> f64 {
        self.x[self.best]
    }

    pub fn to_audit(&self) -> AuditRound {
        AuditRound {
            t: self.t,
            x_played: self.x[self.arm],
            scale: self.scale,
            next_scale: self.next_scale,
            scale_sq: self.scale_sq,
            next_scale_sq: self.next_scale_sq,
            skipped_loss: self.skipped_loss,
            clipped_loss: self.clipped_loss,
            was_skipped: self.was_skipped,
            div: self.div,
            shift: self.shift,
            x: Some(self.x.as_slice().to_vec()),
            z: self.z.as_ref().map(|z| z.as_slice().to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub policy: String,
    pub horizon: u64,
    pub seed: u64,
    pub benchmark_arm: usize,
    /// Rounds at which the pseudo-regret was sampled, ascending and ending at the horizon.
    pub checkpoints: Vec<u64>,
    pub regret: Vec<f64>,
    pub pseudo_regret: f64,
    pub arm_counts: Vec<u64>,
    /// `S_{T+1}`; uniINF only.
    pub final_scale: Option<f64>,
    pub skip_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<RoundRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

/// Powers of two up to the horizon, plus the horizon itself.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (0..64)
        .map(|e| 1u64 << e)
        .take_while(|&c| c <= horizon)
        .collect();
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Checks the environment against everything `run` assumes, returning the benchmark arm.
///
/// Stochastic environments must have a unique best arm, unless every arm
/// follows the same law (then every arm is optimal and arm 0 is used).
pub fn check_preconditions(env: &EnvironmentSpec, horizon: u64) -> Result<usize> {
    let fail = |m: String| Error::PreconditionFailed(m);
    env.validate().map_err(|e| fail(e.to_string()))?;
    if horizon < 2 {
        return Err(fail(format!("horizon must be at least 2, got {horizon}")));
    }
    if let Some(len) = env.schedule_length() {
        if len < horizon {
            return Err(fail(format!("schedule covers {len} rounds, horizon is {horizon}")));
        }
    }
    let moments = check_moment_bound(env);
    if !moments.passed() {
        return Err(fail(format!("heavy-tail moment bound violated:\n{moments}")));
    }
    let best = if env.is_stochastic() {
        match gap_vector(env) {
            Ok(g) => g.best,
            Err(Error::NonUniqueBestArm(ties)) => {
                let arms = env.arms_at(1)?;
                if arms.iter().all(|a| *a == arms[0]) {
                    0
                } else {
                    return Err(fail(format!(
                        "no unique best arm: arms {ties:?} share the minimal mean"
                    )));
                }
            }
            Err(e) => return Err(fail(e.to_string())),
        }
    } else {
        env.benchmark_arm(horizon)?
    };
    let mut t = 1;
    while t <= horizon {
        let arms = env.arms_at(t)?;
        let check = check_truncated_nonneg(&arms[best]);
        if !check.holds {
            return Err(fail(format!(
                "benchmark arm {best} is not truncated non-negative at round {t} (witness M = {:?})",
                check.witness
            )));
        }
        t = match &env.kind {
            crate::env::EnvKind::Stochastic { .. } => horizon + 1,
            crate::env::EnvKind::AdversarialSchedule { phases } => {
                let mut end = 0;
                let mut next = horizon + 1;
                for ph in phases {
                    end += ph.length;
                    if end >= t {
                        next = end + 1;
                        break;
                    }
                }
                next
            }
        };
    }
    Ok(best)
}

/// Pseudo-regret of an arm sequence against the best fixed arm in hindsight
/// over mean losses (ties to the lowest index).
pub fn pseudo_regret(arms: &[usize], env: &EnvironmentSpec, horizon: u64) -> Result<f64> {
    if arms.len() as u64 != horizon {
        return Err(domain(format!(
            "arm sequence has {} rounds, horizon is {horizon}",
            arms.len()
        )));
    }
    let mut acc = RegretAccumulator::new(env.num_arms());
    for (t, &arm) in (1..=horizon).zip(arms) {
        acc.push(env, t, arm)?;
    }
    Ok(acc.regret())
}

struct RegretAccumulator {
    policy: f64,
    arms: Vec<f64>,
}

impl RegretAccumulator {
    fn new(k: usize) -> Self {
        Self {
            policy: 0.0,
            arms: vec![0.0; k],
        }
    }

    fn push(&mut self, env: &EnvironmentSpec, t: u64, arm: usize) -> Result<()> {
        let laws = env.arms_at(t)?;
        if arm >= laws.len() {
            return Err(domain(format!("arm {arm} out of range")));
        }
        self.policy += laws[arm].mean;
        for (acc, law) in self.arms.iter_mut().zip(laws) {
            *acc += law.mean;
        }
        Ok(())
    }

    fn regret(&self) -> f64 {
        let best = self.arms.iter().copied().fold(f64::INFINITY, f64::min);
        self.policy - best
    }
}

enum Player {
    UniInf(UniInfState),
    Ucb(TruncatedUcbState),
    Uniform(usize),
}

/// Plays one full trajectory of `horizon` rounds with bandit feedback.
pub fn run(
    policy: &PolicySpec,
    env: &EnvironmentSpec,
    horizon: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<RunResult> {
    let best = check_preconditions(env, horizon)?;
    let k = env.num_arms();
    let mut player = match policy {
        PolicySpec::UniInf => Player::UniInf(policy::init(k, horizon)?),
        PolicySpec::TruncatedUcb { alpha, sigma } => Player::Ucb(TruncatedUcbState::new(
            k,
            alpha.unwrap_or(env.alpha),
            sigma.unwrap_or(env.sigma),
        )?),
        PolicySpec::UniformRandom => Player::Uniform(k),
    };
    let diagnostics = opts.diagnostics && matches!(player, Player::UniInf(_));
    let y_tilde = if diagnostics {
        Some(adjusted_benchmark(k, best, horizon)?)
    } else {
        None
    };

    let checkpoints = default_checkpoints(horizon);
    let mut next_checkpoint = 0;
    let mut regret = Vec::with_capacity(checkpoints.len());
    let mut acc = RegretAccumulator::new(k);
    let mut arm_counts = vec![0u64; k];
    let mut skip_count = 0u64;

    let mut stream = RoundStream::new(seed);
    let mut loss_u = vec![0.0; k];

    let mut auditor = diagnostics.then(|| Auditor::new(k, horizon));
    let mut records = (diagnostics && opts.keep_records).then(Vec::new);
    let mut pending: Option<RoundRecord> = None;
    let mut x = match &player {
        Player::UniInf(s) => Some(policy::action_distribution(s)?),
        _ => None,
    };

    let finalize = |mut rec: RoundRecord,
                    x_next: &SimplexPoint,
                    auditor: &mut Option<Auditor>,
                    records: &mut Option<Vec<RoundRecord>>| {
        let y = y_tilde.as_ref().expect("diagnostics imply a benchmark point");
        let delta = (rec.next_scale_sq - rec.scale_sq) / (rec.next_scale + rec.scale);
        rec.shift = shift_for_increment(delta, y.as_slice(), x_next.as_slice());
        if let Some(a) = auditor.as_mut() {
            a.push(&rec.to_audit());
        }
        if let Some(r) = records.as_mut() {
            r.push(rec);
        }
    };

    for t in 1..=horizon {
        let u_arm = stream.round(&mut loss_u);
        let losses = sample_loss_vector(env, t, &loss_u)?;

        let arm = match &mut player {
            Player::UniInf(state) => {
                let xt = x.as_ref().expect("uniINF keeps its current action");
                if let Some(rec) = pending.take() {
                    finalize(rec, xt, &mut auditor, &mut records);
                }
                let arm = policy::sample_arm(xt, u_arm);
                let (next, update) = policy::observe(state, xt, arm, losses[arm])?;
                if update.outcome.was_skipped {
                    skip_count += 1;
                }
                if diagnostics {
                    let z = policy::posterior_point(state, &update)?;
                    let div = bregman_divergence_log_barrier(state.scale(), xt.as_slice(), z.as_slice())?;
                    let o = update.outcome;
                    pending = Some(RoundRecord {
                        t,
                        arm,
                        best,
                        x: xt.clone(),
                        z: Some(z),
                        scale: state.scale(),
                        next_scale: update.next_scale,
                        scale_sq: state.scale_sq,
                        next_scale_sq: update.next_scale_sq,
                        threshold: o.threshold,
                        raw_loss: losses[arm],
                        skipped_loss: o.skipped_loss,
                        clipped_loss: o.clipped_loss,
                        was_skipped: o.was_skipped,
                        div,
                        shift: 0.0,
                        skip_err: losses[arm] - o.skipped_loss,
                    });
                }
                *state = next;
                if t < horizon || diagnostics {
                    x = Some(policy::action_distribution(state)?);
                }
                arm
            }
            Player::Ucb(state) => {
                let arm = state.select();
                state.observe(arm, losses[arm])?;
                arm
            }
            Player::Uniform(k) => uniform_random_step(*k, u_arm),
        };

        arm_counts[arm] += 1;
        acc.push(env, t, arm)?;
        if checkpoints.get(next_checkpoint) == Some(&t) {
            regret.push(acc.regret());
            next_checkpoint += 1;
        }
    }

    if let (Some(rec), Some(x_next)) = (pending.take(), x.as_ref()) {
        finalize(rec, x_next, &mut auditor, &mut records);
    }

    let final_scale = match &player {
        Player::UniInf(s) => Some(s.scale()),
        _ => None,
    };
    Ok(RunResult {
        policy: policy.label().to_string(),
        horizon,
        seed,
        benchmark_arm: best,
        pseudo_regret: acc.regret(),
        checkpoints,
        regret,
        arm_counts,
        final_scale,
        skip_count,
        records,
        audit: auditor.map(Auditor::finish),
        config_digest: None,
    })
}

/// Aggregate of independent trajectories with seeds `base_seed + rep`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub horizon: u64,
    pub base_seed: u64,
    pub mean: f64,
    pub std_error: f64,
    pub runs: Vec<RunResult>,
}

impl MonteCarloResult {
    pub fn regrets(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.pseudo_regret).collect()
    }
}

/// Recursive pairwise sum; the result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and standard error (`sd / sqrt(n)`, zero for a single value).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn monte_carlo(
    policy: &PolicySpec,
    env: &EnvironmentSpec,
    horizon: u64,
    reps: usize,
    base_seed: u64,
    opts: RunOptions,
) -> Result<MonteCarloResult> {
    if reps == 0 {
        return Err(domain("need at least one repetition"));
    }
    let results: Vec<Result<RunResult>> = (0..reps)
        .into_par_iter()
        .map(|rep| run(policy, env, horizon, base_seed.wrapping_add(rep as u64), opts))
        .collect();
    let mut runs = Vec::with_capacity(reps);
    for (rep, r) in results.into_iter().enumerate() {
        runs.push(r.map_err(|e| Error::Rep {
            rep,
            source: Box::new(e),
        })?);
    }
    let regrets: Vec<f64> = runs.iter().map(|r| r.pseudo_regret).collect();
    let (mean, std_error) = mean_and_std_error(&regrets);
    Ok(MonteCarloResult {
        horizon,
        base_seed,
        mean,
        std_error,
        runs,
    })
}
