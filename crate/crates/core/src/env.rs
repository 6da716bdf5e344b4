//! Heavy-tailed loss environments built from three-point laws.
//!
//! A three-point arm takes the values `mu - m`, `mu`, `mu + m` with
//! probabilities `p/2`, `1 - p`, `p/2`. Its mean, alpha-moment, and truncated
//! expectations are all available in closed form, so the heavy-tail moment
//! bound, truncated non-negativity, and best-arm uniqueness can be checked
//! exactly instead of assumed.
//!
//! `alpha` and `sigma` on [`EnvironmentSpec`] are claims used for verification
//! and scaling fits. The policy never sees them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_finite, Error, Result};

/// A loss law on three atoms, symmetric around its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePointArm {
    pub mean: f64,
    pub spread: f64,
    pub tail_prob: f64,
}

impl ThreePointArm {
    pub fn new(mean: f64, spread: f64, tail_prob: f64) -> Result<Self> {
        let arm = Self {
            mean,
            spread,
            tail_prob,
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mean", self.mean)?;
        ensure_finite("spread", self.spread)?;
        ensure_finite("tail_prob", self.tail_prob)?;
        if self.spread <= 0.0 {
            return Err(domain(format!("spread must be positive, got {}", self.spread)));
        }
        if !(0.0..=1.0).contains(&self.tail_prob) {
            return Err(domain(format!(
                "tail probability must lie in [0, 1], got {}",
                self.tail_prob
            )));
        }
        Ok(())
    }

    /// The three atoms and their probabilities, lowest value first.
    pub fn atoms(&self) -> [(f64, f64); 3] {
        let half = 0.5 * self.tail_prob;
        [
            (self.mean - self.spread, half),
            (self.mean, 1.0 - self.tail_prob),
            (self.mean + self.spread, half),
        ]
    }

    /// Inverse-CDF draw from a uniform in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        let half = 0.5 * self.tail_prob;
        if u < half {
            self.mean - self.spread
        } else if u >= 1.0 - half {
            self.mean + self.spread
        } else {
            self.mean
        }
    }

    /// `E[X 1{|X| > level}]`.
    pub fn truncated_expectation(&self, level: f64) -> f64 {
        self.atoms()
            .iter()
            .filter(|(v, _)| v.abs() > level)
            .map(|(v, w)| v * w)
            .sum()
    }
}

/// Exact `E|X|^alpha` of a three-point arm.
pub fn alpha_moment(arm: &ThreePointArm, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mu = arm.mean;
    let m = arm.spread;
    let p = arm.tail_prob;
    Ok((1.0 - p) * mu.abs().powf(alpha)
        + 0.5 * p * ((mu - m).abs().powf(alpha) + (mu + m).abs().powf(alpha)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (1, 2], got {alpha}")))
    }
}

/// One stage of an oblivious adversarial schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub length: u64,
    pub arms: Vec<ThreePointArm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Stochastic { arms: Vec<ThreePointArm> },
    AdversarialSchedule { phases: Vec<Phase> },
}

/// A loss environment plus its claimed heavy-tail parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub kind: EnvKind,
    pub alpha: f64,
    pub sigma: f64,
}

impl EnvironmentSpec {
    pub fn stochastic(arms: Vec<ThreePointArm>, alpha: f64, sigma: f64) -> Result<Self> {
        let env = Self {
            kind: EnvKind::Stochastic { arms },
            alpha,
            sigma,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn adversarial(phases: Vec<Phase>, alpha: f64, sigma: f64) -> Result<Self> {
        let env = Self {
            kind: EnvKind::AdversarialSchedule { phases },
            alpha,
            sigma,
        };
        env.validate()?;
        Ok(env)
    }

    /// Structural validity: arm counts, parameter ranges, phase lengths.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        ensure_finite("sigma", self.sigma)?;
        if self.sigma < 0.0 {
            return Err(domain(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        match &self.kind {
            EnvKind::Stochastic { arms } => check_arm_list(arms),
            EnvKind::AdversarialSchedule { phases } => {
                if phases.is_empty() {
                    return Err(domain("adversarial schedule has no phases"));
                }
                let k = phases[0].arms.len();
                for (j, ph) in phases.iter().enumerate() {
                    if ph.length == 0 {
                        return Err(domain(format!("phase {j} has zero length")));
                    }
                    if ph.arms.len() != k {
                        return Err(domain(format!(
                            "phase {j} has {} arms, phase 0 has {k}",
                            ph.arms.len()
                        )));
                    }
                    check_arm_list(&ph.arms)?;
                }
                Ok(())
            }
        }
    }

    pub fn num_arms(&self) -> usize {
        match &self.kind {
            EnvKind::Stochastic { arms } => arms.len(),
            EnvKind::AdversarialSchedule { phases } => phases[0].arms.len(),
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self.kind, EnvKind::Stochastic { .. })
    }

    /// Number of rounds the environment can serve; `None` when unbounded.
    pub fn schedule_length(&self) -> Option<u64> {
        match &self.kind {
            EnvKind::Stochastic { .. } => None,
            EnvKind::AdversarialSchedule { phases } => Some(phases.iter().map(|p| p.length).sum()),
        }
    }

    /// The arm laws in force at round `t` (1-based).
    pub fn arms_at(&self, t: u64) -> Result<&[ThreePointArm]> {
        if t == 0 {
            return Err(domain("rounds are 1-based; got t = 0"));
        }
        match &self.kind {
            EnvKind::Stochastic { arms } => Ok(arms),
            EnvKind::AdversarialSchedule { phases } => {
                let mut end = 0;
                for ph in phases {
                    end += ph.length;
                    if t <= end {
                        return Ok(&ph.arms);
                    }
                }
                Err(domain(format!("round {t} is past the schedule end {end}")))
            }
        }
    }

    /// Sum over rounds `1..=horizon` of each arm's mean loss.
    pub fn cumulative_means(&self, horizon: u64) -> Result<Vec<f64>> {
        match &self.kind {
            EnvKind::Stochastic { arms } => {
                Ok(arms.iter().map(|a| a.mean * horizon as f64).collect())
            }
            EnvKind::AdversarialSchedule { phases } => {
                let mut totals = vec![0.0; phases[0].arms.len()];
                let mut remaining = horizon;
                for ph in phases {
                    let n = ph.length.min(remaining);
                    for (tot, a) in totals.iter_mut().zip(&ph.arms) {
                        *tot += a.mean * n as f64;
                    }
                    remaining -= n;
                    if remaining == 0 {
                        break;
                    }
                }
                if remaining > 0 {
                    return Err(domain(format!(
                        "horizon {horizon} exceeds the schedule length {}",
                        horizon - remaining
                    )));
                }
                Ok(totals)
            }
        }
    }

    /// Fixed arm with the lowest cumulative mean over the horizon; ties go to
    /// the lowest index. For stochastic environments this is the best arm.
    pub fn benchmark_arm(&self, horizon: u64) -> Result<usize> {
        Ok(argmin_first(&self.cumulative_means(horizon)?))
    }

    /// Every law the environment can produce, tagged with its phase.
    fn laws(&self) -> Vec<(Option<usize>, &[ThreePointArm])> {
        match &self.kind {
            EnvKind::Stochastic { arms } => vec![(None, arms.as_slice())],
            EnvKind::AdversarialSchedule { phases } => phases
                .iter()
                .enumerate()
                .map(|(j, p)| (Some(j), p.arms.as_slice()))
                .collect(),
        }
    }
}

fn check_arm_list(arms: &[ThreePointArm]) -> Result<()> {
    if arms.len() < 2 {
        return Err(domain(format!("need at least 2 arms, got {}", arms.len())));
    }
    arms.iter().try_for_each(ThreePointArm::validate)
}

pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEntry {
    pub phase: Option<usize>,
    pub arm: usize,
    pub moment: f64,
    pub bound: f64,
    /// `bound - moment`; negative on violation.
    pub margin: f64,
}

/// Per-arm outcome of the heavy-tail moment check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub alpha: f64,
    pub sigma: f64,
    pub entries: Vec<MomentEntry>,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.margin >= 0.0)
    }
}

impl fmt::Display for MomentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "moment bound E|X|^{} <= sigma^alpha = {:.6}",
            self.alpha,
            self.sigma.powf(self.alpha)
        )?;
        for e in &self.entries {
            let phase = e.phase.map_or(String::new(), |p| format!("phase {p} "));
            writeln!(
                f,
                "  {phase}arm {}: moment {:.6}, margin {:+.6} [{}]",
                e.arm,
                e.moment,
                e.margin,
                if e.margin >= 0.0 { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Checks `E|X|^alpha <= sigma^alpha` for every arm in every phase.
pub fn check_moment_bound(env: &EnvironmentSpec) -> MomentReport {
    let bound = env.sigma.powf(env.alpha);
    let mut entries = Vec::new();
    for (phase, arms) in env.laws() {
        for (arm, law) in arms.iter().enumerate() {
            let moment = alpha_moment(law, env.alpha).unwrap_or(f64::INFINITY);
            entries.push(MomentEntry {
                phase,
                arm,
                moment,
                bound,
                margin: bound - moment,
            });
        }
    }
    MomentReport {
        alpha: env.alpha,
        sigma: env.sigma,
        entries,
    }
}

/// Outcome of the truncated non-negativity check on one arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationCheck {
    pub holds: bool,
    /// Each interval `[lo, hi)` of truncation levels on which `E[X 1{|X| > M}]`
    /// is constant, with that constant. `hi` is infinite for the last one.
    pub intervals: Vec<(f64, f64, f64)>,
    /// A level `M` with `E[X 1{|X| > M}] < 0`, when one exists.
    pub witness: Option<f64>,
}

/// Decides whether `E[X 1{|X| > M}] >= 0` for every `M >= 0`.
///
/// The truncated expectation only changes at the atom magnitudes, so it is
/// enough to evaluate it once on each interval between consecutive magnitudes.
pub fn check_truncated_nonneg(arm: &ThreePointArm) -> TruncationCheck {
    let mut cuts: Vec<f64> = arm.atoms().iter().map(|(v, _)| v.abs()).collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut intervals = Vec::with_capacity(cuts.len());
    let mut witness = None;
    for (j, &lo) in cuts.iter().enumerate() {
        let hi = cuts.get(j + 1).copied().unwrap_or(f64::INFINITY);
        let value = arm.truncated_expectation(lo);
        if value < 0.0 && witness.is_none() {
            witness = Some(lo);
        }
        intervals.push((lo, hi, value));
    }
    TruncationCheck {
        holds: witness.is_none(),
        intervals,
        witness,
    }
}

/// Gap structure of a stochastic environment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gaps {
    pub deltas: Vec<f64>,
    pub delta_min: f64,
    pub best: usize,
}

pub fn gap_vector(env: &EnvironmentSpec) -> Result<Gaps> {
    let arms = match &env.kind {
        EnvKind::Stochastic { arms } => arms,
        EnvKind::AdversarialSchedule { .. } => {
            return Err(domain("gap vector is defined for stochastic environments only"))
        }
    };
    let means: Vec<f64> = arms.iter().map(|a| a.mean).collect();
    let best = argmin_first(&means);
    let ties: Vec<usize> = (0..means.len()).filter(|&i| means[i] == means[best]).collect();
    if ties.len() > 1 {
        return Err(Error::NonUniqueBestArm(ties));
    }
    let deltas: Vec<f64> = means.iter().map(|m| m - means[best]).collect();
    let delta_min = deltas
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    Ok(Gaps {
        deltas,
        delta_min,
        best,
    })
}

/// Draws the full loss vector for round `t` from one uniform per arm.
pub fn sample_loss_vector(env: &EnvironmentSpec, t: u64, uniforms: &[f64]) -> Result<Vec<f64>> {
    let arms = env.arms_at(t)?;
    if uniforms.len() != arms.len() {
        return Err(domain(format!(
            "got {} uniforms for {} arms",
            uniforms.len(),
            arms.len()
        )));
    }
    Ok(arms.iter().zip(uniforms).map(|(a, &u)| a.sample(u)).collect())
}

/// Parameters of [`make_switching_adversary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingParams {
    pub k: usize,
    pub phases: u64,
    pub base_mean: f64,
    pub gap: f64,
    pub spread: f64,
    pub tail_prob: f64,
    pub alpha: f64,
    pub sigma: f64,
}

/// An oblivious schedule whose lowest-mean arm rotates every phase.
///
/// Phase `j` gives arm `j mod K` the mean `base_mean - gap` and every other arm
/// `base_mean`; all arms share the same heavy tail. Phases have length
/// `T / phases`, the last one absorbing the remainder. A single phase yields a
/// stochastic environment.
pub fn make_switching_adversary(params: &SwitchingParams, horizon: u64) -> Result<EnvironmentSpec> {
    let SwitchingParams {
        k,
        phases,
        base_mean,
        gap,
        spread,
        tail_prob,
        alpha,
        sigma,
    } = *params;
    if k < 2 {
        return Err(domain(format!("need K >= 2 arms, got {k}")));
    }
    if phases == 0 || phases > horizon {
        return Err(domain(format!(
            "phase count {phases} must lie in [1, T = {horizon}]"
        )));
    }
    ensure_finite("base_mean", base_mean)?;
    ensure_finite("gap", gap)?;
    if gap <= 0.0 {
        return Err(domain(format!("gap must be positive, got {gap}")));
    }

    let best_law = ThreePointArm::new(base_mean - gap, spread, tail_prob)?;
    let other_law = ThreePointArm::new(base_mean, spread, tail_prob)?;
    let arms_for = |phase: u64| -> Vec<ThreePointArm> {
        let best = (phase % k as u64) as usize;
        (0..k)
            .map(|i| if i == best { best_law } else { other_law })
            .collect()
    };

    let env = if phases == 1 {
        EnvironmentSpec::stochastic(arms_for(0), alpha, sigma)?
    } else {
        let base_len = horizon / phases;
        let schedule = (0..phases)
            .map(|j| Phase {
                length: if j + 1 == phases {
                    horizon - base_len * (phases - 1)
                } else {
                    base_len
                },
                arms: arms_for(j),
            })
            .collect();
        EnvironmentSpec::adversarial(schedule, alpha, sigma)?
    };

    let report = check_moment_bound(&env);
    if !report.passed() {
        return Err(domain(format!(
            "switching adversary violates the declared moment bound:\n{report}"
        )));
    }
    if !check_truncated_nonneg(&best_law).holds {
        return Err(domain(format!(
            "phase-1 best arm (mean {}) is not truncated non-negative",
            best_law.mean
        )));
    }
    Ok(env)
}
