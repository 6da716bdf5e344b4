//! Per-round audits of the deterministic inequalities behind the regret
//! decomposition: the Bregman (Div) and Psi-shifting (Shift) bounds, the
//! multiplicative closeness of `z_t` to `x_t`, and the learning-rate laws.
//!
//! Violations are reported, never thrown. Each check also records the largest
//! observed ratio of value to bound so reports show how tight the bounds run.

use std::fmt;

use serde::Serialize;

use crate::policy::skip_growth_factor;

/// Per-round Div constant.
pub const DIV_ROUND_CONST: f64 = 2048.0;
/// Cumulative Div constant.
pub const DIV_CUMULATIVE_CONST: f64 = 4096.0;
/// Per-round Div values between the primary and this constant are reported as relaxed.
pub const DIV_ROUND_RELAXED_CONST: f64 = 8192.0;
/// Relaxed cumulative constant, `8192 (1 + sqrt 2)`.
pub const DIV_CUMULATIVE_RELAXED_CONST: f64 = 8192.0 * (1.0 + std::f64::consts::SQRT_2);
/// Additive slack on the closeness band `x/2 <= z <= 2x`.
pub const CLOSENESS_SLACK: f64 = 1e-9;
/// Default tolerance on the skip-round growth ratio.
pub const DEFAULT_GROWTH_ULPS: u64 = 4;

/// One round of diagnostics as the auditor sees it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRound {
    pub t: u64,
    /// `x_{t, i_t}`.
    pub x_played: f64,
    pub scale: f64,
    pub next_scale: f64,
    pub scale_sq: f64,
    pub next_scale_sq: f64,
    pub skipped_loss: f64,
    pub clipped_loss: f64,
    pub was_skipped: bool,
    pub div: f64,
    pub shift: f64,
    /// Full `x_t` and `z_t` when available.
    pub x: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    DivRound,
    DivCumulative,
    ShiftRound,
    ShiftCumulative,
    Closeness,
    ScaleMonotone,
    ScaleGrowth,
    SkipGrowth,
    Consistency,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::DivRound,
        CheckKind::DivCumulative,
        CheckKind::ShiftRound,
        CheckKind::ShiftCumulative,
        CheckKind::Closeness,
        CheckKind::ScaleMonotone,
        CheckKind::ScaleGrowth,
        CheckKind::SkipGrowth,
        CheckKind::Consistency,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            CheckKind::DivRound => "Div_t <= 2048 S_t^-1 (l_skip)^2 (1-x)^2",
            CheckKind::DivCumulative => "sum Div <= 4096 S_{t+1} K ln T",
            CheckKind::ShiftRound => "Shift_t <= 1/2 S_t^-1 (l_clip)^2 (1-x)^2",
            CheckKind::ShiftCumulative => "sum Shift <= S_{t+1} K ln T",
            CheckKind::Closeness => "x/2 <= z <= 2x",
            CheckKind::ScaleMonotone => "S_{t+1} >= S_t",
            CheckKind::ScaleGrowth => "S_{t+1} <= sqrt(2) S_t",
            CheckKind::SkipGrowth => "skip round: S_{t+1}^2 / S_t^2 = 1 + 1/(16 K ln T)",
            CheckKind::Consistency => "recorded Div/Shift match recomputation",
        }
    }

    fn index(self) -> usize {
        CheckKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CheckKind::DivRound => "div_round",
            CheckKind::DivCumulative => "div_cumulative",
            CheckKind::ShiftRound => "shift_round",
            CheckKind::ShiftCumulative => "shift_cumulative",
            CheckKind::Closeness => "closeness",
            CheckKind::ScaleMonotone => "scale_monotone",
            CheckKind::ScaleGrowth => "scale_growth",
            CheckKind::SkipGrowth => "skip_growth",
            CheckKind::Consistency => "consistency",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub t: u64,
    pub check: CheckKind,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub check: CheckKind,
    pub evaluated: u64,
    pub violations: u64,
    /// Largest `value / bound` seen (for closeness, the largest of `x/(2z)` and `z/(2x)`;
    /// for the growth laws, the largest ulp distance).
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub rounds: u64,
    pub summaries: Vec<CheckSummary>,
    pub violations: Vec<Violation>,
    /// Div rounds that only meet the relaxed constants.
    pub relaxed: Vec<Violation>,
    /// Rounds where `Shift_t < 0` (possible once some `x_{t+1,i} < 1/T`).
    pub negative_shift_rounds: u64,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self, check: CheckKind) -> &CheckSummary {
        &self.summaries[check.index()]
    }

    pub fn violation_count(&self, check: CheckKind) -> u64 {
        self.summary(check).violations
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "audit over {} rounds", self.rounds)?;
        for s in &self.summaries {
            if s.evaluated == 0 {
                writeln!(f, "  {:<16} not evaluated   {}", s.check.to_string(), s.check.describe())?;
            } else {
                writeln!(
                    f,
                    "  {:<16} {:>8} checked, {:>4} violations, max ratio {:.4e}   {}",
                    s.check.to_string(),
                    s.evaluated,
                    s.violations,
                    s.max_ratio,
                    s.check.describe()
                )?;
            }
        }
        if !self.relaxed.is_empty() {
            writeln!(
                f,
                "  {} Div rounds hold only with the relaxed 8192 constants",
                self.relaxed.len()
            )?;
        }
        if self.negative_shift_rounds > 0 {
            writeln!(f, "  {} rounds with negative Shift", self.negative_shift_rounds)?;
        }
        for v in self.violations.iter().take(20) {
            if v.check == CheckKind::Consistency {
                writeln!(
                    f,
                    "  VIOLATION t={} {}: recorded {:.6e}, recomputed {:.6e}",
                    v.t, v.check, v.value, v.bound
                )?;
            } else {
                writeln!(
                    f,
                    "  VIOLATION t={} {}: value {:.6e} > bound {:.6e}",
                    v.t, v.check, v.value, v.bound
                )?;
            }
        }
        if self.violations.len() > 20 {
            writeln!(f, "  ... {} more", self.violations.len() - 20)?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

/// Distance between two finite positive floats in units in the last place.
pub fn ulp_distance(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

/// Streaming auditor: feed rounds in order, then call [`Auditor::finish`].
#[derive(Debug, Clone)]
pub struct Auditor {
    k_log_t: f64,
    growth_ulps: u64,
    div_sum: f64,
    shift_sum: f64,
    report: AuditReport,
}

impl Auditor {
    pub fn new(k: usize, horizon: u64) -> Self {
        Self::with_growth_ulps(k, horizon, DEFAULT_GROWTH_ULPS)
    }

    pub fn with_growth_ulps(k: usize, horizon: u64, growth_ulps: u64) -> Self {
        let summaries = CheckKind::ALL
            .iter()
            .map(|&check| CheckSummary {
                check,
                evaluated: 0,
                violations: 0,
                max_ratio: 0.0,
            })
            .collect();
        Self {
            k_log_t: k as f64 * (horizon as f64).ln(),
            growth_ulps,
            div_sum: 0.0,
            shift_sum: 0.0,
            report: AuditReport {
                rounds: 0,
                summaries,
                violations: Vec::new(),
                relaxed: Vec::new(),
                negative_shift_rounds: 0,
                notes: Vec::new(),
            },
        }
    }

    fn record(&mut self, t: u64, check: CheckKind, value: f64, bound: f64, ratio: f64, ok: bool) {
        let s = &mut self.report.summaries[check.index()];
        s.evaluated += 1;
        if ratio > s.max_ratio || ratio.is_nan() {
            s.max_ratio = ratio;
        }
        if !ok {
            s.violations += 1;
            self.report.violations.push(Violation {
                t,
                check,
                value,
                bound,
            });
        }
    }

    fn ratio(value: f64, bound: f64) -> f64 {
        if bound > 0.0 {
            value / bound
        } else if value <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Flags a failed recomputation cross-check.
    pub fn consistency(&mut self, t: u64, recorded: f64, recomputed: f64, ok: bool) {
        let ratio = Self::ratio((recorded - recomputed).abs(), recomputed.abs());
        self.record(t, CheckKind::Consistency, recorded, recomputed, ratio, ok);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.report.notes.push(note.into());
    }

    pub fn push(&mut self, r: &AuditRound) {
        self.report.rounds += 1;
        let t = r.t;
        let one_minus_x = 1.0 - r.x_played;

        // Div, per round and cumulative.
        let base = r.skipped_loss * r.skipped_loss * one_minus_x * one_minus_x / r.scale;
        let bound = DIV_ROUND_CONST * base;
        let ratio = Self::ratio(r.div, base);
        let relaxed_ok = ratio <= DIV_ROUND_RELAXED_CONST;
        self.record(t, CheckKind::DivRound, r.div, bound, ratio / DIV_ROUND_CONST, r.div <= bound || (relaxed_ok && ratio.is_finite()));
        if r.div > bound && relaxed_ok {
            self.report.relaxed.push(Violation {
                t,
                check: CheckKind::DivRound,
                value: r.div,
                bound,
            });
        }
        self.div_sum += r.div;
        let cum_base = r.next_scale * self.k_log_t;
        let cum_bound = DIV_CUMULATIVE_CONST * cum_base;
        let cum_ratio = Self::ratio(self.div_sum, cum_base);
        self.record(
            t,
            CheckKind::DivCumulative,
            self.div_sum,
            cum_bound,
            cum_ratio / DIV_CUMULATIVE_CONST,
            cum_ratio <= DIV_CUMULATIVE_RELAXED_CONST,
        );
        if self.div_sum > cum_bound && cum_ratio <= DIV_CUMULATIVE_RELAXED_CONST {
            self.report.relaxed.push(Violation {
                t,
                check: CheckKind::DivCumulative,
                value: self.div_sum,
                bound: cum_bound,
            });
        }

        // Shift, per round and cumulative.
        let shift_bound =
            0.5 * r.clipped_loss * r.clipped_loss * one_minus_x * one_minus_x / r.scale;
        self.record(
            t,
            CheckKind::ShiftRound,
            r.shift,
            shift_bound,
            Self::ratio(r.shift, shift_bound),
            r.shift <= shift_bound,
        );
        if r.shift < 0.0 {
            self.report.negative_shift_rounds += 1;
        }
        self.shift_sum += r.shift;
        let shift_cum_bound = r.next_scale * self.k_log_t;
        self.record(
            t,
            CheckKind::ShiftCumulative,
            self.shift_sum,
            shift_cum_bound,
            Self::ratio(self.shift_sum, shift_cum_bound),
            self.shift_sum <= shift_cum_bound,
        );

        // Closeness band.
        if let (Some(x), Some(z)) = (&r.x, &r.z) {
            let mut worst = 0.0f64;
            let mut ok = true;
            let mut offending = (0.0, 0.0);
            for (&xi, &zi) in x.iter().zip(z) {
                let low = 0.5 * xi - CLOSENESS_SLACK;
                let high = 2.0 * xi + CLOSENESS_SLACK;
                if zi < low || zi > high {
                    ok = false;
                    offending = (zi, if zi < low { low } else { high });
                }
                worst = worst.max(xi / (2.0 * zi)).max(zi / (2.0 * xi));
            }
            self.record(t, CheckKind::Closeness, offending.0, offending.1, worst, ok);
        }

        // Learning-rate laws.
        self.record(
            t,
            CheckKind::ScaleMonotone,
            r.next_scale_sq,
            r.scale_sq,
            if r.next_scale_sq >= r.scale_sq { 0.0 } else { 1.0 },
            r.next_scale_sq >= r.scale_sq,
        );
        let growth_bound = 2.0 * r.scale_sq;
        self.record(
            t,
            CheckKind::ScaleGrowth,
            r.next_scale_sq,
            growth_bound,
            Self::ratio(r.next_scale_sq, growth_bound),
            r.next_scale_sq <= growth_bound,
        );
        if r.was_skipped {
            let expected = skip_growth_factor(self.k_log_t);
            let observed = r.next_scale_sq / r.scale_sq;
            let dist = ulp_distance(observed, expected);
            self.record(
                t,
                CheckKind::SkipGrowth,
                observed,
                expected,
                dist as f64,
                dist <= self.growth_ulps,
            );
        }
    }

    pub fn finish(mut self) -> AuditReport {
        if self.report.summary(CheckKind::Closeness).evaluated == 0 && self.report.rounds > 0 {
            self.report
                .notes
                .push("closeness band not evaluated: posterior points unavailable".into());
        }
        self.report
    }
}

/// Audits a complete stream of rounds.
pub fn decomposition_audit<'a, I>(rounds: I, k: usize, horizon: u64) -> AuditReport
where
    I: IntoIterator<Item = &'a AuditRound>,
{
    let mut a = Auditor::new(k, horizon);
    for r in rounds {
        a.push(r);
    }
    a.finish()
}
