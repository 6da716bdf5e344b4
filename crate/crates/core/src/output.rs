//! CSV and JSON artifacts, and the replay audit of a rounds file.
//!
//! Every CSV starts with a `# config_digest=<hex>` line followed by the header.
//! Floats are written with 17 significant digits so they reload bit-exactly.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::audit::{AuditReport, AuditRound, Auditor};
use crate::ftrl::{
    adjusted_benchmark, bregman_divergence_log_barrier, shift_for_increment, solve_log_barrier,
    CumulativeLoss, DEFAULT_TOL,
};
use crate::harness::{RoundRecord, RunResult};
use crate::policy::{next_scale_sq, skip_clip};
use crate::scaling::ScalingFit;

pub const REGRET_HEADER: &str = "T,rep,seed,pseudo_regret,final_S,skip_count";
pub const ROUNDS_HEADER: &str = "t,arm,x_opt,S,C,raw_loss,skip_loss,clip_loss,div,shift,skiperr";
pub const SCALING_HEADER: &str = "T,mean_regret,stderr";
const DIGEST_PREFIX: &str = "# config_digest=";

/// Growth-law tolerance for replays: `S` is stored, not `S^2`, so squaring costs a few ulps.
pub const REPLAY_GROWTH_ULPS: u64 = 16;
/// Relative tolerance when comparing recorded Div/Shift against their recomputation.
pub const REPLAY_REL_TOL: f64 = 1e-6;
/// Absolute floor for the same comparison.
pub const REPLAY_ABS_TOL: f64 = 1e-12;

#[derive(Debug)]
pub enum OutputError {
    Io(PathBuf, std::io::Error),
    Schema(String),
}

impl fmt::Display for OutputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            OutputError::Schema(m) => write!(f, "schema mismatch: {m}"),
        }
    }
}

impl std::error::Error for OutputError {}

fn schema(msg: impl Into<String>) -> OutputError {
    OutputError::Schema(msg.into())
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>, OutputError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| OutputError::Io(path.to_path_buf(), e))
}

fn write_lines(path: &Path, digest: &str, header: &str, rows: impl Iterator<Item = String>) -> Result<(), OutputError> {
    let io = |e| OutputError::Io(path.to_path_buf(), e);
    let mut w = create(path)?;
    writeln!(w, "{DIGEST_PREFIX}{digest}").map_err(io)?;
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One row per run; `final_S` is `NaN` for policies without a learning rate.
pub fn write_regret_csv(path: &Path, digest: &str, runs: &[(usize, &RunResult)]) -> Result<(), OutputError> {
    write_lines(
        path,
        digest,
        REGRET_HEADER,
        runs.iter().map(|(rep, r)| {
            format!(
                "{},{},{},{},{},{}",
                r.horizon,
                rep,
                r.seed,
                fmt_f64(r.pseudo_regret),
                fmt_f64(r.final_scale.unwrap_or(f64::NAN)),
                r.skip_count
            )
        }),
    )
}

pub fn write_rounds_csv(path: &Path, digest: &str, records: &[RoundRecord]) -> Result<(), OutputError> {
    write_lines(
        path,
        digest,
        ROUNDS_HEADER,
        records.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.arm,
                fmt_f64(r.x_best()),
                fmt_f64(r.scale),
                fmt_f64(r.threshold),
                fmt_f64(r.raw_loss),
                fmt_f64(r.skipped_loss),
                fmt_f64(r.clipped_loss),
                fmt_f64(r.div),
                fmt_f64(r.shift),
                fmt_f64(r.skip_err)
            )
        }),
    )
}

pub fn write_scaling_csv(path: &Path, digest: &str, horizons: &[u64], means: &[f64], std_errors: &[f64]) -> Result<(), OutputError> {
    write_lines(
        path,
        digest,
        SCALING_HEADER,
        horizons
            .iter()
            .zip(means)
            .zip(std_errors)
            .map(|((t, m), s)| format!("{t},{},{}", fmt_f64(*m), fmt_f64(*s))),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub config_digest: String,
    pub log_log_slope: f64,
    pub log_log_intercept: f64,
    pub log_log_r_squared: f64,
    pub log_t_slope: f64,
    pub log_t_intercept: f64,
    pub log_t_r_squared: f64,
    /// Grid indices whose mean regret was floored before taking logs.
    pub floored: Vec<usize>,
}

impl FitSummary {
    pub fn new(fit: &ScalingFit, digest: &str, floored: Vec<usize>) -> Self {
        Self {
            config_digest: digest.to_string(),
            log_log_slope: fit.log_log.slope,
            log_log_intercept: fit.log_log.intercept,
            log_log_r_squared: fit.log_log.r_squared,
            log_t_slope: fit.log_t.slope,
            log_t_intercept: fit.log_t.intercept,
            log_t_r_squared: fit.log_t.r_squared,
            floored,
        }
    }
}

pub fn write_fit_json(path: &Path, summary: &FitSummary) -> Result<(), OutputError> {
    let io = |e| OutputError::Io(path.to_path_buf(), e);
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, summary).map_err(|e| schema(e.to_string()))?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}

/// A CSV body: the digest line (if any), the header, and the data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub digest: Option<String>,
    pub header: String,
    pub rows: Vec<Vec<String>>,
}

pub fn read_csv(path: &Path) -> Result<CsvTable, OutputError> {
    let file = File::open(path).map_err(|e| OutputError::Io(path.to_path_buf(), e))?;
    let mut digest = None;
    let mut header = None;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| OutputError::Io(path.to_path_buf(), e))?;
        if line.starts_with('#') {
            if let Some(d) = line.strip_prefix(DIGEST_PREFIX) {
                digest = Some(d.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line);
        } else {
            rows.push(line.split(',').map(|s| s.trim().to_string()).collect());
        }
    }
    Ok(CsvTable {
        digest,
        header: header.ok_or_else(|| schema("missing header line"))?,
        rows,
    })
}

/// One parsed line of a rounds file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundsRow {
    pub t: u64,
    pub arm: usize,
    pub x_opt: f64,
    pub scale: f64,
    pub threshold: f64,
    pub raw_loss: f64,
    pub skip_loss: f64,
    pub clip_loss: f64,
    pub div: f64,
    pub shift: f64,
    pub skip_err: f64,
}

pub fn parse_rounds(table: &CsvTable) -> Result<Vec<RoundsRow>, OutputError> {
    if table.header != ROUNDS_HEADER {
        return Err(schema(format!("expected header `{ROUNDS_HEADER}`, found `{}`", table.header)));
    }
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, row) in table.rows.iter().enumerate() {
        if row.len() != 11 {
            return Err(schema(format!("data row {} has {} fields, expected 11", line + 1, row.len())));
        }
        let f = |i: usize| -> Result<f64, OutputError> {
            row[i]
                .parse::<f64>()
                .map_err(|_| schema(format!("data row {}: `{}` is not a number", line + 1, row[i])))
        };
        let int = |i: usize| -> Result<u64, OutputError> {
            row[i]
                .parse::<u64>()
                .map_err(|_| schema(format!("data row {}: `{}` is not an integer", line + 1, row[i])))
        };
        out.push(RoundsRow {
            t: int(0)?,
            arm: int(1)? as usize,
            x_opt: f(2)?,
            scale: f(3)?,
            threshold: f(4)?,
            raw_loss: f(5)?,
            skip_loss: f(6)?,
            clip_loss: f(7)?,
            div: f(8)?,
            shift: f(9)?,
            skip_err: f(10)?,
        });
    }
    Ok(out)
}

fn close(recorded: f64, recomputed: f64) -> bool {
    (recorded - recomputed).abs() <= REPLAY_REL_TOL * recorded.abs().max(recomputed.abs()) + REPLAY_ABS_TOL
}

/// Reconstructs the audit inputs from a rounds file and re-runs the auditor.
///
/// The played probability is recovered from `C = S / (4 (1 - x))`. With `K = 2`
/// this pins down the whole action vector, so `z_t`, Div, and Shift are also
/// recomputed and compared against the recorded values; for larger `K` only
/// the recorded values are checked against the bounds.
pub fn replay_audit(rows: &[RoundsRow], k: usize, horizon: u64) -> Result<AuditReport, OutputError> {
    if k < 2 {
        return Err(schema(format!("K must be at least 2, got {k}")));
    }
    if rows.len() as u64 != horizon {
        return Err(schema(format!("file has {} rounds, expected T = {horizon}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.t != i as u64 + 1 {
            return Err(schema(format!("round {} is labelled t = {}", i + 1, r.t)));
        }
        if r.arm >= k {
            return Err(schema(format!("t = {}: arm {} out of range for K = {k}", r.t, r.arm)));
        }
        if !(r.scale > 0.0 && r.threshold > 0.0) {
            return Err(schema(format!("t = {}: S and C must be positive", r.t)));
        }
    }

    let k_log_t = k as f64 * (horizon as f64).ln();
    let mut auditor = Auditor::with_growth_ulps(k, horizon, REPLAY_GROWTH_ULPS);
    let played = |r: &RoundsRow| 1.0 - r.scale / (4.0 * r.threshold);

    let two_arm = k == 2;
    let best = if two_arm { infer_best_two_arm(rows, played) } else { None };
    let y_tilde = match best {
        Some(b) => Some(adjusted_benchmark(2, b, horizon).map_err(|e| schema(e.to_string()))?),
        None => None,
    };
    if !two_arm {
        auditor.note(format!(
            "K = {k}: Div/Shift recomputation and closeness need the full action vector (K = 2 only)"
        ));
    }

    for (i, r) in rows.iter().enumerate() {
        let x_played = played(r);
        let one_minus_x = 1.0 - x_played;
        let outcome = skip_clip(r.raw_loss, r.threshold).map_err(|e| schema(e.to_string()))?;
        let loss_ok = outcome.skipped_loss == r.skip_loss
            && outcome.clipped_loss == r.clip_loss
            && r.skip_err == r.raw_loss - r.skip_loss;
        if !loss_ok {
            auditor.consistency(r.t, r.skip_loss, outcome.skipped_loss, false);
        }

        let scale_sq = r.scale * r.scale;
        let next_sq = match rows.get(i + 1) {
            Some(n) => n.scale * n.scale,
            None => next_scale_sq(scale_sq, &outcome, one_minus_x, k_log_t),
        };
        let next_scale = next_sq.sqrt();

        let mut round = AuditRound {
            t: r.t,
            x_played,
            scale: r.scale,
            next_scale,
            scale_sq,
            next_scale_sq: next_sq,
            skipped_loss: r.skip_loss,
            clipped_loss: r.clip_loss,
            was_skipped: outcome.was_skipped,
            div: r.div,
            shift: r.shift,
            x: None,
            z: None,
        };

        if let (true, Some(y)) = (two_arm, y_tilde.as_ref()) {
            let mut x = [0.0; 2];
            x[r.arm] = x_played;
            x[1 - r.arm] = one_minus_x;
            let b = best.unwrap_or(0);
            if !close(r.x_opt, x[b]) {
                auditor.consistency(r.t, r.x_opt, x[b], false);
            }
            // Any L with x_i = S / (L_i - Z) works; take Z = 0.
            let mut l = [r.scale / x[0], r.scale / x[1]];
            l[r.arm] += r.skip_loss / x_played;
            let losses = CumulativeLoss::new(l.to_vec()).map_err(|e| schema(e.to_string()))?;
            let solved = solve_log_barrier(&losses, r.scale, DEFAULT_TOL)
                .and_then(|z| Ok((z, solve_log_barrier(&losses, next_scale, DEFAULT_TOL)?)));
            match solved {
                Ok((z, x_next)) => {
                    let div = bregman_divergence_log_barrier(r.scale, &x, z.point.as_slice())
                        .map_err(|e| schema(e.to_string()))?;
                    let delta = (next_sq - scale_sq) / (next_scale + r.scale);
                    let shift = shift_for_increment(delta, y.as_slice(), x_next.point.as_slice());
                    auditor.consistency(r.t, r.div, div, close(r.div, div));
                    auditor.consistency(r.t, r.shift, shift, close(r.shift, shift));
                    round.x = Some(x.to_vec());
                    round.z = Some(z.point.into_vec());
                }
                Err(e) => auditor.note(format!("t = {}: recomputation failed: {e}", r.t)),
            }
        }
        auditor.push(&round);
    }
    Ok(auditor.finish())
}

/// The benchmark arm of a two-arm file: the arm whose probability is `x_opt`.
fn infer_best_two_arm(rows: &[RoundsRow], played: impl Fn(&RoundsRow) -> f64) -> Option<usize> {
    for r in rows {
        let xp = played(r);
        let matches_played = close(r.x_opt, xp);
        let matches_other = close(r.x_opt, 1.0 - xp);
        match (matches_played, matches_other) {
            (true, false) => return Some(r.arm),
            (false, true) => return Some(1 - r.arm),
            _ => {}
        }
    }
    Some(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 4.013548756459278, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }
}
