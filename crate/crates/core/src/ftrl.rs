//! Log-barrier FTRL over the probability simplex.
//!
//! The FTRL step minimizes `<L, x> - S * sum_i ln x_i` over the simplex. Its KKT
//! conditions give `x_i = S / (L_i - Z)` for a scalar multiplier `Z < min_i L_i`,
//! and `Z` is the unique root of `sum_i S / (L_i - Z) = 1`.
//!
//! The solver works with the gap `u = min L - Z > 0`, so that
//! `x_i = S / (d_i + u)` with `d_i = L_i - min L >= 0`. The map
//! `u -> sum_i S / (d_i + u)` is strictly decreasing, equals at least `1`
//! at `u = S` and at most `1` at `u = K * S`, which brackets the root.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_finite, Error, Result};

/// Tolerance on `|sum(x) - 1|` accepted by [`SimplexPoint::new`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;
/// Default absolute tolerance on the KKT residual `|sum(x) - 1|`.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration cap shared by the bisection and Newton phases.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Bisection stops once the bracket is narrower than this fraction of its lower end.
const BISECTION_REL_WIDTH: f64 = 1e-3;

/// A probability vector with strictly positive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint {
    probs: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(domain(format!("simplex point needs K >= 2, got {}", probs.len())));
        }
        for (i, &p) in probs.iter().enumerate() {
            ensure_finite(&format!("x[{i}]"), p)?;
            if p <= 0.0 {
                return Err(domain(format!("x[{i}] = {p} is not strictly positive")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(domain(format!("entries sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    /// The uniform distribution over `k` arms.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(domain(format!("simplex point needs K >= 2, got {k}")));
        }
        Ok(Self {
            probs: vec![1.0 / k as f64; k],
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.probs
    }
}

/// Accumulated importance-weighted losses, one entry per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeLoss {
    values: Vec<f64>,
}

impl CumulativeLoss {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            ensure_finite(&format!("L[{i}]"), v)?;
        }
        Ok(Self { values })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            values: vec![0.0; k],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Adds `delta` entrywise. Fails if the sum overflows to a non-finite value.
    pub fn add(&self, delta: &[f64]) -> Result<Self> {
        if delta.len() != self.values.len() {
            return Err(domain(format!(
                "loss vector has {} entries, expected {}",
                delta.len(),
                self.values.len()
            )));
        }
        let values: Vec<f64> = self.values.iter().zip(delta).map(|(a, b)| a + b).collect();
        Self::new(values)
    }
}

/// Root-finder settings for [`solve_log_barrier_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Minimizer of the log-barrier FTRL objective together with its KKT multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct LogBarrierSolution {
    pub point: SimplexPoint,
    /// Lagrange multiplier `Z`, strictly below `min L`.
    pub multiplier: f64,
    /// `|sum_i S / (L_i - Z) - 1|` before renormalization.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `argmin_x <L, x> - S * sum ln x_i` over the simplex with default settings.
pub fn solve_log_barrier(losses: &CumulativeLoss, scale: f64, tol: f64) -> Result<LogBarrierSolution> {
    solve_log_barrier_with(
        losses,
        scale,
        SolverConfig {
            tol,
            ..SolverConfig::default()
        },
    )
}

pub fn solve_log_barrier_with(
    losses: &CumulativeLoss,
    scale: f64,
    cfg: SolverConfig,
) -> Result<LogBarrierSolution> {
    ensure_finite("S", scale)?;
    let l = losses.as_slice();
    for (i, &v) in l.iter().enumerate() {
        ensure_finite(&format!("L[{i}]"), v)?;
    }
    if scale <= 0.0 {
        return Err(domain(format!("S must be positive, got {scale}")));
    }
    if l.len() < 2 {
        return Err(domain(format!("need K >= 2 arms, got {}", l.len())));
    }
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(domain(format!("tol must be positive, got {}", cfg.tol)));
    }

    let k = l.len();
    let min_l = l.iter().copied().fold(f64::INFINITY, f64::min);
    let gaps: Vec<f64> = l.iter().map(|&v| v - min_l).collect();

    // f(u) = sum_i S / (d_i + u) - 1, decreasing and convex in u.
    let eval = |u: f64| -> (f64, f64) {
        let mut f = -1.0;
        let mut df = 0.0;
        for &d in &gaps {
            let inv = 1.0 / (d + u);
            f += scale * inv;
            df -= scale * inv * inv;
        }
        (f, df)
    };

    let mut lo = scale;
    let mut hi = k as f64 * scale;
    let mut iterations = 0;

    while hi - lo > BISECTION_REL_WIDTH * lo && iterations < cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        let (f, _) = eval(mid);
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let mut u = lo;
    let (mut f, mut df) = eval(u);
    while f.abs() > cfg.tol && iterations < cfg.max_iter {
        let step = f / df;
        let mut next = u - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == u {
            break;
        }
        u = next;
        (f, df) = eval(u);
        if f > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        iterations += 1;
    }

    let residual = f.abs();
    if residual > cfg.tol {
        return Err(Error::NoConvergence {
            iterations,
            residual,
            tol: cfg.tol,
        });
    }

    let mut probs: Vec<f64> = gaps.iter().map(|&d| scale / (d + u)).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }

    Ok(LogBarrierSolution {
        point: SimplexPoint { probs },
        multiplier: min_l - u,
        residual,
        iterations,
    })
}

fn check_interior(name: &str, x: &[f64]) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        ensure_finite(&format!("{name}[{i}]"), v)?;
        if v <= 0.0 {
            return Err(domain(format!("{name}[{i}] = {v} is not interior")));
        }
    }
    Ok(())
}

/// `w - ln(1 + w)`, accurate for small `|w|`.
fn excess_log(w: f64) -> f64 {
    if w.abs() < 1e-4 {
        // Alternating series; the w^6 term is below 1e-24 relative here.
        let w2 = w * w;
        w2 * (0.5 - w / 3.0 + w2 / 4.0 - w2 * w / 5.0)
    } else {
        w - w.ln_1p()
    }
}

/// Bregman divergence of the scaled log-barrier, `S * sum_i (r_i - 1 - ln r_i)` with `r_i = x_i / z_i`.
pub fn bregman_divergence_log_barrier(scale: f64, x: &[f64], z: &[f64]) -> Result<f64> {
    ensure_finite("S", scale)?;
    if scale <= 0.0 {
        return Err(domain(format!("S must be positive, got {scale}")));
    }
    if x.len() != z.len() {
        return Err(domain(format!("dimension mismatch: {} vs {}", x.len(), z.len())));
    }
    check_interior("x", x)?;
    check_interior("z", z)?;
    let total: f64 = x
        .iter()
        .zip(z)
        .map(|(&xi, &zi)| excess_log((xi - zi) / zi))
        .sum();
    Ok(scale * total)
}

/// The regularizer value `-S * sum_i ln x_i`.
pub fn psi_value(scale: f64, x: &[f64]) -> Result<f64> {
    ensure_finite("S", scale)?;
    check_interior("x", x)?;
    Ok(-scale * x.iter().map(|v| v.ln()).sum::<f64>())
}

/// Cost of raising the regularizer scale from `S_t` to `S_next`, measured between
/// the adjusted benchmark `y_tilde` and the next iterate `x_next`.
pub fn psi_shift(scale: f64, next_scale: f64, y_tilde: &[f64], x_next: &[f64]) -> Result<f64> {
    ensure_finite("S_t", scale)?;
    ensure_finite("S_next", next_scale)?;
    if next_scale < scale {
        return Err(domain(format!(
            "learning-rate scale decreased from {scale} to {next_scale}"
        )));
    }
    if y_tilde.len() != x_next.len() {
        return Err(domain(format!(
            "dimension mismatch: {} vs {}",
            y_tilde.len(),
            x_next.len()
        )));
    }
    check_interior("y_tilde", y_tilde)?;
    check_interior("x_next", x_next)?;
    Ok(shift_for_increment(next_scale - scale, y_tilde, x_next))
}

/// `delta * sum_i (ln x_next_i - ln y_tilde_i)`; inputs must already be validated.
pub(crate) fn shift_for_increment(delta: f64, y_tilde: &[f64], x_next: &[f64]) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let barrier: f64 = y_tilde
        .iter()
        .zip(x_next)
        .map(|(y, x)| x.ln() - y.ln())
        .sum();
    delta * barrier
}

/// Upper bound `(S_next - S_t) * K * ln T` on [`psi_shift`] when every `y_tilde_i >= 1/T`.
pub fn psi_shift_bound(scale: f64, next_scale: f64, k: usize, horizon: u64) -> f64 {
    (next_scale - scale) * k as f64 * (horizon as f64).ln()
}

/// The adjusted benchmark: `1/T` on every arm except `best`, which gets the rest.
pub fn adjusted_benchmark(k: usize, best: usize, horizon: u64) -> Result<SimplexPoint> {
    if best >= k {
        return Err(domain(format!("benchmark arm {best} out of range for K = {k}")));
    }
    if horizon < k as u64 {
        return Err(domain(format!(
            "adjusted benchmark needs T >= K (T = {horizon}, K = {k})"
        )));
    }
    let off = 1.0 / horizon as f64;
    let mut probs = vec![off; k];
    probs[best] = 1.0 - (k as f64 - 1.0) * off;
    SimplexPoint::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn symmetric_three_arms() {
        let sol = solve_log_barrier(&CumulativeLoss::zeros(3), 5.0, 1e-12).unwrap();
        for &p in sol.point.as_slice() {
            assert!(close(p, 1.0 / 3.0, 1e-12));
        }
        assert!(close(sol.multiplier, -15.0, 1e-9));
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn two_arm_instance() {
        let l = CumulativeLoss::new(vec![0.0, 10.0]).unwrap();
        let sol = solve_log_barrier(&l, 4.0, 1e-12).unwrap();
        // u^2 + 2u - 40 = 0  =>  u = -1 + sqrt(41)
        let u = -1.0 + 41f64.sqrt();
        assert!(close(sol.multiplier, -u, 1e-9));
        assert!(close(sol.point[0], 4.0 / u, 1e-9));
        assert!(close(sol.point[0], 0.7403124, 1e-6));
        assert!(close(sol.point[1], 0.2596876, 1e-6));
        assert!(close(sol.multiplier, -5.403124, 1e-6));
    }

    #[test]
    fn equal_losses_give_uniform() {
        let l = CumulativeLoss::new(vec![5.0, 5.0]).unwrap();
        let sol = solve_log_barrier(&l, 4.0, 1e-12).unwrap();
        assert_eq!(sol.point.as_slice(), &[0.5, 0.5]);
        assert!(close(sol.multiplier, -3.0, 1e-10));
    }

    #[test]
    fn rejects_bad_inputs() {
        let l = CumulativeLoss::zeros(2);
        assert!(matches!(solve_log_barrier(&l, 0.0, 1e-12), Err(Error::Domain(_))));
        assert!(matches!(solve_log_barrier(&l, -1.0, 1e-12), Err(Error::Domain(_))));
        assert!(matches!(
            solve_log_barrier(&l, f64::NAN, 1e-12),
            Err(Error::NonFiniteInput(_))
        ));
        assert!(matches!(
            solve_log_barrier(&CumulativeLoss::zeros(1), 1.0, 1e-12),
            Err(Error::Domain(_))
        ));
        assert!(CumulativeLoss::new(vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let l = CumulativeLoss::new(vec![0.3, 7.1, -2.2]).unwrap();
        let cfg = SolverConfig {
            tol: 1e-12,
            max_iter: 2,
        };
        let err = solve_log_barrier_with(&l, 1.7, cfg).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn bregman_values() {
        assert_eq!(
            bregman_divergence_log_barrier(7.0, &[0.3, 0.7], &[0.3, 0.7]).unwrap(),
            0.0
        );
        // (2 - 1 - ln 2) + (2/3 - 1 - ln(2/3))
        let expected = (1.0 - 2f64.ln()) + (-1.0 / 3.0 - (2.0f64 / 3.0).ln());
        let d1 = bregman_divergence_log_barrier(1.0, &[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!(close(d1, expected, 1e-15));
        assert!(close(d1, 0.378985, 1e-6));
        let d2 = bregman_divergence_log_barrier(2.0, &[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!(close(d2, 0.757970, 1e-6));
        assert!(bregman_divergence_log_barrier(1.0, &[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn psi_values() {
        assert!(close(psi_value(1.0, &[0.5, 0.5]).unwrap(), 2.0 * 2f64.ln(), 1e-15));
        let third = 1.0 / 3.0;
        assert!(close(
            psi_value(3.0, &[third, third, third]).unwrap(),
            9.887511,
            1e-6
        ));
        assert!(matches!(psi_value(1.0, &[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn psi_shift_values() {
        assert_eq!(psi_shift(4.0, 4.0, &[0.99, 0.01], &[0.5, 0.5]).unwrap(), 0.0);
        let s = psi_shift(4.0, 4.1, &[0.99, 0.01], &[0.5, 0.5]).unwrap();
        let expected = (4.1 - 4.0) * (-(0.99f64.ln()) - 0.01f64.ln() + 2.0 * 0.5f64.ln());
        assert!(close(s, expected, 1e-14));
        assert!(close(s, 0.322893, 1e-6));
        let bound = psi_shift_bound(4.0, 4.1, 2, 100);
        assert!(close(bound, 0.921034, 1e-6));
        assert!(s <= bound);
        assert!(matches!(
            psi_shift(4.1, 4.0, &[0.5, 0.5], &[0.5, 0.5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn adjusted_benchmark_shape() {
        let y = adjusted_benchmark(3, 1, 100).unwrap();
        assert_eq!(y[0], 0.01);
        assert_eq!(y[2], 0.01);
        assert!(close(y[1], 0.98, 1e-15));
        assert!(adjusted_benchmark(3, 3, 100).is_err());
        assert!(adjusted_benchmark(5, 0, 4).is_err());
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(vec![1.0, 0.0]).is_err());
        assert!(SimplexPoint::new(vec![0.6, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![1.0]).is_err());
        let json = serde_json::to_string(&SimplexPoint::new(vec![0.25, 0.75]).unwrap()).unwrap();
        assert_eq!(json, "[0.25,0.75]");
        assert!(serde_json::from_str::<SimplexPoint>("[0.2,0.2]").is_err());
    }
}
