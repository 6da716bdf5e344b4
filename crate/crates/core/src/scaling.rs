//! Least-squares fits of mean regret against the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub horizons: Vec<u64>,
    pub mean_regrets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
    /// `ln R = intercept + slope * ln T`.
    pub log_log: LineFit,
    /// `R = intercept + slope * ln T`.
    pub log_t: LineFit,
}

impl ScalingFit {
    pub fn slope(&self) -> f64 {
        self.log_log.slope
    }
}

/// Fits `(x, y)` by least squares; `R^2 = 1` when the residual vanishes.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(domain("least squares needs two or more paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(domain("abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r_squared = if ss_res == 0.0 || ss_tot == 0.0 {
        if ss_res <= f64::EPSILON * f64::EPSILON * ss_tot.max(1.0) {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

pub fn fit_scaling(horizons: &[u64], mean_regrets: &[f64]) -> Result<ScalingFit> {
    if horizons.len() < 3 {
        return Err(domain(format!("need ≥ 3 horizons, got {}", horizons.len())));
    }
    if horizons.len() != mean_regrets.len() {
        return Err(domain("horizon and regret lists differ in length"));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return Err(domain("horizons must be positive and strictly increasing"));
    }
    if let Some(bad) = mean_regrets.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(domain(format!(
            "mean regret {bad} is not positive; floor it before fitting"
        )));
    }
    let log_t: Vec<f64> = horizons.iter().map(|&t| (t as f64).ln()).collect();
    let log_r: Vec<f64> = mean_regrets.iter().map(|r| r.ln()).collect();
    Ok(ScalingFit {
        horizons: horizons.to_vec(),
        mean_regrets: mean_regrets.to_vec(),
        std_errors: None,
        log_log: least_squares(&log_t, &log_r)?,
        log_t: least_squares(&log_t, mean_regrets)?,
    })
}

/// Replaces non-positive regrets by `floor`, returning the indices that were changed.
pub fn floor_regrets(mean_regrets: &mut [f64], floor: f64) -> Vec<usize> {
    let mut flagged = Vec::new();
    for (i, r) in mean_regrets.iter_mut().enumerate() {
        if *r < floor {
            *r = floor;
            flagged.push(i);
        }
    }
    flagged
}
