//! Goodness-of-fit statistics between an observed and a predicted series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("series lengths differ: {observed} observed vs {predicted} predicted")]
    LengthMismatch { observed: usize, predicted: usize },
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("series contains a non-finite value")]
    NonFinite,
}

/// R² (coefficient of determination), Pearson R, MSE and MAE.
///
/// `r` is `None` when either series is constant. `r2` is 1 for a constant
/// observed series matched exactly and 0 otherwise, since its usual
/// denominator vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub r2: f64,
    pub r: Option<f64>,
    pub mse: f64,
    pub mae: f64,
    pub n: usize,
}

pub fn compute_metrics(observed: &[f64], predicted: &[f64]) -> Result<FitMetrics, MetricsError> {
    let n = observed.len();
    if predicted.len() != n {
        return Err(MetricsError::LengthMismatch { observed: n, predicted: predicted.len() });
    }
    if n < 2 {
        return Err(MetricsError::TooFewPoints(n));
    }
    if observed.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let nf = n as f64;
    let mean_obs = observed.iter().sum::<f64>() / nf;
    let mean_pred = predicted.iter().sum::<f64>() / nf;

    let (mut ss_res, mut abs_res, mut ss_tot, mut ss_pred, mut cross) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (y, yhat) in observed.iter().zip(predicted) {
        let e = y - yhat;
        ss_res += e * e;
        abs_res += e.abs();
        let dy = y - mean_obs;
        let dp = yhat - mean_pred;
        ss_tot += dy * dy;
        ss_pred += dp * dp;
        cross += dy * dp;
    }

    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    let r = (ss_tot > 0.0 && ss_pred > 0.0)
        .then(|| (cross / (ss_tot.sqrt() * ss_pred.sqrt())).clamp(-1.0, 1.0));
    Ok(FitMetrics { r2, r, mse: ss_res / nf, mae: abs_res / nf, n })
}

/// Mean squared error with divisor `n`; the search objective.
pub fn mse(observed: &[f64], predicted: &[f64]) -> f64 {
    debug_assert_eq!(observed.len(), predicted.len());
    let ss: f64 = observed.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum();
    ss / observed.len() as f64
}
