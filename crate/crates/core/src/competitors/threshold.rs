//! Speed-band classifier and its calibration from a speed histogram.

use crate::activity::{Activity, ActivitySequence};
use crate::error::{Error, Result};

/// Closed speed band `[lo, hi]` (knots) classified as Fishing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    lo: f64,
    hi: f64,
}

impl ThresholdConfig {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParams(format!("invalid speed band [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Fishing iff the speed lies in the band; invalid steps are Unestimated.
pub fn threshold_classify(speeds: &[f64], valid: &[bool], cfg: &ThresholdConfig) -> ActivitySequence {
    speeds
        .iter()
        .zip(valid)
        .map(|(&v, &ok)| match (ok, cfg.contains(v)) {
            (false, _) => Activity::Unestimated,
            (true, true) => Activity::Fishing,
            (true, false) => Activity::Steaming,
        })
        .collect()
}

/// Minimum number of speeds accepted by [`estimate_thresholds`].
pub const MIN_CALIBRATION_SPEEDS: usize = 100;

const GMM_COMPONENTS: usize = 3;
const GMM_MAX_ITER: usize = 1000;
const GMM_TOL: f64 = 1e-10;
const GMM_MIN_VARIANCE: f64 = 1e-4;
const GMM_DEGENERATE_STREAK: usize = 10;

/// One-dimensional Gaussian mixture fitted by EM.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
}

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean).powi(2) / var)
}

/// Three-component mixture, components sorted by mean.
pub fn fit_speed_mixture(speeds: &[f64]) -> Result<SpeedMixture> {
    let k = GMM_COMPONENTS;
    let n = speeds.len() as f64;
    let mean = speeds.iter().sum::<f64>() / n;
    let var = speeds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > GMM_MIN_VARIANCE) {
        return Err(Error::ThresholdEstimation("speed distribution is degenerate".into()));
    }
    let mut sorted = speeds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut means: Vec<f64> = (0..k).map(|j| quantile(&sorted, (j as f64 + 0.5) / k as f64)).collect();
    let mut variances = vec![var; k];
    let mut weights = vec![1.0 / k as f64; k];
    let mut resp = vec![0.0; speeds.len() * k];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut streak = 0;
    let mut iterations = 0;
    let mut ll;
    loop {
        ll = 0.0;
        for (i, &x) in speeds.iter().enumerate() {
            let row = &mut resp[i * k..(i + 1) * k];
            for j in 0..k {
                row[j] = weights[j].ln() + ln_normal(x, means[j], variances[j]);
            }
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|l| (l - m).exp()).sum();
            let lse = m + s.ln();
            ll += lse;
            for r in row.iter_mut() {
                *r = (*r - lse).exp();
            }
        }
        if !ll.is_finite() {
            return Err(Error::ThresholdEstimation("mixture likelihood is not finite".into()));
        }
        if ((ll - prev_ll) / ll.abs()).abs() < GMM_TOL || iterations >= GMM_MAX_ITER {
            break;
        }
        prev_ll = ll;
        let mut clamped = false;
        for j in 0..k {
            let w: f64 = (0..speeds.len()).map(|i| resp[i * k + j]).sum();
            if !(w > f64::EPSILON) {
                continue;
            }
            let mu = speeds.iter().enumerate().map(|(i, x)| resp[i * k + j] * x).sum::<f64>() / w;
            let v = speeds.iter().enumerate().map(|(i, x)| resp[i * k + j] * (x - mu).powi(2)).sum::<f64>() / w;
            weights[j] = w / n;
            means[j] = mu;
            variances[j] = if v < GMM_MIN_VARIANCE {
                clamped = true;
                GMM_MIN_VARIANCE
            } else {
                v
            };
        }
        streak = if clamped { streak + 1 } else { 0 };
        if streak > GMM_DEGENERATE_STREAK {
            return Err(Error::ThresholdEstimation("mixture component collapsed".into()));
        }
        iterations += 1;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
    Ok(SpeedMixture {
        weights: order.iter().map(|&j| weights[j]).collect(),
        means: order.iter().map(|&j| means[j]).collect(),
        variances: order.iter().map(|&j| variances[j]).collect(),
        log_likelihood: ll,
        iterations,
    })
}

/// Band of ±2 standard deviations around the middle component of a
/// three-component speed mixture, clipped at zero.
pub fn estimate_thresholds(speeds: &[f64]) -> Result<ThresholdConfig> {
    if speeds.len() < MIN_CALIBRATION_SPEEDS {
        return Err(Error::ThresholdEstimation(format!(
            "{} speeds available, at least {MIN_CALIBRATION_SPEEDS} needed",
            speeds.len()
        )));
    }
    if speeds.iter().any(|v| !v.is_finite()) {
        return Err(Error::ThresholdEstimation("non-finite speed".into()));
    }
    let mix = fit_speed_mixture(speeds)?;
    let sd = mix.variances[1].sqrt();
    ThresholdConfig::new((mix.means[1] - 2.0 * sd).max(0.0), mix.means[1] + 2.0 * sd)
        .map_err(|e| Error::ThresholdEstimation(e.to_string()))
}
