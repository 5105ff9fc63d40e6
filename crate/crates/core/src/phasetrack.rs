//! Phase of I(h) along an increasing h-schedule, unwrapped, with a
//! windowed convergence verdict.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackSettings {
    /// Trailing samples whose spread decides the verdict.
    pub window: usize,
    /// Spread (radians) at or below which the phase counts as settled.
    pub epsilon: f64,
    /// |value| must exceed this multiple of its error estimate.
    pub noise_factor: f64,
}

impl Default for TrackSettings {
    fn default() -> Self {
        Self {
            window: 5,
            epsilon: 0.05,
            noise_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub h: f64,
    pub value: Complex64,
    pub error_estimate: f64,
    /// arg(value) ∈ (−π, π].
    pub raw_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum TrackVerdict {
    /// `limit` is the last unwrapped phase reduced to (−π, π]; `residual`
    /// the window spread.
    Converged { limit: f64, residual: f64 },
    NotConverged { spread: f64 },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSequence {
    pub samples: Vec<PhaseSample>,
    pub unwrapped: Vec<f64>,
    pub verdict: TrackVerdict,
}

/// h = base·2^{k/2} for k = 0..count.
pub fn geometric_schedule(base: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| base * 2f64.powf(k as f64 / 2.0)).collect()
}

pub fn default_schedule() -> Vec<f64> {
    geometric_schedule(100.0, 16)
}

/// Reduces an angle to (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r > PI { r - TAU } else { r }
}

/// Nearest-branch continuation: each phase is shifted by the multiple of
/// 2π that brings it closest to its predecessor.
pub fn unwrap_phases(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    for (i, &phi) in raw.iter().enumerate() {
        if i == 0 {
            out.push(phi);
            continue;
        }
        let prev: f64 = out[i - 1];
        let k = ((prev - phi) / TAU).round();
        out.push(phi + k * TAU);
    }
    out
}

/// Evaluates `evaluator` (value and error estimate) at every h and
/// decides whether the phase settles.
pub fn track_phase<E>(evaluator: E, schedule: &[f64], settings: &TrackSettings) -> Result<PhaseSequence>
where
    E: Fn(f64) -> Result<(Complex64, f64)> + Sync,
{
    if schedule.len() < 8 || schedule.len() < settings.window {
        return Err(Error::InvalidArgument(format!(
            "schedule needs at least max(8, window) points, got {}",
            schedule.len()
        )));
    }
    if schedule.windows(2).any(|w| !(w[1] > w[0])) || !schedule.iter().all(|h| h.is_finite()) {
        return Err(Error::InvalidArgument("schedule must be finite and strictly increasing".into()));
    }
    if settings.window < 2 || !(settings.epsilon > 0.0) {
        return Err(Error::InvalidArgument("window must be >= 2 and epsilon positive".into()));
    }
    let evaluated = schedule
        .par_iter()
        .map(|&h| match evaluator(h) {
            Ok(v) => Ok((h, v)),
            Err(Error::EvaluatorFailure { h, message }) => Err(Error::EvaluatorFailure { h, message }),
            Err(e) => Err(Error::EvaluatorFailure {
                h,
                message: e.to_string(),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<PhaseSample> = evaluated
        .into_iter()
        .map(|(h, (value, error_estimate))| PhaseSample {
            h,
            value,
            error_estimate,
            raw_phase: value.arg(),
        })
        .collect();
    let raw: Vec<f64> = samples.iter().map(|s| s.raw_phase).collect();
    let unwrapped = unwrap_phases(&raw);
    let verdict = decide(&samples, &unwrapped, settings);
    Ok(PhaseSequence {
        samples,
        unwrapped,
        verdict,
    })
}

fn decide(samples: &[PhaseSample], unwrapped: &[f64], settings: &TrackSettings) -> TrackVerdict {
    if let Some(s) = samples
        .iter()
        .find(|s| !(s.value.norm() > settings.noise_factor * s.error_estimate))
    {
        return TrackVerdict::Inconclusive {
            reason: format!(
                "|I| = {:e} at h = {} is within {}x its error estimate {:e}",
                s.value.norm(),
                s.h,
                settings.noise_factor,
                s.error_estimate
            ),
        };
    }
    let tail = &unwrapped[unwrapped.len() - settings.window..];
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = max - min;
    if spread <= settings.epsilon {
        TrackVerdict::Converged {
            limit: wrap_phase(*tail.last().expect("window is non-empty")),
            residual: spread,
        }
    } else if spread >= 10.0 * settings.epsilon {
        TrackVerdict::NotConverged { spread }
    } else {
        TrackVerdict::Inconclusive {
            reason: format!("window spread {spread:.4} rad is between epsilon and 10 epsilon"),
        }
    }
}
