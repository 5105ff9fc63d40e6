//! Stationary-phase representation of I(h) from classified critical points.
//!
//! A critical point xⱼ of L contributes
//! (2π/h)^{p/2}·|det H|^{−1/2}·e^{iπσ/4}·∫_A y^{−p} e^{ihL(xⱼ)y²} dy.
//! For zero-level points the y-integral is the constant S = ∫_A y^{−p} dy;
//! for the others it oscillates and decays like 1/(hL(xⱼ)).

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critpoints::CriticalPoint;
use crate::error::{Error, Result};
use crate::fields::YRange;
use crate::quadrature::{gauss, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    ZeroLevel,
    NonzeroLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTerm {
    pub source: CriticalPoint,
    pub kind: TermKind,
    /// |det H|^{−1/2}.
    pub amplitude: f64,
    /// πσ/4.
    pub phase_constant: f64,
    /// L(xⱼ) multiplying h·y² in the y-integral; 0 for zero-level terms.
    pub oscillation: f64,
    /// Power of h the term decays with.
    pub order: f64,
}

impl AsymptoticTerm {
    pub fn from_point(point: &CriticalPoint) -> Self {
        let p = point.location.len() as f64;
        let (kind, oscillation, order) = if point.zero_level {
            (TermKind::ZeroLevel, 0.0, -p / 2.0)
        } else {
            (TermKind::NonzeroLevel, point.l_value, -p / 2.0 - 1.0)
        };
        Self {
            source: point.clone(),
            kind,
            amplitude: point.det.abs().powf(-0.5),
            phase_constant: FRAC_PI_4 * point.signature as f64,
            oscillation,
            order,
        }
    }

    pub fn dim(&self) -> usize {
        self.source.location.len()
    }
}

pub fn terms_from_points(points: &[CriticalPoint]) -> Vec<AsymptoticTerm> {
    points.iter().map(AsymptoticTerm::from_point).collect()
}

/// S = ∫_A y^{−p} dy.
pub fn boundary_constant(range: YRange, p: i32) -> Result<f64> {
    let (a, b) = (range.lo(), range.hi());
    if a <= 0.0 && b >= 0.0 {
        return Err(Error::DomainViolation(format!("0 lies in A = [{a}, {b}]")));
    }
    Ok(if p == 1 {
        (b.abs() / a.abs()).ln()
    } else {
        let e = 1 - p;
        (b.powi(e) - a.powi(e)) / e as f64
    })
}

/// ∫_A y^{−p} e^{iλy²} dy by adaptive Gauss–Legendre on panels short
/// enough to hold about one oscillation each.
pub fn oscillatory_boundary_integral(range: YRange, p: i32, lambda: f64) -> Complex64 {
    let (a, b) = (range.lo(), range.hi());
    let span = (lambda * (b * b - a * a)).abs();
    let panels = ((span / (2.0 * PI)).ceil() as usize).max(1);
    let width = (b - a) / panels as f64;
    let scale = a.abs().min(b.abs()).powi(-p) * (b - a);
    let tol = 1e-12 * scale / panels as f64;
    let f = |y: f64| Complex64::cis(lambda * y * y) * y.powi(-p);
    let parts: Vec<Complex64> = (0..panels)
        .map(|k| {
            let lo = a + width * k as f64;
            let hi = if k + 1 == panels { b } else { lo + width };
            gauss::adaptive(&f, lo, hi, tol, 16)
        })
        .collect();
    pairwise_sum(&parts)
}

/// Zero-level and nonzero-level parts of the asymptotic value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParts {
    pub zero_level: Complex64,
    pub nonzero_level: Complex64,
}

impl AsymptoticParts {
    pub fn total(&self) -> Complex64 {
        self.zero_level + self.nonzero_level
    }
}

/// I₁(h) + I₂(h).
pub fn asymptotic_value(terms: &[AsymptoticTerm], range: YRange, p: usize, h: f64) -> Result<Complex64> {
    asymptotic_parts(terms, range, p, h).map(|parts| parts.total())
}

/// Evaluates both sums. Every nonzero-level y-integral J(h) is checked
/// against the integration-by-parts bound |J| ≤ min|y|^{−p−1}/(h|L(xⱼ)|)
/// at h and 2h.
pub fn asymptotic_parts(terms: &[AsymptoticTerm], range: YRange, p: usize, h: f64) -> Result<AsymptoticParts> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h = {h} must be positive and finite")));
    }
    for (index, t) in terms.iter().enumerate() {
        if t.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: t.dim(),
            });
        }
        if t.source.degenerate || t.source.det == 0.0 {
            return Err(Error::DegenerateHessian {
                index,
                det: t.source.det,
            });
        }
    }
    let pi = p as i32;
    let s = boundary_constant(range, pi)?;
    let prefactor = (2.0 * PI / h).powf(p as f64 / 2.0);
    let min_y = range.lo().abs().min(range.hi().abs());
    let contributions = terms
        .par_iter()
        .map(|t| {
            let unit = Complex64::from_polar(prefactor * t.amplitude, t.phase_constant);
            match t.kind {
                TermKind::ZeroLevel => Ok((unit * s, Complex64::new(0.0, 0.0))),
                TermKind::NonzeroLevel => {
                    let j = oscillatory_boundary_integral(range, pi, h * t.oscillation);
                    let j2 = oscillatory_boundary_integral(range, pi, 2.0 * h * t.oscillation);
                    let bound = |hh: f64| min_y.powi(-pi - 1) / (hh * t.oscillation.abs()) * (1.0 + 1e-9);
                    if j.norm() > bound(h) || j2.norm() > bound(2.0 * h) {
                        return Err(Error::EvaluatorFailure {
                            h,
                            message: format!(
                                "nonzero-level term at L = {:e} does not decay like 1/(hL)",
                                t.oscillation
                            ),
                        });
                    }
                    Ok((Complex64::new(0.0, 0.0), unit * j))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let zero: Vec<Complex64> = contributions.iter().map(|c| c.0).collect();
    let nonzero: Vec<Complex64> = contributions.iter().map(|c| c.1).collect();
    Ok(AsymptoticParts {
        zero_level: pairwise_sum(&zero),
        nonzero_level: pairwise_sum(&nonzero),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum PhaseVerdict {
    Converges { phase: f64 },
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDiagnostics {
    pub min_nonzero_l: Option<f64>,
    pub degenerate_count: usize,
    pub zero_level_count: usize,
    pub nonzero_level_count: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePrediction {
    pub verdict: PhaseVerdict,
    /// Terms entering the limiting phase.
    pub contributing_terms: usize,
    /// h-power of the dominant contribution, if any term exists.
    pub dominant_order: Option<f64>,
    /// Σ |det Hᵢ|^{−1/2} e^{iπσᵢ/4}·sign(S) over non-degenerate zero-level points.
    pub weight_sum: Option<Complex64>,
    pub diagnostics: PredictionDiagnostics,
}

/// The large-h phase verdict. At least one non-degenerate zero-level
/// point gives a limit; no points or only non-degenerate nonzero-level
/// ones give divergence; anything involving degenerate points without a
/// usable zero-level point is inconclusive.
pub fn predict_phase(points: &[CriticalPoint], range: YRange, p: usize) -> Result<PhasePrediction> {
    if let Some(bad) = points.iter().find(|pt| pt.location.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: bad.location.len(),
        });
    }
    let s = boundary_constant(range, p as i32)?;
    let usable: Vec<AsymptoticTerm> = points
        .iter()
        .filter(|pt| pt.zero_level && !pt.degenerate && pt.det != 0.0)
        .map(AsymptoticTerm::from_point)
        .collect();
    let degenerate_count = points.iter().filter(|pt| pt.degenerate).count();
    let zero_level_count = points.iter().filter(|pt| pt.zero_level).count();
    let min_nonzero_l = points
        .iter()
        .filter(|pt| !pt.zero_level)
        .map(|pt| pt.l_value)
        .min_by(f64::total_cmp);
    let mut diagnostics = PredictionDiagnostics {
        min_nonzero_l,
        degenerate_count,
        zero_level_count,
        nonzero_level_count: points.len() - zero_level_count,
        reason: String::new(),
    };
    let half_p = p as f64 / 2.0;
    if usable.is_empty() {
        let (verdict, reason, order) = if points.is_empty() {
            (PhaseVerdict::Diverges, "no interior critical points", None)
        } else if degenerate_count > 0 {
            (
                PhaseVerdict::Inconclusive,
                "only degenerate points could carry a limit",
                Some(-half_p),
            )
        } else {
            (
                PhaseVerdict::Diverges,
                "only nonzero-level critical points",
                Some(-half_p - 1.0),
            )
        };
        diagnostics.reason = reason.into();
        return Ok(PhasePrediction {
            verdict,
            contributing_terms: 0,
            dominant_order: order,
            weight_sum: None,
            diagnostics,
        });
    }
    let weights: Vec<Complex64> = usable
        .iter()
        .map(|t| Complex64::from_polar(t.amplitude, t.phase_constant))
        .collect();
    let sum = pairwise_sum(&weights) * s.signum();
    let scale: f64 = usable.iter().map(|t| t.amplitude).sum();
    let verdict = if sum.norm() <= 1e-12 * scale {
        diagnostics.reason = "zero-level weights cancel".into();
        PhaseVerdict::Inconclusive
    } else {
        diagnostics.reason = "non-degenerate zero-level critical points".into();
        PhaseVerdict::Converges { phase: sum.arg() }
    };
    Ok(PhasePrediction {
        verdict,
        contributing_terms: usable.len(),
        dominant_order: Some(-half_p),
        weight_sum: Some(sum),
        diagnostics,
    })
}
