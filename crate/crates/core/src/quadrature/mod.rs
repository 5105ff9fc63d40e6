//! Brute-force numerical oracle for I(h) = ∫_A ∫_B e^{ihL(x)y²} dx dy.
//!
//! The y-integral is done in closed form ([`ymoment`]), which leaves a
//! smooth oscillatory x-integrand G₀(h·L(x)). For p ≤ 2 it is integrated
//! with composite tensor Gauss–Legendre panels sized from the sampled
//! phase slope, and refined once by doubling to get the error estimate.
//! For p ∈ {3, 4} a randomly shifted Kronecker rule is used and the error
//! estimate is the standard error across shifts.

pub mod gauss;
mod qmc;
pub mod ymoment;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{BoxDomain, ExpressionField, YRange};
use crate::lagrangian::GeometricLagrangian;

pub use qmc::qmc_integrate;
pub use ymoment::{y_moment0, y_moments};

/// Panels handled per parallel work item.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    /// Lower bound on panels per dimension.
    pub min_panels: usize,
    /// Largest phase change allowed across one 16-point panel.
    pub radians_per_panel: f64,
    /// Upper bound on integrand evaluations (coarse plus refined grid).
    pub node_budget: u64,
    pub qmc_points: u64,
    pub qmc_shifts: usize,
    pub seed: u64,
    /// Samples per line when estimating the phase slope.
    pub slope_samples: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            min_panels: 16,
            radians_per_panel: 20.0,
            node_budget: 200_000_000,
            qmc_points: 1 << 20,
            qmc_shifts: 8,
            seed: 0,
            slope_samples: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    TensorGauss { panels: Vec<usize> },
    QuasiMonteCarlo { points: u64, shifts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub node_count: u64,
    pub h: f64,
    pub method: Method,
}

/// I(h) for a Lagrangian over its box. Requires h > 0 and p ≤ 4.
pub fn oscillatory_integral(
    l: &GeometricLagrangian,
    range: YRange,
    h: f64,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h = {h} must be positive and finite")));
    }
    integrate_field(l.field(), l.domain(), range, h, settings)
}

/// As [`oscillatory_integral`] for any field and box; `h` may be negative
/// (integrand e^{ihLy²} with the sign kept).
pub fn integrate_field(
    field: &ExpressionField,
    domain: &BoxDomain,
    range: YRange,
    h: f64,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult> {
    if domain.dim() != field.arity() {
        return Err(Error::DimensionMismatch {
            expected: field.arity(),
            got: domain.dim(),
        });
    }
    let integrand = |x: &[f64]| -> Result<Complex64> { Ok(y_moment0(h * field.value_unchecked(x)?, range)) };
    integrate_with(
        domain,
        &|x| field.value_unchecked(x),
        h.abs() * range.max_y2(),
        &integrand,
        settings,
    )
    .map(|r| QuadratureResult { h, ..r })
}

/// Integrates `integrand` over `domain`, sizing tensor panels from the
/// slope of `phase`·`scale` (p ≤ 2) or falling back to QMC (p ∈ {3, 4}).
/// The returned `h` is NaN; callers fill it in.
pub fn integrate_with(
    domain: &BoxDomain,
    phase: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    scale: f64,
    integrand: &(dyn Fn(&[f64]) -> Result<Complex64> + Sync),
    settings: &QuadratureSettings,
) -> Result<QuadratureResult> {
    match domain.dim() {
        1 | 2 => {
            let panels = panel_counts(phase, domain, scale, settings)?;
            let (value, error_estimate, node_count) = refined_tensor(domain, &panels, settings.node_budget, integrand)?;
            Ok(QuadratureResult {
                value,
                error_estimate,
                node_count,
                h: f64::NAN,
                method: Method::TensorGauss { panels },
            })
        }
        3 | 4 => {
            let (value, error_estimate) = qmc_integrate(
                domain,
                settings.qmc_points,
                settings.qmc_shifts,
                settings.seed,
                integrand,
            )?;
            Ok(QuadratureResult {
                value,
                error_estimate,
                node_count: settings.qmc_points * settings.qmc_shifts as u64,
                h: f64::NAN,
                method: Method::QuasiMonteCarlo {
                    points: settings.qmc_points,
                    shifts: settings.qmc_shifts,
                },
            })
        }
        p => Err(Error::InvalidArgument(format!(
            "the oracle supports 1 <= p <= 4 x-dimensions, got {p}"
        ))),
    }
}

/// Panels per dimension: enough that `scale`·|∂L/∂x_d|·(panel width)
/// stays below `radians_per_panel`, with the slope sampled along lines.
pub(crate) fn panel_counts(
    value: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    domain: &BoxDomain,
    scale: f64,
    settings: &QuadratureSettings,
) -> Result<Vec<usize>> {
    let p = domain.dim();
    let n = settings.slope_samples.max(16);
    const LINES: usize = 7;
    (0..p)
        .map(|d| {
            let others = p - 1;
            let line_count = LINES.pow(others as u32);
            let mut max_slope = 0.0f64;
            let mut point = vec![0.0; p];
            for line in 0..line_count {
                let mut idx = line;
                for (k, iv) in domain.intervals.iter().enumerate() {
                    if k == d {
                        continue;
                    }
                    let c = idx % LINES;
                    idx /= LINES;
                    point[k] = iv.lo + iv.width() * (c as f64 + 0.5) / LINES as f64;
                }
                let iv = domain.intervals[d];
                let step = iv.width() / (n - 1) as f64;
                point[d] = iv.lo;
                let mut prev = value(&point)?;
                for s in 1..n {
                    point[d] = iv.lo + step * s as f64;
                    let v = value(&point)?;
                    max_slope = max_slope.max((v - prev).abs() / step);
                    prev = v;
                }
            }
            let width = domain.intervals[d].width();
            let needed = (scale * max_slope * width / settings.radians_per_panel).ceil();
            Ok((needed as usize).max(settings.min_panels))
        })
        .collect()
}

/// Tensor rule on `panels` and on twice as many; returns the refined
/// value, |refined − coarse| (floored at roundoff level) and node count.
pub(crate) fn refined_tensor(
    domain: &BoxDomain,
    panels: &[usize],
    budget: u64,
    f: &(dyn Fn(&[f64]) -> Result<Complex64> + Sync),
) -> Result<(Complex64, f64, u64)> {
    let nodes = |pan: &[usize]| -> Option<u64> {
        pan.iter()
            .try_fold(1u64, |acc, &k| acc.checked_mul(k as u64 * gauss::ORDER as u64))
    };
    let fine_panels: Vec<usize> = panels.iter().map(|k| 2 * k).collect();
    let required = nodes(panels)
        .zip(nodes(&fine_panels))
        .and_then(|(a, b)| a.checked_add(b))
        .unwrap_or(u64::MAX);
    if required > budget {
        return Err(Error::ResolutionExceeded {
            required: usize::try_from(required).unwrap_or(usize::MAX),
            budget: usize::try_from(budget).unwrap_or(usize::MAX),
        });
    }
    let (coarse, _) = tensor_integrate(domain, panels, f)?;
    let (fine, abs_fine) = tensor_integrate(domain, &fine_panels, f)?;
    let floor = 64.0 * f64::EPSILON * abs_fine;
    Ok(((fine), (fine - coarse).norm().max(floor), required))
}

/// Composite tensor Gauss–Legendre; also returns ∫|f| for roundoff floors.
pub(crate) fn tensor_integrate(
    domain: &BoxDomain,
    panels: &[usize],
    f: &(dyn Fn(&[f64]) -> Result<Complex64> + Sync),
) -> Result<(Complex64, f64)> {
    let p = domain.dim();
    let (x, w) = gauss::nodes_weights();
    let widths: Vec<f64> = domain
        .intervals
        .iter()
        .zip(panels)
        .map(|(iv, &k)| iv.width() / k as f64)
        .collect();
    let total: usize = panels.iter().product();
    let per_panel = gauss::ORDER.pow(p as u32);
    let chunks = total.div_ceil(CHUNK);
    let chunk_sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut point = vec![0.0; p];
            let mut sums = Vec::with_capacity(CHUNK);
            let mut abs = 0.0;
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut lo = vec![0.0; p];
                let mut rest = idx;
                for d in 0..p {
                    lo[d] = domain.intervals[d].lo + widths[d] * (rest % panels[d]) as f64;
                    rest /= panels[d];
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for node in 0..per_panel {
                    let mut weight = 1.0;
                    let mut r = node;
                    for d in 0..p {
                        let k = r % gauss::ORDER;
                        r /= gauss::ORDER;
                        let half = 0.5 * widths[d];
                        point[d] = lo[d] + half * (1.0 + x[k]);
                        weight *= half * w[k];
                    }
                    let v = f(&point)?;
                    acc += v * weight;
                    abs += v.norm() * weight;
                }
                sums.push(acc);
            }
            Ok((pairwise_sum(&sums), abs))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<Complex64> = chunk_sums.iter().map(|c| c.0).collect();
    let abs = chunk_sums.iter().map(|c| c.1).sum();
    Ok((pairwise_sum(&values), abs))
}

/// Fixed-shape pairwise summation: the result depends only on the input
/// order, never on scheduling.
pub fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    match v.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::build_norm_lagrangian;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn lagrangian(src: &str, names: &[&str], bounds: &[(f64, f64)]) -> GeometricLagrangian {
        let f = ExpressionField::parse(src, names).unwrap();
        build_norm_lagrangian(&[f], BoxDomain::from_bounds(bounds).unwrap()).unwrap()
    }

    fn a12() -> YRange {
        YRange::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn constant_zero_lagrangian_gives_volume_times_length() {
        let l = lagrangian("(* 0 (var x))", &["x"], &[(0.0, 1.0)]);
        for h in [1.0, 100.0, 1e4] {
            let r = oscillatory_integral(&l, a12(), h, &QuadratureSettings::default()).unwrap();
            assert!((r.value - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn quadratic_well_matches_stationary_phase() {
        let l = lagrangian("(var x)", &["x"], &[(-1.0, 1.0)]);
        let r = oscillatory_integral(&l, a12(), 400.0, &QuadratureSettings::default()).unwrap();
        // √(2π/h)·2^{−1/2}·e^{iπ/4}·ln 2
        let expected = (2.0 * PI / 400.0).sqrt() / 2f64.sqrt() * 2f64.ln();
        assert!((r.value.norm() - expected).abs() < 0.1 * expected);
        assert!((r.value.arg() - FRAC_PI_4).abs() < 0.05);
        assert!(r.error_estimate < 1e-10);
    }

    #[test]
    fn refinement_is_within_error_estimate() {
        let l = lagrangian("(- (^ (var x) 2) (* 0.3 (var y)))", &["x", "y"], &[(-1.0, 1.0), (0.0, 0.5)]);
        let s = QuadratureSettings::default();
        let r = oscillatory_integral(&l, a12(), 60.0, &s).unwrap();
        let Method::TensorGauss { panels } = &r.method else { panic!() };
        let doubled: Vec<usize> = panels.iter().map(|k| 4 * k).collect();
        let field = l.field();
        let range = a12();
        let (v4, _) = tensor_integrate(l.domain(), &doubled, &|x| Ok(y_moment0(60.0 * field.value_unchecked(x)?, range)))
            .unwrap();
        assert!((v4 - r.value).norm() <= r.error_estimate);
    }

    #[test]
    fn conjugate_symmetry() {
        let l = lagrangian("(- (^ (var x) 2) 0.2)", &["x"], &[(-1.0, 1.5)]);
        let s = QuadratureSettings::default();
        let plus = integrate_field(l.field(), l.domain(), a12(), 250.0, &s).unwrap();
        let minus = integrate_field(l.field(), l.domain(), a12(), -250.0, &s).unwrap();
        assert!((plus.value.conj() - minus.value).norm() <= 1e-12);
    }

    #[test]
    fn budget_is_reported() {
        let l = lagrangian("(var x)", &["x"], &[(-1.0, 1.0)]);
        let s = QuadratureSettings {
            node_budget: 10_000,
            ..QuadratureSettings::default()
        };
        assert!(matches!(
            oscillatory_integral(&l, a12(), 1e4, &s),
            Err(Error::ResolutionExceeded { .. })
        ));
    }

    #[test]
    fn rejects_non_positive_h_and_high_dimension() {
        let l = lagrangian("(var x)", &["x"], &[(-1.0, 1.0)]);
        assert!(oscillatory_integral(&l, a12(), 0.0, &QuadratureSettings::default()).is_err());
        let names: Vec<String> = (0..5).map(|i| format!("x{i}")).collect();
        let f = ExpressionField::new(crate::fields::Expr::var(0), names).unwrap();
        let d = BoxDomain::from_bounds(&[(0.0, 1.0); 5]).unwrap();
        assert!(matches!(
            integrate_field(&f, &d, a12(), 1.0, &QuadratureSettings::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<Complex64> = (0..100).map(|k| Complex64::new(k as f64, -(k as f64))).collect();
        assert_eq!(pairwise_sum(&v), Complex64::new(4950.0, -4950.0));
    }
}
