//! Perturbative expansion of the coupled phase integral in β:
//! ∫∫ e^{ih(L₁+L₂+βL₃)y²} = Σⱼ (ihβ)ʲ/j! · ∫∫ L₃ʲ y²ʲ e^{ih(L₁+L₂)y²}.
//!
//! The y-integral of every term is the exact moment Gⱼ(h(L₁+L₂)), so each
//! term is an x-integral over the same quadrature backend as the oracle.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{BoxDomain, Expr, ExpressionField, Interval, YRange};
use crate::lagrangian::{sin_squared_of_reciprocal, GeometricLagrangian};
use crate::quadrature::{integrate_with, y_moment0, y_moments, QuadratureSettings};

pub const DEFAULT_MAX_ORDER: usize = 8;

/// Grid points per axis when sampling max L₃.
const COUPLING_SAMPLES: usize = 129;

/// L₁ + L₂ and L₃ over a box, with the y-range.
#[derive(Debug, Clone)]
pub struct BetaProblem {
    pub base: ExpressionField,
    pub coupling: ExpressionField,
    pub domain: BoxDomain,
    pub range: YRange,
    pub max_order: usize,
}

/// Two-variable stand-in: L₁ = (x − x₀)², L₂ = sin²(π/m),
/// L₃ = (x·m − n̄)² on [x₀−δ, x₀+δ] × [M, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateParams {
    pub x0: f64,
    pub delta: f64,
    pub m_cut: f64,
    pub n_bar: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            x0: 0.5,
            delta: 0.05,
            m_cut: 0.4,
            n_bar: 0.25,
        }
    }
}

impl BetaProblem {
    /// From a coupled Lagrangian's split (any arity the oracle accepts).
    pub fn from_split(l: &GeometricLagrangian, range: YRange) -> Result<Self> {
        let split = l
            .split()
            .ok_or_else(|| Error::InvalidArgument("the Lagrangian carries no coupling split".into()))?;
        let base = split.function_part.expr().clone() + split.rationality_part.expr().clone();
        Ok(Self {
            base: ExpressionField::new(base, l.field().names().to_vec())?,
            coupling: split.coupling_part.clone(),
            domain: l.domain().clone(),
            range,
            max_order: DEFAULT_MAX_ORDER,
        })
    }

    pub fn surrogate(params: SurrogateParams, range: YRange) -> Result<Self> {
        if !(params.m_cut > 0.0 && params.m_cut < 1.0) {
            return Err(Error::DomainViolation(format!("M = {} must lie in (0, 1)", params.m_cut)));
        }
        let names = vec!["x".to_string(), "m".to_string()];
        let (x, m) = (Expr::var(0), Expr::var(1));
        let base = (x.clone() - params.x0).square() + sin_squared_of_reciprocal(1, 0.5 * params.m_cut);
        let coupling = (x * m - params.n_bar).square();
        let domain = BoxDomain::new(vec![
            Interval::new(params.x0 - params.delta, params.x0 + params.delta)?,
            Interval::new(params.m_cut, 1.0)?,
        ]);
        Ok(Self {
            base: ExpressionField::new(base, names.clone())?,
            coupling: ExpressionField::new(coupling, names)?,
            domain,
            range,
            max_order: DEFAULT_MAX_ORDER,
        })
    }

    /// max L₃ sampled on a grid including the box corners (p ≤ 2) or on
    /// the corners plus a Kronecker cloud.
    pub fn max_coupling(&self) -> Result<f64> {
        let p = self.domain.dim();
        let mut best = 0.0f64;
        let mut point = vec![0.0; p];
        if p <= 2 {
            let n = COUPLING_SAMPLES;
            for idx in 0..n.pow(p as u32) {
                let mut r = idx;
                for (d, iv) in self.domain.intervals.iter().enumerate() {
                    point[d] = iv.lo + iv.width() * (r % n) as f64 / (n - 1) as f64;
                    r /= n;
                }
                best = best.max(self.coupling.value_unchecked(&point)?);
            }
        } else {
            for corner in 0..(1usize << p) {
                for (d, iv) in self.domain.intervals.iter().enumerate() {
                    point[d] = if corner >> d & 1 == 1 { iv.hi } else { iv.lo };
                }
                best = best.max(self.coupling.value_unchecked(&point)?);
            }
            let seq = crate::lowdisc::Kronecker::new(p);
            let mut u = vec![0.0; p];
            for i in 0..65_536 {
                seq.point(i, &vec![0.5; p], &mut u);
                for (d, iv) in self.domain.intervals.iter().enumerate() {
                    point[d] = iv.lo + iv.width() * u[d];
                }
                best = best.max(self.coupling.value_unchecked(&point)?);
            }
        }
        Ok(best)
    }

    /// h·β·max L₃·max y².
    pub fn regime_product(&self, h: f64, beta: f64) -> Result<f64> {
        Ok(h * beta * self.max_coupling()? * self.range.max_y2())
    }
}

/// (ihβ)ʲ/j!.
pub fn expansion_weight(j: usize, h: f64, beta: f64) -> Complex64 {
    let mut w = Complex64::new(1.0, 0.0);
    for k in 1..=j {
        w *= Complex64::new(0.0, h * beta / k as f64);
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub j: usize,
    /// ∫∫ L₃ʲ y²ʲ e^{ih(L₁+L₂)y²}.
    pub value: Complex64,
    pub error_estimate: f64,
    pub weight: Complex64,
}

impl ExpansionTerm {
    pub fn reweighted(&self, h: f64, beta: f64) -> Self {
        Self {
            weight: expansion_weight(self.j, h, beta),
            ..self.clone()
        }
    }

    pub fn weighted(&self) -> Complex64 {
        self.weight * self.value
    }
}

pub fn expansion_term(
    problem: &BetaProblem,
    j: usize,
    h: f64,
    beta: f64,
    settings: &QuadratureSettings,
) -> Result<ExpansionTerm> {
    if j > problem.max_order {
        return Err(Error::InvalidArgument(format!(
            "order {j} exceeds the maximum {}",
            problem.max_order
        )));
    }
    check_h(h)?;
    let range = problem.range;
    let integrand = |x: &[f64]| -> Result<Complex64> {
        let lambda = h * problem.base.value_unchecked(x)?;
        let moment = if j == 0 {
            y_moment0(lambda, range)
        } else {
            y_moments(lambda, range, j)[j]
        };
        Ok(moment * problem.coupling.value_unchecked(x)?.powi(j as i32))
    };
    let r = integrate_with(
        &problem.domain,
        &|x| problem.base.value_unchecked(x),
        h * range.max_y2(),
        &integrand,
        settings,
    )?;
    Ok(ExpansionTerm {
        j,
        value: r.value,
        error_estimate: r.error_estimate,
        weight: expansion_weight(j, h, beta),
    })
}

/// The coupled integral ∫∫ e^{ih(L₁+L₂+βL₃)y²} computed directly.
pub fn direct_value(
    problem: &BetaProblem,
    h: f64,
    beta: f64,
    settings: &QuadratureSettings,
) -> Result<(Complex64, f64)> {
    check_h(h)?;
    let total = |x: &[f64]| -> Result<f64> {
        let base = problem.base.value_unchecked(x)?;
        if beta == 0.0 {
            return Ok(base);
        }
        Ok(base + beta * problem.coupling.value_unchecked(x)?)
    };
    let integrand = |x: &[f64]| -> Result<Complex64> { Ok(y_moment0(h * total(x)?, problem.range)) };
    let r = integrate_with(&problem.domain, &total, h * problem.range.max_y2(), &integrand, settings)?;
    Ok((r.value, r.error_estimate))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesComparison {
    pub h: f64,
    pub beta: f64,
    pub regime_product: f64,
    pub direct: Complex64,
    pub direct_error: f64,
    pub terms: Vec<ExpansionTerm>,
    /// S_J for J = 0..=max order.
    pub partial_sums: Vec<Complex64>,
    /// |S_J − direct|.
    pub residuals: Vec<f64>,
    /// Quadrature error of S_J plus that of the direct value.
    pub quadrature_errors: Vec<f64>,
    /// vol(B)·|A|·Σ_{j>J} rʲ/j! with r the regime product.
    pub truncation_bounds: Vec<f64>,
}

/// Partial sums S_0..S_J against the direct coupled integral. Refuses to
/// run outside h·β·max L₃·max y² ≤ 1.
pub fn series_vs_direct(
    problem: &BetaProblem,
    order: usize,
    h: f64,
    beta: f64,
    settings: &QuadratureSettings,
) -> Result<SeriesComparison> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be finite and >= 0")));
    }
    let product = problem.regime_product(h, beta)?;
    if product > 1.0 {
        return Err(Error::RegimeViolation { product });
    }
    let (direct, direct_error) = direct_value(problem, h, beta, settings)?;
    let terms = (0..=order)
        .into_par_iter()
        .map(|j| expansion_term(problem, j, h, beta, settings))
        .collect::<Result<Vec<_>>>()?;
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut quadrature_errors = Vec::with_capacity(terms.len());
    let mut sum = Complex64::new(0.0, 0.0);
    let mut err = direct_error;
    for t in &terms {
        sum += t.weighted();
        err += t.weight.norm() * t.error_estimate;
        partial_sums.push(sum);
        quadrature_errors.push(err);
    }
    let residuals = partial_sums.iter().map(|s| (s - direct).norm()).collect();
    let volume = problem.domain.volume() * (problem.range.hi() - problem.range.lo());
    let truncation_bounds = (0..=order).map(|j| volume * exp_tail(product, j)).collect();
    Ok(SeriesComparison {
        h,
        beta,
        regime_product: product,
        direct,
        direct_error,
        terms,
        partial_sums,
        residuals,
        quadrature_errors,
        truncation_bounds,
    })
}

/// Σ_{j>J} rʲ/j!.
pub fn exp_tail(r: f64, order: usize) -> f64 {
    let mut term = 1.0;
    for k in 1..=order {
        term *= r / k as f64;
    }
    let mut sum = 0.0;
    for k in order + 1..order + 200 {
        term *= r / k as f64;
        sum += term;
        if term <= 1e-20 * sum {
            break;
        }
    }
    sum
}

/// |e^{iφ(1+t)} − e^{iφ}·Σ_{j≤J}(iφt)ʲ/j!| at a single point, where
/// φ = h(L₁+L₂)y² and φt = hβL₃y², together with |φt|^{J+1}/(J+1)!.
pub fn pointwise_truncation(
    problem: &BetaProblem,
    point: &[f64],
    y: f64,
    h: f64,
    beta: f64,
    order: usize,
) -> Result<(f64, f64)> {
    let base = problem.base.value_unchecked(point)?;
    let coupling = problem.coupling.value_unchecked(point)?;
    let z = h * beta * coupling * y * y;
    let exact = Complex64::cis(h * (base + beta * coupling) * y * y);
    let mut series = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    for j in 0..=order {
        series += term;
        term *= Complex64::new(0.0, z / (j + 1) as f64);
    }
    let approx = Complex64::cis(h * base * y * y) * series;
    Ok(((exact - approx).norm(), term.norm()))
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("h = {h} must be positive and finite")))
    }
}

/// h·β at which the regime product equals `target`.
pub fn coupling_for_product(problem: &BetaProblem, h: f64, target: f64) -> Result<f64> {
    let scale = problem.max_coupling()? * problem.range.max_y2();
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("L3 vanishes on the box".into()));
    }
    Ok(target / (h * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critpoints::{find_critical_points, CritSettings};
    use crate::lagrangian::build_norm_lagrangian;
    use crate::stationary::{predict_phase, PhaseVerdict};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn surrogate() -> BetaProblem {
        BetaProblem::surrogate(SurrogateParams::default(), YRange::default()).unwrap()
    }

    #[test]
    fn max_coupling_of_surrogate() {
        // x·m spans [0.18, 0.55]; the larger gap to 0.25 is 0.3
        assert!((surrogate().max_coupling().unwrap() - 0.09).abs() < 1e-12);
    }

    #[test]
    fn weights() {
        assert_eq!(expansion_weight(0, 5.0, 0.3), Complex64::new(1.0, 0.0));
        let w = expansion_weight(3, 2.0, 0.5);
        assert!((w - Complex64::new(0.0, -1.0 / 6.0)).norm() < 1e-15);
    }

    #[test]
    fn zeroth_term_is_the_uncoupled_integral() {
        let p = surrogate();
        let s = QuadratureSettings::default();
        let t0 = expansion_term(&p, 0, 20.0, 0.0, &s).unwrap();
        let (d, _) = direct_value(&p, 20.0, 0.0, &s).unwrap();
        assert_eq!(t0.value, d);
        assert_eq!(t0.weight, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn vanishing_coupling_kills_higher_terms() {
        let mut p = surrogate();
        p.coupling = ExpressionField::new(Expr::constant(0.0), vec!["x".into(), "m".into()]).unwrap();
        let s = QuadratureSettings::default();
        for j in 1..4 {
            assert_eq!(expansion_term(&p, j, 20.0, 0.1, &s).unwrap().value, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn constant_coupling_factors_out() {
        let mut p = surrogate();
        p.domain = BoxDomain::from_bounds(&[(0.49999, 0.50001), (0.6, 0.60002)]).unwrap();
        let s = QuadratureSettings::default();
        let h = 20.0;
        let t1 = expansion_term(&p, 1, h, 0.1, &s).unwrap();
        let c = p.coupling.value(&[0.5, 0.60001]).unwrap();
        // c·∫∫ y² e^{ih(L₁+L₂)y²}, the y-moment G₁ integrated over the box
        let base = p.base.clone();
        let r = integrate_with(
            &p.domain,
            &|x| base.value_unchecked(x),
            h * 4.0,
            &|x| Ok(y_moments(h * base.value_unchecked(x)?, p.range, 1)[1]),
            &s,
        )
        .unwrap();
        assert!((t1.value - c * r.value).norm() <= 1e-3 * t1.value.norm());
    }

    #[test]
    fn beta_zero_is_exact() {
        let p = surrogate();
        let cmp = series_vs_direct(&p, 4, 20.0, 0.0, &QuadratureSettings::default()).unwrap();
        for s in &cmp.partial_sums {
            assert_eq!(*s, cmp.direct);
        }
    }

    #[test]
    fn regime_is_enforced() {
        let p = surrogate();
        let beta = coupling_for_product(&p, 20.0, 2.0).unwrap();
        assert!(matches!(
            series_vs_direct(&p, 2, 20.0, beta, &QuadratureSettings::default()),
            Err(Error::RegimeViolation { .. })
        ));
    }

    #[test]
    fn residuals_fall_to_the_noise_floor() {
        let p = surrogate();
        let h = 20.0;
        let beta = coupling_for_product(&p, h, 0.5).unwrap();
        let cmp = series_vs_direct(&p, 6, h, beta, &QuadratureSettings::default()).unwrap();
        assert!((cmp.regime_product - 0.5).abs() < 1e-12);
        for j in 0..=6 {
            assert!(cmp.residuals[j] <= cmp.truncation_bounds[j] + 3.0 * cmp.quadrature_errors[j]);
        }
        for w in cmp.residuals.windows(2) {
            assert!(w[1] <= w[0] + 3.0 * cmp.quadrature_errors[6]);
        }
    }

    #[test]
    fn uncoupled_surrogate_has_a_phase_limit() {
        let p = surrogate();
        let l = build_norm_lagrangian(
            &[
                ExpressionField::new(Expr::var(0) - 0.5, vec!["x".into(), "m".into()]).unwrap(),
                ExpressionField::new(
                    Expr::Const(PI).guarded_div(Expr::var(1), 0.2).sin(),
                    vec!["x".into(), "m".into()],
                )
                .unwrap(),
            ],
            p.domain.clone(),
        )
        .unwrap();
        let pts = find_critical_points(&l, &CritSettings::default()).unwrap();
        assert!(pts.iter().any(|pt| pt.zero_level));
        let pred = predict_phase(&pts, p.range, 2).unwrap();
        assert!(matches!(pred.verdict, PhaseVerdict::Converges { .. }));
    }

    proptest! {
        #[test]
        fn pointwise_truncation_is_bounded_by_next_term(
            x in 0.45f64..0.55,
            m in 0.4f64..1.0,
            y in 1.0f64..2.0,
            beta in 0.0f64..0.025,
            order in 0usize..8,
        ) {
            let p = surrogate();
            let (err, next) = pointwise_truncation(&p, &[x, m], y, 100.0, beta, order).unwrap();
            // |z| ≤ 0.9 here, so the remainder is at most e^{|z|}·|next term| < e·|next term|
            prop_assert!(err <= std::f64::consts::E * next + 1e-13);
        }
    }
}
