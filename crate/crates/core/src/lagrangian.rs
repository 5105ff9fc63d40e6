//! Geometric Lagrangians: sums of squares whose zeros are exactly the
//! solutions of an analytic system, plus the rationality-encoding builders.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::critpoints::{find_critical_points, CritSettings};
use crate::error::{Error, Result};
use crate::fields::{BoxDomain, Evaluation, Expr, ExpressionField, Interval, Order};

/// Default half-width of the x-interval around x₀.
pub const DEFAULT_DELTA: f64 = 0.05;
/// Threshold on |F′(x₀)| below which the irrationality builder refuses.
pub const FLAT_DERIVATIVE_THRESHOLD: f64 = 1e-8;
/// Default cap on the total variable count of the algebraic builder.
pub const DEFAULT_ARITY_CAP: usize = 24;
/// Samples used to estimate F([x₀−δ, x₀+δ]).
const RANGE_SAMPLES: usize = 1024;
/// Relative widening applied to the sampled α-envelope.
const RANGE_WIDENING: f64 = 0.01;
/// The 1/m nodes refuse to evaluate within this fraction of the lower cut.
const GUARD_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Geometry,
    Target,
    DenominatorM,
    DenominatorN,
    Coefficient,
}

/// The L = L₁ + L₂ + β·L₃ decomposition of a coupled Lagrangian.
#[derive(Debug, Clone)]
pub struct CouplingSplit {
    pub function_part: ExpressionField,
    pub rationality_part: ExpressionField,
    pub coupling_part: ExpressionField,
    pub beta: f64,
}

/// Analytic data carried by Lagrangians of the irrationality shape
/// (F(x)−α)² + (x−x₀)² + sin²(π/m) + sin²(π/n) + β(αm−n)².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrrationalityTag {
    pub x0: f64,
    pub delta: f64,
    pub alpha0: f64,
    pub fprime_x0: f64,
    pub m_cut: f64,
    pub n_cut: f64,
    /// True when the builder replaced F by −F to make F(x₀) positive.
    pub sign_flipped: bool,
}

#[derive(Debug, Clone)]
pub struct GeometricLagrangian {
    field: ExpressionField,
    roles: Vec<Role>,
    split: Option<CouplingSplit>,
    irrationality: Option<IrrationalityTag>,
    warnings: Vec<String>,
}

impl GeometricLagrangian {
    fn assemble(terms: Vec<Expr>, names: Vec<String>, roles: Vec<Role>, domain: BoxDomain) -> Result<Self> {
        let field = ExpressionField::new(Expr::sum(terms), names)?.with_domain(domain)?;
        debug_assert!(field.expr().is_sum_of_squares());
        Ok(Self {
            field,
            roles,
            split: None,
            irrationality: None,
            warnings: Vec::new(),
        })
    }

    pub fn field(&self) -> &ExpressionField {
        &self.field
    }

    pub fn domain(&self) -> &BoxDomain {
        self.field.domain().expect("Lagrangians always carry a box")
    }

    pub fn arity(&self) -> usize {
        self.field.arity()
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn split(&self) -> Option<&CouplingSplit> {
        self.split.as_ref()
    }

    pub fn coupling(&self) -> Option<f64> {
        self.split.as_ref().map(|s| s.beta)
    }

    pub fn irrationality(&self) -> Option<&IrrationalityTag> {
        self.irrationality.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn value(&self, point: &[f64]) -> Result<f64> {
        self.field.value(point)
    }

    pub fn evaluate(&self, point: &[f64], order: Order) -> Result<Evaluation> {
        self.field.evaluate(point, order)
    }

    /// Structural non-negativity: the tree is a sum of squares.
    pub fn is_sum_of_squares(&self) -> bool {
        self.field.expr().is_sum_of_squares()
    }
}

pub(crate) fn sin_squared_of_reciprocal(var: usize, guard: f64) -> Expr {
    Expr::Const(PI).guarded_div(Expr::var(var), guard).sin().square()
}

fn check_cut(name: &str, c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::DomainViolation(format!("{name} = {c} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_cuts(name: &str, cuts: &[f64], p: usize) -> Result<()> {
    if cuts.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: cuts.len(),
        });
    }
    cuts.iter().try_for_each(|&c| check_cut(name, c))
}

fn check_box(field: &ExpressionField, domain: &BoxDomain) -> Result<()> {
    if domain.dim() != field.arity() {
        return Err(Error::DimensionMismatch {
            expected: field.arity(),
            got: domain.dim(),
        });
    }
    Ok(())
}

fn unit_cut(c: f64) -> Interval {
    Interval { lo: c, hi: 1.0 }
}

/// L(x) = Σ Fᵢ(x)² over `domain`.
pub fn build_norm_lagrangian(system: &[ExpressionField], domain: BoxDomain) -> Result<GeometricLagrangian> {
    let first = system
        .first()
        .ok_or_else(|| Error::InvalidArgument("the system needs at least one field".into()))?;
    let p = first.arity();
    for (index, f) in system.iter().enumerate() {
        if f.arity() != p {
            return Err(Error::ArityMismatch {
                index,
                expected: p,
                got: f.arity(),
            });
        }
    }
    check_box(first, &domain)?;
    let terms = system.iter().map(|f| f.expr().clone().square()).collect();
    GeometricLagrangian::assemble(terms, first.names().to_vec(), vec![Role::Geometry; p], domain)
}

/// Options for the irrationality and coupled builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrrationalityOptions {
    /// Replace F by −F when F(x₀) < 0.
    pub auto_sign_flip: bool,
    /// Run the coarse critical-point scan behind the near-orthogonality warning.
    pub check_orthogonality: bool,
}

impl Default for IrrationalityOptions {
    fn default() -> Self {
        Self {
            auto_sign_flip: false,
            check_orthogonality: true,
        }
    }
}

/// (F(x)−α)² + (x−x₀)² + sin²(π/m) + sin²(π/n) + (αm−n)² on
/// [x₀−δ, x₀+δ] × F-range × [M,1] × [N,1].
pub fn build_irrationality_lagrangian(
    f: &ExpressionField,
    x0: f64,
    delta: f64,
    m_cut: f64,
    n_cut: f64,
) -> Result<GeometricLagrangian> {
    build_irrationality_lagrangian_with(f, x0, delta, m_cut, n_cut, IrrationalityOptions::default())
}

pub fn build_irrationality_lagrangian_with(
    f: &ExpressionField,
    x0: f64,
    delta: f64,
    m_cut: f64,
    n_cut: f64,
    options: IrrationalityOptions,
) -> Result<GeometricLagrangian> {
    irrationality_shape(f, x0, delta, m_cut, n_cut, None, options)
}

/// L₁ + L₂ + β·L₃ with L₁ = (F−α)² + (x−x₀)², L₂ = sin²(π/m) + sin²(π/n),
/// L₃ = (αm−n)². At β = 1 the field equals the irrationality Lagrangian.
pub fn build_coupled_lagrangian(
    f: &ExpressionField,
    x0: f64,
    delta: f64,
    m_cut: f64,
    n_cut: f64,
    beta: f64,
) -> Result<GeometricLagrangian> {
    let options = IrrationalityOptions {
        check_orthogonality: false,
        ..Default::default()
    };
    build_coupled_lagrangian_with(f, x0, delta, m_cut, n_cut, beta, options)
}

pub fn build_coupled_lagrangian_with(
    f: &ExpressionField,
    x0: f64,
    delta: f64,
    m_cut: f64,
    n_cut: f64,
    beta: f64,
    options: IrrationalityOptions,
) -> Result<GeometricLagrangian> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be finite and >= 0")));
    }
    irrationality_shape(f, x0, delta, m_cut, n_cut, Some(beta), options)
}

fn irrationality_shape(
    f: &ExpressionField,
    x0: f64,
    delta: f64,
    m_cut: f64,
    n_cut: f64,
    beta: Option<f64>,
    options: IrrationalityOptions,
) -> Result<GeometricLagrangian> {
    if f.arity() != 1 {
        return Err(Error::ArityMismatch {
            index: 0,
            expected: 1,
            got: f.arity(),
        });
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::DomainViolation(format!("delta = {delta} must be positive")));
    }
    check_cut("M", m_cut)?;
    check_cut("N", n_cut)?;

    let at_x0 = f.evaluate_unchecked(&[x0], Order::Gradient)?;
    let fprime = at_x0.gradient.expect("order 1")[0];
    if fprime.abs() < FLAT_DERIVATIVE_THRESHOLD {
        return Err(Error::FlatDerivative {
            value: fprime.abs(),
            threshold: FLAT_DERIVATIVE_THRESHOLD,
        });
    }
    let flip = options.auto_sign_flip && at_x0.value < 0.0;
    let sign = if flip { -1.0 } else { 1.0 };
    let f_expr = if flip { -f.expr().clone() } else { f.expr().clone() };

    let x_iv = Interval::new(x0 - delta, x0 + delta)?;
    let alpha_iv = sampled_range(f, x_iv, sign)?;
    let domain = BoxDomain::new(vec![x_iv, alpha_iv, unit_cut(m_cut), unit_cut(n_cut)]);
    let (x, alpha, m, n) = (0, 1, 2, 3);

    let l1 = vec![
        (f_expr - Expr::var(alpha)).square(),
        (Expr::var(x) - x0).square(),
    ];
    let l2 = vec![
        sin_squared_of_reciprocal(m, GUARD_FRACTION * m_cut),
        sin_squared_of_reciprocal(n, GUARD_FRACTION * n_cut),
    ];
    let l3 = (Expr::var(alpha) * Expr::var(m) - Expr::var(n)).square();

    let names: Vec<String> = ["x", "alpha", "m", "n"].iter().map(|s| s.to_string()).collect();
    let roles = vec![Role::Geometry, Role::Target, Role::DenominatorM, Role::DenominatorN];
    let mut terms = l1.clone();
    terms.extend(l2.iter().cloned());
    terms.push(match beta {
        Some(b) => b * l3.clone(),
        None => l3.clone(),
    });
    let mut lag = GeometricLagrangian::assemble(terms, names.clone(), roles, domain.clone())?;

    if let Some(beta) = beta {
        let part = |e: Expr| -> Result<ExpressionField> {
            ExpressionField::new(e, names.clone())?.with_domain(domain.clone())
        };
        lag.split = Some(CouplingSplit {
            function_part: part(Expr::sum(l1))?,
            rationality_part: part(Expr::sum(l2))?,
            coupling_part: part(l3)?,
            beta,
        });
    }
    lag.irrationality = Some(IrrationalityTag {
        x0,
        delta,
        alpha0: sign * at_x0.value,
        fprime_x0: sign * fprime,
        m_cut,
        n_cut,
        sign_flipped: flip,
    });
    if !flip && at_x0.value <= 0.0 {
        lag.warnings.push(format!(
            "F(x0) = {} is not positive, so alpha*m = n has no solution with m, n in (0, 1]",
            at_x0.value
        ));
    }
    if options.check_orthogonality {
        let w = near_orthogonality_warning(&lag);
        lag.warnings.extend(w);
    }
    Ok(lag)
}

/// Sampled min/max envelope of `sign·F` on `iv`, widened by 1% of its width.
fn sampled_range(f: &ExpressionField, iv: Interval, sign: f64) -> Result<Interval> {
    let mut eval = f.evaluator();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..RANGE_SAMPLES {
        let t = iv.lo + iv.width() * k as f64 / (RANGE_SAMPLES - 1) as f64;
        let v = sign * eval.value(&[t])?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pad = RANGE_WIDENING * (hi - lo).max(f64::EPSILON * (1.0 + hi.abs()));
    Interval::new(lo - pad, hi + pad)
}

/// Coarse scan of the full Lagrangian for critical points with x ≠ x₀.
/// The decoupling of the (x, α) block that the small-δ argument relies on
/// predicts none; any hit is reported as a warning.
fn near_orthogonality_warning(lag: &GeometricLagrangian) -> Option<String> {
    let tag = lag.irrationality?;
    let settings = CritSettings {
        grid_density: 5,
        ..CritSettings::default()
    };
    match find_critical_points(lag, &settings) {
        Ok(points) => {
            let off: Vec<f64> = points
                .iter()
                .map(|p| (p.location[0] - tag.x0).abs())
                .filter(|&d| d > 1e-6 * tag.delta)
                .collect();
            let drift = off.iter().copied().fold(0.0, f64::max);
            (!off.is_empty()).then(|| {
                format!(
                    "near-orthogonality check: {} critical point(s) with x != x0 (max |x - x0| = {drift:.3e})",
                    off.len()
                )
            })
        }
        Err(e) => Some(format!("near-orthogonality scan did not complete: {e}")),
    }
}

/// F(x)² + Σᵢ [sin²(π/mᵢ) + sin²(π/nᵢ) + (xᵢmᵢ − nᵢ)²] over 3p variables.
pub fn build_rational_points_lagrangian(
    f: &ExpressionField,
    domain: BoxDomain,
    m_cuts: &[f64],
    n_cuts: &[f64],
) -> Result<GeometricLagrangian> {
    check_box(f, &domain)?;
    let p = f.arity();
    check_cuts("M", m_cuts, p)?;
    check_cuts("N", n_cuts, p)?;
    let (m, n) = (|i| p + i, |i| 2 * p + i);
    let mut terms = vec![f.expr().clone().square()];
    for i in 0..p {
        terms.push(sin_squared_of_reciprocal(m(i), GUARD_FRACTION * m_cuts[i]));
        terms.push(sin_squared_of_reciprocal(n(i), GUARD_FRACTION * n_cuts[i]));
        terms.push((Expr::var(i) * Expr::var(m(i)) - Expr::var(n(i))).square());
    }
    let mut names = f.names().to_vec();
    names.extend((0..p).map(|i| format!("m{i}")));
    names.extend((0..p).map(|i| format!("n{i}")));
    let mut roles = vec![Role::Geometry; p];
    roles.extend(vec![Role::DenominatorM; p]);
    roles.extend(vec![Role::DenominatorN; p]);
    let mut intervals = domain.intervals.clone();
    intervals.extend(m_cuts.iter().map(|&c| unit_cut(c)));
    intervals.extend(n_cuts.iter().map(|&c| unit_cut(c)));
    GeometricLagrangian::assemble(terms, names, roles, BoxDomain::new(intervals))
}

/// F(x)² + Σᵢ [sin²(π/mᵢ) + (xᵢmᵢ − 1)²] over 2p variables.
pub fn build_integer_points_lagrangian(
    f: &ExpressionField,
    domain: BoxDomain,
    m_cuts: &[f64],
) -> Result<GeometricLagrangian> {
    check_box(f, &domain)?;
    let p = f.arity();
    check_cuts("M", m_cuts, p)?;
    let mut terms = vec![f.expr().clone().square()];
    for i in 0..p {
        terms.push(sin_squared_of_reciprocal(p + i, GUARD_FRACTION * m_cuts[i]));
        terms.push((Expr::var(i) * Expr::var(p + i) - 1.0).square());
    }
    let mut names = f.names().to_vec();
    names.extend((0..p).map(|i| format!("m{i}")));
    let mut roles = vec![Role::Geometry; p];
    roles.extend(vec![Role::DenominatorM; p]);
    let mut intervals = domain.intervals.clone();
    intervals.extend(m_cuts.iter().map(|&c| unit_cut(c)));
    GeometricLagrangian::assemble(terms, names, roles, BoxDomain::new(intervals))
}

/// Parameters of the algebraic builder.
///
/// Each xᵢ must be a root of the monic gᵢ(x) = x^K + Σ_{j<K} (a_ij − offset)·x^j.
/// Every a_ij is forced to a positive rational n_ij/m_ij by the usual
/// sin² and (a·m − n)² terms, so the shift by `offset` lets the polynomial
/// coefficients a_ij − offset take either sign.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicCuts {
    pub m_cut: f64,
    pub n_cut: f64,
    pub coefficient_range: Interval,
    pub offset: f64,
    pub arity_cap: usize,
}

impl Default for AlgebraicCuts {
    fn default() -> Self {
        Self {
            m_cut: 0.1,
            n_cut: 0.1,
            coefficient_range: Interval { lo: 0.05, hi: 6.0 },
            offset: 3.0,
            arity_cap: DEFAULT_ARITY_CAP,
        }
    }
}

/// Variable layout of the algebraic builder: x (p), a (pK), m (pK), n (pK).
pub fn algebraic_arity(p: usize, degree: usize) -> usize {
    p + 3 * p * degree
}

pub fn build_algebraic_lagrangian(
    f: &ExpressionField,
    degree: usize,
    domain: BoxDomain,
    cuts: &AlgebraicCuts,
) -> Result<GeometricLagrangian> {
    if degree == 0 {
        return Err(Error::InvalidArgument("the polynomial degree K must be >= 1".into()));
    }
    check_box(f, &domain)?;
    check_cut("M", cuts.m_cut)?;
    check_cut("N", cuts.n_cut)?;
    let p = f.arity();
    let arity = algebraic_arity(p, degree);
    if arity > cuts.arity_cap {
        return Err(Error::DimensionOverflow {
            arity,
            cap: cuts.arity_cap,
        });
    }
    let pk = p * degree;
    let a = |i: usize, j: usize| p + i * degree + j;
    let m = |i: usize, j: usize| p + pk + i * degree + j;
    let n = |i: usize, j: usize| p + 2 * pk + i * degree + j;

    let mut terms = vec![f.expr().clone().square()];
    for i in 0..p {
        let mut g = Expr::var(i).powf(degree as f64);
        for j in 0..degree {
            let coef = Expr::var(a(i, j)) - cuts.offset;
            g = g + if j == 0 { coef } else { coef * Expr::var(i).powf(j as f64) };
        }
        terms.push(g.square());
    }
    for i in 0..p {
        for j in 0..degree {
            terms.push(sin_squared_of_reciprocal(m(i, j), GUARD_FRACTION * cuts.m_cut));
            terms.push(sin_squared_of_reciprocal(n(i, j), GUARD_FRACTION * cuts.n_cut));
            terms.push((Expr::var(a(i, j)) * Expr::var(m(i, j)) - Expr::var(n(i, j))).square());
        }
    }
    let mut names = f.names().to_vec();
    for prefix in ["a", "m", "n"] {
        for i in 0..p {
            names.extend((0..degree).map(|j| format!("{prefix}{i}_{j}")));
        }
    }
    let mut roles = vec![Role::Geometry; p];
    roles.extend(vec![Role::Coefficient; pk]);
    roles.extend(vec![Role::DenominatorM; pk]);
    roles.extend(vec![Role::DenominatorN; pk]);
    let mut intervals = domain.intervals.clone();
    intervals.extend(vec![cuts.coefficient_range; pk]);
    intervals.extend(vec![unit_cut(cuts.m_cut); pk]);
    intervals.extend(vec![unit_cut(cuts.n_cut); pk]);
    GeometricLagrangian::assemble(terms, names, roles, BoxDomain::new(intervals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::digamma;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity() -> ExpressionField {
        ExpressionField::parse("(var x)", &["x"]).unwrap()
    }

    fn field(src: &str, names: &[&str]) -> ExpressionField {
        ExpressionField::parse(src, names).unwrap()
    }

    fn random_point(domain: &BoxDomain, rng: &mut ChaCha8Rng) -> Vec<f64> {
        domain
            .intervals
            .iter()
            .map(|iv| rng.random_range(iv.lo..=iv.hi))
            .collect()
    }

    #[test]
    fn norm_of_single_field() {
        let l = build_norm_lagrangian(&[identity()], BoxDomain::from_bounds(&[(-1.0, 1.0)]).unwrap()).unwrap();
        assert_eq!(l.value(&[0.0]).unwrap(), 0.0);
        assert_eq!(l.value(&[0.5]).unwrap(), 0.25);
        assert!(l.is_sum_of_squares());
    }

    #[test]
    fn inconsistent_system_is_strictly_positive() {
        let sys = [field("(- (var x) 1)", &["x"]), field("(+ (var x) 1)", &["x"])];
        let l = build_norm_lagrangian(&sys, BoxDomain::from_bounds(&[(-2.0, 2.0)]).unwrap()).unwrap();
        for k in 0..=40 {
            let x = -2.0 + 0.1 * k as f64;
            let v = l.value(&[x]).unwrap();
            assert!((v - (2.0 * x * x + 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_line_intersection_zeros() {
        let sys = [
            field("(- (+ (^ (var x) 2) (^ (var y) 2)) 1)", &["x", "y"]),
            field("(- (var x) (var y))", &["x", "y"]),
        ];
        let l = build_norm_lagrangian(&sys, BoxDomain::from_bounds(&[(-2.0, 2.0), (-2.0, 2.0)]).unwrap()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for s in [1.0, -1.0] {
            let e = l.evaluate(&[s * r, s * r], Order::Gradient).unwrap();
            assert!(e.value <= 1e-20);
            assert!(e.gradient.unwrap().iter().all(|g| g.abs() <= 1e-9));
        }
        assert!(l.value(&[r, -r]).unwrap() > 1.0);
    }

    #[test]
    fn norm_gradient_identity() {
        let sys = [
            field("(sin (* (var x) (var y)))", &["x", "y"]),
            field("(- (exp (var x)) (var y))", &["x", "y"]),
        ];
        let l = build_norm_lagrangian(&sys, BoxDomain::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap()).unwrap();
        let pt = [0.3, -0.7];
        let g = l.evaluate(&pt, Order::Gradient).unwrap().gradient.unwrap();
        let mut expected = [0.0; 2];
        for f in &sys {
            let e = f.evaluate(&pt, Order::Gradient).unwrap();
            for (k, gk) in e.gradient.unwrap().iter().enumerate() {
                expected[k] += 2.0 * e.value * gk;
            }
        }
        for k in 0..2 {
            assert!((g[k] - expected[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn norm_rejects_mixed_arity() {
        let sys = [identity(), field("(var y)", &["x", "y"])];
        let err = build_norm_lagrangian(&sys, BoxDomain::from_bounds(&[(-1.0, 1.0)]).unwrap());
        assert!(matches!(err, Err(Error::ArityMismatch { index: 1, expected: 1, got: 2 })));
    }

    #[test]
    fn irrationality_zeros_for_identity() {
        let l = build_irrationality_lagrangian(&identity(), 0.5, 0.1, 0.2, 0.1).unwrap();
        assert!(l.value(&[0.5, 0.5, 1.0, 0.5]).unwrap() <= 1e-20);
        assert!(l.value(&[0.5, 0.5, 0.5, 0.25]).unwrap() <= 1e-20);
        let e = l.evaluate(&[0.5, 0.5, 1.0 / 3.0, 1.0 / 6.0], Order::Gradient).unwrap();
        assert!(e.value <= 1e-20);
        assert!(e.gradient.unwrap().iter().all(|g| g.abs() <= 1e-9));
        let tag = l.irrationality().unwrap();
        assert_eq!(tag.alpha0, 0.5);
        assert_eq!(tag.fprime_x0, 1.0);
        // Nonzero-level critical points off x = x0 exist for this problem.
        assert!(l.warnings().iter().any(|w| w.contains("x != x0")), "{:?}", l.warnings());
        let zero_only = build_irrationality_lagrangian(&identity(), 0.5, 0.1, 0.2, 0.1).unwrap();
        let pts = find_critical_points(&zero_only, &CritSettings { grid_density: 5, ..Default::default() }).unwrap();
        assert!(pts.iter().filter(|p| p.zero_level).all(|p| (p.location[0] - 0.5).abs() < 1e-9));
    }

    #[test]
    fn alpha_range_is_widened_envelope() {
        let l = build_irrationality_lagrangian(&identity(), 0.5, 0.1, 0.2, 0.1).unwrap();
        let a = l.domain().intervals[1];
        assert!((a.lo - (0.4 - 0.002)).abs() < 1e-12);
        assert!((a.hi - (0.6 + 0.002)).abs() < 1e-12);
        assert_eq!(l.domain().intervals[2], Interval { lo: 0.2, hi: 1.0 });
    }

    #[test]
    fn irrationality_preconditions() {
        let flat = field("(^ (- (var x) 0.5) 2)", &["x"]);
        assert!(matches!(
            build_irrationality_lagrangian(&flat, 0.5, 0.1, 0.2, 0.2),
            Err(Error::FlatDerivative { .. })
        ));
        assert!(matches!(
            build_irrationality_lagrangian(&identity(), 0.5, 0.1, 1.2, 0.2),
            Err(Error::DomainViolation(_))
        ));
        assert!(matches!(
            build_irrationality_lagrangian(&identity(), 0.5, 0.1, 0.2, 0.0),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn digamma_lagrangian_has_no_grid_zero() {
        let psi = field("(digamma (var x))", &["x"]);
        let l = build_irrationality_lagrangian(&psi, 1.0, 0.05, 0.1, 0.1).unwrap();
        let gamma = -digamma(1.0).unwrap();
        for i in 0..=40 {
            for j in 0..=40 {
                let m = 0.1 + 0.9 * i as f64 / 40.0;
                let n = 0.1 + 0.9 * j as f64 / 40.0;
                assert!(l.value(&[1.0, -gamma, m, n]).unwrap() > 0.0);
            }
        }
        assert!(!l.warnings().is_empty());
    }

    #[test]
    fn sign_flip_makes_target_positive() {
        let psi = field("(digamma (var x))", &["x"]);
        let opts = IrrationalityOptions {
            auto_sign_flip: true,
            check_orthogonality: false,
        };
        let l = build_irrationality_lagrangian_with(&psi, 1.0, 0.05, 0.1, 0.1, opts).unwrap();
        let tag = l.irrationality().unwrap();
        assert!(tag.sign_flipped);
        assert!((tag.alpha0 - crate::fields::EULER_GAMMA).abs() < 1e-15);
        assert!(l.domain().intervals[1].contains(tag.alpha0));
    }

    #[test]
    fn coupled_matches_irrationality_at_unit_beta() {
        let f = field("(+ (var x) (* 0.3 (sin (var x))))", &["x"]);
        let base = build_irrationality_lagrangian(&f, 0.5, 0.05, 0.2, 0.2).unwrap();
        let coupled = build_coupled_lagrangian(&f, 0.5, 0.05, 0.2, 0.2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let pt = random_point(base.domain(), &mut rng);
            assert!((base.value(&pt).unwrap() - coupled.value(&pt).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn split_is_pointwise_consistent() {
        let l = build_coupled_lagrangian(&identity(), 0.5, 0.05, 0.2, 0.2, 0.37).unwrap();
        let s = l.split().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let pt = random_point(l.domain(), &mut rng);
            let sum = s.function_part.value(&pt).unwrap()
                + s.rationality_part.value(&pt).unwrap()
                + s.beta * s.coupling_part.value(&pt).unwrap();
            assert!((l.value(&pt).unwrap() - sum).abs() <= 1e-12);
        }
    }

    #[test]
    fn decoupled_zeros_at_every_reciprocal_pair() {
        let l = build_coupled_lagrangian(&identity(), 0.5, 0.05, 0.2, 0.2, 0.0).unwrap();
        for k in 1..=5 {
            for j in 1..=5 {
                let v = l.value(&[0.5, 0.5, 1.0 / k as f64, 1.0 / j as f64]).unwrap();
                assert!(v <= 1e-20, "k={k} j={j}: {v}");
            }
        }
    }

    #[test]
    fn small_beta_shift_is_beta_times_coupling() {
        let l0 = build_coupled_lagrangian(&identity(), 0.5, 0.05, 0.2, 0.01, 0.0).unwrap();
        let l1 = build_coupled_lagrangian(&identity(), 0.5, 0.05, 0.2, 0.01, 1e-3).unwrap();
        // alpha*m - n = 0.55 - 0.05 = 0.5
        let pt = [0.5, 0.55, 1.0, 0.05];
        let d = l1.value(&pt).unwrap() - l0.value(&pt).unwrap();
        assert!((d - 2.5e-4).abs() < 1e-15, "{d}");
    }

    #[test]
    fn rational_points_zero_and_no_zero() {
        let f = field("(- (var x) (/ 1 3))", &["x"]);
        let l = build_rational_points_lagrangian(&f, BoxDomain::from_bounds(&[(0.0, 1.0)]).unwrap(), &[0.1], &[0.05])
            .unwrap();
        assert_eq!(l.arity(), 3);
        for k in 1..=3 {
            let pt = [1.0 / 3.0, 1.0 / k as f64, 1.0 / (3 * k) as f64];
            let e = l.evaluate(&pt, Order::Gradient).unwrap();
            assert!(e.value <= 1e-20);
            assert!(e.gradient.unwrap().iter().all(|g| g.abs() <= 1e-9));
        }

        let f = field("(- (^ (var x) 2) 1)", &["x"]);
        let l = build_rational_points_lagrangian(&f, BoxDomain::from_bounds(&[(-1.0, 1.0)]).unwrap(), &[0.5], &[0.5])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let pt = random_point(l.domain(), &mut rng);
            assert!(l.value(&pt).unwrap() >= 0.0);
        }
    }

    #[test]
    fn integer_points_zero_and_no_zero() {
        let f = field("(- (var x) 3)", &["x"]);
        let l = build_integer_points_lagrangian(&f, BoxDomain::from_bounds(&[(2.0, 4.0)]).unwrap(), &[0.2]).unwrap();
        assert!(l.value(&[3.0, 1.0 / 3.0]).unwrap() <= 1e-20);

        let f = field("(- (var x) 2.5)", &["x"]);
        let l = build_integer_points_lagrangian(&f, BoxDomain::from_bounds(&[(2.0, 3.0)]).unwrap(), &[0.2]).unwrap();
        let mut min = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let x = 2.0 + i as f64 / 400.0;
                let m = 0.2 + 0.8 * j as f64 / 400.0;
                min = min.min(l.value(&[x, m]).unwrap());
            }
        }
        assert!(min > 1e-4, "{min}");
    }

    #[test]
    fn algebraic_layout_and_zero() {
        let f = field("(- (var x) 0.5)", &["x"]);
        let cuts = AlgebraicCuts::default();
        let l = build_algebraic_lagrangian(&f, 1, BoxDomain::from_bounds(&[(0.0, 1.0)]).unwrap(), &cuts).unwrap();
        assert_eq!(l.arity(), 4);
        assert_eq!(l.roles(), &[Role::Geometry, Role::Coefficient, Role::DenominatorM, Role::DenominatorN]);
        // g(x) = x + (a - 3) with a = 5/2 = n/m for m = 1/5, n = 1/2.
        let e = l.evaluate(&[0.5, 2.5, 0.2, 0.5], Order::Gradient).unwrap();
        assert!(e.value <= 1e-20);
        assert!(e.gradient.unwrap().iter().all(|g| g.abs() <= 1e-9));
    }

    #[test]
    fn algebraic_degree_two_root_of_two() {
        let f = field("(- (^ (var x) 2) 2)", &["x"]);
        let cuts = AlgebraicCuts {
            m_cut: 0.2,
            n_cut: 0.2,
            ..AlgebraicCuts::default()
        };
        let l = build_algebraic_lagrangian(&f, 2, BoxDomain::from_bounds(&[(1.0, 2.0)]).unwrap(), &cuts).unwrap();
        assert_eq!(l.arity(), 7);
        // x² − 2 = x² + (a0 − 3) + (a1 − 3)x with a0 = 1 = 1/1, a1 = 3 = 1/(1/3).
        let pt = [2f64.sqrt(), 1.0, 3.0, 1.0, 1.0 / 3.0, 1.0, 1.0];
        assert!(l.value(&pt).unwrap() <= 1e-20);
    }

    #[test]
    fn algebraic_rejects_zero_degree_and_overflow() {
        let f = identity();
        let b = BoxDomain::from_bounds(&[(0.0, 1.0)]).unwrap();
        assert!(matches!(
            build_algebraic_lagrangian(&f, 0, b.clone(), &AlgebraicCuts::default()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_algebraic_lagrangian(&f, 8, b, &AlgebraicCuts::default()),
            Err(Error::DimensionOverflow { arity: 25, cap: 24 })
        ));
    }
}
