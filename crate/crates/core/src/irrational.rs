//! Irrationality test through the critical family of the irrationality
//! Lagrangian.
//!
//! When α₀ = F(x₀) = p/q is a positive rational, the Lagrangian vanishes
//! exactly on ωᵢ = (x₀, α₀, m₀/i, n₀/i) with m₀ = 1/p, n₀ = 1/q. Each
//! member contributes (2π)²|det H(ωᵢ)|^{−1/2}e^{iπσᵢ/4} to the θ-series,
//! whose argument is the limiting phase.

use std::f64::consts::PI;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critpoints::{find_critical_points_report, CritSettings};
use crate::error::{Error, Result};
use crate::fields::{ExpressionField, SymMatrix, YRange};
use crate::lagrangian::{build_irrationality_lagrangian_with, GeometricLagrangian, IrrationalityOptions};
use crate::linalg::{determinant, Spectrum, EIGEN_ZERO_RELATIVE};
use crate::phasetrack::{track_phase, PhaseSequence, TrackSettings, TrackVerdict};
use crate::quadrature::{oscillatory_integral, pairwise_sum, QuadratureSettings};
use crate::stationary::{predict_phase, PhasePrediction, PhaseVerdict};

/// What is known about α₀ in advance, for known-answer runs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum KnownAnswer {
    /// α₀ = p/q, written "p/q".
    Rational(String),
    Irrational,
    #[default]
    Unknown,
}

impl KnownAnswer {
    pub fn rational(&self) -> Result<Option<BigRational>> {
        match self {
            KnownAnswer::Rational(s) => parse_rational(s).map(Some),
            _ => Ok(None),
        }
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    BigRational::from_str(s.trim())
        .map_err(|e| Error::InvalidArgument(format!("'{s}' is not a rational p/q: {e}")))
}

#[derive(Debug, Clone)]
pub struct IrrationalityProblem {
    pub f: ExpressionField,
    pub x0: f64,
    pub delta: f64,
    /// F(x₀), after the optional sign flip.
    pub alpha0: f64,
    pub fprime_x0: f64,
    pub known: KnownAnswer,
    pub range: YRange,
    pub sign_flipped: bool,
}

impl IrrationalityProblem {
    pub fn new(
        f: ExpressionField,
        x0: f64,
        delta: f64,
        range: YRange,
        known: KnownAnswer,
        auto_sign_flip: bool,
    ) -> Result<Self> {
        let options = IrrationalityOptions {
            auto_sign_flip,
            check_orthogonality: false,
        };
        let probe = build_irrationality_lagrangian_with(&f, x0, delta, 0.5, 0.5, options)?;
        let tag = *probe.irrationality().expect("irrationality builder sets the tag");
        if let Some(target) = known.rational()? {
            let t = target.to_f64().unwrap_or(f64::NAN);
            if !((t - tag.alpha0).abs() <= 1e-12 * t.abs().max(1.0)) {
                return Err(Error::InvalidArgument(format!(
                    "known value {target} differs from F(x0) = {}",
                    tag.alpha0
                )));
            }
        }
        Ok(Self {
            f,
            x0,
            delta,
            alpha0: tag.alpha0,
            fprime_x0: tag.fprime_x0,
            known,
            range,
            sign_flipped: tag.sign_flipped,
        })
    }

    /// The irrationality Lagrangian on Ω_δ(M, N).
    pub fn lagrangian(&self, m_cut: f64, n_cut: f64) -> Result<GeometricLagrangian> {
        let options = IrrationalityOptions {
            auto_sign_flip: self.sign_flipped,
            check_orthogonality: false,
        };
        build_irrationality_lagrangian_with(&self.f, self.x0, self.delta, m_cut, n_cut, options)
    }

    /// The exact family, if the known answer is a positive rational.
    pub fn family(&self) -> Result<CriticalFamily> {
        match self.known.rational()? {
            Some(r) => exact_zero_family(&r),
            None => Err(Error::NoFamily(format!(
                "no rational value is known for alpha0 = {}",
                self.alpha0
            ))),
        }
    }
}

/// mᵢ = m₀/i, nᵢ = n₀/i with α₀m₀ = n₀ exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalFamily {
    alpha0: BigRational,
    m0: BigRational,
    n0: BigRational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub alpha0: String,
    pub m0: String,
    pub n0: String,
    pub m0_value: f64,
    pub n0_value: f64,
}

impl CriticalFamily {
    pub fn alpha0(&self) -> &BigRational {
        &self.alpha0
    }

    pub fn m0(&self) -> &BigRational {
        &self.m0
    }

    pub fn n0(&self) -> &BigRational {
        &self.n0
    }

    pub fn m0_value(&self) -> f64 {
        self.m0.to_f64().expect("m0 in (0, 1]")
    }

    pub fn n0_value(&self) -> f64 {
        self.n0.to_f64().expect("n0 in (0, 1]")
    }

    /// (mᵢ, nᵢ) as floats.
    pub fn member(&self, i: usize) -> (f64, f64) {
        (self.m0_value() / i as f64, self.n0_value() / i as f64)
    }

    /// Exact (mᵢ, nᵢ).
    pub fn member_exact(&self, i: usize) -> (BigRational, BigRational) {
        let i = BigRational::from_integer(BigInt::from(i));
        (&self.m0 / &i, &self.n0 / &i)
    }

    /// Number of members with mᵢ ≥ M and nᵢ ≥ N.
    pub fn members_in_window(&self, m_cut: f64, n_cut: f64) -> usize {
        let (m0, n0) = (self.m0_value(), self.n0_value());
        let mut count = 0;
        while m0 / (count + 1) as f64 >= m_cut && n0 / (count + 1) as f64 >= n_cut {
            count += 1;
        }
        count
    }

    /// Members of the window strictly inside the box, i.e. with mᵢ < 1 and
    /// nᵢ < 1. With m₀ = 1 or n₀ = 1 the first member sits on a face.
    pub fn interior_members_in_window(&self, m_cut: f64, n_cut: f64) -> Vec<usize> {
        let one = BigRational::one();
        (1..=self.members_in_window(m_cut, n_cut))
            .filter(|&i| {
                let (m, n) = self.member_exact(i);
                m < one && n < one
            })
            .collect()
    }

    pub fn record(&self) -> FamilyRecord {
        FamilyRecord {
            alpha0: self.alpha0.to_string(),
            m0: self.m0.to_string(),
            n0: self.n0.to_string(),
            m0_value: self.m0_value(),
            n0_value: self.n0_value(),
        }
    }
}

/// For α₀ = p/q in lowest terms the zeros need m = 1/k, n = 1/j with
/// kq/p = j, so k is a multiple of p; the largest pair is m₀ = 1/p, n₀ = 1/q.
pub fn exact_zero_family(alpha0: &BigRational) -> Result<CriticalFamily> {
    if !alpha0.is_positive() {
        return Err(Error::NoFamily(format!("alpha0 = {alpha0} is not positive")));
    }
    let p = alpha0.numer().clone();
    let q = alpha0.denom().clone();
    let m0 = BigRational::new(BigInt::one(), p);
    let n0 = BigRational::new(BigInt::one(), q);
    if alpha0 * &m0 != n0 {
        return Err(Error::NoFamily(format!("alpha0 * m0 != n0 for alpha0 = {alpha0}")));
    }
    Ok(CriticalFamily {
        alpha0: alpha0.clone(),
        m0,
        n0,
    })
}

/// Closed-form Hessian of the irrationality Lagrangian at ωᵢ.
pub fn family_hessian(problem: &IrrationalityProblem, family: &CriticalFamily, i: usize) -> SymMatrix {
    assert!(i >= 1, "family members are indexed from 1");
    let (m, n) = family.member(i);
    let fp = problem.fprime_x0;
    let a = problem.alpha0;
    let pi2 = PI * PI;
    SymMatrix::from_rows(&[
        vec![2.0 * fp * fp + 2.0, -2.0 * fp, 0.0, 0.0],
        vec![-2.0 * fp, 2.0 + 2.0 * m * m, 2.0 * a * m, -2.0 * m],
        vec![0.0, 2.0 * a * m, 2.0 * pi2 / m.powi(4) + 2.0 * a * a, -2.0 * a],
        vec![0.0, -2.0 * m, -2.0 * a, 2.0 * pi2 / n.powi(4) + 2.0],
    ])
}

/// The constant C in det H(ωᵢ) ≈ C·i⁸/m₀⁸.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeadingConstant {
    /// C = 16π⁴/α₀⁴, the limit of det H(ωᵢ)·m₀⁸/i⁸.
    #[default]
    AlphaFourth,
    /// C = 16π⁴/α₀.
    AlphaFirst,
}

impl LeadingConstant {
    pub fn value(self, alpha0: f64) -> f64 {
        let c = 16.0 * PI.powi(4);
        match self {
            LeadingConstant::AlphaFourth => c / alpha0.powi(4),
            LeadingConstant::AlphaFirst => c / alpha0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyDeterminant {
    pub exact: f64,
    pub leading: f64,
    pub ratio: f64,
}

pub fn family_det(problem: &IrrationalityProblem, family: &CriticalFamily, i: usize) -> FamilyDeterminant {
    family_det_with(problem, family, i, LeadingConstant::default())
}

pub fn family_det_with(
    problem: &IrrationalityProblem,
    family: &CriticalFamily,
    i: usize,
    constant: LeadingConstant,
) -> FamilyDeterminant {
    let exact = determinant(&family_hessian(problem, family, i));
    let leading = constant.value(problem.alpha0) * (i as f64 / family.m0_value()).powi(8);
    FamilyDeterminant {
        exact,
        leading,
        ratio: exact / leading,
    }
}

/// One family member's contribution to θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyTerm {
    pub i: usize,
    pub det: FamilyDeterminant,
    pub signature: i32,
    pub degenerate: bool,
    /// (2π)²|det|^{−1/2}e^{iπσ/4}, zero when degenerate.
    pub term: Complex64,
}

pub fn family_term(problem: &IrrationalityProblem, family: &CriticalFamily, i: usize) -> FamilyTerm {
    let hessian = family_hessian(problem, family, i);
    let spectrum = Spectrum::of_scaled(&hessian);
    let thr = spectrum.zero_threshold(EIGEN_ZERO_RELATIVE, 1.0);
    let degenerate = spectrum.zero_count(thr) > 0;
    let signature = spectrum.signature(thr);
    let det = family_det(problem, family, i);
    let term = if degenerate {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::from_polar(4.0 * PI * PI / det.exact.abs().sqrt(), PI * signature as f64 / 4.0)
    };
    FamilyTerm {
        i,
        det,
        signature,
        degenerate,
        term,
    }
}

/// Terms for i = 1..=count.
pub fn family_terms(problem: &IrrationalityProblem, family: &CriticalFamily, count: usize) -> Vec<FamilyTerm> {
    (1..=count)
        .into_par_iter()
        .map(|i| family_term(problem, family, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPartial {
    pub value: Complex64,
    pub members: usize,
    pub skipped_degenerate: usize,
    /// No family member lies in the window; `value` is 0.
    pub empty_window: bool,
}

/// θ_{M,N}: the sum over family members inside Ω_δ(M, N).
pub fn theta_partial(
    problem: &IrrationalityProblem,
    family: &CriticalFamily,
    m_cut: f64,
    n_cut: f64,
) -> Result<ThetaPartial> {
    for (name, cut) in [("M", m_cut), ("N", n_cut)] {
        if !(cut > 0.0 && cut < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} = {cut} must lie in (0, 1)")));
        }
    }
    let members = family.members_in_window(m_cut, n_cut);
    let terms = family_terms(problem, family, members);
    let values: Vec<Complex64> = terms.iter().map(|t| t.term).collect();
    Ok(ThetaPartial {
        value: pairwise_sum(&values),
        members,
        skipped_degenerate: terms.iter().filter(|t| t.degenerate).count(),
        empty_window: members == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnsetSettings {
    /// Members scanned for the determinant ratio.
    pub scan_budget: usize,
    /// |ratio − 1| allowed from the onset on.
    pub tolerance: f64,
}

impl Default for OnsetSettings {
    fn default() -> Self {
        Self {
            scan_budget: 2000,
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaLimit {
    pub value: Complex64,
    pub tail_bound: f64,
    pub terms_used: usize,
    /// First member from which the ratio stays within tolerance, the
    /// determinant is positive and σ = 4.
    pub onset: usize,
    /// max(ratio^{−1/2}) − 1 over the scanned members past the onset.
    pub margin: f64,
    #[serde(skip)]
    pub terms: Vec<FamilyTerm>,
}

impl ThetaLimit {
    /// Analytic bound on Σ_{i>cut} |termᵢ|, valid for cut ≥ onset − 1.
    pub fn analytic_tail(&self, family: &CriticalFamily, cut: usize) -> f64 {
        analytic_tail(family, self.margin, cut)
    }

    /// Bound on |θ over members 1..=cut − θ|: the computed terms between
    /// `cut` and the truncation plus the analytic tail past it.
    pub fn window_bound(&self, family: &CriticalFamily, cut: usize) -> f64 {
        let middle: f64 = self.terms.iter().skip(cut).map(|t| t.term.norm()).sum();
        if cut >= self.terms_used {
            self.analytic_tail(family, cut)
        } else {
            middle + self.tail_bound
        }
    }
}

fn analytic_tail(family: &CriticalFamily, margin: f64, cut: usize) -> f64 {
    if cut == 0 {
        return f64::INFINITY;
    }
    let mn = family.m0_value() * family.n0_value();
    mn * mn * (1.0 + margin) / (3.0 * (cut as f64).powi(3))
}

/// θ truncated where the analytic tail drops below `tol`.
pub fn theta_limit(
    problem: &IrrationalityProblem,
    family: &CriticalFamily,
    tol: f64,
    onset: &OnsetSettings,
) -> Result<ThetaLimit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    let scan = family_terms(problem, family, onset.scan_budget.max(2));
    let settled = |t: &FamilyTerm| {
        !t.degenerate && t.det.exact > 0.0 && t.signature == 4 && (t.det.ratio - 1.0).abs() <= onset.tolerance
    };
    let unsettled_tail = scan.iter().rposition(|t| !settled(t));
    let onset_index = match unsettled_tail {
        None => 1,
        Some(k) if k + 1 < scan.len() => k + 2,
        Some(_) => return Err(Error::SlowOnset { budget: scan.len() }),
    };
    let worst = |terms: &[FamilyTerm]| {
        terms
            .iter()
            .map(|t| t.det.ratio.powf(-0.5))
            .fold(1.0f64, f64::max)
    };
    let mut margin = worst(&scan[onset_index - 1..]) - 1.0;
    let mut cut = (onset_index - 1).max(1);
    while analytic_tail(family, margin, cut) >= tol {
        cut += 1;
    }
    let terms = if cut > scan.len() {
        let more = family_terms(problem, family, 2 * cut);
        margin = margin.max(worst(&more[onset_index - 1..]) - 1.0);
        while analytic_tail(family, margin, cut) >= tol {
            cut += 1;
        }
        more
    } else {
        scan
    };
    let used: Vec<FamilyTerm> = terms.into_iter().take(cut).collect();
    let values: Vec<Complex64> = used.iter().map(|t| t.term).collect();
    Ok(ThetaLimit {
        value: pairwise_sum(&values),
        tail_bound: analytic_tail(family, margin, cut),
        terms_used: cut,
        onset: onset_index,
        margin,
        terms: used,
    })
}

/// M_k = N_k = 2m₀/(2k+1), strictly between m₀/(k+1) and m₀/k.
pub fn harmonic_window(m0: f64, k: usize) -> f64 {
    2.0 * m0 / (2 * k + 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSettings {
    pub schedule: Vec<f64>,
    pub quadrature: QuadratureSettings,
    pub track: TrackSettings,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            schedule: crate::phasetrack::default_schedule(),
            quadrature: QuadratureSettings {
                qmc_points: 1 << 14,
                ..QuadratureSettings::default()
            },
            track: TrackSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportSettings {
    /// Window indices k; the cut is [`harmonic_window`] of m₀ (1 without a family).
    pub windows: Vec<usize>,
    pub theta_tol: f64,
    pub onset: OnsetSettings,
    pub crit: CritSettings,
    /// Allowed gap between a window's predicted phase and arg θ_{M,N}.
    pub phase_agreement: f64,
    /// QMC phase samples per window; off by default.
    pub oracle: Option<OracleSettings>,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            windows: vec![2, 3, 4],
            theta_tol: 1e-8,
            onset: OnsetSettings::default(),
            crit: CritSettings::default(),
            phase_agreement: 1e-6,
            oracle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBranch {
    pub family: Option<FamilyRecord>,
    pub theta: Option<ThetaLimit>,
    /// arg θ.
    pub phase: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub k: usize,
    pub m_cut: f64,
    pub n_cut: f64,
    pub critical_points: usize,
    pub zero_level: usize,
    pub degenerate: usize,
    /// Critical points with |x − x₀| > 1e-6·δ.
    pub off_x0: usize,
    pub min_nonzero_l: Option<f64>,
    pub prediction: PhasePrediction,
    pub family_members: Option<usize>,
    pub theta_partial: Option<Complex64>,
    /// Family members strictly inside the box, and their share of θ_{M,N}.
    pub interior_members: Option<usize>,
    pub interior_theta: Option<Complex64>,
    pub oracle: Option<PhaseSequence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportVerdict {
    RationalConsistent,
    IrrationalConsistent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrationalityReport {
    pub x0: f64,
    pub delta: f64,
    pub alpha0: f64,
    pub fprime_x0: f64,
    pub sign_flipped: bool,
    pub known: KnownAnswer,
    pub analytic: AnalyticBranch,
    pub windows: Vec<WindowResult>,
    pub verdict: ReportVerdict,
    pub reasons: Vec<String>,
}

pub fn irrationality_report(problem: &IrrationalityProblem, settings: &ReportSettings) -> Result<IrrationalityReport> {
    if settings.windows.is_empty() {
        return Err(Error::InvalidArgument("at least one window is required".into()));
    }
    let family = match problem.family() {
        Ok(f) => Some(f),
        Err(Error::NoFamily(_)) => None,
        Err(e) => return Err(e),
    };
    let analytic = match &family {
        Some(fam) => {
            let theta = theta_limit(problem, fam, settings.theta_tol, &settings.onset)?;
            AnalyticBranch {
                family: Some(fam.record()),
                phase: Some(theta.value.arg()),
                theta: Some(theta),
                note: format!("alpha0 = {} admits the exact critical family", fam.alpha0()),
            }
        }
        None => AnalyticBranch {
            family: None,
            theta: None,
            phase: None,
            note: "no exact critical family: alpha0 is not a known positive rational".into(),
        },
    };
    let m0 = family.as_ref().map_or(1.0, |f| f.m0_value());
    let windows = settings
        .windows
        .iter()
        .map(|&k| window_result(problem, family.as_ref(), m0, k, settings))
        .collect::<Result<Vec<_>>>()?;
    let (verdict, reasons) = combine(problem, family.as_ref(), &windows, settings);
    Ok(IrrationalityReport {
        x0: problem.x0,
        delta: problem.delta,
        alpha0: problem.alpha0,
        fprime_x0: problem.fprime_x0,
        sign_flipped: problem.sign_flipped,
        known: problem.known.clone(),
        analytic,
        windows,
        verdict,
        reasons,
    })
}

fn window_result(
    problem: &IrrationalityProblem,
    family: Option<&CriticalFamily>,
    m0: f64,
    k: usize,
    settings: &ReportSettings,
) -> Result<WindowResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("window indices start at 1".into()));
    }
    let cut = harmonic_window(m0, k);
    let lag = problem.lagrangian(cut, cut)?;
    let report = find_critical_points_report(&lag, &settings.crit)?;
    let points = &report.points;
    let prediction = predict_phase(points, problem.range, lag.arity())?;
    let theta = family.map(|f| theta_partial(problem, f, cut, cut)).transpose()?;
    let interior = family.map(|f| {
        let members = f.interior_members_in_window(cut, cut);
        let terms: Vec<Complex64> = members.iter().map(|&i| family_term(problem, f, i).term).collect();
        (members.len(), pairwise_sum(&terms))
    });
    let oracle = match &settings.oracle {
        Some(o) => Some(track_phase(
            |h| {
                let r = oscillatory_integral(&lag, problem.range, h, &o.quadrature)?;
                Ok((r.value, r.error_estimate))
            },
            &o.schedule,
            &o.track,
        )?),
        None => None,
    };
    Ok(WindowResult {
        k,
        m_cut: cut,
        n_cut: cut,
        critical_points: points.len(),
        zero_level: points.iter().filter(|p| p.zero_level).count(),
        degenerate: points.iter().filter(|p| p.degenerate).count(),
        off_x0: points
            .iter()
            .filter(|p| (p.location[0] - problem.x0).abs() > 1e-6 * problem.delta)
            .count(),
        min_nonzero_l: report.min_nonzero_l,
        prediction,
        family_members: theta.as_ref().map(|t| t.members),
        theta_partial: theta.map(|t| t.value),
        interior_members: interior.map(|i| i.0),
        interior_theta: interior.map(|i| i.1),
        oracle,
    })
}

fn combine(
    problem: &IrrationalityProblem,
    family: Option<&CriticalFamily>,
    windows: &[WindowResult],
    settings: &ReportSettings,
) -> (ReportVerdict, Vec<String>) {
    let mut reasons = Vec::new();
    let oracle_settles = windows
        .iter()
        .any(|w| matches!(w.oracle.as_ref().map(|o| &o.verdict), Some(TrackVerdict::Converged { .. })));
    match (&problem.known, family) {
        (KnownAnswer::Rational(_), Some(_)) => {
            let mut ok = true;
            let mut nonempty = 0;
            for w in windows {
                let members = w.interior_members.unwrap_or(0);
                if w.zero_level != members {
                    ok = false;
                    reasons.push(format!(
                        "window k = {}: {} zero-level points found, {} interior family members expected",
                        w.k, w.zero_level, members
                    ));
                }
                if members == 0 {
                    continue;
                }
                nonempty += 1;
                match (w.prediction.verdict, w.interior_theta) {
                    (PhaseVerdict::Converges { phase }, Some(theta)) => {
                        let gap = crate::phasetrack::wrap_phase(phase - theta.arg()).abs();
                        if gap > settings.phase_agreement {
                            ok = false;
                            reasons.push(format!(
                                "window k = {}: predicted phase {phase} differs from the family phase {} by {gap:e}",
                                w.k,
                                theta.arg()
                            ));
                        }
                    }
                    (v, _) => {
                        ok = false;
                        reasons.push(format!("window k = {}: prediction {v:?} instead of a limit", w.k));
                    }
                }
            }
            if nonempty == 0 {
                ok = false;
                reasons.push("no window contains an interior family member".into());
            }
            if ok {
                reasons.push("every window reproduces the exact family and its phase".into());
                (ReportVerdict::RationalConsistent, reasons)
            } else {
                (ReportVerdict::Inconclusive, reasons)
            }
        }
        (KnownAnswer::Irrational, _) => {
            let zero: usize = windows.iter().map(|w| w.zero_level).sum();
            let settling = windows
                .iter()
                .filter(|w| !matches!(w.prediction.verdict, PhaseVerdict::Diverges))
                .count();
            if zero == 0 && settling == 0 && !oracle_settles {
                reasons.push("no zero-level critical points in any window; the phase does not settle".into());
                (ReportVerdict::IrrationalConsistent, reasons)
            } else {
                reasons.push(format!(
                    "{zero} zero-level points, {settling} windows without a divergence verdict, oracle settles: {oracle_settles}"
                ));
                (ReportVerdict::Inconclusive, reasons)
            }
        }
        _ => {
            let with_zero = windows.iter().filter(|w| w.zero_level > 0).count();
            let converging = windows
                .iter()
                .filter(|w| matches!(w.prediction.verdict, PhaseVerdict::Converges { .. }))
                .count();
            if with_zero == windows.len() && converging == windows.len() {
                reasons.push("zero-level critical points in every window".into());
                (ReportVerdict::RationalConsistent, reasons)
            } else {
                reasons.push(format!(
                    "{with_zero} of {} windows contain zero-level points; finite windows cannot exclude larger denominators",
                    windows.len()
                ));
                (ReportVerdict::Inconclusive, reasons)
            }
        }
    }
}

/// Zero check of α₀ against the family: α₀·m₀ − n₀ in exact arithmetic.
pub fn family_residual(family: &CriticalFamily) -> BigRational {
    family.alpha0() * family.m0() - family.n0()
}

/// True when 1/mᵢ and 1/nᵢ are integers, so sin(π/mᵢ) = sin(π/nᵢ) = 0.
pub fn member_is_structural_zero(family: &CriticalFamily, i: usize) -> bool {
    let (m, n) = family.member_exact(i);
    !m.is_zero() && !n.is_zero() && m.recip().is_integer() && n.recip().is_integer()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Order;
    use proptest::prelude::*;

    fn identity_problem(x0: f64, known: KnownAnswer) -> IrrationalityProblem {
        let f = ExpressionField::parse("(var x)", &["x"]).unwrap();
        IrrationalityProblem::new(f, x0, 0.1, YRange::default(), known, false).unwrap()
    }

    fn half() -> IrrationalityProblem {
        identity_problem(0.5, KnownAnswer::Rational("1/2".into()))
    }

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn families_for_small_rationals() {
        let f = exact_zero_family(&rat(1, 2)).unwrap();
        assert_eq!((f.m0().clone(), f.n0().clone()), (rat(1, 1), rat(1, 2)));
        let f = exact_zero_family(&rat(2, 3)).unwrap();
        assert_eq!((f.m0().clone(), f.n0().clone()), (rat(1, 2), rat(1, 3)));
        let f = exact_zero_family(&rat(1, 1)).unwrap();
        assert_eq!((f.m0().clone(), f.n0().clone()), (rat(1, 1), rat(1, 1)));
        assert!(matches!(exact_zero_family(&rat(0, 1)), Err(Error::NoFamily(_))));
        assert!(matches!(exact_zero_family(&rat(-1, 3)), Err(Error::NoFamily(_))));
    }

    #[test]
    fn no_family_without_a_known_rational() {
        let p = identity_problem(0.5f64.sqrt(), KnownAnswer::Irrational);
        assert!(matches!(p.family(), Err(Error::NoFamily(_))));
    }

    #[test]
    fn known_value_must_match_f_at_x0() {
        let f = ExpressionField::parse("(var x)", &["x"]).unwrap();
        let r = IrrationalityProblem::new(f, 0.5, 0.1, YRange::default(), KnownAnswer::Rational("1/3".into()), false);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn first_member_hessian() {
        let p = half();
        let fam = p.family().unwrap();
        let pi2 = PI * PI;
        let want = SymMatrix::from_rows(&[
            vec![4.0, -2.0, 0.0, 0.0],
            vec![-2.0, 4.0, 1.0, -2.0],
            vec![0.0, 1.0, 2.0 * pi2 + 0.5, -1.0],
            vec![0.0, -2.0, -1.0, 32.0 * pi2 + 2.0],
        ]);
        assert_eq!(family_hessian(&p, &fam, 1), want);
    }

    #[test]
    fn closed_form_hessian_matches_ad() {
        let p = half();
        let fam = p.family().unwrap();
        let lag = p.lagrangian(0.005, 0.005).unwrap();
        for i in [1, 2, 7, 50] {
            let (m, n) = fam.member(i);
            let ad = lag.field().evaluate_unchecked(&[0.5, 0.5, m, n], Order::Hessian).unwrap();
            let ad = ad.hessian.unwrap();
            let closed = family_hessian(&p, &fam, i);
            let diff: Vec<f64> = (0..4)
                .flat_map(|r| (0..4).map(move |c| (r, c)))
                .map(|(r, c)| closed.get(r, c) - ad.get(r, c))
                .collect();
            let rel = diff.iter().map(|d| d * d).sum::<f64>().sqrt() / closed.frobenius_norm();
            assert!(rel <= 1e-6, "i = {i}: {rel}");
            assert!(ad.get(0, 0) == 2.0 * p.fprime_x0.powi(2) + 2.0);
        }
    }

    #[test]
    fn determinant_ratio_tends_to_one() {
        let p = half();
        let fam = p.family().unwrap();
        let d = family_det(&p, &fam, 100);
        assert!((d.ratio - 1.0).abs() <= 0.01, "{d:?}");
        let d = family_det(&p, &fam, 1000);
        assert!((d.ratio - 1.0).abs() <= 0.001, "{d:?}");
        // the α₀¹ constant undershoots by α₀³
        let first = family_det_with(&p, &fam, 1000, LeadingConstant::AlphaFirst);
        assert!((first.ratio - 0.125f64.recip()).abs() < 0.01);
        assert!((first.leading - 32.0 * PI.powi(4) * 1e24).abs() < 1e-9 * first.leading);
    }

    #[test]
    fn window_membership() {
        let p = half();
        let fam = p.family().unwrap();
        let empty = theta_partial(&p, &fam, 0.6, 0.6).unwrap();
        assert!(empty.empty_window);
        assert_eq!(empty.value, Complex64::new(0.0, 0.0));
        let two = theta_partial(&p, &fam, 0.2, 0.2).unwrap();
        assert_eq!(two.members, 2);
        let bound: f64 = family_terms(&p, &fam, 2).iter().map(|t| t.term.norm()).sum();
        assert!(two.value.norm() <= bound * (1.0 + 1e-15));
    }

    #[test]
    fn identity_members_are_positive_definite() {
        let p = half();
        let fam = p.family().unwrap();
        for t in family_terms(&p, &fam, 200) {
            assert_eq!(t.signature, 4);
            assert!(t.det.exact > 0.0);
            assert!(!t.degenerate);
        }
    }

    #[test]
    fn theta_limit_truncation_matches_tail_arithmetic() {
        let p = half();
        let fam = p.family().unwrap();
        let lim = theta_limit(&p, &fam, 1e-8, &OnsetSettings::default()).unwrap();
        // (m₀n₀)²/(3I³) < 1e-8·(1+margin)^{-1} with m₀n₀ = 1/2
        let i = lim.terms_used as f64;
        assert!(0.25 * (1.0 + lim.margin) / (3.0 * i.powi(3)) < 1e-8);
        assert!(0.25 * (1.0 + lim.margin) / (3.0 * (i - 1.0).powi(3)) >= 1e-8);
        assert!((lim.value.arg().abs() - PI).abs() < 1e-12);
        assert!(lim.tail_bound < 1e-8);
    }

    #[test]
    fn doubling_tol_moves_value_within_bound() {
        let p = half();
        let fam = p.family().unwrap();
        let o = OnsetSettings::default();
        for tol in [1e-4, 1e-6, 1e-8] {
            let a = theta_limit(&p, &fam, tol, &o).unwrap();
            let b = theta_limit(&p, &fam, 2.0 * tol, &o).unwrap();
            assert!((a.value - b.value).norm() <= a.tail_bound.max(b.tail_bound));
        }
    }

    #[test]
    fn slow_onset_is_reported() {
        let p = half();
        let fam = p.family().unwrap();
        let o = OnsetSettings {
            scan_budget: 50,
            tolerance: 1e-9,
        };
        assert!(matches!(theta_limit(&p, &fam, 1e-8, &o), Err(Error::SlowOnset { .. })));
    }

    #[test]
    fn harmonic_windows_sit_between_members() {
        for k in 1..30 {
            let c = harmonic_window(1.0, k);
            assert!(c < 1.0 / k as f64 && c > 1.0 / (k + 1) as f64);
        }
    }

    #[test]
    fn report_on_known_rational() {
        let p = half();
        let settings = ReportSettings {
            windows: vec![2, 4],
            ..ReportSettings::default()
        };
        let r = irrationality_report(&p, &settings).unwrap();
        assert_eq!(r.verdict, ReportVerdict::RationalConsistent, "{:?}", r.reasons);
        // k = 2 holds only ω₁, which lies on the m = 1 face
        assert_eq!(r.windows[0].family_members, Some(1));
        assert_eq!(r.windows[0].interior_members, Some(0));
        assert_eq!(r.windows[1].zero_level, 1);
        assert!((r.analytic.phase.unwrap().abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn report_on_known_irrational() {
        let p = identity_problem(0.5f64.sqrt(), KnownAnswer::Irrational);
        let settings = ReportSettings {
            windows: vec![2],
            ..ReportSettings::default()
        };
        let r = irrationality_report(&p, &settings).unwrap();
        assert_eq!(r.verdict, ReportVerdict::IrrationalConsistent, "{:?}", r.reasons);
        assert!(r.analytic.family.is_none());
    }

    proptest! {
        #[test]
        fn family_is_exact_for_any_positive_rational(p in 1i64..500, q in 1i64..500) {
            let a = rat(p, q);
            let fam = exact_zero_family(&a).unwrap();
            prop_assert!(family_residual(&fam).is_zero());
            prop_assert!(fam.m0() <= &rat(1, 1) && fam.n0() <= &rat(1, 1));
            for i in 1..6 {
                prop_assert!(member_is_structural_zero(&fam, i));
            }
            // no larger pair: m = 1/k with k < p cannot give an integer 1/n
            let (pr, qr) = (a.numer().clone(), a.denom().clone());
            for k in 1..pr.to_i64().unwrap().min(50) {
                let j = BigRational::new(BigInt::from(k) * &qr, pr.clone());
                prop_assert!(!j.is_integer());
            }
        }

        #[test]
        fn windows_grow_as_cuts_shrink(a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let p = half();
            let fam = p.family().unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(fam.members_in_window(lo, lo) >= fam.members_in_window(hi, hi));
        }

        #[test]
        fn cauchy_differences_within_tail_bound(cut in 1usize..400) {
            let p = half();
            let fam = p.family().unwrap();
            let lim = theta_limit(&p, &fam, 1e-7, &OnsetSettings::default()).unwrap();
            let partial: Vec<Complex64> = lim.terms.iter().take(cut).map(|t| t.term).collect();
            let diff = (pairwise_sum(&partial) - lim.value).norm();
            prop_assert!(diff <= lim.window_bound(&fam, cut) * (1.0 + 1e-12) + 1e-15);
            if cut + 1 >= lim.onset {
                prop_assert!(diff <= lim.analytic_tail(&fam, cut) + lim.tail_bound);
            }
        }
    }
}
