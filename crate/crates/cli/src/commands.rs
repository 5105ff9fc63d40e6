//! One function per subcommand. Each returns the artifact text, a one-line
//! summary and whether the verdict was inconclusive.

use anyhow::{Context, Result};
use num_complex::Complex64;
use phaselab::betaflow::{coupling_for_product, series_vs_direct};
use phaselab::critpoints::{find_critical_points, find_critical_points_report};
use phaselab::irrational::{family_terms, irrationality_report, theta_limit, ReportVerdict};
use phaselab::phasetrack::{track_phase, TrackVerdict};
use phaselab::quadrature::oscillatory_integral;
use phaselab::stationary::{predict_phase, PhaseVerdict};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{csv_with_footer, json_document};

pub struct Outcome {
    pub artifact: String,
    pub summary: String,
    pub inconclusive: bool,
}

impl Outcome {
    fn settled(artifact: String, summary: String) -> Self {
        Self {
            artifact,
            summary,
            inconclusive: false,
        }
    }
}

pub fn critpoints(cfg: &RunConfig) -> Result<Outcome> {
    let l = cfg.build_lagrangian()?;
    let report = find_critical_points_report(&l, &cfg.crit)?;
    let zero = report.points.iter().filter(|p| p.zero_level).count();
    let summary = format!(
        "critpoints: {} points ({} zero-level) from {} seeds",
        report.points.len(),
        zero,
        report.seeds
    );
    Ok(Outcome::settled(json_document("critpoints", &report)?, summary))
}

pub fn predict(cfg: &RunConfig) -> Result<Outcome> {
    let l = cfg.build_lagrangian()?;
    let points = find_critical_points(&l, &cfg.crit)?;
    let prediction = predict_phase(&points, cfg.y_range, l.arity())?;
    let (summary, inconclusive) = match prediction.verdict {
        PhaseVerdict::Converges { phase } => (format!("predict: converges to phase {phase:.12}"), false),
        PhaseVerdict::Diverges => ("predict: diverges".to_string(), false),
        PhaseVerdict::Inconclusive => (
            format!("predict: inconclusive ({})", prediction.diagnostics.reason),
            true,
        ),
    };
    Ok(Outcome {
        artifact: json_document("predict", &prediction)?,
        summary,
        inconclusive,
    })
}

#[derive(Serialize)]
struct OracleValue {
    h: f64,
    re: f64,
    im: f64,
    abs: f64,
    phase: f64,
    err: f64,
    nodes: u64,
    method: phaselab::quadrature::Method,
}

pub fn oracle(cfg: &RunConfig) -> Result<Outcome> {
    let h = cfg.h.context("config field `h`: the oracle needs --h or a top-level h")?;
    let l = cfg.build_lagrangian()?;
    let r = oscillatory_integral(&l, cfg.y_range, h, &cfg.quadrature)?;
    let v = OracleValue {
        h,
        re: r.value.re,
        im: r.value.im,
        abs: r.value.norm(),
        phase: r.value.arg(),
        err: r.error_estimate,
        nodes: r.node_count,
        method: r.method,
    };
    let summary = format!("oracle: I({h}) = {} (|I| = {:e}, err {:e})", r.value, v.abs, v.err);
    Ok(Outcome::settled(json_document("oracle", &v)?, summary))
}

#[derive(Serialize)]
struct ScanRow {
    h: f64,
    re: f64,
    im: f64,
    abs: f64,
    phase_raw: f64,
    phase_unwrapped: f64,
}

#[derive(Serialize)]
struct ScanFooter<'a> {
    verdict: &'a TrackVerdict,
    window: usize,
    epsilon: f64,
    max_error_estimate: f64,
}

pub fn phase_scan(cfg: &RunConfig) -> Result<Outcome> {
    let l = cfg.build_lagrangian()?;
    let evaluator = |h: f64| {
        let r = oscillatory_integral(&l, cfg.y_range, h, &cfg.quadrature)?;
        Ok((r.value, r.error_estimate))
    };
    let seq = track_phase(evaluator, &cfg.schedule.ladder(), &cfg.track)?;
    let rows: Vec<ScanRow> = seq
        .samples
        .iter()
        .zip(&seq.unwrapped)
        .map(|(s, &u)| ScanRow {
            h: s.h,
            re: s.value.re,
            im: s.value.im,
            abs: s.value.norm(),
            phase_raw: s.raw_phase,
            phase_unwrapped: u,
        })
        .collect();
    let footer = ScanFooter {
        verdict: &seq.verdict,
        window: cfg.track.window,
        epsilon: cfg.track.epsilon,
        max_error_estimate: seq.samples.iter().map(|s| s.error_estimate).fold(0.0, f64::max),
    };
    let (summary, inconclusive) = match &seq.verdict {
        TrackVerdict::Converged { limit, residual } => {
            (format!("phase-scan: converged to {limit:.6} (spread {residual:.2e})"), false)
        }
        TrackVerdict::NotConverged { spread } => (format!("phase-scan: not converged (spread {spread:.4})"), false),
        TrackVerdict::Inconclusive { reason } => (format!("phase-scan: inconclusive ({reason})"), true),
    };
    Ok(Outcome {
        artifact: csv_with_footer("phase-scan", &rows, &footer)?,
        summary,
        inconclusive,
    })
}

pub fn irrat(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.irrationality_problem()?;
    let report = irrationality_report(&problem, &cfg.irrat.report)?;
    let verdict = match report.verdict {
        ReportVerdict::RationalConsistent => "rational-consistent",
        ReportVerdict::IrrationalConsistent => "irrational-consistent",
        ReportVerdict::Inconclusive => "inconclusive",
    };
    let summary = match report.analytic.phase {
        Some(phi) => format!("irrat: {verdict}, arg theta = {phi:.12}"),
        None => format!("irrat: {verdict}"),
    };
    Ok(Outcome {
        artifact: json_document("irrat", &report)?,
        summary,
        inconclusive: report.verdict == ReportVerdict::Inconclusive,
    })
}

#[derive(Serialize)]
struct ThetaRow {
    i: usize,
    det_exact: f64,
    det_leading: f64,
    ratio: f64,
    sigma: i32,
    term_re: f64,
    term_im: f64,
}

#[derive(Serialize)]
struct ThetaFooter {
    family: phaselab::irrational::FamilyRecord,
    theta_re: f64,
    theta_im: f64,
    phase: f64,
    tail_bound: f64,
    terms_used: usize,
    onset: usize,
}

pub fn theta(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.irrationality_problem()?;
    let family = problem.family()?;
    let rows: Vec<ThetaRow> = family_terms(&problem, &family, cfg.theta.count)
        .into_iter()
        .map(|t| ThetaRow {
            i: t.i,
            det_exact: t.det.exact,
            det_leading: t.det.leading,
            ratio: t.det.ratio,
            sigma: t.signature,
            term_re: t.term.re,
            term_im: t.term.im,
        })
        .collect();
    let limit = theta_limit(&problem, &family, cfg.theta.tol, &cfg.irrat.report.onset)?;
    let footer = ThetaFooter {
        family: family.record(),
        theta_re: limit.value.re,
        theta_im: limit.value.im,
        phase: limit.value.arg(),
        tail_bound: limit.tail_bound,
        terms_used: limit.terms_used,
        onset: limit.onset,
    };
    let summary = format!(
        "theta: {} members listed, limit {} (tail <= {:e} after {} terms)",
        rows.len(),
        limit.value,
        limit.tail_bound,
        limit.terms_used
    );
    Ok(Outcome::settled(csv_with_footer("theta", &rows, &footer)?, summary))
}

#[derive(Serialize)]
struct BetaRow {
    j: usize,
    term_re: f64,
    term_im: f64,
    weight_re: f64,
    weight_im: f64,
    partial_re: f64,
    partial_im: f64,
    residual: f64,
}

#[derive(Serialize)]
struct BetaFooter {
    h: f64,
    beta: f64,
    regime_product: f64,
    direct_re: f64,
    direct_im: f64,
    direct_error: f64,
    quadrature_errors: Vec<f64>,
    truncation_bounds: Vec<f64>,
}

pub fn beta_flow(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.beta_problem()?;
    let bf = &cfg.beta_flow;
    let beta = match bf.beta {
        Some(b) => b,
        None => coupling_for_product(&problem, bf.h, bf.product)?,
    };
    let cmp = series_vs_direct(&problem, bf.order, bf.h, beta, &cfg.quadrature)?;
    let rows: Vec<BetaRow> = cmp
        .terms
        .iter()
        .zip(&cmp.partial_sums)
        .zip(&cmp.residuals)
        .map(|((t, s), &residual)| BetaRow {
            j: t.j,
            term_re: t.value.re,
            term_im: t.value.im,
            weight_re: t.weight.re,
            weight_im: t.weight.im,
            partial_re: s.re,
            partial_im: s.im,
            residual,
        })
        .collect();
    let last: Complex64 = *cmp.partial_sums.last().expect("order 0 gives one partial sum");
    let summary = format!(
        "beta-flow: r = {:.4}, S_{} = {}, residual {:.3e}",
        cmp.regime_product,
        bf.order,
        last,
        cmp.residuals.last().copied().unwrap_or(f64::NAN)
    );
    let footer = BetaFooter {
        h: cmp.h,
        beta: cmp.beta,
        regime_product: cmp.regime_product,
        direct_re: cmp.direct.re,
        direct_im: cmp.direct.im,
        direct_error: cmp.direct_error,
        quadrature_errors: cmp.quadrature_errors.clone(),
        truncation_bounds: cmp.truncation_bounds.clone(),
    };
    Ok(Outcome::settled(csv_with_footer("beta-flow", &rows, &footer)?, summary))
}
