//! Multistart damped Newton search for the interior critical points of a
//! Lagrangian, and their classification (value, Hessian, determinant,
//! signature, zero level, degeneracy).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{BoxDomain, Evaluation, ExpressionField, Order, SymMatrix};
use crate::lagrangian::{GeometricLagrangian, IrrationalityTag};
use crate::linalg::{determinant, regularized_newton_step, Spectrum, EIGEN_ZERO_RELATIVE};
use crate::lowdisc::Kronecker;

/// Largest k used for the 1/k and 2/(2k+1) family seeds.
const FAMILY_SEED_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub l_value: f64,
    pub grad_norm: f64,
    pub hessian: SymMatrix,
    pub eigenvalues: Vec<f64>,
    pub det: f64,
    pub signature: i32,
    pub zero_level: bool,
    pub degenerate: bool,
}

/// Absolute thresholds used for classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub grad: f64,
    pub zero: f64,
    pub eigen_relative: f64,
    /// Lower bound on the spectral radius used in the eigenvalue threshold.
    pub eigen_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            grad: 1e-9,
            zero: 1e-12,
            eigen_relative: EIGEN_ZERO_RELATIVE,
            eigen_floor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CritSettings {
    pub grid_density: usize,
    pub max_iter: usize,
    /// Dedup radius as a fraction of the box diameter.
    pub dedup_relative: f64,
    /// Above this many grid cells the seeds come from a Kronecker sequence.
    pub max_seeds: usize,
    pub tol_grad_relative: f64,
    pub tol_zero_relative: f64,
    /// Interior margin as a fraction of each interval width.
    pub interior_margin: f64,
    /// Consecutive full Newton steps leaving the box before a seed is dropped.
    pub escape_patience: usize,
    pub family_seeds: bool,
}

impl Default for CritSettings {
    fn default() -> Self {
        Self {
            grid_density: 16,
            max_iter: 60,
            dedup_relative: 1e-7,
            max_seeds: 65_536,
            tol_grad_relative: 1e-9,
            tol_zero_relative: 1e-12,
            interior_margin: 1e-9,
            escape_patience: 4,
            family_seeds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritReport {
    pub points: Vec<CriticalPoint>,
    pub seeds: usize,
    pub converged: usize,
    pub escaped: usize,
    pub stalled: usize,
    pub exhausted: usize,
    pub tolerances: Tolerances,
    /// Smallest L among the points with L above tol_zero.
    pub min_nonzero_l: Option<f64>,
}

enum Outcome {
    Converged(Vec<f64>, f64),
    Escaped,
    Stalled,
    Exhausted,
}

pub fn find_critical_points(l: &GeometricLagrangian, settings: &CritSettings) -> Result<Vec<CriticalPoint>> {
    find_critical_points_report(l, settings).map(|r| r.points)
}

pub fn find_critical_points_report(l: &GeometricLagrangian, settings: &CritSettings) -> Result<CritReport> {
    if settings.grid_density == 0 || settings.max_iter == 0 {
        return Err(Error::InvalidArgument("grid density and max_iter must be positive".into()));
    }
    let field = l.field();
    let domain = l.domain();
    let mut seeds = grid_seeds(domain, settings);
    if settings.family_seeds {
        if let Some(tag) = l.irrationality() {
            seeds.extend(family_seeds(tag, domain));
        }
    }

    let scales: Vec<(f64, f64)> = seeds
        .par_iter()
        .filter_map(|s| {
            let e = field.evaluate_unchecked(s, Order::Gradient).ok()?;
            Some((e.value, norm(e.gradient.as_deref().unwrap_or(&[]))))
        })
        .collect();
    let l_scale = scales.iter().map(|s| s.0).fold(1.0, f64::max);
    let g_scale = scales.iter().map(|s| s.1).fold(1.0, f64::max);
    let tolerances = Tolerances {
        grad: settings.tol_grad_relative * g_scale,
        zero: settings.tol_zero_relative * l_scale,
        ..Tolerances::default()
    };

    let outcomes: Vec<Outcome> = seeds
        .par_iter()
        .map(|s| refine(field, domain, s, tolerances.grad, settings))
        .collect();

    let (mut escaped, mut stalled, mut exhausted) = (0, 0, 0);
    let mut found = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Converged(x, gn) => found.push((x, gn)),
            Outcome::Escaped => escaped += 1,
            Outcome::Stalled => stalled += 1,
            Outcome::Exhausted => exhausted += 1,
        }
    }
    if 2 * exhausted > seeds.len() {
        return Err(Error::BudgetExceeded {
            failed: exhausted,
            seeds: seeds.len(),
        });
    }
    let converged = found.len();

    let radius = settings.dedup_relative * domain.diameter();
    let unique = dedup(found, radius);
    let interior: Vec<Vec<f64>> = unique
        .into_iter()
        .filter(|x| domain.interior_with_margin(x, settings.interior_margin))
        .collect();
    let mut points = interior
        .par_iter()
        .map(|x| classify_field(field, x, &tolerances))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| lex_cmp(&a.location, &b.location));

    let min_nonzero_l = points
        .iter()
        .filter(|p| !p.zero_level)
        .map(|p| p.l_value)
        .reduce(f64::min);
    Ok(CritReport {
        points,
        seeds: seeds.len(),
        converged,
        escaped,
        stalled,
        exhausted,
        tolerances,
        min_nonzero_l,
    })
}

/// Classifies `location`, failing with NotCritical when ‖∇L‖ > tol.grad.
pub fn classify_critical_point(l: &GeometricLagrangian, location: &[f64], tol: &Tolerances) -> Result<CriticalPoint> {
    if !l.domain().contains(location) {
        return Err(Error::DomainViolation(format!("{location:?} is outside the box")));
    }
    classify_field(l.field(), location, tol)
}

pub(crate) fn classify_field(field: &ExpressionField, location: &[f64], tol: &Tolerances) -> Result<CriticalPoint> {
    let Evaluation {
        value,
        gradient,
        hessian,
    } = field.evaluate_unchecked(location, Order::Hessian)?;
    let grad_norm = norm(&gradient.expect("order 2"));
    if grad_norm > tol.grad {
        return Err(Error::NotCritical {
            grad_norm,
            tolerance: tol.grad,
        });
    }
    let hessian = hessian.expect("order 2");
    let spectrum = Spectrum::of(&hessian);
    let thr = spectrum.zero_threshold(tol.eigen_relative, tol.eigen_floor);
    Ok(CriticalPoint {
        location: location.to_vec(),
        l_value: value,
        grad_norm,
        det: determinant(&hessian),
        signature: spectrum.signature(thr),
        degenerate: spectrum.zero_count(thr) > 0,
        zero_level: value.abs() <= tol.zero,
        eigenvalues: spectrum.eigenvalues,
        hessian,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Cell centres of a tensor grid, or a Kronecker sample of `max_seeds`
/// points when the grid would be larger.
fn grid_seeds(domain: &BoxDomain, settings: &CritSettings) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let k = settings.grid_density;
    let cells = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(k));
    match cells {
        Some(total) if total <= settings.max_seeds => (0..total)
            .map(|mut idx| {
                domain
                    .intervals
                    .iter()
                    .map(|iv| {
                        let c = idx % k;
                        idx /= k;
                        iv.lo + iv.width() * (c as f64 + 0.5) / k as f64
                    })
                    .collect()
            })
            .collect(),
        _ => {
            let seq = Kronecker::new(d);
            let shift = vec![0.5; d];
            let mut u = vec![0.0; d];
            (0..settings.max_seeds as u64)
                .map(|i| {
                    seq.point(i, &shift, &mut u);
                    domain
                        .intervals
                        .iter()
                        .zip(&u)
                        .map(|(iv, t)| iv.lo + iv.width() * t)
                        .collect()
                })
                .collect()
        }
    }
}

/// m, n ∈ {1/k, 2/(2k+1)} at (x₀, α₀): the zero-level family and the
/// cos(π/m) = 0 points.
pub fn family_seeds(tag: &IrrationalityTag, domain: &BoxDomain) -> Vec<Vec<f64>> {
    let values = |cut: f64| -> Vec<f64> {
        (1..=FAMILY_SEED_DEPTH)
            .flat_map(|k| [1.0 / k as f64, 2.0 / (2 * k + 1) as f64])
            .filter(|&v| v >= cut && v <= 1.0)
            .collect()
    };
    let ms = values(tag.m_cut);
    let ns = values(tag.n_cut);
    let mut out = Vec::with_capacity(ms.len() * ns.len());
    for &m in &ms {
        for &n in &ns {
            let p = vec![tag.x0, tag.alpha0, m, n];
            if domain.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

fn refine(field: &ExpressionField, domain: &BoxDomain, seed: &[f64], tol: f64, settings: &CritSettings) -> Outcome {
    let jet = |x: &[f64]| -> Option<(f64, Vec<f64>, SymMatrix)> {
        let e = field.evaluate_unchecked(x, Order::Hessian).ok()?;
        let g = e.gradient?;
        Some((norm(&g), g, e.hessian?))
    };
    let project = |x: &mut [f64]| {
        for (v, iv) in x.iter_mut().zip(&domain.intervals) {
            *v = v.clamp(iv.lo, iv.hi);
        }
    };
    let Some((mut gn, mut g, mut h)) = jet(seed) else {
        return Outcome::Escaped;
    };
    let mut x = seed.to_vec();
    let mut converged = gn <= tol;
    let mut outside = 0;
    let mut budget_spent = true;
    for _ in 0..settings.max_iter {
        if gn == 0.0 {
            budget_spent = false;
            break;
        }
        let d = regularized_newton_step(&h, &g, 1e-12);
        let target: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        if domain.contains_with_slack(&target, 0.0) {
            outside = 0;
        } else {
            outside += 1;
            if outside >= settings.escape_patience && !converged {
                return Outcome::Escaped;
            }
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut trial);
            if let Some((tn, tg, th)) = jet(&trial) {
                if tn < (1.0 - 1e-4 * step) * gn {
                    accepted = Some((trial, tn, tg, th));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xt, tn, tg, th)) = accepted else {
            let on_face = x.iter().zip(&domain.intervals).any(|(v, iv)| *v == iv.lo || *v == iv.hi);
            if on_face && !converged {
                return Outcome::Escaped;
            }
            budget_spent = false;
            break;
        };
        // Once inside tolerance keep polishing only while the gradient
        // still shrinks quickly; degenerate points converge linearly.
        let slow = converged && tn > 0.5 * gn;
        x = xt;
        gn = tn;
        g = tg;
        h = th;
        converged |= gn <= tol;
        if slow {
            budget_spent = false;
            break;
        }
    }
    if converged {
        Outcome::Converged(x, gn)
    } else if budget_spent {
        Outcome::Exhausted
    } else {
        Outcome::Stalled
    }
}

/// Greedy clustering in order of the first coordinate; within a cluster
/// the point with the smallest gradient norm wins.
fn dedup(mut found: Vec<(Vec<f64>, f64)>, radius: f64) -> Vec<Vec<f64>> {
    found.sort_by(|a, b| lex_cmp(&a.0, &b.0).then(a.1.total_cmp(&b.1)));
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    for (x, gn) in found {
        let mut merged = false;
        for k in (0..kept.len()).rev() {
            if kept[k].0[0] < x[0] - radius {
                break;
            }
            let dist = kept[k].0.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dist <= radius {
                if gn < kept[k].1 {
                    kept[k] = (x.clone(), gn);
                }
                merged = true;
                break;
            }
        }
        if !merged {
            kept.push((x, gn));
        }
    }
    kept.into_iter().map(|(x, _)| x).collect()
}
