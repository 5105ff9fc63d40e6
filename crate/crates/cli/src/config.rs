//! The TOML run configuration and its validation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use phaselab::betaflow::{BetaProblem, SurrogateParams};
use phaselab::critpoints::CritSettings;
use phaselab::fields::{BoxDomain, ExpressionField, YRange};
use phaselab::irrational::{IrrationalityProblem, KnownAnswer, ReportSettings};
use phaselab::lagrangian::{
    build_algebraic_lagrangian, build_coupled_lagrangian, build_integer_points_lagrangian,
    build_irrationality_lagrangian_with, build_norm_lagrangian, build_rational_points_lagrangian, AlgebraicCuts,
    GeometricLagrangian, IrrationalityOptions,
};
use phaselab::phasetrack::{default_schedule, geometric_schedule, TrackSettings};
use phaselab::quadrature::QuadratureSettings;
use serde::{Deserialize, Serialize};

fn default_variable() -> String {
    "x".into()
}

/// Which builder assembles L, with its parameters. Expressions use the
/// prefix syntax of the core crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LagrangianSpec {
    /// L = Σ Fᵢ².
    Norm {
        variables: Vec<String>,
        fields: Vec<String>,
        domain: Vec<[f64; 2]>,
    },
    Irrationality {
        #[serde(default = "default_variable")]
        variable: String,
        f: String,
        x0: f64,
        delta: f64,
        m_cut: f64,
        n_cut: f64,
        #[serde(default)]
        auto_sign_flip: bool,
    },
    Coupled {
        #[serde(default = "default_variable")]
        variable: String,
        f: String,
        x0: f64,
        delta: f64,
        m_cut: f64,
        n_cut: f64,
        beta: f64,
    },
    RationalPoints {
        variables: Vec<String>,
        f: String,
        domain: Vec<[f64; 2]>,
        m_cuts: Vec<f64>,
        n_cuts: Vec<f64>,
    },
    IntegerPoints {
        variables: Vec<String>,
        f: String,
        domain: Vec<[f64; 2]>,
        m_cuts: Vec<f64>,
    },
    Algebraic {
        variables: Vec<String>,
        f: String,
        domain: Vec<[f64; 2]>,
        degree: usize,
        m_cut: f64,
        n_cut: f64,
        coefficient_range: [f64; 2],
        offset: f64,
    },
}

/// An explicit h ladder, or h = base·2^{k/2} for k < count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub h: Vec<f64>,
    pub base: f64,
    pub count: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let ladder = default_schedule();
        Self {
            h: Vec::new(),
            base: ladder[0],
            count: ladder.len(),
        }
    }
}

impl ScheduleConfig {
    pub fn ladder(&self) -> Vec<f64> {
        if self.h.is_empty() {
            geometric_schedule(self.base, self.count)
        } else {
            self.h.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrratConfig {
    pub known: KnownAnswer,
    pub report: ReportSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaConfig {
    /// Family members listed in the CSV.
    pub count: usize,
    /// Tail tolerance of the θ limit in the footer.
    pub tol: f64,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        Self { count: 100, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSource {
    /// The two-variable surrogate with `surrogate` parameters.
    #[default]
    Surrogate,
    /// The split of a `coupled` Lagrangian.
    Lagrangian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaFlowConfig {
    pub source: BetaSource,
    pub surrogate: SurrogateParams,
    pub order: usize,
    pub h: f64,
    /// Coupling strength; when absent it is chosen so that the regime
    /// product equals `product`.
    pub beta: Option<f64>,
    pub product: f64,
}

impl Default for BetaFlowConfig {
    fn default() -> Self {
        Self {
            source: BetaSource::Surrogate,
            surrogate: SurrogateParams::default(),
            order: 6,
            h: 20.0,
            beta: None,
            product: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifact path; stdout when absent.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lagrangian: Option<LagrangianSpec>,
    pub y_range: YRange,
    pub h: Option<f64>,
    pub schedule: ScheduleConfig,
    pub quadrature: QuadratureSettings,
    pub track: TrackSettings,
    pub crit: CritSettings,
    pub irrat: IrratConfig,
    pub theta: ThetaConfig,
    pub beta_flow: BetaFlowConfig,
    pub output: OutputConfig,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("config field `{field}`: must be positive and finite, got {v}");
    }
    Ok(())
}

fn bounds(field: &str, domain: &[[f64; 2]]) -> Result<BoxDomain> {
    let pairs: Vec<(f64, f64)> = domain.iter().map(|b| (b[0], b[1])).collect();
    BoxDomain::from_bounds(&pairs).with_context(|| format!("config field `{field}`"))
}

fn parse_field(field: &str, src: &str, names: &[String]) -> Result<ExpressionField> {
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    ExpressionField::parse(src, &names).with_context(|| format!("config field `{field}`"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Positivity of every tolerance and step the modules rely on.
    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.h {
            positive("h", h)?;
        }
        for (i, &h) in self.schedule.h.iter().enumerate() {
            positive(&format!("schedule.h[{i}]"), h)?;
        }
        positive("schedule.base", self.schedule.base)?;
        positive("quadrature.radians_per_panel", self.quadrature.radians_per_panel)?;
        positive("track.epsilon", self.track.epsilon)?;
        positive("track.noise_factor", self.track.noise_factor)?;
        positive("crit.dedup_relative", self.crit.dedup_relative)?;
        positive("crit.tol_grad_relative", self.crit.tol_grad_relative)?;
        positive("crit.tol_zero_relative", self.crit.tol_zero_relative)?;
        positive("irrat.report.theta_tol", self.irrat.report.theta_tol)?;
        positive("irrat.report.phase_agreement", self.irrat.report.phase_agreement)?;
        positive("irrat.report.onset.tolerance", self.irrat.report.onset.tolerance)?;
        positive("theta.tol", self.theta.tol)?;
        positive("beta_flow.h", self.beta_flow.h)?;
        positive("beta_flow.product", self.beta_flow.product)?;
        if let Some(beta) = self.beta_flow.beta {
            if !(beta >= 0.0 && beta.is_finite()) {
                bail!("config field `beta_flow.beta`: must be finite and >= 0, got {beta}");
            }
        }
        Ok(())
    }

    fn spec(&self) -> Result<&LagrangianSpec> {
        self.lagrangian
            .as_ref()
            .context("config field `lagrangian`: this command needs a [lagrangian] table")
    }

    pub fn build_lagrangian(&self) -> Result<GeometricLagrangian> {
        let l = match self.spec()? {
            LagrangianSpec::Norm {
                variables,
                fields,
                domain,
            } => {
                let system = fields
                    .iter()
                    .enumerate()
                    .map(|(i, src)| parse_field(&format!("lagrangian.fields[{i}]"), src, variables))
                    .collect::<Result<Vec<_>>>()?;
                build_norm_lagrangian(&system, bounds("lagrangian.domain", domain)?)?
            }
            LagrangianSpec::Irrationality {
                variable,
                f,
                x0,
                delta,
                m_cut,
                n_cut,
                auto_sign_flip,
            } => {
                let f = parse_field("lagrangian.f", f, std::slice::from_ref(variable))?;
                let options = IrrationalityOptions {
                    auto_sign_flip: *auto_sign_flip,
                    check_orthogonality: true,
                };
                build_irrationality_lagrangian_with(&f, *x0, *delta, *m_cut, *n_cut, options)?
            }
            LagrangianSpec::Coupled {
                variable,
                f,
                x0,
                delta,
                m_cut,
                n_cut,
                beta,
            } => {
                let f = parse_field("lagrangian.f", f, std::slice::from_ref(variable))?;
                build_coupled_lagrangian(&f, *x0, *delta, *m_cut, *n_cut, *beta)?
            }
            LagrangianSpec::RationalPoints {
                variables,
                f,
                domain,
                m_cuts,
                n_cuts,
            } => {
                let f = parse_field("lagrangian.f", f, variables)?;
                build_rational_points_lagrangian(&f, bounds("lagrangian.domain", domain)?, m_cuts, n_cuts)?
            }
            LagrangianSpec::IntegerPoints {
                variables,
                f,
                domain,
                m_cuts,
            } => {
                let f = parse_field("lagrangian.f", f, variables)?;
                build_integer_points_lagrangian(&f, bounds("lagrangian.domain", domain)?, m_cuts)?
            }
            LagrangianSpec::Algebraic {
                variables,
                f,
                domain,
                degree,
                m_cut,
                n_cut,
                coefficient_range,
                offset,
            } => {
                let f = parse_field("lagrangian.f", f, variables)?;
                let cuts = AlgebraicCuts {
                    m_cut: *m_cut,
                    n_cut: *n_cut,
                    coefficient_range: phaselab::fields::Interval::new(coefficient_range[0], coefficient_range[1])
                        .context("config field `lagrangian.coefficient_range`")?,
                    offset: *offset,
                    ..AlgebraicCuts::default()
                };
                build_algebraic_lagrangian(&f, *degree, bounds("lagrangian.domain", domain)?, &cuts)?
            }
        };
        Ok(l)
    }

    pub fn irrationality_problem(&self) -> Result<IrrationalityProblem> {
        match self.spec()? {
            LagrangianSpec::Irrationality {
                variable,
                f,
                x0,
                delta,
                auto_sign_flip,
                ..
            } => {
                let f = parse_field("lagrangian.f", f, std::slice::from_ref(variable))?;
                Ok(IrrationalityProblem::new(
                    f,
                    *x0,
                    *delta,
                    self.y_range,
                    self.irrat.known.clone(),
                    *auto_sign_flip,
                )?)
            }
            _ => bail!("config field `lagrangian.builder`: this command needs builder = \"irrationality\""),
        }
    }

    pub fn beta_problem(&self) -> Result<BetaProblem> {
        match self.beta_flow.source {
            BetaSource::Surrogate => Ok(BetaProblem::surrogate(self.beta_flow.surrogate, self.y_range)?),
            BetaSource::Lagrangian => {
                if !matches!(self.spec()?, LagrangianSpec::Coupled { .. }) {
                    bail!("config field `lagrangian.builder`: beta_flow.source = \"lagrangian\" needs builder = \"coupled\"");
                }
                Ok(BetaProblem::from_split(&self.build_lagrangian()?, self.y_range)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NORM: &str = r#"
[lagrangian]
builder = "norm"
variables = ["x"]
fields = ["x"]
domain = [[-1.0, 1.0]]
"#;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::from_toml(NORM).unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn full_irrationality_config_round_trips() {
        let text = r#"
h = 300.0
[lagrangian]
builder = "irrationality"
f = "x"
x0 = 0.5
delta = 0.05
m_cut = 0.4
n_cut = 0.4
[irrat.known]
kind = "rational"
value = "1/2"
[irrat.report]
windows = [2, 4]
[schedule]
h = [10.0, 20.0]
[beta_flow]
beta = 0.01
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.irrat.report.windows, vec![2, 4]);
        assert_eq!(cfg.schedule.ladder(), vec![10.0, 20.0]);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        assert_eq!(cfg.build_lagrangian().unwrap().arity(), 4);
    }

    #[test]
    fn unknown_and_missing_fields_are_named() {
        let err = RunConfig::from_toml(&format!("{NORM}\nbogus = 1\n")).unwrap_err();
        assert!(format!("{err:#}").contains("bogus"));
        let err = RunConfig::from_toml("[lagrangian]\nbuilder = \"irrationality\"\nf = \"x\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("x0"), "{err:#}");
    }

    #[test]
    fn non_positive_tolerances_are_rejected() {
        let err = RunConfig::from_toml(&format!("[track]\nepsilon = 0.0\n{NORM}")).unwrap_err();
        assert!(format!("{err:#}").contains("track.epsilon"));
    }

    #[test]
    fn bad_expression_names_the_field() {
        let text = NORM.replace("fields = [\"x\"]", "fields = [\"(+ x\"]");
        let cfg = RunConfig::from_toml(&text).unwrap();
        let err = cfg.build_lagrangian().unwrap_err();
        assert!(format!("{err:#}").contains("lagrangian.fields[0]"));
    }
}
