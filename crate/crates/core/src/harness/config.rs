//! TOML experiment configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::ap::{GaussianBump, NullFunction, TrigPolynomial, WStarAPFunction};
use crate::corrector::{CorrectorOptions, DEFAULT_DELTAS};
use crate::error::{Error, Result};
use crate::fields::QuasiPeriodicEnsemble;
use crate::operators::{
    CoefficientField, EllipticOperator, LinearBranch, OperatorForm, PucciKind, ScalarField, SymMatrix,
};
use crate::solver::{Method, SolveOptions};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory (the CLI `--out` flag takes precedence).
    pub output: Option<PathBuf>,
    pub ensemble: Option<EnsembleSpec>,
    pub operator: Option<OperatorSpec>,
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub corrector: CorrectorSpec,
    pub effective: Option<EffectiveSpec>,
    pub study: Option<StudySpec>,
    pub function: Option<FunctionSpec>,
    pub meanvalue: Option<MeanValueSpec>,
    pub seminorm: Option<SeminormSpec>,
    pub decompose: Option<DecomposeSpec>,
    pub birkhoff: Option<BirkhoffSpec>,
    pub ergodicity: Option<ErgodicitySpec>,
    pub audit: Option<AuditSpec>,
    pub solve: Option<SolveSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TorusTerm>,
    /// Null perturbation added to realizations of this channel.
    #[serde(default)]
    pub null: Vec<BumpSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    /// Rows of the frequency matrix: one per torus angle, `d` entries each.
    pub frequencies: Vec<Vec<f64>>,
    pub channels: Vec<ChannelSpec>,
}

/// A scalar field: a channel of the ensemble or a constant.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum FieldSpec {
    Value(f64),
    Channel { channel: usize },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `s(y) I`.
    Isotropic(FieldSpec),
    /// Upper-triangle entries.
    Entries { entries: Vec<FieldSpec> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub coefficient: CoefficientSpec,
    #[serde(default = "zero_field")]
    pub forcing: FieldSpec,
}

fn zero_field() -> FieldSpec {
    FieldSpec::Value(0.0)
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FormTag {
    Linear,
    PucciPlus,
    PucciMinus,
    Bellman,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub form: FormTag,
    pub dim: usize,
    pub lambda: f64,
    pub big_lambda: f64,
    /// Linear forms only.
    pub coefficient: Option<CoefficientSpec>,
    /// Linear forms only: `tr(a M) - f`.
    pub forcing: Option<FieldSpec>,
    /// Bellman forms only: `min_i (tr(a_i M) - f_i)`.
    #[serde(default)]
    pub branches: Vec<BranchSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// `c + b·x`.
    Affine { constant: f64, gradient: Vec<f64> },
    /// `c + b·x + ½ xᵀAx` with `A` given by its upper triangle.
    Quadratic {
        constant: f64,
        gradient: Vec<f64>,
        hessian: Vec<f64>,
    },
}

impl BoundarySpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let affine = |c: f64, b: &[f64]| c + b.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        match self {
            BoundarySpec::Affine { constant, gradient } => affine(*constant, gradient),
            BoundarySpec::Quadratic {
                constant,
                gradient,
                hessian,
            } => {
                let q = match hessian.as_slice() {
                    [a] => a * x[0] * x[0],
                    [a, b, c] => a * x[0] * x[0] + 2.0 * b * x[0] * x[1] + c * x[1] * x[1],
                    _ => 0.0,
                };
                affine(*constant, gradient) + 0.5 * q
            }
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        let ok = match self {
            BoundarySpec::Affine { gradient, .. } => gradient.len() == dim,
            BoundarySpec::Quadratic { gradient, hessian, .. } => {
                gradient.len() == dim && hessian.len() == dim * (dim + 1) / 2
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("boundary data does not match the domain dimension".into()))
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
    pub boundary: BoundarySpec,
}

#[derive(Clone, Copy, Debug, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iter: usize,
    pub method: MethodTag,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            method: MethodTag::Auto,
        }
    }
}

impl SolverSpec {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            method: method(self.method),
        }
    }
}

fn method(m: MethodTag) -> Method {
    match m {
        MethodTag::Auto => Method::Auto,
        MethodTag::Direct => Method::Direct,
        MethodTag::Iterative => Method::Iterative,
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectorSpec {
    pub h: f64,
    pub tol: f64,
    pub deltas: Vec<f64>,
    pub half_length: Option<f64>,
    pub max_iter: usize,
    pub method: MethodTag,
}

impl Default for CorrectorSpec {
    fn default() -> Self {
        Self {
            h: 1e-2,
            tol: 1e-6,
            deltas: DEFAULT_DELTAS.to_vec(),
            half_length: None,
            max_iter: 200,
            method: MethodTag::Auto,
        }
    }
}

impl CorrectorSpec {
    pub fn options(&self) -> CorrectorOptions {
        CorrectorOptions {
            h: self.h,
            tol: self.tol,
            half_length: self.half_length,
            max_iter: self.max_iter,
            method: method(self.method),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveSpec {
    /// Upper triangle of `M`.
    pub m: Vec<f64>,
    #[serde(default = "five")]
    pub phases: usize,
}

fn five() -> usize {
    5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub eps: Vec<f64>,
    /// Per lattice axis: `[lo, hi, nodes]`.
    pub lattice: Vec<(f64, f64, usize)>,
    /// Load `F̄` from this CSV instead of computing it.
    pub table: Option<PathBuf>,
    /// Largest extrapolation residual the report may cite.
    pub tolerance: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub frequency: Vec<f64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// `constant + Σ trig terms + Σ gaussian bumps`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub dim: usize,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub bumps: Vec<BumpSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanValueSpec {
    pub radii: Vec<f64>,
    pub samples: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeminormSpec {
    pub p: f64,
    pub lengths: Vec<f64>,
    pub samples: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSpec {
    /// Generators of the frequency module to search.
    pub generators: Vec<Vec<f64>>,
    pub max_order: usize,
    /// `[lo, hi, points]` per axis.
    pub sup_grid: (f64, f64, usize),
    pub tol: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirkhoffSpec {
    #[serde(default)]
    pub channel: usize,
    pub radius: f64,
    pub samples: usize,
    pub phases: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicitySpec {
    #[serde(default)]
    pub channel: usize,
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub samples: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub eps: f64,
}

fn need<'a, T>(v: &'a Option<T>, section: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Config(format!("missing [{section}] section")))
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive")))
    }
}

fn strictly_decreasing(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !(*x > 0.0)) || v.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(format!(
            "{what} must be nonempty, positive and strictly decreasing"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks everything that can be checked without running numerics.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.study {
            strictly_decreasing(&s.eps, "study.eps")?;
            positive(s.tolerance, "study.tolerance")?;
        }
        positive(self.solver.tol, "solver.tol")?;
        positive(self.corrector.h, "corrector.h")?;
        if !(self.corrector.tol > 0.0 && self.corrector.tol < 1.0) {
            return Err(Error::Config("corrector.tol must lie in (0, 1)".into()));
        }
        strictly_decreasing(&self.corrector.deltas, "corrector.deltas")?;
        if let Some(d) = &self.domain {
            positive(d.h, "domain.h")?;
            if d.lower.len() != d.upper.len() {
                return Err(Error::Config("domain bounds have different lengths".into()));
            }
            d.boundary.check(d.lower.len())?;
        }
        if self.operator.is_some() {
            self.build_operator()?;
        }
        Ok(())
    }

    pub fn build_ensemble(&self) -> Result<Option<Arc<QuasiPeriodicEnsemble>>> {
        let Some(spec) = &self.ensemble else {
            return Ok(None);
        };
        let k = spec.frequencies.len();
        let mut channels = Vec::new();
        for c in &spec.channels {
            let mut p = TrigPolynomial::constant(k.max(1), c.constant);
            for t in &c.terms {
                if t.k.len() != k {
                    return Err(Error::Config("torus term has the wrong number of indices".into()));
                }
                let f: Vec<f64> = t.k.iter().map(|&v| v as f64).collect();
                p.add_term(&f, t.cos, t.sin);
            }
            channels.push(p);
        }
        let mut e = QuasiPeriodicEnsemble::new(spec.frequencies.clone(), channels)?;
        for (i, c) in spec.channels.iter().enumerate() {
            if !c.null.is_empty() {
                e = e.with_null_profile(i, bumps(&c.null)?)?;
            }
        }
        Ok(Some(Arc::new(e)))
    }

    pub fn build_operator(&self) -> Result<EllipticOperator> {
        let spec = need(&self.operator, "operator")?;
        let ens = self.build_ensemble()?;
        let field = |f: &FieldSpec| -> Result<ScalarField> {
            match f {
                FieldSpec::Value(v) => Ok(ScalarField::Constant(*v)),
                FieldSpec::Channel { channel } => match &ens {
                    Some(e) => Ok(ScalarField::Channel(e.clone(), *channel)),
                    None => Err(Error::Config("operator refers to a channel but no [ensemble] is given".into())),
                },
            }
        };
        let coef = |c: &CoefficientSpec| -> Result<CoefficientField> {
            match c {
                CoefficientSpec::Isotropic(FieldSpec::Value(v)) => {
                    Ok(CoefficientField::Constant(SymMatrix::identity(spec.dim).scale(*v)))
                }
                CoefficientSpec::Isotropic(f) => Ok(CoefficientField::Isotropic(field(f)?)),
                CoefficientSpec::Entries { entries } => {
                    Ok(CoefficientField::Entries(entries.iter().map(field).collect::<Result<_>>()?))
                }
            }
        };
        let form = match spec.form {
            FormTag::PucciPlus => OperatorForm::Pucci(PucciKind::Plus),
            FormTag::PucciMinus => OperatorForm::Pucci(PucciKind::Minus),
            FormTag::Linear => {
                let c = spec
                    .coefficient
                    .as_ref()
                    .ok_or_else(|| Error::Config("linear operator needs `coefficient`".into()))?;
                match &spec.forcing {
                    None => OperatorForm::LinearNondiv(coef(c)?),
                    Some(f) => OperatorForm::BellmanMin(vec![LinearBranch {
                        coefficient: coef(c)?,
                        forcing: field(f)?,
                    }]),
                }
            }
            FormTag::Bellman => {
                if spec.branches.is_empty() {
                    return Err(Error::Config("bellman operator needs `branches`".into()));
                }
                OperatorForm::BellmanMin(
                    spec.branches
                        .iter()
                        .map(|b| {
                            Ok(LinearBranch {
                                coefficient: coef(&b.coefficient)?,
                                forcing: field(&b.forcing)?,
                            })
                        })
                        .collect::<Result<_>>()?,
                )
            }
        };
        EllipticOperator::new(spec.dim, spec.lambda, spec.big_lambda, form, Default::default())
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Short identity string recorded in effective tables.
    pub fn operator_label(&self) -> String {
        match &self.operator {
            None => "unknown".into(),
            Some(o) => format!("{:?} d={} λ={} Λ={}", o.form, o.dim, o.lambda, o.big_lambda),
        }
    }

    pub fn build_function(&self) -> Result<WStarAPFunction> {
        let spec = need(&self.function, "function")?;
        let mut p = TrigPolynomial::constant(spec.dim, spec.constant);
        for t in &spec.terms {
            if t.frequency.len() != spec.dim {
                return Err(Error::Config("function term has the wrong dimension".into()));
            }
            p.add_term(&t.frequency, t.cos, t.sin);
        }
        let null = if spec.bumps.is_empty() {
            NullFunction::zero(spec.dim)
        } else {
            bumps(&spec.bumps)?
        };
        WStarAPFunction::new(p, null)
    }

    pub fn domain(&self) -> Result<&DomainSpec> {
        need(&self.domain, "domain")
    }

    pub fn section<'a, T>(&self, v: &'a Option<T>, name: &str) -> Result<&'a T> {
        need(v, name)
    }
}

fn bumps(specs: &[BumpSpec]) -> Result<NullFunction> {
    NullFunction::gaussian_bumps(
        specs
            .iter()
            .map(|b| GaussianBump {
                amplitude: b.amplitude,
                center: b.center.clone(),
                width: b.width,
            })
            .collect(),
    )
}
