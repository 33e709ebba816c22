//! Uniformly elliptic operators `F(ω, y, M)` and their structural audits.

pub(crate) mod audit;
mod matrix;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Phase, QuasiPeriodicEnsemble};

pub use audit::{ellipticity_audit, modulus_audit, AuditRow, EllipticityAudit, ModulusAudit};
pub use matrix::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PucciKind {
    Plus,
    Minus,
}

/// Extremal operator: `Plus` is `Λ Σ e⁺ - λ Σ e⁻`, `Minus` is `λ Σ e⁺ - Λ Σ e⁻`
/// over the eigenvalues `e` of `m`.
pub fn pucci(kind: PucciKind, lambda: f64, big_lambda: f64, m: &SymMatrix) -> f64 {
    let (up, down) = match kind {
        PucciKind::Plus => (big_lambda, lambda),
        PucciKind::Minus => (lambda, big_lambda),
    };
    m.eigenvalues()
        .iter()
        .map(|&e| if e >= 0.0 { up * e } else { down * e })
        .sum()
}

/// Scalar field `y ↦ s(ω, y)`.
#[derive(Clone, Debug)]
pub enum ScalarField {
    Constant(f64),
    Channel(Arc<QuasiPeriodicEnsemble>, usize),
}

impl ScalarField {
    pub fn at(&self, omega: &Phase, y: &[f64]) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Channel(e, c) => e.value(*c, omega, y),
        }
    }

    /// Same field without null perturbations.
    fn stationary_at(&self, omega: &Phase, y: &[f64]) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Channel(e, c) => e.stationary_value(*c, omega, y),
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self, ScalarField::Constant(_))
    }
}

/// Symmetric-matrix coefficient field `a(ω, y)`.
#[derive(Clone, Debug)]
pub enum CoefficientField {
    Constant(SymMatrix),
    /// `s(ω, y) · I`.
    Isotropic(ScalarField),
    /// Upper-triangle entries as separate scalar fields.
    Entries(Vec<ScalarField>),
}

impl CoefficientField {
    pub fn at(&self, dim: usize, omega: &Phase, y: &[f64]) -> SymMatrix {
        self.eval_with(dim, |s| s.at(omega, y))
    }

    fn eval_with(&self, dim: usize, f: impl Fn(&ScalarField) -> f64) -> SymMatrix {
        match self {
            CoefficientField::Constant(m) => *m,
            CoefficientField::Isotropic(s) => SymMatrix::identity(dim).scale(f(s)),
            CoefficientField::Entries(e) => {
                let v: Vec<f64> = e.iter().map(f).collect();
                SymMatrix::new(dim, &v).expect("entry count checked at construction")
            }
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            CoefficientField::Constant(_) => true,
            CoefficientField::Isotropic(s) => s.is_constant(),
            CoefficientField::Entries(e) => e.iter().all(ScalarField::is_constant),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            CoefficientField::Constant(m) if m.dim() != dim => {
                Err(Error::invalid("constant coefficient has the wrong dimension"))
            }
            CoefficientField::Entries(e) if e.len() != dim * (dim + 1) / 2 => Err(Error::invalid(
                format!("{dim}-dimensional coefficient needs {} entries", dim * (dim + 1) / 2),
            )),
            _ => Ok(()),
        }
    }

    fn fields(&self) -> Vec<&ScalarField> {
        match self {
            CoefficientField::Constant(_) => Vec::new(),
            CoefficientField::Isotropic(s) => vec![s],
            CoefficientField::Entries(e) => e.iter().collect(),
        }
    }
}

/// One branch `tr(a(ω,y) M) - f(ω,y)` of a Bellman operator.
#[derive(Clone, Debug)]
pub struct LinearBranch {
    pub coefficient: CoefficientField,
    pub forcing: ScalarField,
}

#[derive(Clone, Debug)]
pub enum OperatorForm {
    LinearNondiv(CoefficientField),
    Pucci(PucciKind),
    BellmanMin(Vec<LinearBranch>),
}

/// `ρ` in the modulus condition `|F(y,M) - F(z,M)| ≤ ρ((1+|M|)|y-z|^γ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rho {
    Linear { slope: f64 },
    Power { coefficient: f64, exponent: f64 },
}

impl Rho {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Rho::Linear { slope } => slope * s,
            Rho::Power {
                coefficient,
                exponent,
            } => coefficient * s.powf(exponent),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Modulus {
    pub rho: Rho,
    pub gamma: f64,
}

impl Default for Modulus {
    fn default() -> Self {
        Self {
            rho: Rho::Linear { slope: 1.0 },
            gamma: 1.0,
        }
    }
}

/// `F(ω, y, M)` together with its ellipticity constants `λ ≤ Λ` and modulus.
#[derive(Clone, Debug)]
pub struct EllipticOperator {
    dim: usize,
    lambda: f64,
    big_lambda: f64,
    form: OperatorForm,
    modulus: Modulus,
}

impl EllipticOperator {
    pub fn new(
        dim: usize,
        lambda: f64,
        big_lambda: f64,
        form: OperatorForm,
        modulus: Modulus,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid("only d = 1 and d = 2 are supported"));
        }
        if !(lambda > 0.0) || !(big_lambda >= lambda) || !big_lambda.is_finite() {
            return Err(Error::invalid(format!(
                "ellipticity constants must satisfy 0 < λ ≤ Λ < ∞ (got λ = {lambda}, Λ = {big_lambda})"
            )));
        }
        if !(modulus.gamma > 0.5) {
            return Err(Error::invalid("modulus exponent γ must exceed 1/2"));
        }
        match &form {
            OperatorForm::LinearNondiv(a) => a.check(dim)?,
            OperatorForm::Pucci(_) => {}
            OperatorForm::BellmanMin(branches) => {
                if branches.is_empty() {
                    return Err(Error::invalid("Bellman operator needs at least one branch"));
                }
                for b in branches {
                    b.coefficient.check(dim)?;
                }
            }
        }
        let op = Self {
            dim,
            lambda,
            big_lambda,
            form,
            modulus,
        };
        for s in op.scalar_fields() {
            if let ScalarField::Channel(e, c) = s {
                if e.dim() != dim || *c >= e.channels() {
                    return Err(Error::invalid("coefficient channel does not fit the operator"));
                }
                if !Arc::ptr_eq(e, op.ensemble().expect("a channel exists")) {
                    return Err(Error::invalid("all random fields must share one ensemble"));
                }
            }
        }
        Ok(op)
    }

    pub fn linear(dim: usize, lambda: f64, big_lambda: f64, a: CoefficientField) -> Result<Self> {
        Self::new(dim, lambda, big_lambda, OperatorForm::LinearNondiv(a), Modulus::default())
    }

    pub fn pucci(dim: usize, kind: PucciKind, lambda: f64, big_lambda: f64) -> Result<Self> {
        Self::new(dim, lambda, big_lambda, OperatorForm::Pucci(kind), Modulus::default())
    }

    pub fn with_modulus(mut self, modulus: Modulus) -> Result<Self> {
        if !(modulus.gamma > 0.5) {
            return Err(Error::invalid("modulus exponent γ must exceed 1/2"));
        }
        self.modulus = modulus;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    pub fn form(&self) -> &OperatorForm {
        &self.form
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    fn scalar_fields(&self) -> Vec<&ScalarField> {
        match &self.form {
            OperatorForm::LinearNondiv(a) => a.fields(),
            OperatorForm::Pucci(_) => Vec::new(),
            OperatorForm::BellmanMin(b) => b
                .iter()
                .flat_map(|br| {
                    let mut v = br.coefficient.fields();
                    v.push(&br.forcing);
                    v
                })
                .collect(),
        }
    }

    /// The ensemble behind the random fields; `None` for deterministic `F`.
    pub fn ensemble(&self) -> Option<&Arc<QuasiPeriodicEnsemble>> {
        self.scalar_fields().into_iter().find_map(|s| match s {
            ScalarField::Channel(e, _) => Some(e),
            ScalarField::Constant(_) => None,
        })
    }

    /// True when `F` does not depend on `(ω, y)`.
    pub fn is_y_independent(&self) -> bool {
        match &self.form {
            OperatorForm::LinearNondiv(a) => a.is_constant(),
            OperatorForm::Pucci(_) => true,
            OperatorForm::BellmanMin(b) => b
                .iter()
                .all(|br| br.coefficient.is_constant() && br.forcing.is_constant()),
        }
    }

    pub fn eval(&self, omega: &Phase, y: &[f64], m: &SymMatrix) -> f64 {
        match &self.form {
            OperatorForm::LinearNondiv(a) => a.at(self.dim, omega, y).frobenius_dot(m),
            OperatorForm::Pucci(kind) => pucci(*kind, self.lambda, self.big_lambda, m),
            OperatorForm::BellmanMin(branches) => branches
                .iter()
                .map(|b| {
                    b.coefficient.at(self.dim, omega, y).frobenius_dot(m) - b.forcing.at(omega, y)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Evaluation with null perturbations removed from every field.
    pub fn eval_stationary(&self, omega: &Phase, y: &[f64], m: &SymMatrix) -> f64 {
        let coef = |a: &CoefficientField| a.eval_with(self.dim, |s| s.stationary_at(omega, y));
        match &self.form {
            OperatorForm::LinearNondiv(a) => coef(a).frobenius_dot(m),
            OperatorForm::Pucci(kind) => pucci(*kind, self.lambda, self.big_lambda, m),
            OperatorForm::BellmanMin(branches) => branches
                .iter()
                .map(|b| coef(&b.coefficient).frobenius_dot(m) - b.forcing.stationary_at(omega, y))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Coefficient matrices (and forcings) of the linear pieces at `(ω, y)`.
    pub(crate) fn branches_at(&self, omega: &Phase, y: &[f64]) -> Vec<(SymMatrix, f64)> {
        match &self.form {
            OperatorForm::LinearNondiv(a) => vec![(a.at(self.dim, omega, y), 0.0)],
            OperatorForm::Pucci(_) => Vec::new(),
            OperatorForm::BellmanMin(b) => b
                .iter()
                .map(|br| (br.coefficient.at(self.dim, omega, y), br.forcing.at(omega, y)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap::{TrigPolynomial, TrigTerm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn two_plus_sin_op() -> EllipticOperator {
        let profile =
            TrigPolynomial::new(1, 2.0, vec![TrigTerm::new(vec![1.0], 0.0, 1.0)]).unwrap();
        let e = Arc::new(QuasiPeriodicEnsemble::new(vec![vec![1.0]], vec![profile]).unwrap());
        EllipticOperator::linear(1, 1.0, 3.0, CoefficientField::Isotropic(ScalarField::Channel(e, 0)))
            .unwrap()
    }

    #[test]
    fn pucci_examples() {
        assert_eq!(pucci(PucciKind::Plus, 1.0, 2.0, &SymMatrix::zero(2)), 0.0);
        assert_eq!(pucci(PucciKind::Plus, 1.0, 2.0, &SymMatrix::scalar(-3.0)), -3.0);
        assert_eq!(pucci(PucciKind::Plus, 1.0, 2.0, &SymMatrix::diag(&[1.0, -1.0])), 1.0);
        assert_eq!(pucci(PucciKind::Minus, 1.0, 2.0, &SymMatrix::diag(&[1.0, -1.0])), -1.0);
    }

    #[test]
    fn pucci_agrees_with_brute_force_eigenvalues() {
        // oracle: eigenvalues from the characteristic polynomial by bisection
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let m = SymMatrix::two(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let p = |t: f64| (m.get(0, 0) - t) * (m.get(1, 1) - t) - m.get(0, 1).powi(2);
            let bisect = |mut lo: f64, mut hi: f64| {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if (p(lo) > 0.0) == (p(mid) > 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let c = 0.5 * (m.get(0, 0) + m.get(1, 1));
            let e = [bisect(-20.0, c), bisect(c, 20.0)];
            let expect: f64 = e.iter().map(|&x| if x > 0.0 { 2.0 * x } else { x }).sum();
            assert!((pucci(PucciKind::Plus, 1.0, 2.0, &m) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn eval_examples() {
        let id = EllipticOperator::linear(2, 1.0, 1.0, CoefficientField::Constant(SymMatrix::identity(2)))
            .unwrap();
        let m = SymMatrix::two(0.3, 7.0, -1.2);
        assert!((id.eval(&Phase::zero(1), &[0.0, 0.0], &m) - m.trace()).abs() < 1e-15);

        let op = two_plus_sin_op();
        assert!((op.eval(&Phase::zero(1), &[FRAC_PI_2], &SymMatrix::scalar(1.0)) - 3.0).abs() < 1e-15);

        let bell = EllipticOperator::new(
            1,
            1.0,
            2.0,
            OperatorForm::BellmanMin(vec![
                LinearBranch {
                    coefficient: CoefficientField::Constant(SymMatrix::scalar(1.0)),
                    forcing: ScalarField::Constant(0.0),
                },
                LinearBranch {
                    coefficient: CoefficientField::Constant(SymMatrix::scalar(2.0)),
                    forcing: ScalarField::Constant(0.0),
                },
            ]),
            Modulus::default(),
        )
        .unwrap();
        assert_eq!(bell.eval(&Phase::zero(1), &[0.0], &SymMatrix::scalar(-1.0)), -2.0);
    }

    #[test]
    fn eval_is_stationary() {
        let op = two_plus_sin_op();
        let OperatorForm::LinearNondiv(CoefficientField::Isotropic(ScalarField::Channel(e, _))) = op.form()
        else {
            unreachable!()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let w = e.sample_phase(rng.random());
            let y0 = rng.random_range(-30.0..30.0);
            let y = rng.random_range(-30.0..30.0);
            let m = SymMatrix::scalar(rng.random_range(-2.0..2.0));
            let a = op.eval(&e.shift(&w, &[y0]), &[y], &m);
            let b = op.eval(&w, &[y + y0], &m);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(EllipticOperator::pucci(2, PucciKind::Plus, 2.0, 1.0).is_err());
        assert!(EllipticOperator::pucci(3, PucciKind::Plus, 1.0, 2.0).is_err());
        let bad = Modulus {
            rho: Rho::Linear { slope: 1.0 },
            gamma: 0.5,
        };
        assert!(EllipticOperator::pucci(2, PucciKind::Plus, 1.0, 2.0)
            .unwrap()
            .with_modulus(bad)
            .is_err());
    }
}
