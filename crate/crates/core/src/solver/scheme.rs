//! Monotone node schemes on the axis-plus-diagonal stencil.
//!
//! In two dimensions the stencil is `[e1, e2, (1,1), (1,-1)]`. A symmetric
//! matrix `A` with `A12 ≥ 0` acts on second differences through the weights
//! `[A11 - A12, A22 - A12, 2 A12, 0]`, and one with `A12 ≤ 0` through
//! `[A11 + A12, A22 + A12, 0, -2 A12]`; both reproduce `tr(A D²u)` exactly on
//! quadratics. The matching Hessian surrogates are
//! `H⁺ = [[Δx, (2Δ₊ - Δx - Δy)/2], [·, Δy]]` and
//! `H⁻ = [[Δx, (Δx + Δy - 2Δ₋)/2], [·, Δy]]`.

use crate::error::{Error, Result};
use crate::fields::Phase;
use crate::operators::{EllipticOperator, OperatorForm, PucciKind, SymMatrix};

/// Scheme value at a node and the weights of its active linear piece:
/// near the current differences, `F_h(d') = value + Σ_k w_k (d'_k - d_k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Linearization {
    pub value: f64,
    pub weights: [f64; 4],
}

/// A monotone discretization `F_h(x, Δ²u(x))`.
pub trait NodeScheme: Sync {
    fn dim(&self) -> usize;

    /// Upper ellipticity constant, used for the explicit time step.
    fn ellipticity_max(&self) -> f64;

    /// `x` is the physical node position, `diffs` the directional second
    /// differences in stencil order.
    fn linearize(&self, x: &[f64], diffs: &[f64]) -> Result<Linearization>;
}

/// Surrogate Hessians `(H⁺, H⁻)` from the four directional differences.
pub fn hessian_surrogates(diffs: &[f64]) -> (SymMatrix, SymMatrix) {
    let (dx, dy, dp, dm) = (diffs[0], diffs[1], diffs[2], diffs[3]);
    (
        SymMatrix::two(dx, 0.5 * (2.0 * dp - dx - dy), dy),
        SymMatrix::two(dx, 0.5 * (dx + dy - 2.0 * dm), dy),
    )
}

/// Stencil weights of a coefficient matrix, or an error naming the node.
pub fn decompose(a: &SymMatrix, x: &[f64]) -> Result<[f64; 4]> {
    let w = match a.dim() {
        1 => [a.get(0, 0), 0.0, 0.0, 0.0],
        _ => {
            let (a11, a12, a22) = (a.get(0, 0), a.get(0, 1), a.get(1, 1));
            [
                a11 - a12.abs(),
                a22 - a12.abs(),
                2.0 * a12.max(0.0),
                2.0 * (-a12).max(0.0),
            ]
        }
    };
    if let Some(k) = w.iter().position(|&v| v < 0.0) {
        return Err(Error::NonMonotoneDecomposition {
            position: x.to_vec(),
            detail: format!(
                "matrix {:?} gives weight {:.3e} on stencil direction {k}; widen the stencil",
                a.upper(),
                w[k]
            ),
        });
    }
    Ok(w)
}

fn dot(w: &[f64; 4], d: &[f64]) -> f64 {
    w.iter().zip(d).map(|(a, b)| a * b).sum()
}

/// Linear piece `tr(A (M + H)) - f` with `A` decomposed on the stencil.
pub fn linear_piece(a: &SymMatrix, forcing: f64, m: &SymMatrix, x: &[f64], diffs: &[f64]) -> Result<Linearization> {
    let weights = decompose(a, x)?;
    Ok(Linearization {
        value: dot(&weights, diffs) + a.frobenius_dot(m) - forcing,
        weights,
    })
}

fn slope(kind: PucciKind, lambda: f64, big: f64, t: f64) -> f64 {
    match (kind, t >= 0.0) {
        (PucciKind::Plus, true) | (PucciKind::Minus, false) => big,
        _ => lambda,
    }
}

/// Extremizer of `tr(A X)` over `{λ ≤ A ≤ Λ, sign(A12) = half}`.
fn pucci_half(kind: PucciKind, lambda: f64, big: f64, x: &SymMatrix, plus_half: bool) -> SymMatrix {
    let x12 = x.get(0, 1);
    // The unconstrained extremizer already has the required off-diagonal sign
    // exactly when this holds; otherwise the constrained one is diagonal.
    let free = match (kind, plus_half) {
        (PucciKind::Plus, true) | (PucciKind::Minus, false) => x12 >= 0.0,
        (PucciKind::Plus, false) | (PucciKind::Minus, true) => x12 <= 0.0,
    };
    if free {
        let e = x.eigenvalues();
        let v = x.eigenvectors();
        let s: Vec<f64> = e.iter().map(|&t| slope(kind, lambda, big, t)).collect();
        let mut a = SymMatrix::from_spectrum(&s, &v);
        // clean the sign of a rounding-level off-diagonal entry
        if (plus_half && a.get(0, 1) < 0.0) || (!plus_half && a.get(0, 1) > 0.0) {
            a = SymMatrix::two(a.get(0, 0), 0.0, a.get(1, 1));
        }
        a
    } else {
        SymMatrix::two(
            slope(kind, lambda, big, x.get(0, 0)),
            0.0,
            slope(kind, lambda, big, x.get(1, 1)),
        )
    }
}

/// Monotone scheme for the extremal operators.
pub fn pucci_piece(
    kind: PucciKind,
    lambda: f64,
    big: f64,
    m: &SymMatrix,
    x: &[f64],
    diffs: &[f64],
) -> Result<Linearization> {
    if m.dim() == 1 {
        let t = m.get(0, 0) + diffs[0];
        let a = slope(kind, lambda, big, t);
        return Ok(Linearization {
            value: a * t,
            weights: [a, 0.0, 0.0, 0.0],
        });
    }
    let (hp, hm) = hessian_surrogates(diffs);
    let xp = m.add(&hp);
    let xm = m.add(&hm);
    let ap = pucci_half(kind, lambda, big, &xp, true);
    let am = pucci_half(kind, lambda, big, &xm, false);
    let lp = linear_piece(&ap, 0.0, m, x, diffs)?;
    let lm = linear_piece(&am, 0.0, m, x, diffs)?;
    let pick_plus = match kind {
        PucciKind::Plus => lp.value >= lm.value,
        PucciKind::Minus => lp.value <= lm.value,
    };
    Ok(if pick_plus { lp } else { lm })
}

/// `F(ω, x/ε, M + D²u)` discretized on the stencil.
pub struct OperatorScheme<'a> {
    pub op: &'a EllipticOperator,
    pub omega: Phase,
    pub eps: f64,
    /// Constant matrix added to the discrete Hessian (zero outside corrector mode).
    pub shift: SymMatrix,
}

impl<'a> OperatorScheme<'a> {
    pub fn new(op: &'a EllipticOperator, omega: &Phase, eps: f64) -> Self {
        Self {
            op,
            omega: omega.clone(),
            eps,
            shift: SymMatrix::zero(op.dim()),
        }
    }

    pub fn with_shift(mut self, m: SymMatrix) -> Self {
        self.shift = m;
        self
    }
}

impl NodeScheme for OperatorScheme<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn ellipticity_max(&self) -> f64 {
        self.op.big_lambda()
    }

    fn linearize(&self, x: &[f64], diffs: &[f64]) -> Result<Linearization> {
        let mut y = [0.0; 2];
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi / self.eps;
        }
        let y = &y[..x.len()];
        match self.op.form() {
            OperatorForm::Pucci(kind) => pucci_piece(
                *kind,
                self.op.lambda(),
                self.op.big_lambda(),
                &self.shift,
                x,
                diffs,
            ),
            OperatorForm::LinearNondiv(_) | OperatorForm::BellmanMin(_) => {
                let mut best: Option<Linearization> = None;
                for (a, f) in self.op.branches_at(&self.omega, y) {
                    let l = linear_piece(&a, f, &self.shift, x, diffs)?;
                    if best.is_none_or(|b| l.value < b.value) {
                        best = Some(l);
                    }
                }
                Ok(best.expect("operator has at least one branch"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::pucci;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diffs_of(q: &SymMatrix) -> [f64; 4] {
        // exact directional second derivatives of y ↦ yᵀQy/2
        [
            q.get(0, 0),
            q.get(1, 1),
            0.5 * (q.get(0, 0) + 2.0 * q.get(0, 1) + q.get(1, 1)),
            0.5 * (q.get(0, 0) - 2.0 * q.get(0, 1) + q.get(1, 1)),
        ]
    }

    #[test]
    fn surrogates_are_exact_on_quadratics() {
        let q = SymMatrix::two(1.3, -0.4, 2.2);
        let (p, m) = hessian_surrogates(&diffs_of(&q));
        for s in [p, m] {
            for (a, b) in s.upper().iter().zip(q.upper()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pucci_scheme_is_exact_on_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let q = SymMatrix::two(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let m = SymMatrix::two(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            for kind in [PucciKind::Plus, PucciKind::Minus] {
                let l = pucci_piece(kind, 1.0, 2.0, &m, &[0.0, 0.0], &diffs_of(&q)).unwrap();
                let exact = pucci(kind, 1.0, 2.0, &m.add(&q));
                assert!((l.value - exact).abs() < 1e-12, "{kind:?} {q:?}: {} vs {exact}", l.value);
                assert!(l.weights.iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn pucci_half_extremizes_over_the_constrained_set() {
        // oracle: brute-force search over A = R(θ) diag(s1, s2) R(θ)ᵀ
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let x = SymMatrix::two(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            for plus_half in [true, false] {
                let mut best = f64::NEG_INFINITY;
                for i in 0..=180 {
                    let th = std::f64::consts::PI * i as f64 / 180.0;
                    let (s, c) = th.sin_cos();
                    for s1 in [1.0, 2.0] {
                        for s2 in [1.0, 2.0] {
                            let a = SymMatrix::from_spectrum(&[s1, s2], &[vec![c, s], vec![-s, c]]);
                            if (plus_half && a.get(0, 1) < -1e-12) || (!plus_half && a.get(0, 1) > 1e-12) {
                                continue;
                            }
                            best = best.max(a.frobenius_dot(&x));
                        }
                    }
                }
                let a = pucci_half(PucciKind::Plus, 1.0, 2.0, &x, plus_half);
                let got = a.frobenius_dot(&x);
                assert!(got >= best - 1e-9, "{x:?} {plus_half}: {got} < {best}");
                assert!(got <= best + 2e-3 * (1.0 + best.abs()));
            }
        }
    }

    #[test]
    fn pucci_scheme_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = SymMatrix::zero(2);
        for _ in 0..5000 {
            let d: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut e = d.clone();
            let k = rng.random_range(0..4);
            e[k] += rng.random_range(0.0..1.0);
            for kind in [PucciKind::Plus, PucciKind::Minus] {
                let a = pucci_piece(kind, 1.0, 2.0, &m, &[0.0, 0.0], &d).unwrap().value;
                let b = pucci_piece(kind, 1.0, 2.0, &m, &[0.0, 0.0], &e).unwrap().value;
                assert!(b >= a - 1e-12);
            }
        }
    }

    #[test]
    fn non_diagonally_dominant_coefficient_is_rejected() {
        let a = SymMatrix::two(1.0, 0.9, 0.5);
        assert!(matches!(
            decompose(&a, &[0.1, 0.2]),
            Err(Error::NonMonotoneDecomposition { .. })
        ));
        assert!(decompose(&SymMatrix::two(2.0, -1.0, 1.5), &[0.0, 0.0]).is_ok());
    }
}
