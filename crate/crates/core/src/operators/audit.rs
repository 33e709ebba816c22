use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::Phase;
use crate::operators::{EllipticOperator, SymMatrix};

/// Allowed negative margin in the ellipticity audit.
pub const ELLIPTICITY_TOL: f64 = 1e-9;
/// Allowed excess of the modulus ratio over one.
pub const MODULUS_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditRow {
    pub sample: usize,
    pub first: f64,
    pub second: f64,
}

#[derive(Clone, Debug)]
pub struct EllipticityAudit {
    pub min_margin_lower: f64,
    pub min_margin_upper: f64,
    /// `(sample, lower margin, upper margin)`.
    pub rows: Vec<AuditRow>,
}

#[derive(Clone, Debug)]
pub struct ModulusAudit {
    pub worst_ratio: f64,
    /// `(sample, ratio, |y - z|)`.
    pub rows: Vec<AuditRow>,
}

fn random_sym(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> SymMatrix {
    let v: Vec<f64> = (0..dim * (dim + 1) / 2)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    SymMatrix::new(dim, &v).unwrap()
}

/// Random `N ⪰ 0`; every fourth sample has rank one.
pub(crate) fn random_psd(rng: &mut ChaCha8Rng, dim: usize, scale: f64, i: usize) -> SymMatrix {
    let mut b: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-scale..scale)).collect();
    if dim == 2 && i % 4 == 3 {
        b[2] = 0.0;
        b[3] = 0.0;
    }
    SymMatrix::gram(dim, &b)
}

pub(crate) fn random_point(rng: &mut ChaCha8Rng, dim: usize, half: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-half..half)).collect()
}

/// Samples `(y, M, N ⪰ 0)` and returns the smallest margins in
/// `λ‖N‖ ≤ F(y, M+N) - F(y, M) ≤ Λ‖N‖`, with `‖N‖` the trace norm.
pub fn ellipticity_audit(
    op: &EllipticOperator,
    omega: &Phase,
    n_samples: usize,
    seed: u64,
) -> Result<EllipticityAudit> {
    if n_samples == 0 {
        return Err(Error::invalid("audit needs at least one sample"));
    }
    let d = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_samples);
    let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
    for i in 0..n_samples {
        let y = random_point(&mut rng, d, 100.0);
        let m = random_sym(&mut rng, d, 5.0);
        let n = random_psd(&mut rng, d, 2.0, i);
        let diff = op.eval(omega, &y, &m.add(&n)) - op.eval(omega, &y, &m);
        let norm = n.trace_norm();
        let lower = diff - op.lambda() * norm;
        let upper = op.big_lambda() * norm - diff;
        lo = lo.min(lower);
        hi = hi.min(upper);
        rows.push(AuditRow {
            sample: i,
            first: lower,
            second: upper,
        });
    }
    if lo < -ELLIPTICITY_TOL || hi < -ELLIPTICITY_TOL {
        return Err(Error::EllipticityViolation {
            lower: lo,
            upper: hi,
            allowed: ELLIPTICITY_TOL,
        });
    }
    Ok(EllipticityAudit {
        min_margin_lower: lo,
        min_margin_upper: hi,
        rows,
    })
}

/// Samples `(y, z, M)` and returns the worst ratio
/// `|F(y,M) - F(z,M)| / ρ((1 + |M|)|y - z|^γ)`, with `|M|` the trace norm.
/// Separations `|y - z|` range over `[10⁻³, 10]` log-uniformly.
pub fn modulus_audit(
    op: &EllipticOperator,
    omega: &Phase,
    n_samples: usize,
    seed: u64,
) -> Result<ModulusAudit> {
    if n_samples == 0 {
        return Err(Error::invalid("audit needs at least one sample"));
    }
    let d = op.dim();
    let modulus = op.modulus();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_samples);
    let mut worst = 0.0f64;
    for i in 0..n_samples {
        let y = random_point(&mut rng, d, 100.0);
        let r = 10f64.powf(rng.random_range(-3.0..1.0));
        let dir = random_point(&mut rng, d, 1.0);
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let z: Vec<f64> = y.iter().zip(&dir).map(|(a, u)| a + r * u / len).collect();
        let m = random_sym(&mut rng, d, 5.0);
        let num = (op.eval(omega, &y, &m) - op.eval(omega, &z, &m)).abs();
        let sep = y.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den = modulus.rho.eval((1.0 + m.trace_norm()) * sep.powf(modulus.gamma));
        let ratio = if num == 0.0 { 0.0 } else { num / den };
        worst = worst.max(ratio);
        rows.push(AuditRow {
            sample: i,
            first: ratio,
            second: sep,
        });
    }
    if worst > 1.0 + MODULUS_TOL {
        return Err(Error::ModulusViolation { ratio: worst });
    }
    Ok(ModulusAudit {
        worst_ratio: worst,
        rows,
    })
}
