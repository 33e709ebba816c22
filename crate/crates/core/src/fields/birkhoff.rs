use crate::ap::{from_fn, mean_value_numeric, TrigPolynomial};
use crate::error::{Error, Result};
use crate::fields::{Phase, QuasiPeriodicEnsemble};

#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffReport {
    pub ensemble_mean: f64,
    pub spatial_means: Vec<f64>,
    pub max_gap: f64,
}

/// Compares the Haar mean of a channel profile with spatial means along the
/// orbits of the given phases, averaged over `B(0; radius)`.
///
/// `samples` is passed to [`mean_value_numeric`]. Null perturbations are not
/// included: both sides concern the stationary profile.
pub fn birkhoff_compare(
    ensemble: &QuasiPeriodicEnsemble,
    channel: usize,
    phases: &[Phase],
    radius: f64,
    samples: usize,
    tol: f64,
) -> Result<BirkhoffReport> {
    if channel >= ensemble.channels() {
        return Err(Error::invalid(format!("no channel {channel}")));
    }
    if phases.is_empty() {
        return Err(Error::invalid("at least one phase is required"));
    }
    let profile = ensemble.profile(channel);
    let grid = max_torus_frequency(profile) + 2;
    let ensemble_mean = ensemble.ensemble_mean(channel, grid);
    let radii = [radius / 4.0, radius / 2.0, radius];
    let spatial_means = phases
        .iter()
        .map(|w| {
            let f = from_fn(ensemble.dim(), |y: &[f64]| ensemble.stationary_value(channel, w, y));
            mean_value_numeric(&f, &radii, samples, f64::INFINITY).map(|e| e.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_gap = spatial_means
        .iter()
        .map(|m| (m - ensemble_mean).abs())
        .fold(0.0, f64::max);
    if max_gap > tol {
        return Err(Error::ErgodicityViolation {
            gap: max_gap,
            tolerance: tol,
        });
    }
    Ok(BirkhoffReport {
        ensemble_mean,
        spatial_means,
        max_gap,
    })
}

fn max_torus_frequency(p: &TrigPolynomial) -> usize {
    p.terms()
        .iter()
        .flat_map(|t| t.frequency.iter())
        .fold(0.0f64, |m, x| m.max(x.abs())) as usize
}

/// Ball average of `e^{iλ·x}` over `B(0; t)` in dimension `d` (`|λ| = s/t`).
fn ball_transform(dim: usize, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    match dim {
        1 => s.sin() / s,
        2 => 2.0 * bessel_j1(s) / s,
        3 => 3.0 * (s.sin() - s * s.cos()) / (s * s * s),
        _ => unimplemented!("ball transform for d > 3"),
    }
}

/// `J_1(x) = (1/π) ∫_0^π cos(τ - x sin τ) dτ` by the trapezoid rule, which is
/// spectrally accurate for this periodic integrand.
fn bessel_j1(x: f64) -> f64 {
    let n = 64 + 2 * x.abs().ceil() as usize;
    let h = std::f64::consts::PI / n as f64;
    let g = |t: f64| (t - x * t.sin()).cos();
    let mut acc = 0.5 * (g(0.0) + g(std::f64::consts::PI));
    for i in 1..n {
        acc += g(i as f64 * h);
    }
    acc * h / std::f64::consts::PI
}

/// `M_y |avg_{B(0;t)} f(T(x+y)ω) dx - M(f)|²`, averaged over Haar-distributed
/// `ω`, for each `t` in the schedule.
///
/// The inner ball average multiplies the torus mode `m` by the ball transform
/// of its spatial frequency `mᵀΛ_f`; the outer mean and the phase average are
/// then exact. Modes with `mᵀΛ_f = 0` are not damped at all, which is how a
/// resonant flow shows up.
pub fn ergodicity_residual(
    ensemble: &QuasiPeriodicEnsemble,
    f: &TrigPolynomial,
    t_schedule: &[f64],
) -> Result<Vec<f64>> {
    check_profile(ensemble, f, t_schedule)?;
    Ok(t_schedule
        .iter()
        .map(|&t| {
            f.terms()
                .iter()
                .map(|term| {
                    let s = spatial_frequency(ensemble, &term.frequency) * t;
                    let damp = ball_transform(ensemble.dim(), s);
                    0.5 * (term.cos * term.cos + term.sin * term.sin) * damp * damp
                })
                .sum()
        })
        .collect())
}

/// Same quantity by nested quadrature for `d = 1`: the inner averages over
/// `[y - t, y + t]` come from prefix sums of orbit samples with spacing `h`,
/// the outer mean is taken over `|y| ≤ outer`, and the result is averaged
/// over the given phases.
pub fn ergodicity_residual_sampled(
    ensemble: &QuasiPeriodicEnsemble,
    f: &TrigPolynomial,
    phases: &[Phase],
    t_schedule: &[f64],
    outer: f64,
    h: f64,
) -> Result<Vec<f64>> {
    check_profile(ensemble, f, t_schedule)?;
    if ensemble.dim() != 1 {
        return Err(Error::invalid("nested quadrature is implemented for d = 1"));
    }
    if phases.is_empty() || !(h > 0.0) || !(outer > 0.0) {
        return Err(Error::invalid("need phases, a positive step and a positive window"));
    }
    let mean = f.constant_term();
    let mut out = vec![0.0; t_schedule.len()];
    let tmax = t_schedule.iter().cloned().fold(0.0, f64::max);
    let span = outer + tmax;
    let cells = (2.0 * span / h).ceil() as usize;
    let h = 2.0 * span / cells as f64;
    for w in phases {
        // prefix[i] = ∫_{-span}^{-span + i h} g, midpoint rule per cell
        let mut prefix = vec![0.0; cells + 1];
        for i in 0..cells {
            let x = -span + (i as f64 + 0.5) * h;
            let theta: Vec<f64> = ensemble
                .freq_matrix()
                .iter()
                .zip(w.angles())
                .map(|(row, a)| a + row[0] * x)
                .collect();
            prefix[i + 1] = prefix[i] + h * f.eval(&theta);
        }
        let at = |x: f64| -> f64 {
            let s = (x + span) / h;
            let i = (s.floor() as usize).min(cells - 1);
            let frac = s - i as f64;
            prefix[i] + frac * (prefix[i + 1] - prefix[i])
        };
        for (slot, &t) in out.iter_mut().zip(t_schedule) {
            let n = (2.0 * outer / h).round() as usize;
            let dy = 2.0 * outer / n as f64;
            let acc: f64 = (0..n)
                .map(|j| {
                    let y = -outer + (j as f64 + 0.5) * dy;
                    let avg = (at(y + t) - at(y - t)) / (2.0 * t);
                    (avg - mean).powi(2)
                })
                .sum();
            *slot += acc / n as f64 / phases.len() as f64;
        }
    }
    Ok(out)
}

fn check_profile(ensemble: &QuasiPeriodicEnsemble, f: &TrigPolynomial, ts: &[f64]) -> Result<()> {
    if f.dim() != ensemble.torus_dim() {
        return Err(Error::invalid("torus function does not match the torus dimension"));
    }
    if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::invalid("t schedule must be nonempty and positive"));
    }
    Ok(())
}

fn spatial_frequency(ensemble: &QuasiPeriodicEnsemble, m: &[f64]) -> f64 {
    (0..ensemble.dim())
        .map(|j| {
            m.iter()
                .zip(ensemble.freq_matrix())
                .map(|(mi, row)| mi * row[j])
                .sum::<f64>()
                .powi(2)
        })
        .sum::<f64>()
        .sqrt()
}
