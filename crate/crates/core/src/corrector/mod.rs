//! Approximate correctors `δv - F(ω, y, M + D²v) = 0` on truncated boxes and
//! the effective operator `F̄(M) = lim δ v_δ`.

mod table;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::fields::Phase;
use crate::operators::audit::{random_psd, AuditRow, ELLIPTICITY_TOL};
use crate::operators::{EllipticOperator, SymMatrix};
use crate::solver::{self, DiscreteSolution, Grid, Method, OperatorScheme, Problem, SolveOptions};

pub use table::{EffectiveOperator, EffectiveTable, Lattice, OnDemand, TableEntry, TableInterpolant};

/// Default damping schedule.
pub const DEFAULT_DELTAS: [f64; 3] = [4e-2, 2e-2, 1e-2];

/// Minimum ratio between successive readout increments.
pub const CONTRACTION_RATIO: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectorOptions {
    /// Grid spacing in the fast variable.
    pub h: f64,
    /// Target accuracy of `δ v(center)`; sets the automatic box size and the
    /// solver tolerance.
    pub tol: f64,
    /// Box half-length; `None` uses `√(Λ/δ) ln(1/tol)`.
    pub half_length: Option<f64>,
    pub max_iter: usize,
    pub method: Method,
}

impl CorrectorOptions {
    pub fn new(h: f64, tol: f64) -> Self {
        Self {
            h,
            tol,
            half_length: None,
            max_iter: 200,
            method: Method::Auto,
        }
    }

    /// Options handed to the solver: a tenth of `tol`.
    pub fn solver_options(&self) -> SolveOptions {
        SolveOptions {
            tol: 0.1 * self.tol,
            max_iter: self.max_iter,
            method: self.method,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid("corrector needs h > 0 and tol in (0, 1)"));
        }
        if let Some(l) = self.half_length {
            if !(l >= 1.0) {
                return Err(Error::invalid("box half-length must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Automatic half-length `√(Λ/δ) ln(1/tol)` (never below 1).
pub fn auto_half_length(big_lambda: f64, delta: f64, tol: f64) -> f64 {
    ((big_lambda / delta).sqrt() * (1.0 / tol).ln()).max(1.0)
}

/// Barrier bound on how much the zero boundary data moves `δ v` at the
/// center: `d · sup|F(·, M)| / cosh(κ_h L)` with the discrete decay rate
/// `κ_h = acosh(1 + δh²/(2Λ)) / h`.
pub fn boundary_influence(dim: usize, sup_f: f64, big_lambda: f64, delta: f64, h: f64, half_length: f64) -> f64 {
    let kappa = (1.0 + delta * h * h / (2.0 * big_lambda)).acosh() / h;
    dim as f64 * sup_f / (kappa * half_length).cosh()
}

#[derive(Clone, Debug)]
pub struct CorrectorRun {
    pub m: SymMatrix,
    pub delta: f64,
    pub half_length: f64,
    pub h: f64,
    pub solution: DiscreteSolution,
    /// `v` at the node closest to the box center.
    pub center_value: f64,
    pub boundary_influence: f64,
    /// Set when `boundary_influence > 10 · tol`.
    pub truncation_warning: bool,
}

impl CorrectorRun {
    /// `δ v(center)`.
    pub fn readout(&self) -> f64 {
        self.delta * self.center_value
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("δ = {delta} is outside (0, 1]")));
    }
    Ok(())
}

/// Solves the δ-corrector equation on `[-L, L]^d` with `v = 0` on the boundary.
pub fn solve_delta_corrector(
    op: &EllipticOperator,
    omega: &Phase,
    m: &SymMatrix,
    delta: f64,
    opts: &CorrectorOptions,
) -> Result<CorrectorRun> {
    opts.check()?;
    check_delta(delta)?;
    let l = opts
        .half_length
        .unwrap_or_else(|| auto_half_length(op.big_lambda(), delta, opts.tol));
    let grid = Grid::centered(op.dim(), l, opts.h)?;
    solve_on_grid(op, omega, m, delta, &grid, opts)
}

fn solve_on_grid(
    op: &EllipticOperator,
    omega: &Phase,
    m: &SymMatrix,
    delta: f64,
    grid: &Grid,
    opts: &CorrectorOptions,
) -> Result<CorrectorRun> {
    if m.dim() != op.dim() {
        return Err(Error::invalid("M has the wrong dimension"));
    }
    let scheme = OperatorScheme::new(op, omega, 1.0).with_shift(*m);
    let zero = |_: &[f64]| 0.0;
    let solution = solver::solve(
        &Problem {
            scheme: &scheme,
            grid,
            boundary: &zero,
            delta,
            initial: None,
        },
        &opts.solver_options(),
    )?;
    let sup_f = exec::max_range(grid.len(), |n| op.eval(omega, &grid.point(n), m).abs());
    let l = grid.cells()[0] as f64 * grid.h() / 2.0;
    let influence = boundary_influence(op.dim(), sup_f, op.big_lambda(), delta, grid.h(), l);
    let truncation_warning = influence > 10.0 * opts.tol;
    if truncation_warning {
        log::warn!("δ = {delta}: boundary influence {influence:.3e} exceeds 10 × tol");
    }
    Ok(CorrectorRun {
        m: *m,
        delta,
        half_length: l,
        h: grid.h(),
        center_value: solution.values[grid.center_node()],
        solution,
        boundary_influence: influence,
        truncation_warning,
    })
}

/// Result of extrapolating `δ v_δ(center)` to `δ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveEstimate {
    pub value: f64,
    /// `|last readout - value|`.
    pub residual: f64,
    pub deltas: Vec<f64>,
    pub readouts: Vec<f64>,
    /// Largest boundary influence over the schedule.
    pub truncation: f64,
}

/// Least-squares line through `(δ_i, r_i)`; returns the intercept.
fn richardson(deltas: &[f64], readouts: &[f64]) -> f64 {
    let n = deltas.len() as f64;
    let mx = deltas.iter().sum::<f64>() / n;
    let my = readouts.iter().sum::<f64>() / n;
    let sxx: f64 = deltas.iter().map(|d| (d - mx).powi(2)).sum();
    let sxy: f64 = deltas.iter().zip(readouts).map(|(d, r)| (d - mx) * (r - my)).sum();
    my - sxy / sxx * mx
}

/// Checks that successive readout increments shrink by at least
/// [`CONTRACTION_RATIO`]; increments below `floor` are noise and pass.
fn check_contraction(readouts: &[f64], floor: f64) -> Result<()> {
    let inc: Vec<f64> = readouts.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    for w in inc.windows(2) {
        if w[1] <= floor || w[0] <= floor {
            continue;
        }
        let ratio = w[0] / w[1];
        if ratio < CONTRACTION_RATIO {
            return Err(Error::NotContracting { ratio });
        }
    }
    Ok(())
}

/// Estimates `F̄(M)` from a decreasing damping schedule (at least three values).
pub fn estimate_effective(
    op: &EllipticOperator,
    omega: &Phase,
    m: &SymMatrix,
    deltas: &[f64],
    opts: &CorrectorOptions,
) -> Result<EffectiveEstimate> {
    if deltas.len() < 3 || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("δ schedule must be strictly decreasing with at least 3 entries"));
    }
    let runs = exec::try_map_range(deltas.len(), |i| solve_delta_corrector(op, omega, m, deltas[i], opts))?;
    let readouts: Vec<f64> = runs.iter().map(CorrectorRun::readout).collect();
    let truncation = runs.iter().map(|r| r.boundary_influence).fold(0.0, f64::max);
    let scale = readouts.iter().fold(1.0f64, |s, r| s.max(r.abs()));
    check_contraction(&readouts, 10.0 * opts.tol + 2.0 * truncation + 1e-12 * scale)?;
    let value = richardson(deltas, &readouts);
    Ok(EffectiveEstimate {
        value,
        residual: (readouts[readouts.len() - 1] - value).abs(),
        deltas: deltas.to_vec(),
        readouts,
        truncation,
    })
}

/// Solves at `T(y₀)ω` on `[-L, L]^d` and at `ω` on the same box translated by
/// `y₀`, and returns `max |δ v(T(y₀)ω, y) - δ v(ω, y + y₀)|` over the nodes.
/// Both boxes carry the same node layout, so the stationarity identity holds
/// node by node up to the solver tolerance.
pub fn shift_covariance_check(
    op: &EllipticOperator,
    omega: &Phase,
    m: &SymMatrix,
    delta: f64,
    y0: &[f64],
    opts: &CorrectorOptions,
) -> Result<f64> {
    opts.check()?;
    check_delta(delta)?;
    if y0.len() != op.dim() {
        return Err(Error::invalid("shift has the wrong dimension"));
    }
    let l = opts
        .half_length
        .unwrap_or_else(|| auto_half_length(op.big_lambda(), delta, opts.tol));
    let norm = y0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > l / 4.0 {
        return Err(Error::invalid("shift must satisfy |y₀| ≤ L/4"));
    }
    let shifted = match op.ensemble() {
        Some(e) => e.shift(omega, y0),
        None => omega.clone(),
    };
    let grid = Grid::centered(op.dim(), l, opts.h)?;
    let a = solve_on_grid(op, &shifted, m, delta, &grid, opts)?;
    let b = solve_on_grid(op, omega, m, delta, &grid.translated(y0), opts)?;
    Ok(delta
        * a.solution
            .values
            .iter()
            .zip(&b.solution.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct OmegaSpread {
    pub phases: Vec<Phase>,
    pub estimates: Vec<EffectiveEstimate>,
    /// `max - min` of the estimated `F̄(M)`.
    pub spread: f64,
}

/// Runs [`estimate_effective`] at phases drawn from the operator's ensemble.
pub fn omega_independence_check(
    op: &EllipticOperator,
    m: &SymMatrix,
    deltas: &[f64],
    n_phases: usize,
    seed: u64,
    opts: &CorrectorOptions,
) -> Result<OmegaSpread> {
    if n_phases < 2 {
        return Err(Error::invalid("need at least two phases"));
    }
    let phases = match op.ensemble() {
        Some(e) => e.sample_phases(seed, n_phases),
        None => vec![Phase::zero(1); n_phases],
    };
    let estimates = phases
        .iter()
        .map(|w| estimate_effective(op, w, m, deltas, opts))
        .collect::<Result<Vec<_>>>()?;
    let lo = estimates.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(OmegaSpread {
        phases,
        estimates,
        spread: hi - lo,
    })
}

/// Sampling box for [`effective_ellipticity_check`]: `M` entries uniform in
/// `±m_scale`, `N = BBᵀ` with `B` entries uniform in `±n_scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleBox {
    pub m_scale: f64,
    pub n_scale: f64,
}

#[derive(Clone, Debug)]
pub struct EffectiveEllipticity {
    pub min_margin_lower: f64,
    pub min_margin_upper: f64,
    /// Smallest margin after adding the allowed slack; nonnegative on success.
    pub min_slack_margin: f64,
    /// `(sample, lower margin, upper margin)`.
    pub rows: Vec<AuditRow>,
}

/// Samples `(M, N ⪰ 0)` and checks
/// `λ‖N‖ ≤ F̄(M+N) - F̄(M) ≤ Λ‖N‖` (trace norm), allowing each sample a slack
/// of three times the sum of the two extrapolation residuals (plus rounding).
pub fn effective_ellipticity_check(
    fbar: &dyn EffectiveOperator,
    lambda: f64,
    big_lambda: f64,
    n_samples: usize,
    seed: u64,
    sample: SampleBox,
) -> Result<EffectiveEllipticity> {
    use rand::Rng;
    let dim = fbar.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(SymMatrix, SymMatrix)> = (0..n_samples)
        .map(|i| {
            let v: Vec<f64> = (0..dim * (dim + 1) / 2)
                .map(|_| rng.random_range(-sample.m_scale..sample.m_scale))
                .collect();
            (SymMatrix::new(dim, &v).unwrap(), random_psd(&mut rng, dim, sample.n_scale, i))
        })
        .collect();
    let evals = exec::try_map_range(pairs.len(), |i| {
        let (m, n) = &pairs[i];
        let (a, ra) = fbar.evaluate(m)?;
        let (b, rb) = fbar.evaluate(&m.add(n))?;
        let norm = n.trace_norm();
        let slack = 3.0 * (ra + rb) + ELLIPTICITY_TOL * (1.0 + a.abs() + b.abs());
        Ok::<_, Error>((b - a - lambda * norm, big_lambda * norm - (b - a), slack))
    })?;
    let mut out = EffectiveEllipticity {
        min_margin_lower: f64::INFINITY,
        min_margin_upper: f64::INFINITY,
        min_slack_margin: f64::INFINITY,
        rows: Vec::with_capacity(n_samples),
    };
    let mut worst = (0.0, 0.0, 0.0);
    for (i, &(lo, up, slack)) in evals.iter().enumerate() {
        out.min_margin_lower = out.min_margin_lower.min(lo);
        out.min_margin_upper = out.min_margin_upper.min(up);
        let s = lo.min(up) + slack;
        if s < out.min_slack_margin {
            out.min_slack_margin = s;
            worst = (lo, up, slack);
        }
        out.rows.push(AuditRow {
            sample: i,
            first: lo,
            second: up,
        });
    }
    if out.min_slack_margin < 0.0 {
        return Err(Error::EllipticityViolation {
            lower: worst.0,
            upper: worst.1,
            allowed: worst.2,
        });
    }
    Ok(out)
}
