//! Monotone finite-difference solver for Dirichlet problems on boxes.

mod grid;
mod linear;
mod scheme;

use std::io::Write;

use faer::sparse::Triplet;

use crate::error::{Error, Result};
use crate::exec;
use crate::fields::Phase;
use crate::operators::EllipticOperator;

pub use grid::Grid;
pub use linear::{solve_tridiagonal, SparseSolver};
pub use scheme::{
    decompose, hessian_surrogates, linear_piece, pucci_piece, Linearization, NodeScheme,
    OperatorScheme,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    /// `Direct` for every form.
    #[default]
    Auto,
    /// Policy iteration: one sparse M-matrix solve per step (a single step
    /// for linear forms).
    Direct,
    /// Explicit pseudo-time marching with a monotonicity-preserving step.
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            method: Method::Auto,
        }
    }
}

/// Nodal solution of `δu - F_h(x, Δ²u) = 0` with Dirichlet data.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Dirichlet data on the boundary nodes, in node order.
    pub boundary_trace: Vec<f64>,
    /// Max-norm of `F_h - δu` on interior nodes at exit.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DiscreteSolution {
    /// Multilinear interpolation of the nodal values.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let lower = g.lower();
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for k in 0..g.dim() {
            let s = ((x[k] - lower[k]) / g.h()).clamp(0.0, g.cells()[k] as f64);
            let i = (s.floor() as usize).min(g.cells()[k] - 1);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        match g.dim() {
            1 => {
                let a = self.values[base[0]];
                let b = self.values[base[0] + 1];
                a + frac[0] * (b - a)
            }
            _ => {
                let v = |i: usize, j: usize| self.values[g.node_index([base[0] + i, base[1] + j])];
                let (fx, fy) = (frac[0], frac[1]);
                (1.0 - fx) * (1.0 - fy) * v(0, 0)
                    + fx * (1.0 - fy) * v(1, 0)
                    + (1.0 - fx) * fy * v(0, 1)
                    + fx * fy * v(1, 1)
            }
        }
    }

    /// CSV `x[,y],value`, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        match self.grid.dim() {
            1 => writeln!(w, "x,value")?,
            _ => writeln!(w, "x,y,value")?,
        }
        for (n, v) in self.values.iter().enumerate() {
            let p = self.grid.point(n);
            for c in &p {
                write!(w, "{c},")?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

/// Max-norm distance between two solutions on the same grid.
pub fn sup_distance(a: &DiscreteSolution, b: &DiscreteSolution) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Max-norm distance from a closed-form function at the nodes.
pub fn sup_distance_fn(a: &DiscreteSolution, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    a.values
        .iter()
        .enumerate()
        .map(|(n, v)| (v - f(&a.grid.point(n))).abs())
        .fold(0.0, f64::max)
}

/// Directional second differences at an interior node, in stencil order.
pub fn discrete_hessian(grid: &Grid, values: &[f64], node: usize) -> Result<Vec<f64>> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if grid.is_boundary(node) {
        return Err(Error::invalid("second differences need an interior node"));
    }
    let mut out = vec![0.0; grid.stencil().len()];
    grid.second_differences(values, node, &mut out);
    Ok(out)
}

/// `F_h(ω, x/ε, Δ²u(x))` at every node (zero on the boundary).
pub fn apply_scheme(
    op: &EllipticOperator,
    omega: &Phase,
    eps: f64,
    grid: &Grid,
    values: &[f64],
) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::invalid("ε must be positive"));
    }
    if values.len() != grid.len() || op.dim() != grid.dim() {
        return Err(Error::GridMismatch);
    }
    let scheme = OperatorScheme::new(op, omega, eps);
    exec::try_map_range(grid.len(), |n| {
        if grid.is_boundary(n) {
            return Ok(0.0);
        }
        let mut d = [0.0; 4];
        grid.second_differences(values, n, &mut d);
        scheme
            .linearize(&grid.point(n), &d[..grid.stencil().len()])
            .map(|l| l.value)
    })
}

/// Dirichlet problem `δu - F_h(x, Δ²u) = 0` in the interior, `u = g` on the
/// boundary.
pub struct Problem<'a> {
    pub scheme: &'a dyn NodeScheme,
    pub grid: &'a Grid,
    pub boundary: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    /// Zeroth-order damping `δ ≥ 0`.
    pub delta: f64,
    /// Starting interior values (boundary entries are overwritten).
    pub initial: Option<&'a [f64]>,
}

struct Evaluation {
    lins: Vec<Linearization>,
    residual: f64,
}

impl Problem<'_> {
    fn evaluate(&self, u: &[f64], interior: &[usize]) -> Result<Evaluation> {
        let g = self.grid;
        let ndir = g.stencil().len();
        let lins = exec::try_map_range(interior.len(), |i| {
            let n = interior[i];
            let mut d = [0.0; 4];
            g.second_differences(u, n, &mut d);
            self.scheme.linearize(&g.point(n), &d[..ndir])
        })?;
        let residual = lins
            .iter()
            .zip(interior)
            .map(|(l, &n)| (l.value - self.delta * u[n]).abs())
            .fold(0.0, f64::max);
        Ok(Evaluation { lins, residual })
    }

    fn initial_values(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.grid;
        let mut u = match self.initial {
            Some(v) if v.len() == g.len() => v.to_vec(),
            Some(_) => return Err(Error::GridMismatch),
            None => vec![0.0; g.len()],
        };
        let mut trace = Vec::new();
        for (n, slot) in u.iter_mut().enumerate() {
            if g.is_boundary(n) {
                *slot = (self.boundary)(&g.point(n));
                trace.push(*slot);
            }
        }
        Ok((u, trace))
    }
}

/// Solves the Dirichlet problem.
pub fn solve(problem: &Problem<'_>, opts: &SolveOptions) -> Result<DiscreteSolution> {
    if problem.scheme.dim() != problem.grid.dim() {
        return Err(Error::GridMismatch);
    }
    if !(opts.tol > 0.0) || !(problem.delta >= 0.0) {
        return Err(Error::invalid("tolerance must be positive and δ nonnegative"));
    }
    match opts.method {
        Method::Auto | Method::Direct => solve_policy_iteration(problem, opts),
        Method::Iterative => solve_pseudo_time(problem, opts),
    }
}

/// Solver entry point for an operator `F(ω, x/ε, ·)` on a box.
#[allow(clippy::too_many_arguments)]
pub fn solve_dirichlet(
    op: &EllipticOperator,
    omega: &Phase,
    eps: f64,
    lower: &[f64],
    upper: &[f64],
    boundary: &(dyn Fn(&[f64]) -> f64 + Sync),
    h: f64,
    opts: &SolveOptions,
) -> Result<DiscreteSolution> {
    if !(eps > 0.0) {
        return Err(Error::invalid("ε must be positive"));
    }
    let grid = Grid::new(lower, upper, h)?;
    let scheme = OperatorScheme::new(op, omega, eps);
    solve(
        &Problem {
            scheme: &scheme,
            grid: &grid,
            boundary,
            delta: 0.0,
            initial: None,
        },
        opts,
    )
}

fn finish(
    problem: &Problem<'_>,
    values: Vec<f64>,
    trace: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
) -> Result<DiscreteSolution> {
    let sol = DiscreteSolution {
        grid: problem.grid.clone(),
        values,
        boundary_trace: trace,
        residual_norm: residual,
        iterations,
        converged,
    };
    if converged {
        Ok(sol)
    } else {
        Err(Error::MaxIterExceeded {
            best: Box::new(sol),
        })
    }
}

fn solve_policy_iteration(problem: &Problem<'_>, opts: &SolveOptions) -> Result<DiscreteSolution> {
    let g = problem.grid;
    let (mut u, trace) = problem.initial_values()?;
    let interior = g.interior_nodes();
    let mut unknown = vec![usize::MAX; g.len()];
    for (i, &n) in interior.iter().enumerate() {
        unknown[n] = i;
    }
    let ndir = g.stencil().len();
    let h2 = g.h() * g.h();
    let scale: Vec<f64> = (0..ndir).map(|k| 1.0 / (h2 * g.stencil_norm2(k))).collect();
    let mut sparse = SparseSolver::new();

    let mut eval = problem.evaluate(&u, &interior)?;
    let mut best = (eval.residual, u.clone());
    let mut prev_weights: Option<Vec<[f64; 4]>> = None;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if eval.residual < opts.tol {
            return finish(problem, u, trace, eval.residual, iterations, true);
        }
        let weights: Vec<[f64; 4]> = eval.lins.iter().map(|l| l.weights).collect();
        // Newton fixed point: the policy is stable and the residual is at
        // the rounding floor of the assembled operator.
        if prev_weights.as_ref() == Some(&weights) {
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let wmax = weights
                .iter()
                .map(|w| w.iter().zip(&scale).map(|(a, s)| 2.0 * a * s).sum::<f64>())
                .fold(0.0f64, f64::max);
            let floor = 256.0 * f64::EPSILON * (1.0 + (wmax + problem.delta) * umax);
            if eval.residual <= floor {
                return finish(problem, u, trace, eval.residual, iterations, true);
            }
        }

        let m = interior.len();
        let mut rhs = vec![0.0; m];
        let mut diag = vec![problem.delta; m];
        for (i, &n) in interior.iter().enumerate() {
            let mut d = [0.0; 4];
            g.second_differences(&u, n, &mut d);
            let w = &eval.lins[i].weights;
            rhs[i] = eval.lins[i].value - w.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
            for k in 0..ndir {
                diag[i] += 2.0 * w[k] * scale[k];
            }
        }
        let x = if g.dim() == 1 {
            let mut sub = vec![0.0; m];
            let mut sup = vec![0.0; m];
            for (i, &n) in interior.iter().enumerate() {
                let c = eval.lins[i].weights[0] * scale[0];
                for (sign, slot) in [(-1, &mut sub[i]), (1, &mut sup[i])] {
                    let q = g.neighbor(n, 0, sign);
                    if unknown[q] == usize::MAX {
                        rhs[i] += c * u[q];
                    } else {
                        *slot = -c;
                    }
                }
            }
            solve_tridiagonal(&sub, &diag, &sup, &rhs)
        } else {
            let mut trip = Vec::with_capacity(m * (1 + 2 * ndir));
            for (i, &n) in interior.iter().enumerate() {
                trip.push(Triplet::new(i, i, diag[i]));
                for (k, s) in scale.iter().enumerate().take(ndir) {
                    let c = eval.lins[i].weights[k] * s;
                    for sign in [-1, 1] {
                        let q = g.neighbor(n, k, sign);
                        if unknown[q] == usize::MAX {
                            rhs[i] += c * u[q];
                        } else {
                            // kept even when zero so the pattern never changes
                            trip.push(Triplet::new(i, unknown[q], -c));
                        }
                    }
                }
            }
            sparse.solve(m, &trip, &rhs)?
        };
        for (i, &n) in interior.iter().enumerate() {
            u[n] = x[i];
        }
        iterations += 1;
        prev_weights = Some(weights);
        eval = problem.evaluate(&u, &interior)?;
        log::trace!("policy iteration {iterations}: residual {:.3e}", eval.residual);
        if eval.residual < best.0 {
            best = (eval.residual, u.clone());
        }
    }
    if eval.residual < opts.tol {
        return finish(problem, u, trace, eval.residual, iterations, true);
    }
    finish(problem, best.1, trace, best.0, iterations, false)
}

fn solve_pseudo_time(problem: &Problem<'_>, opts: &SolveOptions) -> Result<DiscreteSolution> {
    let g = problem.grid;
    let (mut u, trace) = problem.initial_values()?;
    let interior = g.interior_nodes();
    let d = g.dim() as f64;
    let c_stencil = g.stencil().len() as f64;
    let h2 = g.h() * g.h();
    let tau = h2 / (2.0 * d * problem.scheme.ellipticity_max() * c_stencil + problem.delta * h2);
    let mut last_step = f64::INFINITY;
    let mut best = (f64::INFINITY, u.clone());
    for it in 0..=opts.max_iter {
        let eval = problem.evaluate(&u, &interior)?;
        if eval.residual < best.0 {
            best = (eval.residual, u.clone());
        }
        if eval.residual < opts.tol {
            return finish(problem, u, trace, eval.residual, it, true);
        }
        if it == opts.max_iter {
            break;
        }
        let mut step = 0.0f64;
        for (l, &n) in eval.lins.iter().zip(&interior) {
            let du = tau * (l.value - problem.delta * u[n]);
            step = step.max(du.abs());
            u[n] += du;
        }
        if it > 0 && step > last_step * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::Unstable { step: it });
        }
        last_step = step;
    }
    finish(problem, best.1, trace, best.0, opts.max_iter, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{CoefficientField, PucciKind, SymMatrix};

    fn laplace(dim: usize) -> EllipticOperator {
        EllipticOperator::linear(dim, 1.0, 1.0, CoefficientField::Constant(SymMatrix::identity(dim)))
            .unwrap()
    }

    #[test]
    fn second_differences_of_simple_functions() {
        let g = Grid::new(&[0.0], &[1.0], 0.1).unwrap();
        let c = vec![3.0; g.len()];
        assert_eq!(discrete_hessian(&g, &c, 5).unwrap(), vec![0.0]);
        let q: Vec<f64> = (0..g.len()).map(|n| g.point(n)[0].powi(2)).collect();
        assert!((discrete_hessian(&g, &q, 5).unwrap()[0] - 2.0).abs() < 1e-10);

        let g2 = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap();
        let xy: Vec<f64> = (0..g2.len()).map(|n| g2.point(n)[0] * g2.point(n)[1]).collect();
        let node = g2.node_index([2, 2]);
        let d = discrete_hessian(&g2, &xy, node).unwrap();
        assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-12);
        assert!((d[2] - 1.0).abs() < 1e-12);
        assert!((d[3] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn scheme_residuals() {
        let g = Grid::new(&[0.0], &[1.0], 0.1).unwrap();
        let q: Vec<f64> = (0..g.len()).map(|n| g.point(n)[0].powi(2)).collect();
        let r = apply_scheme(&laplace(1), &Phase::zero(1), 1.0, &g, &q).unwrap();
        for n in g.interior_nodes() {
            assert!((r[n] - 2.0).abs() < 1e-10);
        }
        let op = EllipticOperator::pucci(2, PucciKind::Plus, 1.0, 2.0).unwrap();
        let g2 = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap();
        let r = apply_scheme(&op, &Phase::zero(1), 1.0, &g2, &vec![0.0; g2.len()]).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_data_gives_linear_solution() {
        let s = solve_dirichlet(
            &laplace(1),
            &Phase::zero(1),
            1.0,
            &[0.0],
            &[1.0],
            &|x: &[f64]| x[0],
            0.01,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(sup_distance_fn(&s, &|x| x[0]) < 1e-10);
        assert_eq!(s.iterations, 1);
    }

    #[test]
    fn harmonic_quadratic_in_the_square() {
        let g = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let s = solve_dirichlet(
            &laplace(2),
            &Phase::zero(1),
            1.0,
            &[0.0, 0.0],
            &[1.0, 1.0],
            &g,
            0.05,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(sup_distance_fn(&s, &g) < 1e-10);
    }

    #[test]
    fn pucci_quadratic_with_matched_signs() {
        // P⁺(diag(1, -2)) = 2·1 - 1·2 = 0
        let g = |x: &[f64]| 0.5 * x[0] * x[0] - x[1] * x[1];
        let op = EllipticOperator::pucci(2, PucciKind::Plus, 1.0, 2.0).unwrap();
        for method in [Method::Direct, Method::Iterative] {
            let s = solve_dirichlet(
                &op,
                &Phase::zero(1),
                1.0,
                &[-1.0, -1.0],
                &[1.0, 1.0],
                &g,
                0.1,
                &SolveOptions {
                    tol: 1e-9,
                    max_iter: 20_000,
                    method,
                },
            )
            .unwrap();
            assert!(sup_distance_fn(&s, &g) < 1e-8, "{method:?}");
        }
    }

    #[test]
    fn pseudo_time_agrees_with_policy_iteration() {
        let op = EllipticOperator::pucci(2, PucciKind::Minus, 1.0, 2.0).unwrap();
        let g = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[1];
        let run = |method| {
            solve_dirichlet(
                &op,
                &Phase::zero(1),
                1.0,
                &[0.0, 0.0],
                &[1.0, 1.0],
                &g,
                0.1,
                &SolveOptions {
                    tol: 1e-10,
                    max_iter: 50_000,
                    method,
                },
            )
            .unwrap()
        };
        let a = run(Method::Direct);
        let b = run(Method::Iterative);
        assert!(sup_distance(&a, &b).unwrap() < 1e-8);
        assert!(a.iterations < 20);
    }

    #[test]
    fn iteration_cap_returns_the_best_iterate() {
        let op = EllipticOperator::pucci(1, PucciKind::Plus, 1.0, 2.0).unwrap();
        let err = solve_dirichlet(
            &op,
            &Phase::zero(1),
            1.0,
            &[0.0],
            &[1.0],
            &|x: &[f64]| x[0] * x[0],
            0.01,
            &SolveOptions {
                tol: 1e-12,
                max_iter: 3,
                method: Method::Iterative,
            },
        )
        .unwrap_err();
        match err {
            Error::MaxIterExceeded { best } => {
                assert!(!best.converged);
                assert!(best.residual_norm.is_finite());
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let opts = SolveOptions::default();
        let f = |x: &[f64]| x[0];
        let a = solve_dirichlet(&laplace(1), &Phase::zero(1), 1.0, &[0.0], &[1.0], &f, 0.1, &opts).unwrap();
        let b = solve_dirichlet(&laplace(1), &Phase::zero(1), 1.0, &[0.0], &[1.0], &f, 0.05, &opts).unwrap();
        assert!(matches!(sup_distance(&a, &b), Err(Error::GridMismatch)));
        assert_eq!(sup_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn csv_dump_shape() {
        let s = solve_dirichlet(
            &laplace(1),
            &Phase::zero(1),
            1.0,
            &[0.0],
            &[1.0],
            &|x: &[f64]| x[0],
            0.5,
            &SolveOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("x,value\n0,0\n"));
    }
}
