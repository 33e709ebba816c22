//! End-to-end experiments: effective tables, homogenized solves and
//! convergence studies, driven by a TOML configuration.

mod cli;
mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::corrector::{EffectiveTable, Lattice, TableInterpolant};
use crate::error::{Error, Result};
use crate::fields::Phase;
use crate::operators::SymMatrix;
use crate::solver::{self, DiscreteSolution, Grid, Linearization, Method, NodeScheme, Problem, SolveOptions};

pub use cli::{run as run_cli, Cli};
pub use config::{
    BoundarySpec, CorrectorSpec, DomainSpec, ExperimentConfig, FunctionSpec, OperatorSpec, SolverSpec, StudySpec,
};

/// Node scheme `F̄(Δ²u)` for a tabulated effective operator: the axis
/// differences are fed to the lattice interpolant, whose gradient gives the
/// Newton weights.
pub struct HomogenizedScheme<'a, 'b> {
    pub fbar: &'a TableInterpolant<'b>,
    /// Used only by the explicit time step.
    pub big_lambda: f64,
}

impl NodeScheme for HomogenizedScheme<'_, '_> {
    fn dim(&self) -> usize {
        self.fbar.lattice().dim()
    }

    fn ellipticity_max(&self) -> f64 {
        self.big_lambda
    }

    fn linearize(&self, x: &[f64], diffs: &[f64]) -> Result<Linearization> {
        let d = self.dim();
        let r = self.fbar.interpolate(&diffs[..d])?;
        let mut weights = [0.0; 4];
        weights[..d].copy_from_slice(&r.gradient[..d]);
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::NonMonotoneDecomposition {
                position: x.to_vec(),
                detail: format!("tabulated operator decreases along an axis: slopes {:?}", &r.gradient[..d]),
            });
        }
        Ok(Linearization {
            value: r.value,
            weights,
        })
    }
}

/// Solves `F̄(D²u) = 0` in the box with `u = g` on the boundary, using the
/// tabulated (or on-demand) effective operator, starting from the boundary
/// data's closed form. Queries outside the lattice fail with
/// `TableRangeExceeded`.
pub fn solve_homogenized(
    fbar: &TableInterpolant<'_>,
    big_lambda: f64,
    domain: &DomainSpec,
    opts: &SolveOptions,
) -> Result<DiscreteSolution> {
    let grid = Grid::new(&domain.lower, &domain.upper, domain.h)?;
    if grid.dim() != fbar.lattice().dim() {
        return Err(Error::GridMismatch);
    }
    let g = |x: &[f64]| domain.boundary.eval(x);
    // the closed-form data extends inside, which keeps the first Newton
    // step's difference quotients within the table
    let start: Vec<f64> = (0..grid.len()).map(|n| g(&grid.point(n))).collect();
    let scheme = HomogenizedScheme { fbar, big_lambda };
    let opts = SolveOptions {
        method: match opts.method {
            Method::Auto => Method::Direct,
            m => m,
        },
        ..*opts
    };
    solver::solve(
        &Problem {
            scheme: &scheme,
            grid: &grid,
            boundary: &g,
            delta: 0.0,
            initial: Some(&start),
        },
        &opts,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub eps: f64,
    pub sup_error: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    /// Where the effective table came from (or was written to).
    pub table_path: Option<PathBuf>,
    /// Residuals of the lattice entries the homogenized solve used.
    pub table_residuals: Vec<f64>,
    pub claimed_tolerance: f64,
    pub homogenized_iterations: usize,
    pub homogenized_seconds: f64,
}

impl ConvergenceReport {
    /// `error(ε_i) / error(ε_{i+1})`.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].sup_error / w[1].sup_error).collect()
    }

    pub fn max_table_residual(&self) -> f64 {
        self.table_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Deterministic report: provenance header, then `eps,sup_error,iterations`.
    pub fn write_report<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if let Some(p) = &self.table_path {
            writeln!(w, "# fbar_table: {}", p.display())?;
        }
        writeln!(w, "# fbar_max_residual: {:e}", self.max_table_residual())?;
        writeln!(w, "# claimed_tolerance: {:e}", self.claimed_tolerance)?;
        writeln!(w, "eps,sup_error,iterations")?;
        for r in &self.rows {
            writeln!(w, "{},{:e},{}", r.eps, r.sup_error, r.iterations)?;
        }
        Ok(())
    }

    /// Wall-clock times, kept apart from the deterministic report.
    pub fn write_timing<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "stage,wall_seconds")?;
        writeln!(w, "homogenized,{:.6}", self.homogenized_seconds)?;
        for r in &self.rows {
            writeln!(w, "eps={},{:.6}", r.eps, r.wall_seconds)?;
        }
        Ok(())
    }

    /// Log-log plot data.
    pub fn write_plot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "log10_eps,log10_sup_error")?;
        for r in &self.rows {
            writeln!(w, "{:.12},{:.12}", r.eps.log10(), r.sup_error.log10())?;
        }
        Ok(())
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Phase used by configuration-driven runs: the seed's draw from the
/// operator's ensemble, or the trivial phase for deterministic operators.
pub fn config_phase(cfg: &ExperimentConfig) -> Result<Phase> {
    let op = cfg.build_operator()?;
    Ok(match op.ensemble() {
        Some(e) => e.sample_phase(cfg.seed),
        None => Phase::zero(1),
    })
}

/// Builds (or loads) the effective table, solves the homogenized problem once
/// and `u^ε` for every `ε`, and reports sup distances on the common grid.
/// With `out` set, writes `report.csv`, `timing.csv`, `plot.csv` and (when
/// computed) `fbar_table.csv` there.
pub fn run_convergence_study(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let study = cfg.section(&cfg.study, "study")?;
    let domain = cfg.domain()?;
    let op = cfg.build_operator()?;
    let omega = config_phase(cfg)?;
    let lattice = Lattice::uniform(&study.lattice).map_err(|e| Error::Config(e.to_string()))?;
    let solve_opts = cfg.solver.options();

    let (table, table_path) = match &study.table {
        Some(p) => {
            let f = File::open(p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
            (EffectiveTable::read_csv(BufReader::new(f))?, Some(p.clone()))
        }
        None => {
            let w = op.ensemble().map(|_| omega.clone());
            let t = EffectiveTable::compute(
                &op,
                w.as_ref(),
                &lattice.nodes(),
                &cfg.corrector.deltas,
                &cfg.corrector.options(),
                cfg.operator_label(),
            )
            .map_err(|e| e.in_stage("effective table"))?;
            // relative to the output directory, so reports do not depend on where they land
            let path = out.map(|_| PathBuf::from("fbar_table.csv"));
            (t, path)
        }
    };
    let table_residuals: Vec<f64> = lattice
        .nodes()
        .iter()
        .filter_map(|m| table.get(m).map(|e| e.residual))
        .collect();
    let worst = table_residuals.iter().copied().fold(0.0, f64::max);
    if worst > study.tolerance {
        return Err(Error::Config(format!(
            "effective table residual {worst:.3e} exceeds the study tolerance {:.3e}",
            study.tolerance
        ))
        .in_stage("provenance"));
    }

    let fbar = TableInterpolant::from_table(&table, lattice)?;
    let t0 = Instant::now();
    let hom = solve_homogenized(&fbar, op.big_lambda(), domain, &solve_opts).map_err(|e| e.in_stage("homogenized solve"))?;
    let homogenized_seconds = t0.elapsed().as_secs_f64();
    let g = |x: &[f64]| domain.boundary.eval(x);

    let mut rows = Vec::new();
    for &eps in &study.eps {
        let t0 = Instant::now();
        let u = solver::solve_dirichlet(&op, &omega, eps, &domain.lower, &domain.upper, &g, domain.h, &solve_opts)
            .map_err(|e| e.in_stage(&format!("solve at eps = {eps}")))?;
        let wall_seconds = t0.elapsed().as_secs_f64();
        rows.push(ReportRow {
            eps,
            sup_error: solver::sup_distance(&u, &hom)?,
            iterations: u.iterations,
            wall_seconds,
        });
        log::info!("eps = {eps}: sup error {:.3e}", rows.last().unwrap().sup_error);
    }
    let report = ConvergenceReport {
        rows,
        table_path: table_path.clone(),
        table_residuals,
        claimed_tolerance: study.tolerance,
        homogenized_iterations: hom.iterations,
        homogenized_seconds,
    };
    if let Some(dir) = out {
        if study.table.is_none() {
            let mut w = create(dir, "fbar_table.csv")?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        let mut w = create(dir, "report.csv")?;
        report.write_report(&mut w)?;
        w.flush()?;
        let mut w = create(dir, "timing.csv")?;
        report.write_timing(&mut w)?;
        w.flush()?;
        let mut w = create(dir, "plot.csv")?;
        report.write_plot(&mut w)?;
        w.flush()?;
    }
    Ok(report)
}

/// Upper-triangle label used in summaries: `1` or `1 0 2`.
pub fn matrix_label(m: &SymMatrix) -> String {
    m.upper().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}
