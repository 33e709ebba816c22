//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::ap::{besicovitch_seminorm, extract_ap_component, mean_value_numeric, ExtractOptions, ExtractSource};
use crate::corrector::{estimate_effective, omega_independence_check, EffectiveTable, TableEntry};
use crate::error::{Error, Result};
use crate::fields::{birkhoff_compare, ergodicity_residual};
use crate::operators::{ellipticity_audit, modulus_audit, SymMatrix};
use crate::solver;

use super::{config_phase, create, matrix_label, run_convergence_study, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "wap-homog", version, about = "Homogenization experiments for weakly* almost periodic media")]
pub struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output` in the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed (overrides `seed` in the configuration).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress log output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean value of [function] over growing balls ([meanvalue]).
    Meanvalue,
    /// Besicovitch seminorm of [function] ([seminorm]).
    Seminorm,
    /// Almost periodic component of [function] ([decompose]).
    Decompose,
    /// Ensemble versus spatial means ([ensemble], [birkhoff]).
    Birkhoff,
    /// Closed-form ergodicity residual ([ensemble], [ergodicity]).
    Ergodicity,
    /// Ellipticity and modulus audits of [operator] ([audit]).
    Audit,
    /// Dirichlet solve of F(x/ε, D²u) = 0 ([operator], [domain], [solve]).
    Solve,
    /// Effective operator at one matrix ([operator], [corrector], [effective]).
    Effective,
    /// Spread of the effective value across sampled phases ([effective]).
    OmegaCheck,
    /// Convergence study ([operator], [domain], [corrector], [study]).
    Study,
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on usage or validation errors, 2 on numerical failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.quiet { log::LevelFilter::Off } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Meanvalue => meanvalue(&cfg, &out),
        Command::Seminorm => seminorm(&cfg, &out),
        Command::Decompose => decompose(&cfg, &out),
        Command::Birkhoff => birkhoff(&cfg, &out),
        Command::Ergodicity => ergodicity(&cfg, &out),
        Command::Audit => audit(&cfg, &out),
        Command::Solve => solve(&cfg, &out),
        Command::Effective => effective(&cfg, &out),
        Command::OmegaCheck => omega_check(&cfg, &out),
        Command::Study => study(&cfg, &out),
    }
}

fn meanvalue(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let spec = cfg.section(&cfg.meanvalue, "meanvalue")?;
    let f = cfg.build_function()?;
    let est = mean_value_numeric(&f, &spec.radii, spec.samples, spec.tol)?;
    let mut w = create(out, "meanvalue.csv")?;
    writeln!(w, "radius,average")?;
    for (r, a) in est.radii_used.iter().zip(&est.averages) {
        writeln!(w, "{r},{a:e}")?;
    }
    w.flush()?;
    Ok(format!("mean value = {:.6} (tail spread {:.1e})", est.value, est.tail_spread))
}

fn seminorm(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let spec = cfg.section(&cfg.seminorm, "seminorm")?;
    let f = cfg.build_function()?;
    let est = besicovitch_seminorm(&f, spec.p, &spec.lengths, spec.samples, spec.tol)?;
    let mut w = create(out, "seminorm.csv")?;
    writeln!(w, "length,value")?;
    for (l, v) in est.lengths.iter().zip(&est.values) {
        writeln!(w, "{l},{v:e}")?;
    }
    w.flush()?;
    Ok(format!("seminorm(p = {}) = {:.6} (tail spread {:.1e})", spec.p, est.value, est.tail_spread))
}

fn decompose(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let spec = cfg.section(&cfg.decompose, "decompose")?;
    let f = cfg.build_function()?;
    let (lo, hi, n) = spec.sup_grid;
    if n < 2 || !(hi > lo) {
        return Err(Error::Config("decompose.sup_grid needs lo < hi and at least two points".into()));
    }
    let dim = f.ap_part.dim();
    let axis: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let grid: Vec<Vec<f64>> = match dim {
        1 => axis.iter().map(|&x| vec![x]).collect(),
        _ => axis
            .iter()
            .flat_map(|&x| axis.iter().map(move |&y| vec![x, y]))
            .collect(),
    };
    let opts = ExtractOptions::doubling(spec.max_order, grid, spec.tol);
    let ex = extract_ap_component(ExtractSource::Structured(&f), &spec.generators, &opts)?;
    let mut w = create(out, "decompose.csv")?;
    write!(w, "{}", (0..dim).map(|i| format!("frequency{i},")).collect::<String>())?;
    writeln!(w, "cos,sin")?;
    write!(w, "{}", "0,".repeat(dim))?;
    writeln!(w, "{:e},{:e}", ex.component.constant_term(), 0.0)?;
    for t in ex.component.terms() {
        for x in &t.frequency {
            write!(w, "{x},")?;
        }
        writeln!(w, "{:e},{:e}", t.cos, t.sin)?;
    }
    w.flush()?;
    std::fs::write(out.join("decompose.txt"), ex.component.to_text())?;
    Ok(format!(
        "AP component: {} terms at order {} (last deviation {:.1e})",
        ex.component.len(),
        ex.order,
        ex.deviations.last().copied().unwrap_or(f64::NAN)
    ))
}

fn ensemble(cfg: &ExperimentConfig) -> Result<std::sync::Arc<crate::fields::QuasiPeriodicEnsemble>> {
    cfg.build_ensemble()?
        .ok_or_else(|| Error::Config("missing [ensemble] section".into()))
}

fn birkhoff(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let spec = cfg.section(&cfg.birkhoff, "birkhoff")?;
    let ens = ensemble(cfg)?;
    let phases = ens.sample_phases(cfg.seed, spec.phases);
    let r = birkhoff_compare(&ens, spec.channel, &phases, spec.radius, spec.samples, spec.tol)?;
    let mut w = create(out, "birkhoff.csv")?;
    writeln!(w, "phase,spatial_mean,ensemble_mean")?;
    for (i, m) in r.spatial_means.iter().enumerate() {
        writeln!(w, "{i},{m:e},{:e}", r.ensemble_mean)?;
    }
    w.flush()?;
    Ok(format!("ensemble mean = {:.6}, max gap = {:.1e}", r.ensemble_mean, r.max_gap))
}

fn ergodicity(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let spec = cfg.section(&cfg.ergodicity, "ergodicity")?;
    let ens = ensemble(cfg)?;
    if spec.channel >= ens.channels() {
        return Err(Error::Config("ergodicity.channel is out of range".into()));
    }
    let f = ens.profile(spec.channel).clone();
    let res = ergodicity_residual(&ens, &f, &spec.t)?;
    let mut w = create(out, "ergodicity.csv")?;
    writeln!(w, "t,residual")?;
    for (t, r) in spec.t.iter().zip(&res) {
        writeln!(w, "{t},{r:e}")?;
    }
    w.flush()?;
    Ok(format!("ergodicity residual at t = {}: {:.3e}", spec.t.last().unwrap_or(&0.0), res.last().unwrap_or(&0.0)))
}

fn audit(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let spec = cfg.section(&cfg.audit, "audit")?;
    let op = cfg.build_operator()?;
    let omega = config_phase(cfg)?;
    let e = ellipticity_audit(&op, &omega, spec.samples, cfg.seed)?;
    let m = modulus_audit(&op, &omega, spec.samples, cfg.seed)?;
    let mut w = create(out, "audit.csv")?;
    writeln!(w, "sample,lower_margin,upper_margin,modulus_ratio")?;
    for (a, b) in e.rows.iter().zip(&m.rows) {
        writeln!(w, "{},{:e},{:e},{:e}", a.sample, a.first, a.second, b.first)?;
    }
    w.flush()?;
    Ok(format!(
        "ellipticity margins ({:.3e}, {:.3e}), worst modulus ratio {:.4}",
        e.min_margin_lower, e.min_margin_upper, m.worst_ratio
    ))
}

fn solve(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let spec = cfg.section(&cfg.solve, "solve")?;
    let d = cfg.domain()?;
    let op = cfg.build_operator()?;
    let omega = config_phase(cfg)?;
    let g = |x: &[f64]| d.boundary.eval(x);
    let s = solver::solve_dirichlet(&op, &omega, spec.eps, &d.lower, &d.upper, &g, d.h, &cfg.solver.options())?;
    let mut w = create(out, "solution.csv")?;
    s.write_csv(&mut w)?;
    w.flush()?;
    Ok(format!(
        "solved on {} nodes: residual {:.1e} after {} iterations",
        s.grid.len(),
        s.residual_norm,
        s.iterations
    ))
}

fn effective_matrix(cfg: &ExperimentConfig) -> Result<SymMatrix> {
    let spec = cfg.section(&cfg.effective, "effective")?;
    let dim = cfg.section(&cfg.operator, "operator")?.dim;
    SymMatrix::new(dim, &spec.m).map_err(|e| Error::Config(e.to_string()))
}

fn effective(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let op = cfg.build_operator()?;
    let m = effective_matrix(cfg)?;
    let omega = config_phase(cfg)?;
    let est = estimate_effective(&op, &omega, &m, &cfg.corrector.deltas, &cfg.corrector.options())?;
    let mut table = EffectiveTable::new(op.dim(), cfg.operator_label(), op.ensemble().map(|_| omega.clone()));
    table.insert(TableEntry {
        m,
        value: est.value,
        deltas: est.deltas.clone(),
        residual: est.residual,
    });
    let mut w = create(out, "effective.csv")?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(format!(
        "Fbar({}) = {:.4} (residual {:.0e})",
        matrix_label(&m),
        est.value,
        est.residual
    ))
}

fn omega_check(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let spec = cfg.section(&cfg.effective, "effective")?;
    let op = cfg.build_operator()?;
    let m = effective_matrix(cfg)?;
    let s = omega_independence_check(&op, &m, &cfg.corrector.deltas, spec.phases, cfg.seed, &cfg.corrector.options())?;
    let mut w = create(out, "omega.csv")?;
    writeln!(w, "phase,fbar,residual")?;
    for (p, e) in s.phases.iter().zip(&s.estimates) {
        let a: Vec<String> = p.angles().iter().map(|x| x.to_string()).collect();
        writeln!(w, "{},{},{:e}", a.join(" "), e.value, e.residual)?;
    }
    w.flush()?;
    Ok(format!(
        "Fbar({}) spread over {} phases = {:.1e}",
        matrix_label(&m),
        s.phases.len(),
        s.spread
    ))
}

fn study(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let r = run_convergence_study(cfg, Some(out))?;
    let errs: Vec<String> = r.rows.iter().map(|row| format!("{:.2e}", row.sup_error)).collect();
    let ratios: Vec<String> = r.ratios().iter().map(|x| format!("{x:.2}")).collect();
    Ok(format!("sup errors [{}], ratios [{}]", errs.join(", "), ratios.join(", ")))
}
