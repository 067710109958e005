//! Dispatch of a validated config to the solvers, and the files each run writes.

use std::fs;
use std::path::Path;
use std::time::Instant;

use qot_core::balanced::{maximize_dual, sinkhorn};
use qot_core::generate::{random_hermitian, rng_from_seed};
use qot_core::lab::{
    mollification_gaps, mollification_sweep, tau_sweep, transform_convergence_check, LabOptions,
};
use qot_core::primal::minimize_primal_balanced;
use qot_core::selftest::run_scalar_suite;
use qot_core::unbalanced::maximize_dual_unbalanced;
use qot_core::{Hermitian, Potentials, Unbalanced};
use serde::Serialize;

use crate::config::{parse_config_in, DualSolver, Mode, RunConfig};
use crate::error::CliError;
use crate::report::{
    CheckSection, MollifySection, RunReport, SolveSection, TauSweepSection, TransformSection,
};

pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const TRANSFORM_FILE: &str = "transform.csv";
pub const PLAN_FILE: &str = "plan.json";
pub const POTENTIAL_U_FILE: &str = "potential_u.json";
pub const POTENTIAL_V_FILE: &str = "potential_v.json";

/// Salt for the random limits and perturbations of a transform check.
const TRANSFORM_SALT: u64 = 0x7a5f_0c4e_11d2_9b31;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Write a zero wall time so reports are byte-reproducible.
    pub canonical: bool,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub converged: bool,
    pub report: RunReport,
    /// Human-readable summary, one entry per line.
    pub summary: Vec<String>,
}

/// Reads a config file. Relative matrix paths are taken from its directory.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_config_in(&text, base)?)
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    if cfg.mode == Mode::Selftest {
        return run_selftest(Some(&cfg.output_dir), Some(cfg.clone()), opts);
    }
    let start = Instant::now();
    let out = cfg.output_dir.as_path();
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let inst = cfg.balanced_instance()?;
    let (d1, d2) = (inst.space().d1, inst.space().d2);
    let zeros = Potentials::zeros(d1, d2);
    let lab = LabOptions::new(cfg.tolerance, cfg.max_iter);
    let mut report = RunReport::new(cfg.mode, Some(cfg.clone()));
    let mut summary = Vec::new();

    match cfg.mode {
        Mode::Balanced => {
            let rep = match cfg.solver {
                DualSolver::Ascent => maximize_dual(&zeros, &inst, cfg.tolerance, cfg.max_iter)?,
                DualSolver::Sinkhorn => sinkhorn(&zeros, &inst, cfg.tolerance, cfg.max_iter)?,
            };
            let primal = minimize_primal_balanced(&inst, cfg.primal_tolerance, cfg.max_iter)?;
            let section = SolveSection::new(&rep, Some(&primal));
            write_matrices(out, &rep.plan, &rep.potentials)?;
            summary.push(describe_solve(&section));
            report.converged = section.converged;
            report.solve = Some(section);
        }
        Mode::Unbalanced => {
            let tau1 = cfg.tau[0];
            let tau2 = cfg.tau.get(1).copied().unwrap_or(tau1);
            let un = Unbalanced::from_balanced(&inst, tau1, tau2)?;
            let rep = maximize_dual_unbalanced(&zeros, &un, cfg.tolerance, cfg.max_iter)?;
            let section = SolveSection::new(&rep, None);
            write_matrices(out, &rep.plan, &rep.potentials)?;
            summary.push(describe_solve(&section));
            report.converged = section.converged;
            report.solve = Some(section);
        }
        Mode::TauSweep => {
            let res = tau_sweep(&inst, &cfg.tau, cfg.tau2_factor, &lab)?;
            write_csv(&out.join(SWEEP_FILE), &res.rows())?;
            write_matrices(out, &res.balanced.plan, &res.balanced.potentials)?;
            let section = TauSweepSection::new(SWEEP_FILE, &res);
            for (rec, err) in res.records.iter().zip(&section.value_errors) {
                summary.push(format!(
                    "tau {:>10.3e}  |F_tau - F| {err:.3e}  plan distance {:.3e}",
                    rec.tau1, rec.plan_distance
                ));
            }
            report.converged = res.complete;
            report.tau_sweep = Some(section);
        }
        Mode::MollifySweep => {
            let sweep = mollification_sweep(&inst, &cfg.n_grid, &lab)?;
            write_csv(&out.join(SWEEP_FILE), &sweep.rows())?;
            let (plan, potentials) = match (&sweep.reference, sweep.records.last()) {
                (Some(r), _) => (&r.plan, &r.potentials),
                (None, Some(m)) => (&m.plan, &m.potentials),
                (None, None) => unreachable!("grid validated non-empty"),
            };
            write_matrices(out, plan, potentials)?;
            for m in &sweep.records {
                summary.push(format!(
                    "n {:>4}  dual {:.10}  gap {:.3e}  sup norm {:.4}",
                    m.n,
                    m.dual_value,
                    m.primal_value - m.dual_value,
                    m.sup_norm
                ));
            }
            report.converged = sweep.records.iter().all(|m| m.converged)
                && sweep.reference.as_ref().is_none_or(|r| r.converged);
            report.mollify_sweep = Some(MollifySection {
                csv: SWEEP_FILE.into(),
                base: sweep.base.clone(),
                reference_dual_value: sweep.reference.as_ref().map(|r| r.dual_value),
                value_differences: sweep.value_differences(),
                gaps: mollification_gaps(&sweep),
                max_sup_norm: sweep.max_sup_norm(),
            });
        }
        Mode::TransformCheck => {
            let seed = cfg.instance.as_ref().and_then(|i| i.seed()).unwrap_or(0);
            let mut rng = rng_from_seed(seed ^ TRANSFORM_SALT);
            let u: Hermitian = random_hermitian(&mut rng, d1);
            let v: Hermitian = random_hermitian(&mut rng, d2);
            let zu: Hermitian = random_hermitian(&mut rng, d1);
            let zv: Hermitian = random_hermitian(&mut rng, d2);
            let check = transform_convergence_check(&inst, &u, &v, Some((&zu, &zv)), &cfg.tau, &lab)?;
            let rows: Vec<TransformRow> = check
                .grid
                .iter()
                .zip(check.distances_f2.iter().zip(&check.distances_f1))
                .map(|(&tau, (&f2, &f1))| TransformRow {
                    tau,
                    distance_f2: f2,
                    distance_f1: f1,
                })
                .collect();
            write_csv(&out.join(TRANSFORM_FILE), &rows)?;
            for r in &rows {
                summary.push(format!(
                    "tau {:>10.3e}  |F2 diff| {:.3e}  |F1 diff| {:.3e}",
                    r.tau, r.distance_f2, r.distance_f1
                ));
            }
            report.converged = true;
            report.transform_check = Some(TransformSection {
                csv: TRANSFORM_FILE.into(),
                strictly_decreasing: check.strictly_decreasing(),
                final_distance: check.final_distance(),
                distances_f2: check.distances_f2,
                distances_f1: check.distances_f1,
            });
        }
        Mode::Selftest => unreachable!("handled above"),
    }

    report.wall_time_seconds = wall_time(start, opts);
    write_report(out, &report)?;
    Ok(Outcome {
        converged: report.converged,
        report,
        summary,
    })
}

/// Runs the scalar closed-form suite. The report is written only when `out` is given.
pub fn run_selftest(out: Option<&Path>, config: Option<RunConfig>, opts: &RunOptions) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let checks: Vec<CheckSection> = run_scalar_suite().iter().map(CheckSection::from).collect();
    let summary = checks
        .iter()
        .map(|c| {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            format!("{tag} {}: expected {:.12}, observed {:.12}", c.name, c.expected, c.observed)
        })
        .collect();
    let mut report = RunReport::new(Mode::Selftest, config);
    report.converged = checks.iter().all(|c| c.passed);
    report.checks = Some(checks);
    report.wall_time_seconds = wall_time(start, opts);
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write_report(out, &report)?;
    }
    Ok(Outcome {
        converged: report.converged,
        report,
        summary,
    })
}

#[derive(Serialize)]
struct TransformRow {
    tau: f64,
    distance_f2: f64,
    distance_f1: f64,
}

fn wall_time(start: Instant, opts: &RunOptions) -> f64 {
    if opts.canonical {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    }
}

fn describe_solve(s: &SolveSection) -> String {
    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
    format!(
        "{}: dual {:.12}  gap {}  residuals ({:.2e}, {:.2e})  {} iterations  {}",
        s.solver,
        s.dual_value,
        fmt(s.gap),
        s.marginal_residuals[0],
        s.marginal_residuals[1],
        s.iterations,
        if s.converged { "converged" } else { "NOT converged" }
    )
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_report(out: &Path, report: &RunReport) -> Result<(), CliError> {
    write_json(&out.join(REPORT_FILE), report)
}

fn write_matrices(out: &Path, plan: &Hermitian, p: &Potentials) -> Result<(), CliError> {
    write_json(&out.join(PLAN_FILE), plan)?;
    write_json(&out.join(POTENTIAL_U_FILE), &p.u)?;
    write_json(&out.join(POTENTIAL_V_FILE), &p.v)
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
