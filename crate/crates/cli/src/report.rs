//! JSON report written at the end of every run.

use qot_core::lab::TauSweepResult;
use qot_core::primal::PrimalSolution;
use qot_core::selftest::CheckResult;
use qot_core::{Hermitian, Report};
use serde::Serialize;

use crate::config::{Mode, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct PotentialsFile {
    pub u: Hermitian,
    pub v: Hermitian,
}

/// A single dual solve, with a primal value to certify it.
#[derive(Clone, Debug, Serialize)]
pub struct SolveSection {
    pub solver: String,
    pub converged: bool,
    pub iterations: usize,
    pub dual_value: f64,
    /// Feasible primal value: the primal oracle for balanced runs, the
    /// recovered plan for unbalanced ones.
    pub primal_value: Option<f64>,
    pub gap: Option<f64>,
    pub relative_gap: Option<f64>,
    /// Primal functional at the plan recovered from the potentials.
    pub plan_primal_value: Option<f64>,
    pub marginal_residuals: [f64; 2],
    pub gradient_norm: f64,
    pub primal_oracle: Option<OracleSection>,
    pub potentials: PotentialsFile,
    pub plan: Hermitian,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSection {
    pub converged: bool,
    pub iterations: usize,
    pub stationarity: f64,
}

impl SolveSection {
    pub fn new(rep: &Report, primal: Option<&PrimalSolution<f64>>) -> Self {
        let plan_primal_value = rep.primal_value.finite();
        let primal_value = match primal {
            Some(p) => Some(p.value),
            None => plan_primal_value,
        };
        let gap = primal_value.map(|p| p - rep.dual_value);
        Self {
            solver: rep.solver.into(),
            converged: rep.converged && primal.is_none_or(|p| p.converged),
            iterations: rep.iterations,
            dual_value: rep.dual_value,
            primal_value,
            gap,
            relative_gap: gap.map(|g| g / (1.0 + rep.dual_value.abs())),
            plan_primal_value,
            marginal_residuals: [rep.marginal_residuals.0, rep.marginal_residuals.1],
            gradient_norm: rep.gradient_norm,
            primal_oracle: primal.map(|p| OracleSection {
                converged: p.converged,
                iterations: p.iterations,
                stationarity: p.stationarity,
            }),
            potentials: PotentialsFile {
                u: rep.potentials.u.clone(),
                v: rep.potentials.v.clone(),
            },
            plan: rep.plan.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TauSweepSection {
    pub csv: String,
    pub balanced_value: f64,
    pub complete: bool,
    pub value_errors: Vec<f64>,
    pub value_errors_tail_nonincreasing: bool,
    pub plan_distances_tail_nonincreasing: bool,
    pub final_value_error: Option<f64>,
}

impl TauSweepSection {
    pub fn new(csv: &str, res: &TauSweepResult<f64>) -> Self {
        let errors = res.value_errors();
        Self {
            csv: csv.into(),
            balanced_value: res.balanced_value,
            complete: res.complete,
            value_errors_tail_nonincreasing: qot_core::lab::nonincreasing_tail(&errors, 3),
            plan_distances_tail_nonincreasing: qot_core::lab::nonincreasing_tail(&res.plan_distances(), 3),
            final_value_error: errors.last().copied(),
            value_errors: errors,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MollifySection {
    pub csv: String,
    pub base: String,
    pub reference_dual_value: Option<f64>,
    pub value_differences: Option<Vec<f64>>,
    pub gaps: Vec<f64>,
    pub max_sup_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransformSection {
    pub csv: String,
    pub distances_f2: Vec<f64>,
    pub distances_f1: Vec<f64>,
    pub strictly_decreasing: bool,
    pub final_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSection {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub passed: bool,
}

impl From<&CheckResult> for CheckSection {
    fn from(c: &CheckResult) -> Self {
        Self {
            name: c.name.clone(),
            expected: c.expected,
            observed: c.observed,
            passed: c.passed,
        }
    }
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub mode: Mode,
    pub converged: bool,
    /// Zero under `--canonical`.
    pub wall_time_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_sweep: Option<TauSweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mollify_sweep: Option<MollifySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform_check: Option<TransformSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckSection>>,
    pub config: Option<RunConfig>,
}

impl RunReport {
    pub fn new(mode: Mode, config: Option<RunConfig>) -> Self {
        Self {
            version: VERSION,
            mode,
            converged: false,
            wall_time_seconds: 0.0,
            solve: None,
            tau_sweep: None,
            mollify_sweep: None,
            transform_check: None,
            checks: None,
            config,
        }
    }
}
