//! Scalar closed-form checks on `d1 = d2 = 1`, `ρ = σ = 1`, `c = 0.5`, `ε = 0.2`.
//!
//! With `s = U + V`, von Neumann gives `D = s − ε e^{(s−c)/ε}`, maximal at
//! `s = c` with value `c − ε`. The quadratic regularizer gives
//! `D = s − ((s − c)₊)²/(2ε)`, maximal at `s = c + ε` with value `c + ε/2`.

use crate::balanced::{maximize_dual, sinkhorn, transform_f1, transform_f2, BalancedInstance};
use crate::error::Result;
use crate::herm::HermitianOperator;
use crate::primal::minimize_primal_balanced;
use crate::regularizer::Regularizer;
use crate::report::DualPotentials;

pub const COST: f64 = 0.5;
pub const EPSILON: f64 = 0.2;
pub const TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub passed: bool,
}

pub fn scalar_instance(reg: Regularizer<f64>) -> Result<BalancedInstance<f64>> {
    let one = HermitianOperator::identity(1);
    BalancedInstance::new(HermitianOperator::scaled_identity(1, COST), one.clone(), one, EPSILON, reg)
}

fn entry(h: &HermitianOperator<f64>) -> f64 {
    h.entry(0, 0).re
}

/// Runs every scalar check. Solver errors are reported as failed checks.
pub fn run_scalar_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut check = |name: &str, expected: f64, observed: Result<f64>| {
        let observed = observed.unwrap_or(f64::NAN);
        out.push(CheckResult {
            name: name.into(),
            expected,
            observed,
            passed: (observed - expected).abs() <= TOLERANCE,
        });
    };
    let zeros = DualPotentials::zeros(1, 1);
    for (label, reg, value, sum) in [
        ("von_neumann", Regularizer::von_neumann(), COST - EPSILON, COST),
        ("quadratic", Regularizer::quadratic(), COST + EPSILON / 2.0, COST + EPSILON),
    ] {
        let inst = match scalar_instance(reg) {
            Ok(i) => i,
            Err(e) => {
                check(&format!("{label}: instance"), 0.0, Err(e));
                continue;
            }
        };
        let ascent = maximize_dual(&zeros, &inst, 1e-12, 10_000);
        check(
            &format!("{label}: joint ascent value"),
            value,
            ascent.as_ref().map(|r| r.dual_value).map_err(clone_err),
        );
        check(
            &format!("{label}: joint ascent U+V"),
            sum,
            ascent.map(|r| entry(&r.potentials.u) + entry(&r.potentials.v)),
        );
        let sk = sinkhorn(&zeros, &inst, 1e-11, 100);
        check(
            &format!("{label}: sinkhorn value"),
            value,
            sk.as_ref().map(|r| r.dual_value).map_err(clone_err),
        );
        check(
            &format!("{label}: sinkhorn U+V"),
            sum,
            sk.map(|r| entry(&r.potentials.u) + entry(&r.potentials.v)),
        );
        check(
            &format!("{label}: primal oracle value"),
            value,
            minimize_primal_balanced(&inst, 1e-10, 10_000).map(|s| s.value),
        );
        // U + F2(U) = V + F1(V) = s*
        check(
            &format!("{label}: F2 transform"),
            sum - 0.9,
            transform_f2(&HermitianOperator::scaled_identity(1, 0.9), &inst).map(|v| entry(&v)),
        );
        check(
            &format!("{label}: F1 transform"),
            sum + 0.25,
            transform_f1(&HermitianOperator::scaled_identity(1, -0.25), &inst).map(|u| entry(&u)),
        );
    }
    out
}

fn clone_err(e: &crate::error::QotError) -> crate::error::QotError {
    crate::error::QotError::Numeric(e.to_string())
}
