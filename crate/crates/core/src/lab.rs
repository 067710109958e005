//! Limit experiments: `τ → ∞` sweeps, transform convergence and mollification.

use rayon::prelude::*;
use serde::Serialize;

use crate::ascent::AscentOptions;
use crate::balanced::{maximize_dual, sinkhorn, transform_with, BalancedInstance, Side};
use crate::error::{QotError, Result};
use crate::herm::HermitianOperator;
use crate::primal::{duality_gap, minimize_primal_balanced};
use crate::regularizer::Regularizer;
use crate::report::{DualPotentials, SolveReport};
use crate::scalar::{abs, lit, to_f64, Extended, Real};
use crate::unbalanced::{
    entropy_penalties, maximize_dual_unbalanced, transform_f1_tau_with, transform_f2_tau_with,
    UnbalancedInstance,
};

type H<T> = HermitianOperator<T>;

/// `(U + λ1(V)·Id, V − λ1(V)·Id)`.
pub fn recenter_potentials<T: Real>(p: &DualPotentials<T>) -> Result<DualPotentials<T>> {
    Ok(p.translate(p.v.smallest_eigenvalue()?))
}

#[derive(Clone, Copy, Debug)]
pub struct LabOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Solve grid points on the rayon pool.
    pub parallel: bool,
}

impl<T: Real> LabOptions<T> {
    pub fn new(tol: T, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            parallel: true,
        }
    }
}

/// One CSV row of a sweep. Columns that do not apply are NaN.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau_or_n: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub plan_distance: f64,
    pub potential_distance: f64,
    pub entropy_penalty_1: f64,
    pub entropy_penalty_2: f64,
    pub converged: bool,
}

/// Runs `f` over `items` in order, on the rayon pool when asked.
fn map_grid<I, O, F>(items: &[I], parallel: bool, f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|&t| !(t > T::zero()) || !t.is_finite()) {
        return Err(QotError::InvalidInput("grid must be non-empty and positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QotError::InvalidInput("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// `true` when the last `k` entries never increase.
pub fn nonincreasing_tail<T: Real>(values: &[T], k: usize) -> bool {
    let start = values.len().saturating_sub(k);
    values[start..].windows(2).all(|w| w[1] <= w[0])
}

#[derive(Clone, Debug)]
pub struct TauRecord<T: Real> {
    pub tau1: T,
    pub tau2: T,
    /// `𝔉^{ε,τ}` at the recovered unbalanced plan.
    pub primal_value: Extended<T>,
    /// `𝔇^{ε,τ}`.
    pub dual_value: T,
    pub plan_distance: T,
    /// Distance of the recentered unbalanced maximizer to the balanced one.
    pub potential_distance: T,
    pub entropy_penalty_1: Extended<T>,
    pub entropy_penalty_2: Extended<T>,
    pub converged_unbalanced: bool,
    pub converged_balanced: bool,
}

impl<T: Real> TauRecord<T> {
    /// `|𝔉^{ε,τ} − 𝔉^ε|`.
    pub fn value_error(&self, balanced_value: T) -> Extended<T> {
        match self.primal_value {
            Extended::Finite(v) => Extended::Finite(abs(v - balanced_value)),
            Extended::PosInf => Extended::PosInf,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TauSweepResult<T: Real> {
    pub grid: Vec<T>,
    /// Balanced reference solve, potentials recentered.
    pub balanced: SolveReport<T>,
    /// `𝔉^ε`, taken as the balanced dual value at the Sinkhorn fixed point.
    pub balanced_value: T,
    pub records: Vec<TauRecord<T>>,
    /// `false` when a solve failed to converge and the sweep stopped there.
    pub complete: bool,
}

impl<T: Real> TauSweepResult<T> {
    pub fn value_errors(&self) -> Vec<T> {
        self.records
            .iter()
            .map(|r| r.value_error(self.balanced_value).finite().unwrap_or_else(|| lit(f64::INFINITY)))
            .collect()
    }

    pub fn plan_distances(&self) -> Vec<T> {
        self.records.iter().map(|r| r.plan_distance).collect()
    }

    pub fn potential_distances(&self) -> Vec<T> {
        self.records.iter().map(|r| r.potential_distance).collect()
    }

    /// Larger of the two entropy penalties per grid point.
    pub fn entropy_penalties(&self) -> Vec<T> {
        let inf = || lit::<T>(f64::INFINITY);
        self.records
            .iter()
            .map(|r| {
                let a = r.entropy_penalty_1.finite().unwrap_or_else(inf);
                let b = r.entropy_penalty_2.finite().unwrap_or_else(inf);
                a.max(b)
            })
            .collect()
    }

    pub fn rows(&self) -> Vec<SweepRow> {
        self.records
            .iter()
            .map(|r| SweepRow {
                tau_or_n: to_f64(r.tau1),
                primal_value: r.primal_value.to_f64(),
                dual_value: to_f64(r.dual_value),
                gap: r.primal_value.to_f64() - to_f64(r.dual_value),
                plan_distance: to_f64(r.plan_distance),
                potential_distance: to_f64(r.potential_distance),
                entropy_penalty_1: r.entropy_penalty_1.to_f64(),
                entropy_penalty_2: r.entropy_penalty_2.to_f64(),
                converged: r.converged_unbalanced && r.converged_balanced,
            })
            .collect()
    }
}

/// Solves the unbalanced problem for each `τ` in `grid` (with `τ2 = factor·τ`)
/// and compares against the balanced optimum.
///
/// Every grid point starts from the recentered balanced maximizer, so the
/// points are independent and the result does not depend on scheduling.
pub fn tau_sweep<T: Real>(
    inst: &BalancedInstance<T>,
    grid: &[T],
    tau2_factor: T,
    opts: &LabOptions<T>,
) -> Result<TauSweepResult<T>> {
    inst.regularizer().require_c1()?;
    inst.regularizer().require_strictly_convex()?;
    check_grid(grid)?;
    let (d1, d2) = (inst.space().d1, inst.space().d2);
    let mut balanced = sinkhorn(&DualPotentials::zeros(d1, d2), inst, opts.tol, opts.max_iter)?;
    balanced.potentials = recenter_potentials(&balanced.potentials)?;
    let reference = balanced.potentials.clone();
    let converged_balanced = balanced.converged;

    let solve = |&tau: &T| -> Result<TauRecord<T>> {
        let un = UnbalancedInstance::from_balanced(inst, tau, tau * tau2_factor)?;
        let rep = maximize_dual_unbalanced(&reference, &un, opts.tol, opts.max_iter)?;
        let (e1, e2) = entropy_penalties(&rep.plan, &un)?;
        let recentered = recenter_potentials(&rep.potentials)?;
        Ok(TauRecord {
            tau1: tau,
            tau2: tau * tau2_factor,
            primal_value: rep.primal_value,
            dual_value: rep.dual_value,
            plan_distance: rep.plan.distance(&balanced.plan),
            potential_distance: recentered.distance(&reference),
            entropy_penalty_1: e1,
            entropy_penalty_2: e2,
            converged_unbalanced: rep.converged,
            converged_balanced,
        })
    };
    let outcomes = map_grid(grid, opts.parallel, solve);

    let mut records = Vec::with_capacity(grid.len());
    let mut complete = converged_balanced;
    for outcome in outcomes {
        let rec = outcome?;
        let ok = rec.converged_unbalanced;
        records.push(rec);
        if !ok {
            complete = false;
            break;
        }
    }
    Ok(TauSweepResult {
        grid: grid.to_vec(),
        balanced_value: balanced.dual_value,
        balanced,
        records,
        complete,
    })
}

#[derive(Clone, Debug)]
pub struct TransformCheck<T: Real> {
    pub grid: Vec<T>,
    /// `‖F2^τ(U_τ) − F2(U_∞)‖_HS` per grid point.
    pub distances_f2: Vec<T>,
    /// `‖F1^τ(V_τ) − F1(V_∞)‖_HS` per grid point.
    pub distances_f1: Vec<T>,
}

impl<T: Real> TransformCheck<T> {
    pub fn strictly_decreasing(&self) -> bool {
        let dec = |v: &[T]| v.windows(2).all(|w| w[1] < w[0]);
        dec(&self.distances_f2) && dec(&self.distances_f1)
    }

    pub fn final_distance(&self) -> T {
        let last = |v: &[T]| v.last().copied().unwrap_or_else(T::zero);
        last(&self.distances_f2).max(last(&self.distances_f1))
    }
}

/// Compares the unbalanced transforms of `U_τ = U_∞ + Z/τ` (and likewise
/// `V_τ`) with the balanced transforms of the limits.
pub fn transform_convergence_check<T: Real>(
    inst: &BalancedInstance<T>,
    u_limit: &H<T>,
    v_limit: &H<T>,
    perturbation: Option<(&H<T>, &H<T>)>,
    grid: &[T],
    opts: &LabOptions<T>,
) -> Result<TransformCheck<T>> {
    inst.regularizer().require_c1()?;
    inst.regularizer().require_strictly_convex()?;
    check_grid(grid)?;
    let inner = AscentOptions::new(opts.tol, opts.max_iter);
    let f2 = transform_with(inst, Side::Second, u_limit, None, &inner)?.potential;
    let f1 = transform_with(inst, Side::First, v_limit, None, &inner)?.potential;
    let solve = |&tau: &T| -> Result<(T, T)> {
        let un = UnbalancedInstance::from_balanced(inst, tau, tau)?;
        let (u, v) = match perturbation {
            Some((zu, zv)) => (u_limit.axpy(T::one() / tau, zu), v_limit.axpy(T::one() / tau, zv)),
            None => (u_limit.clone(), v_limit.clone()),
        };
        let a = transform_f2_tau_with(&u, &un, Some(&f2), &inner)?;
        let b = transform_f1_tau_with(&v, &un, Some(&f1), &inner)?;
        Ok((a.distance(&f2), b.distance(&f1)))
    };
    let pairs = map_grid(grid, opts.parallel, solve)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(TransformCheck {
        grid: grid.to_vec(),
        distances_f2: pairs.iter().map(|p| p.0).collect(),
        distances_f1: pairs.iter().map(|p| p.1).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct MollifyRecord<T: Real> {
    pub n: u32,
    pub dual_value: T,
    /// Primal oracle value under the mollified regularizer.
    pub primal_value: T,
    pub plan: H<T>,
    /// Recentered maximizer.
    pub potentials: DualPotentials<T>,
    /// `max(‖U_n‖_∞, ‖V_n‖_∞)` after recentering.
    pub sup_norm: T,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct MollifySweep<T: Real> {
    pub base: String,
    /// Direct solve with the base regularizer, available when it is C¹.
    pub reference: Option<SolveReport<T>>,
    pub records: Vec<MollifyRecord<T>>,
}

impl<T: Real> MollifySweep<T> {
    /// `|𝔇^{ε,n} − 𝔇^ε|` against the direct solve.
    pub fn value_differences(&self) -> Option<Vec<T>> {
        let r = self.reference.as_ref()?;
        Some(self.records.iter().map(|m| abs(m.dual_value - r.dual_value)).collect())
    }

    pub fn max_sup_norm(&self) -> T {
        self.records.iter().fold(T::zero(), |a, r| a.max(r.sup_norm))
    }

    pub fn rows(&self) -> Vec<SweepRow> {
        self.records
            .iter()
            .map(|m| {
                let (plan_distance, potential_distance) = match &self.reference {
                    Some(r) => (
                        to_f64(m.plan.distance(&r.plan)),
                        to_f64(m.potentials.distance(&r.potentials)),
                    ),
                    None => (f64::NAN, f64::NAN),
                };
                SweepRow {
                    tau_or_n: f64::from(m.n),
                    primal_value: to_f64(m.primal_value),
                    dual_value: to_f64(m.dual_value),
                    gap: to_f64(m.primal_value - m.dual_value),
                    plan_distance,
                    potential_distance,
                    entropy_penalty_1: f64::NAN,
                    entropy_penalty_2: f64::NAN,
                    converged: m.converged,
                }
            })
            .collect()
    }
}

/// Solves the balanced problem under `ψ_n` for each `n` and, when the base
/// regularizer is C¹, under `ψ` itself for reference.
pub fn mollification_sweep<T: Real>(
    inst: &BalancedInstance<T>,
    n_grid: &[u32],
    opts: &LabOptions<T>,
) -> Result<MollifySweep<T>> {
    if n_grid.is_empty() || n_grid.contains(&0) || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QotError::InvalidInput("n grid must be positive and strictly ascending".into()));
    }
    let base = inst.regularizer().clone();
    let (d1, d2) = (inst.space().d1, inst.space().d2);
    let zeros = DualPotentials::zeros(d1, d2);
    let reference = if base.flags().c1_psi {
        let mut r = maximize_dual(&zeros, inst, opts.tol, opts.max_iter)?;
        r.potentials = recenter_potentials(&r.potentials)?;
        Some(r)
    } else {
        None
    };
    let solve = |&n: &u32| -> Result<MollifyRecord<T>> {
        let reg = Regularizer::mollified(base.clone(), n)?;
        let smooth = inst.with_regularizer(reg);
        let rep = maximize_dual(&zeros, &smooth, opts.tol, opts.max_iter)?;
        let primal = minimize_primal_balanced(&smooth, opts.tol.sqrt(), opts.max_iter)?;
        let potentials = recenter_potentials(&rep.potentials)?;
        Ok(MollifyRecord {
            n,
            dual_value: rep.dual_value,
            primal_value: primal.value,
            plan: rep.plan,
            sup_norm: potentials.sup_norm()?,
            potentials,
            converged: rep.converged && primal.converged,
        })
    };
    let records = map_grid(n_grid, opts.parallel, solve)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(MollifySweep {
        base: base.name(),
        reference,
        records,
    })
}

/// `primal − dual` per mollification level.
pub fn mollification_gaps<T: Real>(sweep: &MollifySweep<T>) -> Vec<T> {
    sweep
        .records
        .iter()
        .map(|r| duality_gap(r.primal_value, r.dual_value).gap)
        .collect()
}
