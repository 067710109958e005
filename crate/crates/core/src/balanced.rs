//! Balanced dual problem: functional, gradient, transforms and solvers.

use crate::ascent::{self, AscentOptions, Concave};
use crate::error::{QotError, Result};
use crate::generate::ProblemData;
use crate::herm::{HermitianOperator, ProductSpace};
use crate::primal::eval_primal;
use crate::regularizer::Regularizer;
use crate::report::{DualPotentials, IterationRecord, SolveReport};
use crate::scalar::{abs, lit, to_f64, Real};

type H<T> = HermitianOperator<T>;

const TRACE_TOL: f64 = 1e-10;
const SINKHORN_INNER_MAX_ITER: usize = 50_000;

#[derive(Clone, Debug)]
pub struct BalancedInstance<T: Real> {
    space: ProductSpace,
    cost: H<T>,
    rho: H<T>,
    sigma: H<T>,
    epsilon: T,
    reg: Regularizer<T>,
}

/// Checks shapes, finiteness, `ε > 0` and positive definiteness of the marginals.
pub(crate) fn validate_data<T: Real>(
    cost: &H<T>,
    rho: &H<T>,
    sigma: &H<T>,
    epsilon: T,
) -> Result<ProductSpace> {
    let space = ProductSpace::new(rho.dim(), sigma.dim())?;
    if cost.dim() != space.dim() {
        return Err(QotError::DimensionMismatch {
            expected: space.dim(),
            found: cost.dim(),
        });
    }
    if !(epsilon > T::zero()) || !epsilon.is_finite() {
        return Err(QotError::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    for (name, op) in [("cost", cost), ("rho", rho), ("sigma", sigma)] {
        if !op.is_finite() {
            return Err(QotError::InvalidInput(format!("{name} has non-finite entries")));
        }
    }
    for (name, op) in [("rho", rho), ("sigma", sigma)] {
        let low = op.smallest_eigenvalue()?;
        if !(low > T::zero()) {
            return Err(QotError::InvalidInput(format!(
                "{name} must be positive definite, smallest eigenvalue {low}"
            )));
        }
    }
    Ok(space)
}

impl<T: Real> BalancedInstance<T> {
    pub fn new(cost: H<T>, rho: H<T>, sigma: H<T>, epsilon: T, reg: Regularizer<T>) -> Result<Self> {
        let space = validate_data(&cost, &rho, &sigma, epsilon)?;
        for (name, op) in [("rho", &rho), ("sigma", &sigma)] {
            let tr = op.trace();
            if abs(tr - T::one()) > lit(TRACE_TOL) {
                return Err(QotError::InvalidInput(format!(
                    "{name} must have unit trace, got {tr}"
                )));
            }
        }
        Ok(Self {
            space,
            cost,
            rho,
            sigma,
            epsilon,
            reg,
        })
    }

    pub fn from_data(data: ProblemData<T>, epsilon: T, reg: Regularizer<T>) -> Result<Self> {
        Self::new(data.cost, data.rho, data.sigma, epsilon, reg)
    }

    /// The same data with another regularizer.
    pub fn with_regularizer(&self, reg: Regularizer<T>) -> Self {
        Self { reg, ..self.clone() }
    }

    pub fn space(&self) -> ProductSpace {
        self.space
    }

    pub fn cost(&self) -> &H<T> {
        &self.cost
    }

    pub fn rho(&self) -> &H<T> {
        &self.rho
    }

    pub fn sigma(&self) -> &H<T> {
        &self.sigma
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn regularizer(&self) -> &Regularizer<T> {
        &self.reg
    }

    pub(crate) fn check_potentials(&self, p: &DualPotentials<T>) -> Result<()> {
        check_dims(self.space, p)
    }
}

pub(crate) fn check_dims<T: Real>(space: ProductSpace, p: &DualPotentials<T>) -> Result<()> {
    for (want, got) in [(space.d1, p.u.dim()), (space.d2, p.v.dim())] {
        if want != got {
            return Err(QotError::DimensionMismatch {
                expected: want,
                found: got,
            });
        }
    }
    Ok(())
}

/// `Tr ψ(W)` and, on request, `ψ'(W)` for `W = (U ⊕ V − C)/ε`.
pub(crate) struct Coupling<T: Real> {
    pub trace_psi: T,
    pub plan: Option<H<T>>,
}

pub(crate) fn coupling<T: Real>(
    u: &H<T>,
    v: &H<T>,
    cost: &H<T>,
    epsilon: T,
    reg: &Regularizer<T>,
    with_plan: bool,
) -> Result<Coupling<T>> {
    let w = (u.oplus(v) - cost).scale(T::one() / epsilon);
    let sd = w.spectral_decompose()?;
    let trace_psi = sd
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &x| acc + reg.psi(x));
    if !trace_psi.is_finite() {
        let top = sd.eigenvalues.last().copied().unwrap_or_else(T::zero);
        return Err(QotError::Domain {
            function: format!("ψ ({})", reg.name()),
            eigenvalue: to_f64(top),
        });
    }
    let plan = with_plan.then(|| sd.map(|x| reg.psi_prime(x)));
    Ok(Coupling { trace_psi, plan })
}

pub fn eval_dual<T: Real>(p: &DualPotentials<T>, inst: &BalancedInstance<T>) -> Result<T> {
    inst.check_potentials(p)?;
    let c = coupling(&p.u, &p.v, &inst.cost, inst.epsilon, &inst.reg, false)?;
    Ok(linear_part(p, inst)? - inst.epsilon * c.trace_psi)
}

fn linear_part<T: Real>(p: &DualPotentials<T>, inst: &BalancedInstance<T>) -> Result<T> {
    Ok(p.u.hs_inner(&inst.rho)? + p.v.hs_inner(&inst.sigma)?)
}

/// Value, gradient blocks and plan from a single eigendecomposition.
pub(crate) fn dual_value_and_grad<T: Real>(
    p: &DualPotentials<T>,
    inst: &BalancedInstance<T>,
) -> Result<(T, H<T>, H<T>, H<T>)> {
    let c = coupling(&p.u, &p.v, &inst.cost, inst.epsilon, &inst.reg, true)?;
    let plan = c.plan.expect("plan requested");
    let g1 = &inst.rho - &plan.partial_trace_1(inst.space)?;
    let g2 = &inst.sigma - &plan.partial_trace_2(inst.space)?;
    let value = linear_part(p, inst)? - inst.epsilon * c.trace_psi;
    Ok((value, g1, g2, plan))
}

/// `(ρ − P1 ψ'(W), σ − P2 ψ'(W))`.
pub fn grad_dual<T: Real>(p: &DualPotentials<T>, inst: &BalancedInstance<T>) -> Result<(H<T>, H<T>)> {
    inst.reg.require_c1()?;
    inst.check_potentials(p)?;
    let (_, g1, g2, _) = dual_value_and_grad(p, inst)?;
    Ok((g1, g2))
}

/// `Γ = ψ'((U ⊕ V − C)/ε)`.
pub fn recover_plan<T: Real>(p: &DualPotentials<T>, inst: &BalancedInstance<T>) -> Result<H<T>> {
    inst.reg.require_c1()?;
    inst.check_potentials(p)?;
    let c = coupling(&p.u, &p.v, &inst.cost, inst.epsilon, &inst.reg, true)?;
    Ok(c.plan.expect("plan requested"))
}

/// `(‖P1 Γ − ρ‖_HS, ‖P2 Γ − σ‖_HS)`.
pub fn marginal_residuals<T: Real>(plan: &H<T>, inst: &BalancedInstance<T>) -> Result<(T, T)> {
    marginal_distances(plan, inst.space, &inst.rho, &inst.sigma)
}

pub(crate) fn marginal_distances<T: Real>(
    plan: &H<T>,
    space: ProductSpace,
    rho: &H<T>,
    sigma: &H<T>,
) -> Result<(T, T)> {
    if plan.dim() != space.dim() {
        return Err(QotError::DimensionMismatch {
            expected: space.dim(),
            found: plan.dim(),
        });
    }
    Ok((
        plan.partial_trace_1(space)?.distance(rho),
        plan.partial_trace_2(space)?.distance(sigma),
    ))
}

/// Inner tolerance used by the transforms inside an outer solve.
pub fn inner_tol<T: Real>(outer_tol: T) -> T {
    (outer_tol * lit(0.1)).min(lit(1e-9))
}

/// Result of a single transform solve.
#[derive(Clone, Debug)]
pub struct TransformOutcome<T: Real> {
    pub potential: H<T>,
    pub residual: T,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum Side {
    /// Solve for `V` with `U` fixed.
    Second,
    /// Solve for `U` with `V` fixed.
    First,
}

struct TransformObjective<'a, T: Real> {
    inst: &'a BalancedInstance<T>,
    fixed: &'a H<T>,
    side: Side,
}

impl<T: Real> Concave<T> for TransformObjective<'_, T> {
    fn eval(&self, x: &[H<T>]) -> Result<(T, Vec<H<T>>)> {
        let inst = self.inst;
        let (u, v) = match self.side {
            Side::Second => (self.fixed, &x[0]),
            Side::First => (&x[0], self.fixed),
        };
        let c = coupling(u, v, &inst.cost, inst.epsilon, &inst.reg, true)?;
        let plan = c.plan.expect("plan requested");
        let (value, grad) = match self.side {
            Side::Second => (
                v.hs_inner(&inst.sigma)?,
                &inst.sigma - &plan.partial_trace_2(inst.space)?,
            ),
            Side::First => (
                u.hs_inner(&inst.rho)?,
                &inst.rho - &plan.partial_trace_1(inst.space)?,
            ),
        };
        Ok((value - inst.epsilon * c.trace_psi, vec![grad]))
    }
}

/// Solves one transform from `start` to gradient norm `opts.tol`.
pub fn transform_with<T: Real>(
    inst: &BalancedInstance<T>,
    side: Side,
    fixed: &H<T>,
    start: Option<&H<T>>,
    opts: &AscentOptions<T>,
) -> Result<TransformOutcome<T>> {
    inst.reg.require_c1()?;
    let (fixed_dim, free_dim, what) = match side {
        Side::Second => (inst.space.d1, inst.space.d2, "transform F2"),
        Side::First => (inst.space.d2, inst.space.d1, "transform F1"),
    };
    if fixed.dim() != fixed_dim {
        return Err(QotError::DimensionMismatch {
            expected: fixed_dim,
            found: fixed.dim(),
        });
    }
    let x0 = match start {
        Some(s) if s.dim() == free_dim => s.clone(),
        Some(s) => {
            return Err(QotError::DimensionMismatch {
                expected: free_dim,
                found: s.dim(),
            })
        }
        None => H::zeros(free_dim),
    };
    let obj = TransformObjective { inst, fixed, side };
    let out = ascent::maximize(&obj, vec![x0], opts)?;
    if !out.converged {
        return Err(QotError::NonConvergence {
            what: what.into(),
            iterations: out.iterations,
            residual: to_f64(out.grad_norm),
        });
    }
    Ok(TransformOutcome {
        potential: out.x.into_iter().next().expect("one block"),
        residual: out.grad_norm,
        iterations: out.iterations,
    })
}

fn default_transform_opts<T: Real>() -> AscentOptions<T> {
    AscentOptions::new(lit(1e-10), SINKHORN_INNER_MAX_ITER)
}

/// `F2(U)`: the maximizer of `V ↦ D(U, V)`.
pub fn transform_f2<T: Real>(u: &H<T>, inst: &BalancedInstance<T>) -> Result<H<T>> {
    Ok(transform_with(inst, Side::Second, u, None, &default_transform_opts())?.potential)
}

/// `F1(V)`: the maximizer of `U ↦ D(U, V)`.
pub fn transform_f1<T: Real>(v: &H<T>, inst: &BalancedInstance<T>) -> Result<H<T>> {
    Ok(transform_with(inst, Side::First, v, None, &default_transform_opts())?.potential)
}

fn finish_report<T: Real>(
    solver: &'static str,
    potentials: DualPotentials<T>,
    inst: &BalancedInstance<T>,
    iterations: usize,
    converged: bool,
    history: Vec<IterationRecord<T>>,
) -> Result<SolveReport<T>> {
    let (dual_value, g1, g2, plan) = dual_value_and_grad(&potentials, inst)?;
    let gradient_norm = (g1.hs_inner(&g1)? + g2.hs_inner(&g2)?).sqrt();
    let primal_value = eval_primal(&plan, inst)?;
    Ok(SolveReport {
        solver,
        marginal_residuals: (g1.hs_norm(), g2.hs_norm()),
        potentials,
        plan,
        dual_value,
        primal_value,
        gradient_norm,
        iterations,
        converged,
        history,
    })
}

/// Sinkhorn iterations with `λ1` recentering.
///
/// Each sweep computes `Ṽ = F2(U)`, `λ = λ1(Ṽ)`, then sets `V = Ṽ − λ·Id` and
/// `U = F1(Ṽ) + λ·Id`. Stops once both marginal residuals of the recovered
/// plan are at most `tol`.
///
/// Strict convexity of `ψ` is what makes the transforms single valued. A
/// merely C¹ `ψ` is accepted; the iteration then follows one maximizer.
pub fn sinkhorn<T: Real>(
    p0: &DualPotentials<T>,
    inst: &BalancedInstance<T>,
    tol: T,
    max_outer: usize,
) -> Result<SolveReport<T>> {
    inst.reg.require_c1()?;
    inst.check_potentials(p0)?;
    let opts = AscentOptions::new(inner_tol(tol), SINKHORN_INNER_MAX_ITER);
    let mut p = p0.clone();
    let mut history = Vec::new();
    let (r1, r2) = dual_residuals(&p, inst)?;
    history.push(IterationRecord {
        iteration: 0,
        dual_value: eval_dual(&p, inst)?,
        residual_1: r1,
        residual_2: r2,
        shift: T::zero(),
        inner_iterations: 0,
    });
    let mut converged = r1 <= tol && r2 <= tol;
    let mut n = 0;
    while !converged && n < max_outer {
        n += 1;
        let f2 = transform_with(inst, Side::Second, &p.u, Some(&p.v), &opts)?;
        let v_tilde = f2.potential;
        let lambda = v_tilde.smallest_eigenvalue()?;
        let f1 = transform_with(inst, Side::First, &v_tilde, Some(&p.u.shift(-lambda)), &opts)?;
        p = DualPotentials::new(f1.potential.shift(lambda), v_tilde.shift(-lambda));
        let (r1, r2) = dual_residuals(&p, inst)?;
        history.push(IterationRecord {
            iteration: n,
            dual_value: eval_dual(&p, inst)?,
            residual_1: r1,
            residual_2: r2,
            shift: lambda,
            inner_iterations: f1.iterations + f2.iterations,
        });
        converged = r1 <= tol && r2 <= tol;
    }
    finish_report("sinkhorn", p, inst, n, converged, history)
}

fn dual_residuals<T: Real>(p: &DualPotentials<T>, inst: &BalancedInstance<T>) -> Result<(T, T)> {
    let plan = recover_plan(p, inst)?;
    marginal_residuals(&plan, inst)
}

struct JointObjective<'a, T: Real> {
    inst: &'a BalancedInstance<T>,
}

impl<T: Real> Concave<T> for JointObjective<'_, T> {
    fn eval(&self, x: &[H<T>]) -> Result<(T, Vec<H<T>>)> {
        let p = DualPotentials::new(x[0].clone(), x[1].clone());
        let (value, g1, g2, _) = dual_value_and_grad(&p, self.inst)?;
        Ok((value, vec![g1, g2]))
    }

    fn renormalize(&self, x: &mut Vec<H<T>>) -> Result<()> {
        let lambda = x[1].smallest_eigenvalue()?;
        x[0] = x[0].shift(lambda);
        x[1] = x[1].shift(-lambda);
        Ok(())
    }
}

/// Joint gradient ascent on `D^ε` with `λ1(V) = 0` enforced after every step.
pub fn maximize_dual<T: Real>(
    p0: &DualPotentials<T>,
    inst: &BalancedInstance<T>,
    tol: T,
    max_iter: usize,
) -> Result<SolveReport<T>> {
    inst.reg.require_c1()?;
    inst.check_potentials(p0)?;
    let obj = JointObjective { inst };
    let out = ascent::maximize(
        &obj,
        vec![p0.u.clone(), p0.v.clone()],
        &AscentOptions::new(tol, max_iter),
    )?;
    let mut x = out.x.into_iter();
    let p = DualPotentials::new(x.next().expect("u"), x.next().expect("v"));
    finish_report("maximize_dual", p, inst, out.iterations, out.converged, Vec::new())
}
