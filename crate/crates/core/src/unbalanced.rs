//! Unbalanced dual problem with relative-entropy marginal penalties.

use crate::ascent::{self, AscentOptions, Concave};
use crate::balanced::{coupling, inner_tol, marginal_distances, validate_data, BalancedInstance};
use crate::error::{QotError, Result};
use crate::herm::{HermitianOperator, ProductSpace};
use crate::primal::{psd_spectrum, regularized_cost};
use crate::regularizer::Regularizer;
use crate::report::{DualPotentials, IterationRecord, SolveReport};
use crate::scalar::{lit, to_f64, Extended, Real};

type H<T> = HermitianOperator<T>;

const LOG_CLAMP: f64 = 1e-14;
const KERNEL_EIGENVALUE: f64 = 1e-12;
const SUPPORT_EIGENVALUE: f64 = 1e-10;
const KERNEL_OVERLAP: f64 = 1e-8;
const INNER_MAX_ITER: usize = 50_000;

/// `log η` for positive definite `η`, clamping roundoff below `1e-14`.
pub fn log_positive<T: Real>(eta: &H<T>) -> Result<H<T>> {
    let sd = eta.spectral_decompose()?;
    let low = sd.eigenvalues.first().copied().unwrap_or_else(T::one);
    if low < lit(KERNEL_EIGENVALUE) {
        return Err(QotError::Domain {
            function: "log".into(),
            eigenvalue: to_f64(low),
        });
    }
    Ok(sd.map(|l| l.max(lit(LOG_CLAMP)).ln()))
}

#[derive(Clone, Debug)]
pub struct UnbalancedInstance<T: Real> {
    space: ProductSpace,
    cost: H<T>,
    rho: H<T>,
    sigma: H<T>,
    log_rho: H<T>,
    log_sigma: H<T>,
    epsilon: T,
    tau1: T,
    tau2: T,
    reg: Regularizer<T>,
}

impl<T: Real> UnbalancedInstance<T> {
    pub fn new(
        cost: H<T>,
        rho: H<T>,
        sigma: H<T>,
        epsilon: T,
        tau1: T,
        tau2: T,
        reg: Regularizer<T>,
    ) -> Result<Self> {
        let space = validate_data(&cost, &rho, &sigma, epsilon)?;
        for (name, tau) in [("tau1", tau1), ("tau2", tau2)] {
            if !(tau > T::zero()) || !tau.is_finite() {
                return Err(QotError::InvalidInput(format!("{name} must be positive, got {tau}")));
            }
        }
        Ok(Self {
            space,
            log_rho: log_positive(&rho)?,
            log_sigma: log_positive(&sigma)?,
            cost,
            rho,
            sigma,
            epsilon,
            tau1,
            tau2,
            reg,
        })
    }

    /// The balanced data with marginal penalties `τ1`, `τ2`.
    pub fn from_balanced(inst: &BalancedInstance<T>, tau1: T, tau2: T) -> Result<Self> {
        Self::new(
            inst.cost().clone(),
            inst.rho().clone(),
            inst.sigma().clone(),
            inst.epsilon(),
            tau1,
            tau2,
            inst.regularizer().clone(),
        )
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

    pub fn tau1(&self) -> T {
        self.tau1
    }

    pub fn tau2(&self) -> T {
        self.tau2
    }

    pub fn regularizer(&self) -> &Regularizer<T> {
        &self.reg
    }

    fn check_potentials(&self, p: &DualPotentials<T>) -> Result<()> {
        crate::balanced::check_dims(self.space, p)
    }

    /// `(τ·Tr[e^{−X/τ + log η} − η], e^{−X/τ + log η})` for the given side.
    fn penalty(&self, x: &H<T>, side: Side) -> Result<(T, H<T>)> {
        let (tau, log_eta, eta) = match side {
            Side::First => (self.tau1, &self.log_rho, &self.rho),
            Side::Second => (self.tau2, &self.log_sigma, &self.sigma),
        };
        let e = log_eta.axpy(-T::one() / tau, x).lift(|l| l.exp())?;
        Ok((tau * (e.trace() - eta.trace()), e))
    }
}

#[derive(Clone, Copy, Debug)]
enum Side {
    First,
    Second,
}

/// `E(α|η) = Tr[α(log α − log η − Id) + η]`, or `+∞` when the support of
/// `α` meets the kernel of `η`.
pub fn relative_entropy<T: Real>(alpha: &H<T>, eta: &H<T>) -> Result<Extended<T>> {
    alpha.check_same_dim(eta)?;
    let _ = psd_spectrum(alpha, "alpha")?;
    let _ = psd_spectrum(eta, "eta")?;
    let sa = alpha.spectral_decompose()?;
    let se = eta.spectral_decompose()?;
    // squared overlaps |⟨ξ_i, ζ_k⟩|²
    let overlap = sa.eigenvectors.adjoint() * &se.eigenvectors;
    let mut cross = T::zero();
    let mut self_term = T::zero();
    for (i, &a) in sa.eigenvalues.iter().enumerate() {
        let a = a.max(T::zero());
        if a <= lit(SUPPORT_EIGENVALUE) {
            if a > T::zero() {
                self_term += a * a.ln();
            }
            continue;
        }
        self_term += a * a.ln();
        let mut kernel_weight = T::zero();
        for (k, &m) in se.eigenvalues.iter().enumerate() {
            let w = overlap[(i, k)].norm_sqr();
            if m < lit(KERNEL_EIGENVALUE) {
                kernel_weight += w;
            } else {
                cross += a * w * m.ln();
            }
        }
        if kernel_weight > lit(KERNEL_OVERLAP) {
            return Ok(Extended::PosInf);
        }
    }
    let trace_alpha = sa.eigenvalues.iter().fold(T::zero(), |s, &a| s + a.max(T::zero()));
    let trace_eta = se.eigenvalues.iter().fold(T::zero(), |s, &m| s + m.max(T::zero()));
    Ok(Extended::Finite(self_term - cross - trace_alpha + trace_eta))
}

/// `E*(A|η) = Tr[e^{A + log η} − η]`.
pub fn relative_entropy_conjugate<T: Real>(a: &H<T>, eta: &H<T>) -> Result<T> {
    a.check_same_dim(eta)?;
    let log_eta = log_positive(eta)?;
    Ok((a + &log_eta).trace_function(|l| l.exp())? - eta.trace())
}

pub fn eval_dual_unbalanced<T: Real>(p: &DualPotentials<T>, inst: &UnbalancedInstance<T>) -> Result<T> {
    inst.check_potentials(p)?;
    let (pen1, _) = inst.penalty(&p.u, Side::First)?;
    let (pen2, _) = inst.penalty(&p.v, Side::Second)?;
    let c = coupling(&p.u, &p.v, &inst.cost, inst.epsilon, &inst.reg, false)?;
    Ok(-pen1 - pen2 - inst.epsilon * c.trace_psi)
}

fn value_and_grad<T: Real>(p: &DualPotentials<T>, inst: &UnbalancedInstance<T>) -> Result<(T, H<T>, H<T>, H<T>)> {
    let (pen1, e1) = inst.penalty(&p.u, Side::First)?;
    let (pen2, e2) = inst.penalty(&p.v, Side::Second)?;
    let c = coupling(&p.u, &p.v, &inst.cost, inst.epsilon, &inst.reg, true)?;
    let plan = c.plan.expect("plan requested");
    let g1 = e1 - plan.partial_trace_1(inst.space)?;
    let g2 = e2 - plan.partial_trace_2(inst.space)?;
    Ok((-pen1 - pen2 - inst.epsilon * c.trace_psi, g1, g2, plan))
}

/// `(e^{−U/τ1 + log ρ} − P1 ψ'(W), e^{−V/τ2 + log σ} − P2 ψ'(W))`.
pub fn grad_dual_unbalanced<T: Real>(
    p: &DualPotentials<T>,
    inst: &UnbalancedInstance<T>,
) -> Result<(H<T>, H<T>)> {
    inst.reg.require_c1()?;
    inst.check_potentials(p)?;
    let (_, g1, g2, _) = value_and_grad(p, inst)?;
    Ok((g1, g2))
}

pub fn recover_plan_unbalanced<T: Real>(p: &DualPotentials<T>, inst: &UnbalancedInstance<T>) -> Result<H<T>> {
    inst.reg.require_c1()?;
    inst.check_potentials(p)?;
    let c = coupling(&p.u, &p.v, &inst.cost, inst.epsilon, &inst.reg, true)?;
    Ok(c.plan.expect("plan requested"))
}

/// `F^ε(Γ) + τ1 E(P1 Γ|ρ) + τ2 E(P2 Γ|σ)`.
pub fn eval_primal_unbalanced<T: Real>(gamma: &H<T>, inst: &UnbalancedInstance<T>) -> Result<Extended<T>> {
    let space = inst.space;
    let base = regularized_cost(gamma, &inst.cost, inst.epsilon, &inst.reg)?;
    let e1 = relative_entropy(&gamma.partial_trace_1(space)?, &inst.rho)?;
    let e2 = relative_entropy(&gamma.partial_trace_2(space)?, &inst.sigma)?;
    Ok(base.add(e1.scale(inst.tau1)).add(e2.scale(inst.tau2)))
}

/// `(τ1 E(P1 Γ|ρ), τ2 E(P2 Γ|σ))`.
pub fn entropy_penalties<T: Real>(gamma: &H<T>, inst: &UnbalancedInstance<T>) -> Result<(Extended<T>, Extended<T>)> {
    let space = inst.space;
    Ok((
        relative_entropy(&gamma.partial_trace_1(space)?, &inst.rho)?.scale(inst.tau1),
        relative_entropy(&gamma.partial_trace_2(space)?, &inst.sigma)?.scale(inst.tau2),
    ))
}

struct TransformObjective<'a, T: Real> {
    inst: &'a UnbalancedInstance<T>,
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
        let (pen, e) = inst.penalty(&x[0], self.side)?;
        let c = coupling(u, v, &inst.cost, inst.epsilon, &inst.reg, true)?;
        let plan = c.plan.expect("plan requested");
        let marginal = match self.side {
            Side::Second => plan.partial_trace_2(inst.space)?,
            Side::First => plan.partial_trace_1(inst.space)?,
        };
        Ok((-pen - inst.epsilon * c.trace_psi, vec![e - marginal]))
    }
}

fn transform<T: Real>(
    inst: &UnbalancedInstance<T>,
    side: Side,
    fixed: &H<T>,
    start: Option<&H<T>>,
    opts: &AscentOptions<T>,
) -> Result<(H<T>, usize)> {
    inst.reg.require_c1()?;
    let (fixed_dim, free_dim, what) = match side {
        Side::Second => (inst.space.d1, inst.space.d2, "transform F2 (unbalanced)"),
        Side::First => (inst.space.d2, inst.space.d1, "transform F1 (unbalanced)"),
    };
    if fixed.dim() != fixed_dim {
        return Err(QotError::DimensionMismatch {
            expected: fixed_dim,
            found: fixed.dim(),
        });
    }
    let x0 = start.cloned().unwrap_or_else(|| H::zeros(free_dim));
    let obj = TransformObjective { inst, fixed, side };
    let out = ascent::maximize(&obj, vec![x0], opts)?;
    if !out.converged {
        return Err(QotError::NonConvergence {
            what: what.into(),
            iterations: out.iterations,
            residual: to_f64(out.grad_norm),
        });
    }
    Ok((out.x.into_iter().next().expect("one block"), out.iterations))
}

fn default_transform_opts<T: Real>() -> AscentOptions<T> {
    AscentOptions::new(lit(1e-10), INNER_MAX_ITER)
}

/// `F2^τ(U)`: the unique `V` with `e^{−V/τ2 + log σ} = P2 ψ'(W)`.
pub fn transform_f2_tau<T: Real>(u: &H<T>, inst: &UnbalancedInstance<T>) -> Result<H<T>> {
    Ok(transform(inst, Side::Second, u, None, &default_transform_opts())?.0)
}

/// `F1^τ(V)`: the unique `U` with `e^{−U/τ1 + log ρ} = P1 ψ'(W)`.
pub fn transform_f1_tau<T: Real>(v: &H<T>, inst: &UnbalancedInstance<T>) -> Result<H<T>> {
    Ok(transform(inst, Side::First, v, None, &default_transform_opts())?.0)
}

/// Like [`transform_f2_tau`] with an explicit start and tolerance.
pub fn transform_f2_tau_with<T: Real>(
    u: &H<T>,
    inst: &UnbalancedInstance<T>,
    start: Option<&H<T>>,
    opts: &AscentOptions<T>,
) -> Result<H<T>> {
    Ok(transform(inst, Side::Second, u, start, opts)?.0)
}

/// Like [`transform_f1_tau`] with an explicit start and tolerance.
pub fn transform_f1_tau_with<T: Real>(
    v: &H<T>,
    inst: &UnbalancedInstance<T>,
    start: Option<&H<T>>,
    opts: &AscentOptions<T>,
) -> Result<H<T>> {
    Ok(transform(inst, Side::First, v, start, opts)?.0)
}

fn finish_report<T: Real>(
    solver: &'static str,
    potentials: DualPotentials<T>,
    inst: &UnbalancedInstance<T>,
    iterations: usize,
    converged: bool,
    history: Vec<IterationRecord<T>>,
) -> Result<SolveReport<T>> {
    let (dual_value, g1, g2, plan) = value_and_grad(&potentials, inst)?;
    let gradient_norm = (g1.hs_inner(&g1)? + g2.hs_inner(&g2)?).sqrt();
    Ok(SolveReport {
        solver,
        marginal_residuals: marginal_distances(&plan, inst.space, &inst.rho, &inst.sigma)?,
        primal_value: eval_primal_unbalanced(&plan, inst)?,
        potentials,
        plan,
        dual_value,
        gradient_norm,
        iterations,
        converged,
        history,
    })
}

struct JointObjective<'a, T: Real> {
    inst: &'a UnbalancedInstance<T>,
}

impl<T: Real> Concave<T> for JointObjective<'_, T> {
    fn eval(&self, x: &[H<T>]) -> Result<(T, Vec<H<T>>)> {
        let p = DualPotentials::new(x[0].clone(), x[1].clone());
        let (value, g1, g2, _) = value_and_grad(&p, self.inst)?;
        Ok((value, vec![g1, g2]))
    }
}

/// Joint gradient ascent on `D^{ε,τ}`. No recentering: the functional is not
/// translation invariant.
pub fn maximize_dual_unbalanced<T: Real>(
    p0: &DualPotentials<T>,
    inst: &UnbalancedInstance<T>,
    tol: T,
    max_iter: usize,
) -> Result<SolveReport<T>> {
    inst.reg.require_c1()?;
    inst.check_potentials(p0)?;
    let out = ascent::maximize(
        &JointObjective { inst },
        vec![p0.u.clone(), p0.v.clone()],
        &AscentOptions::new(tol, max_iter),
    )?;
    let mut x = out.x.into_iter();
    let p = DualPotentials::new(x.next().expect("u"), x.next().expect("v"));
    finish_report("maximize_dual_unbalanced", p, inst, out.iterations, out.converged, Vec::new())
}

/// Alternating sweeps `V = F2^τ(U)`, `U = F1^τ(V)` until the dual gradient
/// norm is at most `tol`.
pub fn alternating_transforms_unbalanced<T: Real>(
    p0: &DualPotentials<T>,
    inst: &UnbalancedInstance<T>,
    tol: T,
    max_outer: usize,
) -> Result<SolveReport<T>> {
    inst.reg.require_c1()?;
    inst.check_potentials(p0)?;
    let opts = AscentOptions::new(inner_tol(tol), INNER_MAX_ITER);
    let mut p = p0.clone();
    let mut history = Vec::new();
    let record = |n: usize, p: &DualPotentials<T>, inner: usize| -> Result<(IterationRecord<T>, T)> {
        let (value, g1, g2, _) = value_and_grad(p, inst)?;
        let norm = (g1.hs_inner(&g1)? + g2.hs_inner(&g2)?).sqrt();
        let rec = IterationRecord {
            iteration: n,
            dual_value: value,
            residual_1: g1.hs_norm(),
            residual_2: g2.hs_norm(),
            shift: T::zero(),
            inner_iterations: inner,
        };
        Ok((rec, norm))
    };
    let (rec, mut norm) = record(0, &p, 0)?;
    history.push(rec);
    let mut n = 0;
    while norm > tol && n < max_outer {
        n += 1;
        let (v, i2) = transform(inst, Side::Second, &p.u, Some(&p.v), &opts)?;
        let (u, i1) = transform(inst, Side::First, &v, Some(&p.u), &opts)?;
        p = DualPotentials::new(u, v);
        let (rec, gn) = record(n, &p, i1 + i2)?;
        history.push(rec);
        norm = gn;
    }
    finish_report("alternating_transforms_unbalanced", p, inst, n, norm <= tol, history)
}
