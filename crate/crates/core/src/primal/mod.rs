//! Direct primal evaluation and primal minimizers: a log-det barrier Newton
//! path when ψ is strictly convex, projected gradient otherwise.
//!
//! The minimizers below touch only `herm` and `regularizer`, so agreement
//! with the dual solvers is evidence rather than a tautology.

mod newton;
mod projection;

use std::collections::VecDeque;

use self::projection::Projector;
use crate::balanced::BalancedInstance;
use crate::error::{QotError, Result};
use crate::herm::{HermitianOperator, ProductSpace};
use crate::regularizer::Regularizer;
use crate::scalar::{abs, lit, to_f64, Extended, Real};
use crate::unbalanced::{eval_primal_unbalanced, UnbalancedInstance};

type H<T> = HermitianOperator<T>;

/// Spectra above `−PSD_TOL` are clamped to zero; anything lower is rejected.
pub const PSD_TOL: f64 = 1e-10;
const EIGEN_FLOOR: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-9;
const ORACLE_FEASIBILITY_TOL: f64 = 1e-13;
const DYKSTRA_MAX_ITER: usize = 10_000;

/// Clamped spectrum of a plan, or an error if it is not PSD to tolerance.
pub(crate) fn psd_spectrum<T: Real>(gamma: &H<T>, what: &str) -> Result<Vec<T>> {
    let sd = gamma.spectral_decompose()?;
    sd.eigenvalues
        .into_iter()
        .map(|l| {
            if l < -lit::<T>(PSD_TOL) {
                Err(QotError::InvalidInput(format!(
                    "{what} is not positive semidefinite (eigenvalue {l})"
                )))
            } else {
                Ok(l.max(T::zero()))
            }
        })
        .collect()
}

/// `Tr[CΓ] + ε·Tr φ(Γ)` for an arbitrary cost and regularizer.
pub(crate) fn regularized_cost<T: Real>(
    gamma: &H<T>,
    cost: &H<T>,
    epsilon: T,
    reg: &Regularizer<T>,
) -> Result<Extended<T>> {
    gamma.check_same_dim(cost)?;
    let spectrum = psd_spectrum(gamma, "plan")?;
    let entropy = spectrum
        .into_iter()
        .fold(Extended::Finite(T::zero()), |acc, l| acc.add(reg.phi(l)));
    Ok(Extended::Finite(cost.hs_inner(gamma)?).add(entropy.scale(epsilon)))
}

/// `F^ε(Γ) = Tr[CΓ] + ε·Tr φ(Γ)`.
pub fn eval_primal<T: Real>(gamma: &H<T>, inst: &BalancedInstance<T>) -> Result<Extended<T>> {
    regularized_cost(gamma, inst.cost(), inst.epsilon(), inst.regularizer())
}

#[derive(Clone, Debug)]
pub enum FeasibleSet<T: Real> {
    /// `{Γ ≥ 0 : P1 Γ = ρ, P2 Γ = σ}`.
    Balanced { space: ProductSpace, rho: H<T>, sigma: H<T> },
    /// The PSD cone of the product space.
    Unbalanced { space: ProductSpace },
}

impl<T: Real> FeasibleSet<T> {
    pub fn balanced(rho: H<T>, sigma: H<T>) -> Result<Self> {
        let space = ProductSpace::new(rho.dim(), sigma.dim())?;
        for (name, op) in [("rho", &rho), ("sigma", &sigma)] {
            if abs(op.trace() - T::one()) > lit(PSD_TOL) {
                return Err(QotError::InvalidInput(format!(
                    "balanced feasible set needs unit-trace {name}"
                )));
            }
        }
        Ok(Self::Balanced { space, rho, sigma })
    }

    pub fn for_instance(inst: &BalancedInstance<T>) -> Self {
        Self::Balanced {
            space: inst.space(),
            rho: inst.rho().clone(),
            sigma: inst.sigma().clone(),
        }
    }

    pub fn space(&self) -> ProductSpace {
        match self {
            Self::Balanced { space, .. } | Self::Unbalanced { space } => *space,
        }
    }

    /// Largest violation of the marginal constraints and of positivity.
    pub fn violation(&self, gamma: &H<T>) -> Result<T> {
        let negativity = (-gamma.smallest_eigenvalue()?).max(T::zero());
        match self {
            Self::Balanced { space, rho, sigma } => {
                let r1 = gamma.partial_trace_1(*space)?.distance(rho);
                let r2 = gamma.partial_trace_2(*space)?.distance(sigma);
                Ok(r1.max(r2).max(negativity))
            }
            Self::Unbalanced { .. } => Ok(negativity),
        }
    }
}

fn clip_psd<T: Real>(gamma: &H<T>) -> Result<H<T>> {
    Ok(gamma.spectral_decompose()?.map(|l| l.max(T::zero())))
}

/// Orthogonal projection onto `{P1 Γ = ρ, P2 Γ = σ}`.
fn project_affine<T: Real>(gamma: &H<T>, space: ProductSpace, rho: &H<T>, sigma: &H<T>) -> Result<H<T>> {
    let a = rho - &gamma.partial_trace_1(space)?;
    let b = sigma - &gamma.partial_trace_2(space)?;
    let (d1, d2) = (lit::<T>(space.d1 as f64), lit::<T>(space.d2 as f64));
    let t = a.trace();
    let id1 = H::identity(space.d1);
    let id2 = H::identity(space.d2);
    let mut out = gamma + &a.kron(&id2).scale(T::one() / d2);
    out += &id1.kron(&b).scale(T::one() / d1);
    Ok(out.shift(-t / (d1 * d2)))
}

/// Dykstra's alternating projections onto the affine marginal set and the
/// PSD cone. Returns the PSD-side iterate.
pub fn project_to_feasible<T: Real>(gamma0: &H<T>, feasible: &FeasibleSet<T>) -> Result<H<T>> {
    let (space, rho, sigma) = match feasible {
        FeasibleSet::Unbalanced { .. } => return clip_psd(gamma0),
        FeasibleSet::Balanced { space, rho, sigma } => (*space, rho, sigma),
    };
    if gamma0.dim() != space.dim() {
        return Err(QotError::DimensionMismatch {
            expected: space.dim(),
            found: gamma0.dim(),
        });
    }
    let tol = lit::<T>(FEASIBILITY_TOL);
    if feasible.violation(gamma0)? <= tol {
        return Ok(gamma0.clone());
    }
    let n = space.dim();
    let mut x = gamma0.clone();
    let (mut p, mut q) = (H::zeros(n), H::zeros(n));
    let mut violation = T::zero();
    for _ in 0..DYKSTRA_MAX_ITER {
        let y = project_affine(&(&x + &p), space, rho, sigma)?;
        p = &(&x + &p) - &y;
        let yq = &y + &q;
        x = clip_psd(&yq)?;
        q = &yq - &x;
        violation = feasible.violation(&x)?;
        if violation <= tol {
            return Ok(x);
        }
    }
    Err(QotError::NonConvergence {
        what: "Dykstra projection".into(),
        iterations: DYKSTRA_MAX_ITER,
        residual: to_f64(violation),
    })
}

/// Output of a primal minimization.
#[derive(Clone, Debug)]
pub struct PrimalSolution<T: Real> {
    pub plan: H<T>,
    pub value: T,
    /// `‖P(Γ − ∇F(Γ)) − Γ‖_HS` at the returned plan, or the Newton decrement
    /// of the final barrier stage when the barrier path was used.
    pub stationarity: T,
    pub iterations: usize,
    pub converged: bool,
}

trait PrimalObjective<T: Real> {
    fn value(&self, gamma: &H<T>) -> Result<Extended<T>>;
    fn grad(&self, gamma: &H<T>) -> Result<H<T>>;
    fn project(&self, gamma: &H<T>) -> Result<H<T>>;
}

/// `ε·φ'(Γ)` with the spectrum floored to keep it finite.
fn entropy_grad<T: Real>(gamma: &H<T>, epsilon: T, reg: &Regularizer<T>) -> Result<H<T>> {
    let floor = lit::<T>(EIGEN_FLOOR);
    let sd = gamma.spectral_decompose()?;
    Ok(sd.map(|l| reg.phi_prime(l.max(floor))).scale(epsilon))
}

struct BalancedPrimal<'a, T: Real> {
    inst: &'a BalancedInstance<T>,
    feasible: FeasibleSet<T>,
    projector: Projector<T>,
}

impl<T: Real> PrimalObjective<T> for BalancedPrimal<'_, T> {
    fn value(&self, gamma: &H<T>) -> Result<Extended<T>> {
        eval_primal(gamma, self.inst)
    }

    fn grad(&self, gamma: &H<T>) -> Result<H<T>> {
        Ok(self.inst.cost() + &entropy_grad(gamma, self.inst.epsilon(), self.inst.regularizer())?)
    }

    fn project(&self, gamma: &H<T>) -> Result<H<T>> {
        // Residual infeasibility leaks into the value at the same order, so the
        // oracle projects far tighter than the public tolerance.
        match self.projector.project(gamma, lit(ORACLE_FEASIBILITY_TOL)) {
            Ok(x) => Ok(x),
            Err(_) => project_to_feasible(gamma, &self.feasible),
        }
    }
}

struct UnbalancedPrimal<'a, T: Real> {
    inst: &'a UnbalancedInstance<T>,
}

impl<T: Real> PrimalObjective<T> for UnbalancedPrimal<'_, T> {
    fn value(&self, gamma: &H<T>) -> Result<Extended<T>> {
        eval_primal_unbalanced(gamma, self.inst)
    }

    fn grad(&self, gamma: &H<T>) -> Result<H<T>> {
        let inst = self.inst;
        let space = inst.space();
        let floor = lit::<T>(EIGEN_FLOOR);
        let log_floored = |a: &H<T>| a.lift(|l| l.max(floor).ln());
        let m1 = log_floored(&gamma.partial_trace_1(space)?)? - log_floored(inst.rho())?;
        let m2 = log_floored(&gamma.partial_trace_2(space)?)? - log_floored(inst.sigma())?;
        let mut g = inst.cost() + &entropy_grad(gamma, inst.epsilon(), inst.regularizer())?;
        g += &m1.kron(&H::identity(space.d2)).scale(inst.tau1());
        g += &H::identity(space.d1).kron(&m2).scale(inst.tau2());
        Ok(g)
    }

    fn project(&self, gamma: &H<T>) -> Result<H<T>> {
        clip_psd(gamma)
    }
}

/// Spectral projected gradient with a nonmonotone Armijo search.
fn spg<T: Real>(
    obj: &impl PrimalObjective<T>,
    x0: H<T>,
    tol: T,
    max_iter: usize,
) -> Result<PrimalSolution<T>> {
    const MEMORY: usize = 10;
    let gamma_armijo = lit::<T>(1e-4);
    let (alpha_min, alpha_max) = (lit::<T>(1e-12), lit::<T>(1e12));

    let mut x = obj.project(&x0)?;
    let mut f = obj
        .value(&x)?
        .finite()
        .ok_or_else(|| QotError::Numeric("primal value infinite at the starting plan".into()))?;
    let mut g = obj.grad(&x)?;
    let stationarity = |x: &H<T>, g: &H<T>| -> Result<T> { Ok(obj.project(&(x - g))?.distance(x)) };
    let mut res = stationarity(&x, &g)?;
    let mut alpha = T::one() / T::one().max(g.hs_norm());
    let mut window = VecDeque::from([f]);
    let mut it = 0;
    while res > tol && it < max_iter {
        let d = &obj.project(&x.axpy(-alpha, &g))? - &x;
        let slope = g.hs_inner(&d)?;
        if slope >= T::zero() {
            // roundoff in the projection; nothing left to gain
            break;
        }
        let reference = window.iter().copied().fold(f, |a, b| a.max(b));
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let trial = x.axpy(t, &d);
            if let Extended::Finite(ft) = obj.value(&trial)? {
                if ft <= reference + gamma_armijo * t * slope {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            t *= lit(0.5);
        }
        let Some((xn, fnew)) = accepted else { break };
        let gn = obj.grad(&xn)?;
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.hs_inner(&y)?;
        alpha = if sy > T::zero() {
            (s.hs_inner(&s)? / sy).max(alpha_min).min(alpha_max)
        } else {
            alpha_max
        };
        x = xn;
        f = fnew;
        g = gn;
        res = stationarity(&x, &g)?;
        window.push_back(f);
        if window.len() > MEMORY {
            window.pop_front();
        }
        it += 1;
    }
    Ok(PrimalSolution {
        converged: res <= tol,
        plan: x,
        value: f,
        stationarity: res,
        iterations: it,
    })
}

/// Minimizes `F^ε` over couplings of `(ρ, σ)`, starting from `ρ ⊗ σ`.
///
/// Strictly convex `ψ` makes `φ'(0⁺) = −∞`, so the minimizer has full rank and
/// Newton steps on the marginal set, following a vanishing log-det barrier,
/// are used. Otherwise the
/// minimizer may be singular and spectral projected gradient with Dykstra
/// projections is used.
pub fn minimize_primal_balanced<T: Real>(
    inst: &BalancedInstance<T>,
    tol: T,
    max_iter: usize,
) -> Result<PrimalSolution<T>> {
    if inst.regularizer().flags().strictly_convex_psi {
        let prob = newton::Problem {
            space: inst.space(),
            cost: inst.cost(),
            epsilon: inst.epsilon(),
            reg: inst.regularizer(),
        };
        return newton::minimize(&prob, inst.rho().kron(inst.sigma()), tol, max_iter);
    }
    let obj = BalancedPrimal {
        inst,
        feasible: FeasibleSet::for_instance(inst),
        projector: Projector::new(inst.space(), inst.rho(), inst.sigma())?,
    };
    spg(&obj, inst.rho().kron(inst.sigma()), tol, max_iter)
}

/// Minimizes `F^{ε,τ}` over the PSD cone, starting from `ρ ⊗ σ`.
pub fn minimize_primal_unbalanced<T: Real>(
    inst: &UnbalancedInstance<T>,
    tol: T,
    max_iter: usize,
) -> Result<PrimalSolution<T>> {
    let obj = UnbalancedPrimal { inst };
    spg(&obj, inst.rho().kron(inst.sigma()), tol, max_iter)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRecord<T> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
    /// `gap / (1 + |dual|)`.
    pub relative_gap: T,
}

impl<T: Real> GapRecord<T> {
    /// Weak duality up to `1e-9`.
    pub fn is_consistent(&self) -> bool {
        self.gap >= -lit::<T>(1e-9)
    }
}

pub fn duality_gap<T: Real>(primal: T, dual: T) -> GapRecord<T> {
    let gap = primal - dual;
    GapRecord {
        primal,
        dual,
        gap,
        relative_gap: gap / (T::one() + abs(dual)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FenchelYoung<T> {
    /// `Tr φ(Γ) + Tr ψ(W) − ⟨W, Γ⟩`.
    pub slack: Extended<T>,
    pub holds: bool,
}

/// Checks `⟨W, Γ⟩ ≤ Tr φ(Γ) + Tr ψ(W)` up to `1e-9`.
pub fn fenchel_young_check<T: Real>(gamma: &H<T>, w: &H<T>, reg: &Regularizer<T>) -> Result<FenchelYoung<T>> {
    let spectrum = psd_spectrum(gamma, "Γ")?;
    let phi = spectrum
        .into_iter()
        .fold(Extended::Finite(T::zero()), |acc, l| acc.add(reg.phi(l)));
    let psi = w.trace_function(|x| reg.psi(x))?;
    let slack = phi.add(Extended::Finite(psi - w.hs_inner(gamma)?));
    let holds = match slack {
        Extended::Finite(s) => s >= -lit::<T>(1e-9),
        Extended::PosInf => true,
    };
    Ok(FenchelYoung { slack, holds })
}
