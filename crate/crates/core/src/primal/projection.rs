//! Exact Euclidean projection onto `{Γ ≥ 0 : P1 Γ = ρ, P2 Γ = σ}`.
//!
//! The projection of `Y` is `(Y + A ⊗ Id + Id ⊗ B)₊` where `(A, B)` maximizes
//! the concave function `θ = ⟨A, ρ⟩ + ⟨B, σ⟩ − ½‖(Y + A ⊗ Id + Id ⊗ B)₊‖²`.
//! `θ` is C¹ with a semismooth gradient, so regularized Newton steps converge
//! quadratically where Dykstra slows to a crawl on rank-deficient targets.

use nalgebra::{DMatrix, DVector};

use super::newton::{hessian_apply, Coordinates};
use crate::error::{QotError, Result};
use crate::herm::{HermitianOperator, ProductSpace, SpectralDecomposition};
use crate::scalar::{lit, to_f64, Real};

type H<T> = HermitianOperator<T>;

const MAX_ITER: usize = 200;

pub(super) struct Projector<T: Real> {
    space: ProductSpace,
    c1: Coordinates<T>,
    c2: Coordinates<T>,
    target: DVector<T>,
    /// Images of the basis of `Herm(d1) × Herm(d2)` under `(A, B) ↦ A ⊕ B`.
    lifted: Vec<H<T>>,
}

impl<T: Real> Projector<T> {
    pub(super) fn new(space: ProductSpace, rho: &H<T>, sigma: &H<T>) -> Result<Self> {
        let c1 = Coordinates::new(space.d1);
        let c2 = Coordinates::new(space.d2);
        let target = stack(c1.encode(rho)?, c2.encode(sigma)?);
        let (id1, id2) = (H::identity(space.d1), H::identity(space.d2));
        let lifted = c1
            .basis
            .iter()
            .map(|a| a.kron(&id2))
            .chain(c2.basis.iter().map(|b| id1.kron(b)))
            .collect();
        Ok(Self {
            space,
            c1,
            c2,
            target,
            lifted,
        })
    }

    fn marginals(&self, x: &H<T>) -> Result<DVector<T>> {
        Ok(stack(
            self.c1.encode(&x.partial_trace_1(self.space)?)?,
            self.c2.encode(&x.partial_trace_2(self.space)?)?,
        ))
    }

    fn shifted(&self, y: &H<T>, ab: &DVector<T>) -> H<T> {
        self.lifted.iter().zip(ab.iter()).fold(y.clone(), |acc, (l, &c)| acc.axpy(c, l))
    }

    /// `(θ, ∇θ, spectral data of the shifted operator)`.
    fn evaluate(&self, y: &H<T>, ab: &DVector<T>) -> Result<(T, DVector<T>, SpectralDecomposition<T>, H<T>)> {
        let sd = self.shifted(y, ab).spectral_decompose()?;
        let x = sd.map(|l| l.max(T::zero()));
        let norm2 = sd.eigenvalues.iter().fold(T::zero(), |a, &l| {
            let p = l.max(T::zero());
            a + p * p
        });
        let theta = self.target.dot(ab) - norm2 * lit(0.5);
        let grad = &self.target - self.marginals(&x)?;
        Ok((theta, grad, sd, x))
    }

    /// Projects `y`; the result is PSD and meets the marginals to `tol`.
    pub(super) fn project(&self, y: &H<T>, tol: T) -> Result<H<T>> {
        let m = self.target.len();
        let mut ab = DVector::<T>::zeros(m);
        let (mut theta, mut grad, mut sd, mut x) = self.evaluate(y, &ab)?;
        for _ in 0..MAX_ITER {
            let gnorm = grad.norm();
            if gnorm <= tol {
                return Ok(x);
            }
            // generalized Jacobian of Z ↦ Z₊ in the eigenbasis
            let eig = &sd.eigenvalues;
            let dd = DMatrix::from_fn(eig.len(), eig.len(), |i, j| {
                let (a, b) = (eig[i], eig[j]);
                let (pa, pb) = (a.max(T::zero()), b.max(T::zero()));
                if a - b != T::zero() {
                    (pa - pb) / (a - b)
                } else if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            });
            let mut jac = DMatrix::<T>::zeros(m, m);
            for (k, l) in self.lifted.iter().enumerate() {
                jac.set_column(k, &self.marginals(&hessian_apply(&sd, &dd, l))?);
            }
            let jac = (&jac + jac.transpose()) * lit::<T>(0.5);
            // the direction (Id, −Id) is in the kernel, so always regularize
            let shift = gnorm.min(lit(1e-2)).max(lit(1e-14));
            let lhs = jac + DMatrix::identity(m, m) * shift;
            let dir = lhs
                .cholesky()
                .map(|ch| ch.solve(&grad))
                .unwrap_or_else(|| grad.clone());
            let slope = grad.dot(&dir);
            let mut t = T::one();
            let mut accepted = false;
            for _ in 0..50 {
                let trial = &ab + &dir * t;
                let (th, g, s, xx) = self.evaluate(y, &trial)?;
                // θ stops resolving progress near the solution, where g² is
                // below its roundoff; a shrinking gradient is accepted instead.
                let armijo = th >= theta + lit::<T>(1e-4) * t * slope;
                if armijo || g.norm() <= (T::one() - lit::<T>(1e-4) * t) * gnorm {
                    (ab, theta, grad, sd, x) = (trial, th, g, s, xx);
                    accepted = true;
                    break;
                }
                t *= lit(0.5);
            }
            if !accepted {
                break;
            }
        }
        Err(QotError::NonConvergence {
            what: "Newton projection".into(),
            iterations: MAX_ITER,
            residual: to_f64(grad.norm()),
        })
    }
}

fn stack<T: Real>(a: DVector<T>, b: DVector<T>) -> DVector<T> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}
