//! Damped Newton on the affine marginal set for barrier regularizers.
//!
//! When `φ'(0⁺) = −∞` the minimizer has full rank, so the PSD constraint is
//! inactive and the problem is smooth and equality constrained. Directions are
//! taken in the null space of `(P1, P2)` and the Hessian of `Tr φ` is built
//! from divided differences of `φ'` in the eigenbasis of the current plan.

use nalgebra::{Complex, DMatrix, DVector};

use super::PrimalSolution;
use crate::error::{QotError, Result};
use crate::herm::{hermitian_project, HermitianOperator, ProductSpace, SpectralDecomposition};
use crate::regularizer::Regularizer;
use crate::scalar::{abs, lit, Extended, Real};

type H<T> = HermitianOperator<T>;

/// Barrier weight at the first stage, relative to `ε`.
const MU_START: f64 = 1.0;
/// Last stage. The barrier shifts the optimal value by at most about `n·μ`.
const MU_FINAL: f64 = 1e-12;
const MU_SHRINK: f64 = 0.1;
/// A stage counts as centred once the Newton decrement² is below `CENTERED·μ`.
const CENTERED: f64 = 0.1;

/// HS-orthonormal basis of the Hermitian `n × n` matrices.
fn hermitian_basis<T: Real>(n: usize) -> Vec<H<T>> {
    let r = T::one() / lit::<T>(2.0).sqrt();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i..n {
            if i == j {
                let mut m = DMatrix::zeros(n, n);
                m[(i, i)] = Complex::new(T::one(), T::zero());
                out.push(hermitian_project(&m));
            } else {
                let mut re = DMatrix::zeros(n, n);
                re[(i, j)] = Complex::new(r, T::zero());
                re[(j, i)] = Complex::new(r, T::zero());
                out.push(hermitian_project(&re));
                let mut im = DMatrix::zeros(n, n);
                im[(i, j)] = Complex::new(T::zero(), r);
                im[(j, i)] = Complex::new(T::zero(), -r);
                out.push(hermitian_project(&im));
            }
        }
    }
    out
}

pub(super) struct Coordinates<T: Real> {
    pub(super) basis: Vec<H<T>>,
}

impl<T: Real> Coordinates<T> {
    pub(super) fn new(n: usize) -> Self {
        Self {
            basis: hermitian_basis(n),
        }
    }

    pub(super) fn encode(&self, x: &H<T>) -> Result<DVector<T>> {
        let v = self
            .basis
            .iter()
            .map(|b| b.hs_inner(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(v))
    }

    pub(super) fn decode(&self, v: &DVector<T>) -> H<T> {
        let n = self.basis[0].dim();
        let mut acc = H::zeros(n);
        for (b, &c) in self.basis.iter().zip(v.iter()) {
            acc = acc.axpy(c, b);
        }
        acc
    }
}

/// Orthonormal basis (as columns) of `{X : P1 X = 0, P2 X = 0}`; empty when `d1 = d2 = 1`.
fn null_space<T: Real>(space: ProductSpace, coords: &Coordinates<T>) -> Result<DMatrix<T>> {
    let c1 = Coordinates::<T>::new(space.d1);
    let c2 = Coordinates::<T>::new(space.d2);
    let n = coords.basis.len();
    let m = space.d1 * space.d1 + space.d2 * space.d2;
    let mut a = DMatrix::<T>::zeros(m, n);
    for (k, b) in coords.basis.iter().enumerate() {
        let top = c1.encode(&b.partial_trace_1(space)?)?;
        let bottom = c2.encode(&b.partial_trace_2(space)?)?;
        for (i, v) in top.iter().chain(bottom.iter()).enumerate() {
            a[(i, k)] = *v;
        }
    }
    let gram = a.transpose() * &a;
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(T::one(), |s, &l| s.max(abs(l)));
    let cols: Vec<_> = (0..n)
        .filter(|&k| abs(eig.eigenvalues[k]) <= lit::<T>(1e-10) * scale)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// `φ^{[1]}(λ_i, λ_j)`, the first divided difference of `φ'`.
fn divided_differences<T: Real>(eigs: &[T], reg: &Regularizer<T>) -> DMatrix<T> {
    let n = eigs.len();
    let d: Vec<T> = eigs.iter().map(|&l| reg.phi_prime(l)).collect();
    let second = |t: T| {
        let h = t * lit(1e-4);
        (reg.phi_prime(t + h) - reg.phi_prime(t - h)) / (h + h)
    };
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (eigs[i], eigs[j]);
        if abs(a - b) > lit::<T>(1e-6) * a.max(b) {
            (d[i] - d[j]) / (a - b)
        } else {
            second((a + b) * lit(0.5))
        }
    })
}

/// `X ↦ Q (φ^{[1]} ∘ Q†XQ) Q†`.
pub(super) fn hessian_apply<T: Real>(sd: &SpectralDecomposition<T>, dd: &DMatrix<T>, x: &H<T>) -> H<T> {
    let q = &sd.eigenvectors;
    let mut y = q.adjoint() * x.matrix() * q;
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            y[(i, j)] = y[(i, j)].scale(dd[(i, j)]);
        }
    }
    hermitian_project(&(q * y * q.adjoint()))
}

pub(super) struct Problem<'a, T: Real> {
    pub space: ProductSpace,
    pub cost: &'a H<T>,
    pub epsilon: T,
    pub reg: &'a Regularizer<T>,
}

impl<T: Real> Problem<'_, T> {
    /// `(f(X), f(X) − μ ln det X)`.
    fn barrier_value(&self, x: &H<T>, mu: T) -> Result<Option<(T, T)>> {
        let sd = x.spectral_decompose()?;
        if sd.eigenvalues.first().is_some_and(|&l| !(l > T::zero())) {
            return Ok(None);
        }
        let entropy = sd
            .eigenvalues
            .iter()
            .fold(Extended::Finite(T::zero()), |acc, &l| acc.add(self.reg.phi(l)));
        let Some(e) = entropy.finite() else { return Ok(None) };
        let f = self.cost.hs_inner(x)? + self.epsilon * e;
        let log_det = sd.eigenvalues.iter().fold(T::zero(), |a, &l| a + l.ln());
        Ok(Some((f, f - mu * log_det)))
    }
}

/// Minimizes over the affine set from the strictly positive feasible `x0` by
/// following `μ ↓ 0` for `f − μ ln det`, with damped Newton steps in each stage.
/// The log-det term keeps the steps well scaled near the boundary, where plain
/// Newton on `t ln t` stalls.
pub(super) fn minimize<T: Real>(
    prob: &Problem<'_, T>,
    x0: H<T>,
    tol: T,
    max_iter: usize,
) -> Result<PrimalSolution<T>> {
    let coords = Coordinates::<T>::new(prob.space.dim());
    let z = null_space(prob.space, &coords)?;
    let mut x = x0;
    let (mut f, _) = prob
        .barrier_value(&x, T::zero())?
        .ok_or_else(|| QotError::Numeric("starting plan is not positive definite".into()))?;
    if z.ncols() == 0 {
        return Ok(PrimalSolution {
            plan: x,
            value: f,
            stationarity: T::zero(),
            iterations: 0,
            converged: true,
        });
    }
    let zt = z.transpose();
    let free: Vec<H<T>> = (0..z.ncols())
        .map(|k| coords.decode(&z.column(k).into_owned()))
        .collect();

    let mu_final = lit::<T>(MU_FINAL) * prob.epsilon;
    let mut mu = lit::<T>(MU_START) * prob.epsilon;
    let mut it = 0;
    let mut stationarity;
    loop {
        let last_stage = mu <= mu_final;
        let (_, mut fb) = prob.barrier_value(&x, mu)?.ok_or_else(|| QotError::Numeric("iterate left the cone".into()))?;
        let centered = loop {
            let sd = x.spectral_decompose()?;
            let grad = prob.cost
                + &sd.map(|l| prob.epsilon * prob.reg.phi_prime(l) - mu / l);
            let gz = &zt * coords.encode(&grad)?;
            let mut dd = divided_differences(&sd.eigenvalues, prob.reg) * prob.epsilon;
            let eig = &sd.eigenvalues;
            for j in 0..eig.len() {
                for i in 0..eig.len() {
                    dd[(i, j)] += mu / (eig[i] * eig[j]);
                }
            }
            let mut hz = DMatrix::<T>::zeros(free.len(), free.len());
            for (k, b) in free.iter().enumerate() {
                hz.set_column(k, &(&zt * coords.encode(&hessian_apply(&sd, &dd, b))?));
            }
            let hz = (&hz + hz.transpose()) * lit::<T>(0.5);
            let rhs = -&gz;
            let delta = match hz.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => hz
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| QotError::Numeric("singular reduced Hessian".into()))?,
            };
            let slope = gz.dot(&delta);
            let (delta, slope) = if slope < T::zero() { (delta, slope) } else { (rhs.clone(), -gz.dot(&gz)) };
            stationarity = (-slope).max(T::zero()).sqrt();
            let target = lit::<T>(CENTERED) * mu;
            if -slope <= if last_stage { target.max(tol * tol) } else { target } {
                break true;
            }
            if it >= max_iter {
                break false;
            }
            let dx = coords.decode(&(&z * delta));
            let mut t = T::one();
            let mut accepted = None;
            for _ in 0..60 {
                let trial = x.axpy(t, &dx);
                if let Some((ft, fbt)) = prob.barrier_value(&trial, mu)? {
                    let slack = lit::<T>(1e3) * T::default_epsilon() * (T::one() + abs(fb));
                    if fbt <= fb + lit::<T>(1e-4) * t * slope + slack {
                        accepted = Some((trial, ft, fbt));
                        break;
                    }
                }
                t *= lit(0.5);
            }
            let Some((xn, ft, fbt)) = accepted else { break false };
            x = xn;
            f = ft;
            fb = fbt;
            it += 1;
        };
        if last_stage || !centered {
            return Ok(PrimalSolution {
                converged: last_stage && centered,
                plan: x,
                value: f,
                stationarity,
                iterations: it,
            });
        }
        mu = (mu * lit(MU_SHRINK)).max(mu_final);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        let b = hermitian_basis::<f64>(3);
        assert_eq!(b.len(), 9);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((x.hs_inner(y).unwrap() - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn null_space_has_the_expected_dimension() {
        let space = ProductSpace::new(2, 3).unwrap();
        let coords = Coordinates::<f64>::new(6);
        let z = null_space(space, &coords).unwrap();
        // 36 − 4 − 9 + 1 (the two trace constraints coincide)
        assert_eq!(z.ncols(), 24);
        for k in 0..z.ncols() {
            let x = coords.decode(&z.column(k).into_owned());
            assert!(x.partial_trace_1(space).unwrap().hs_norm() < 1e-12);
            assert!(x.partial_trace_2(space).unwrap().hs_norm() < 1e-12);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let reg = Regularizer::<f64>::von_neumann();
        let mut rng = crate::generate::rng_from_seed(4);
        let x = crate::generate::random_density::<f64, _>(&mut rng, 3).unwrap();
        let dir = crate::generate::random_hermitian::<f64, _>(&mut rng, 3);
        let sd = x.spectral_decompose().unwrap();
        let dd = divided_differences(&sd.eigenvalues, &reg);
        let analytic = hessian_apply(&sd, &dd, &dir);
        let h = 1e-6;
        let g = |k: f64| x.axpy(k, &dir).lift(f64::ln).unwrap();
        let fd = (&g(h) - &g(-h)).scale(0.5 / h);
        assert!(analytic.distance(&fd) < 1e-6 * (1.0 + fd.hs_norm()));
    }
}

