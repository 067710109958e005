//! Seeded random problem data.
//!
//! Costs are Hermitian matrices with i.i.d. standard normal entries,
//! symmetrized and scaled to unit operator norm. Marginals are `G·G†`
//! normalized to unit trace, then mixed with the maximally mixed state
//! until the smallest eigenvalue reaches [`MIN_MARGINAL_EIGENVALUE`].

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QotError, Result};
use crate::herm::{hermitian_project, HermitianOperator, ProductSpace};
use crate::scalar::{lit, Real};

pub const MIN_MARGINAL_EIGENVALUE: f64 = 0.05;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<Complex<T>> {
    DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(lit(re), lit(im))
    })
}

pub fn random_hermitian<T: Real, R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermitianOperator<T> {
    hermitian_project(&gaussian_matrix::<T, R>(rng, d))
}

/// Random Hermitian cost on `H1 ⊗ H2` with operator norm one.
pub fn random_cost<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    space: ProductSpace,
) -> Result<HermitianOperator<T>> {
    let c = random_hermitian::<T, R>(rng, space.dim());
    let norm = c.spectral_norm()?;
    if norm == T::zero() {
        return Ok(c);
    }
    Ok(c.scale(T::one() / norm))
}

/// Mixes a unit-trace PSD operator with `Id/d` so that `λ1 >= floor`.
pub fn floor_spectrum<T: Real>(rho: &HermitianOperator<T>, floor: T) -> Result<HermitianOperator<T>> {
    let d = rho.dim();
    let uniform = T::one() / lit::<T>(d as f64);
    let floor = floor.min(uniform * lit(0.5));
    let l1 = rho.smallest_eigenvalue()?;
    if l1 >= floor {
        return Ok(rho.clone());
    }
    let t = (floor - l1) / (uniform - l1);
    Ok(rho.scale(T::one() - t).shift(t * uniform))
}

pub fn random_density<T: Real, R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<HermitianOperator<T>> {
    let g = gaussian_matrix::<T, R>(rng, d);
    let gg = hermitian_project(&(&g * g.adjoint()));
    let rho = gg.scale(T::one() / gg.trace());
    floor_spectrum(&rho, lit(MIN_MARGINAL_EIGENVALUE))
}

pub fn uniform_density<T: Real>(d: usize) -> HermitianOperator<T> {
    HermitianOperator::scaled_identity(d, T::one() / lit::<T>(d as f64))
}

/// `Σ_i (R_i ⊗ Id − Id ⊗ R_i)²` for truncated position and momentum
/// quadratures on `C^d`, scaled to unit operator norm. Requires `d1 == d2`.
pub fn quadrature_cost<T: Real>(space: ProductSpace) -> Result<HermitianOperator<T>> {
    if space.d1 != space.d2 {
        return Err(QotError::InvalidInput(format!(
            "quadrature cost needs equal factor dimensions, got ({}, {})",
            space.d1, space.d2
        )));
    }
    let d = space.d1;
    let zero = Complex::new(T::zero(), T::zero());
    // truncated annihilation operator a|k> = sqrt(k)|k-1>
    let a = DMatrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            Complex::new(lit::<T>((j as f64).sqrt()), T::zero())
        } else {
            zero
        }
    });
    let ad = a.adjoint();
    let s = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let position = hermitian_project(&(&a + &ad).map(|z| z.scale(s)));
    let momentum = hermitian_project(&(&a - &ad).map(|z| (z * Complex::new(T::zero(), -T::one())).scale(s)));
    let id = HermitianOperator::<T>::identity(d);
    let mut cost = HermitianOperator::<T>::zeros(space.dim());
    for r in [position, momentum] {
        let diff = r.kron(&id) - id.kron(&r);
        let sq = hermitian_project(&(diff.matrix() * diff.matrix()));
        cost += &sq;
    }
    let norm = cost.spectral_norm()?;
    if norm > T::zero() {
        cost = cost.scale(T::one() / norm);
    }
    Ok(cost)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    RandomHermitian,
    #[serde(rename = "quadrature-like", alias = "quadrature_like")]
    QuadratureLike,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalKind {
    RandomDensity,
    Uniform,
}

/// Recipe for a reproducible `(C, ρ, σ)` triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub dims: [usize; 2],
    pub seed: u64,
    #[serde(default = "default_cost")]
    pub cost: CostKind,
    #[serde(default = "default_marginals")]
    pub marginals: MarginalKind,
}

fn default_cost() -> CostKind {
    CostKind::RandomHermitian
}

fn default_marginals() -> MarginalKind {
    MarginalKind::RandomDensity
}

/// Cost and marginals of a generated instance.
#[derive(Clone, Debug)]
pub struct ProblemData<T: Real> {
    pub space: ProductSpace,
    pub cost: HermitianOperator<T>,
    pub rho: HermitianOperator<T>,
    pub sigma: HermitianOperator<T>,
}

impl GeneratorSpec {
    pub fn new(d1: usize, d2: usize, seed: u64) -> Self {
        Self {
            dims: [d1, d2],
            seed,
            cost: CostKind::RandomHermitian,
            marginals: MarginalKind::RandomDensity,
        }
    }

    pub fn generate<T: Real>(&self) -> Result<ProblemData<T>> {
        let space = ProductSpace::new(self.dims[0], self.dims[1])?;
        let mut rng = rng_from_seed(self.seed);
        let (rho, sigma) = match self.marginals {
            MarginalKind::RandomDensity => (
                random_density(&mut rng, space.d1)?,
                random_density(&mut rng, space.d2)?,
            ),
            MarginalKind::Uniform => (uniform_density(space.d1), uniform_density(space.d2)),
        };
        let cost = match self.cost {
            CostKind::RandomHermitian => random_cost(&mut rng, space)?,
            CostKind::QuadratureLike => quadrature_cost(space)?,
        };
        Ok(ProblemData {
            space,
            cost,
            rho,
            sigma,
        })
    }
}
