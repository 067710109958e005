use crate::herm::HermitianOperator;
use crate::scalar::{Extended, Real};

/// Dual potentials `(U, V)` on `H1` and `H2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPotentials<T: Real> {
    pub u: HermitianOperator<T>,
    pub v: HermitianOperator<T>,
}

impl<T: Real> DualPotentials<T> {
    pub fn new(u: HermitianOperator<T>, v: HermitianOperator<T>) -> Self {
        Self { u, v }
    }

    pub fn zeros(d1: usize, d2: usize) -> Self {
        Self::new(HermitianOperator::zeros(d1), HermitianOperator::zeros(d2))
    }

    /// `(U + λ·Id, V − λ·Id)`.
    pub fn translate(&self, lambda: T) -> Self {
        Self::new(self.u.shift(lambda), self.v.shift(-lambda))
    }

    /// `max(‖U‖_∞, ‖V‖_∞)` in operator norm.
    pub fn sup_norm(&self) -> crate::Result<T> {
        Ok(self.u.spectral_norm()?.max(self.v.spectral_norm()?))
    }

    /// `sqrt(‖ΔU‖² + ‖ΔV‖²)`.
    pub fn distance(&self, other: &Self) -> T {
        let du = self.u.distance(&other.u);
        let dv = self.v.distance(&other.v);
        (du * du + dv * dv).sqrt()
    }
}

/// One outer iteration of a dual solver.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub dual_value: T,
    pub residual_1: T,
    pub residual_2: T,
    /// `λ1` shift applied by the recentering step (zero when none).
    pub shift: T,
    pub inner_iterations: usize,
}

/// Outcome of a dual solve together with its recovered plan.
#[derive(Clone, Debug)]
pub struct SolveReport<T: Real> {
    pub solver: &'static str,
    pub potentials: DualPotentials<T>,
    pub plan: HermitianOperator<T>,
    pub dual_value: T,
    /// Primal functional evaluated at the recovered plan.
    pub primal_value: Extended<T>,
    /// `(‖P1 Γ − ρ‖_HS, ‖P2 Γ − σ‖_HS)`.
    pub marginal_residuals: (T, T),
    pub gradient_norm: T,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord<T>>,
}

impl<T: Real> SolveReport<T> {
    /// `primal − dual` when the primal value is finite.
    pub fn gap(&self) -> Option<T> {
        self.primal_value.finite().map(|p| p - self.dual_value)
    }

    /// Checks the history for a non-decreasing dual sequence up to `slack`.
    pub fn dual_values_nondecreasing(&self, slack: T) -> bool {
        self.history
            .windows(2)
            .all(|w| w[1].dual_value >= w[0].dual_value - slack)
    }
}
