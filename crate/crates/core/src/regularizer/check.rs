use super::Regularizer;
use crate::scalar::{abs, lit, Real};

/// Sampled diagnostics of the standing assumptions on `ψ`.
#[derive(Clone, Debug)]
pub struct AssumptionReport<T> {
    /// Midpoints `(a+b)/2` where `ψ((a+b)/2) > (ψ(a)+ψ(b))/2`.
    pub convexity_violations: Vec<T>,
    /// Points where `ψ` decreases.
    pub monotonicity_violations: Vec<T>,
    /// Points where `ψ < inf ψ`.
    pub lower_bound_violations: Vec<T>,
    /// Points where the finite-difference slope disagrees with `ψ'`.
    pub derivative_mismatches: Vec<T>,
    /// `min ψ(t)/t` over the positive points of the top decile of the grid.
    pub superlinearity_proxy: Option<T>,
    /// `ψ(min grid) + φ(0)`, which tends to zero far to the left.
    pub left_tail_gap: T,
}

impl<T: Real> AssumptionReport<T> {
    pub fn is_clean(&self) -> bool {
        self.convexity_violations.is_empty()
            && self.monotonicity_violations.is_empty()
            && self.lower_bound_violations.is_empty()
            && self.derivative_mismatches.is_empty()
    }
}

/// Samples convexity, monotonicity, the lower bound and (when flagged) the
/// derivative of `ψ` on a sorted grid. Report only; never fails.
pub fn check_assumptions<T: Real>(r: &Regularizer<T>, grid: &[T]) -> AssumptionReport<T> {
    let mut report = AssumptionReport {
        convexity_violations: Vec::new(),
        monotonicity_violations: Vec::new(),
        lower_bound_violations: Vec::new(),
        derivative_mismatches: Vec::new(),
        superlinearity_proxy: None,
        left_tail_gap: T::zero(),
    };
    if grid.is_empty() {
        return report;
    }
    let tol = |v: T| lit::<T>(1e-12) * (T::one() + abs(v));
    let values: Vec<T> = grid.iter().map(|&x| r.psi(x)).collect();
    for i in 0..grid.len().saturating_sub(2) {
        let (a, b) = (grid[i], grid[i + 2]);
        let mid = (a + b) * lit(0.5);
        let chord = (values[i] + values[i + 2]) * lit(0.5);
        let at_mid = r.psi(mid);
        if at_mid > chord + tol(chord) {
            report.convexity_violations.push(mid);
        }
    }
    for i in 1..grid.len() {
        if values[i] < values[i - 1] - tol(values[i - 1]) {
            report.monotonicity_violations.push(grid[i]);
        }
    }
    let m = r.inf_psi();
    for (&x, &v) in grid.iter().zip(&values) {
        if v < m - tol(m) {
            report.lower_bound_violations.push(x);
        }
    }
    if r.flags().c1_psi {
        for &x in grid {
            let h = lit::<T>(1e-6) * (T::one() + abs(x));
            let fd = (r.psi(x + h) - r.psi(x - h)) / (h + h);
            let d = r.psi_prime(x);
            if abs(fd - d) > lit::<T>(1e-6) * (T::one() + abs(d)) {
                report.derivative_mismatches.push(x);
            }
        }
    }
    let start = grid.len() - grid.len().div_ceil(10);
    report.superlinearity_proxy = grid[start..]
        .iter()
        .zip(&values[start..])
        .filter(|(x, _)| **x > T::zero())
        .map(|(&x, &v)| v / x)
        .reduce(|a, b| a.min(b));
    report.left_tail_gap = values[0] + r.phi_at_zero();
    report
}
