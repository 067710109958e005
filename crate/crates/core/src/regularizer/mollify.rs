use std::fmt;
use std::sync::Arc;

use super::{ConvexPair, Regularizer, RegularizerFlags};
use crate::error::{QotError, Result};
use crate::scalar::{abs, lit, to_f64, Extended, Real};

/// Node counts tried in turn until two successive rules agree.
const RULE_SIZES: [usize; 4] = [64, 128, 256, 512];
const QUAD_TOL: f64 = 1e-9;

/// Unnormalized bump `exp(−1/(1−w²))` on `(−1, 1)`.
pub fn bump(w: f64) -> f64 {
    if w.abs() >= 1.0 {
        return 0.0;
    }
    (-1.0 / (1.0 - w * w)).exp()
}

pub fn bump_derivative(w: f64) -> f64 {
    if w.abs() >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - w * w;
    bump(w) * (-2.0 * w / (s * s))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

type Smoother<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `ψ_n = (ψ + n⁻¹ ψ̄) * ρ_n` with the compactly supported bump kernel
/// `ρ_n(z) = n ρ(n z)` on `[−1/n, 1/n]`.
///
/// Quadrature panels are split at the kinks of the base `ψ`, so each panel
/// integrates a smooth function. `φ_n = ψ_n*` is evaluated by inverting the
/// strictly increasing `ψ_n'`.
#[derive(Clone)]
pub struct Mollified<T: Real> {
    base: Regularizer<T>,
    smoother: Smoother<T>,
    smoother_name: String,
    n: u32,
    rules: Vec<Vec<(T, T)>>,
    norm: T,
    phi_zero: T,
}

impl<T: Real> fmt::Debug for Mollified<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mollified")
            .field("base", &self.base.name())
            .field("smoother", &self.smoother_name)
            .field("n", &self.n)
            .finish()
    }
}

impl<T: Real> Mollified<T> {
    /// Mollifies with the default smoother `ψ̄(t) = eᵗ`.
    pub fn with_exp(base: Regularizer<T>, n: u32) -> Result<Self> {
        Self::new(base, n, "exp", |t: T| t.exp())
    }

    /// `psi_bar` must be smooth, nonnegative, increasing and strictly convex.
    pub fn new(
        base: Regularizer<T>,
        n: u32,
        smoother_name: &str,
        psi_bar: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 {
            return Err(QotError::InvalidInput("mollification index must be positive".into()));
        }
        let rules: Vec<Vec<(T, T)>> = RULE_SIZES
            .iter()
            .map(|&k| {
                gauss_legendre(k)
                    .into_iter()
                    .map(|(x, w)| (lit(x), lit(w)))
                    .collect()
            })
            .collect();
        let norm = gauss_legendre(512)
            .into_iter()
            .map(|(x, w)| w * bump(x))
            .sum::<f64>();
        let mut m = Self {
            base,
            smoother: Arc::new(psi_bar),
            smoother_name: smoother_name.to_string(),
            n,
            rules,
            norm: lit(norm),
            phi_zero: T::zero(),
        };
        // every probe must reach the quadrature tolerance
        for i in -20..=20 {
            let x = lit::<T>(0.5 * i as f64);
            for derivative in [false, true] {
                let (v, ok) = m.convolve(x, derivative);
                if !ok || !v.is_finite() {
                    return Err(QotError::NonConvergence {
                        what: format!("mollifier quadrature at x = {}", to_f64(x)),
                        iterations: *RULE_SIZES.last().expect("non-empty"),
                        residual: f64::NAN,
                    });
                }
            }
        }
        m.phi_zero = -m.convolve(lit(-1e3), false).0;
        Ok(m)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn base(&self) -> &Regularizer<T> {
        &self.base
    }

    /// `ψ + n⁻¹ ψ̄`.
    fn perturbed(&self, y: T) -> T {
        self.base.psi(y) + (self.smoother)(y) / lit::<T>(self.n as f64)
    }

    /// `∫ g(x − w/n) k(w) dw / ∫ρ` over `[−1, 1]` with `k = ρ` (value) or
    /// `k = n ρ'` (derivative). Returns the estimate and whether successive
    /// rules agreed.
    fn convolve(&self, x: T, derivative: bool) -> (T, bool) {
        let n = lit::<T>(self.n as f64);
        let mut cuts = vec![-T::one()];
        let mut interior: Vec<T> = self
            .base
            .kinks()
            .into_iter()
            .map(|k| n * (x - k))
            .filter(|w| *w > -T::one() && *w < T::one())
            .collect();
        interior.sort_by(|a, b| a.partial_cmp(b).expect("finite kink"));
        cuts.extend(interior);
        cuts.push(T::one());

        let mut total = T::zero();
        let mut all_ok = true;
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let half = (b - a) * lit(0.5);
            let mid = (a + b) * lit(0.5);
            let integrate = |rule: &[(T, T)]| {
                rule.iter().fold(T::zero(), |acc, &(node, weight)| {
                    let w = mid + half * node;
                    let wf = to_f64(w);
                    let k = if derivative {
                        n * lit::<T>(bump_derivative(wf))
                    } else {
                        lit::<T>(bump(wf))
                    };
                    acc + weight * self.perturbed(x - w / n) * k
                }) * half
            };
            let mut prev = integrate(&self.rules[0]);
            let mut ok = false;
            for rule in &self.rules[1..] {
                let cur = integrate(rule);
                let done = abs(cur - prev) < lit::<T>(QUAD_TOL) * T::one().max(abs(cur));
                prev = cur;
                if done {
                    ok = true;
                    break;
                }
            }
            all_ok &= ok;
            total += prev;
        }
        (total / self.norm, all_ok)
    }

    /// Solves `ψ_n'(x) = t` for `t > 0` by bracketing and Illinois-type
    /// regula falsi.
    fn inverse_derivative(&self, t: T) -> T {
        let f = |x: T| self.convolve(x, true).0 - t;
        let mut width = T::one();
        let (mut lo, mut hi) = (-T::one(), T::one());
        let mut flo = f(lo);
        let mut fhi = f(hi);
        let limit = lit::<T>(1e4);
        while flo > T::zero() && lo > -limit {
            hi = lo;
            fhi = flo;
            width *= lit(2.0);
            lo -= width;
            flo = f(lo);
        }
        width = T::one();
        while fhi < T::zero() && hi < limit {
            lo = hi;
            flo = fhi;
            width *= lit(2.0);
            hi += width;
            fhi = f(hi);
        }
        if flo > T::zero() {
            return lo;
        }
        if fhi < T::zero() {
            return hi;
        }
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo <= lit::<T>(4.0 * f64::EPSILON) * (T::one() + abs(lo) + abs(hi)) {
                break;
            }
            let mut x = (lo * fhi - hi * flo) / (fhi - flo);
            if !(x > lo && x < hi) {
                x = (lo + hi) * lit(0.5);
            }
            let fx = f(x);
            if fx == T::zero() {
                return x;
            }
            if fx < T::zero() {
                lo = x;
                flo = fx;
                if side == -1 {
                    fhi *= lit(0.5);
                }
                side = -1;
            } else {
                hi = x;
                fhi = fx;
                if side == 1 {
                    flo *= lit(0.5);
                }
                side = 1;
            }
        }
        (lo + hi) * lit(0.5)
    }
}

impl<T: Real> ConvexPair<T> for Mollified<T> {
    fn name(&self) -> String {
        if self.smoother_name == "exp" {
            format!("mollified:{}:n={}", self.base.name(), self.n)
        } else {
            format!("mollified:{}:n={}:bar={}", self.base.name(), self.n, self.smoother_name)
        }
    }

    fn phi(&self, t: T) -> Extended<T> {
        self.phi_and_prime(t).0
    }

    fn phi_prime(&self, t: T) -> T {
        self.phi_and_prime(t).1
    }

    fn phi_and_prime(&self, t: T) -> (Extended<T>, T) {
        if t < T::zero() {
            return (Extended::PosInf, lit(f64::NAN));
        }
        if t == T::zero() {
            return (Extended::Finite(self.phi_zero), lit(f64::NEG_INFINITY));
        }
        let x = self.inverse_derivative(t);
        (Extended::Finite(t * x - self.psi(x)), x)
    }

    fn psi(&self, x: T) -> T {
        self.convolve(x, false).0
    }

    fn psi_prime(&self, x: T) -> T {
        self.convolve(x, true).0
    }

    fn phi_at_zero(&self) -> T {
        self.phi_zero
    }

    fn inf_psi(&self) -> T {
        -self.phi_zero
    }

    fn flags(&self) -> RegularizerFlags {
        RegularizerFlags {
            strictly_convex_psi: true,
            c1_psi: true,
        }
    }
}
