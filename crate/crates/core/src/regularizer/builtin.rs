use std::fmt;

use super::{ConvexPair, RegularizerFlags};
use crate::error::{QotError, Result};
use crate::scalar::{lit, Extended, Real};

/// `φ(t) = t ln t − t`, `ψ(x) = eˣ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct VonNeumann;

impl<T: Real> ConvexPair<T> for VonNeumann {
    fn name(&self) -> String {
        "von_neumann".into()
    }

    fn phi(&self, t: T) -> Extended<T> {
        if t < T::zero() {
            Extended::PosInf
        } else if t == T::zero() {
            // 0·ln 0 = 0
            Extended::Finite(T::zero())
        } else {
            Extended::Finite(t * t.ln() - t)
        }
    }

    fn phi_prime(&self, t: T) -> T {
        t.ln()
    }

    fn psi(&self, x: T) -> T {
        x.exp()
    }

    fn psi_prime(&self, x: T) -> T {
        x.exp()
    }

    fn phi_at_zero(&self) -> T {
        T::zero()
    }

    fn inf_psi(&self) -> T {
        T::zero()
    }

    fn flags(&self) -> RegularizerFlags {
        RegularizerFlags {
            strictly_convex_psi: true,
            c1_psi: true,
        }
    }
}

/// `φ(t) = t²/2`, `ψ(x) = (x₊)²/2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Quadratic;

impl<T: Real> ConvexPair<T> for Quadratic {
    fn name(&self) -> String {
        "quadratic".into()
    }

    fn phi(&self, t: T) -> Extended<T> {
        if t < T::zero() {
            Extended::PosInf
        } else {
            Extended::Finite(t * t * lit(0.5))
        }
    }

    fn phi_prime(&self, t: T) -> T {
        t
    }

    fn psi(&self, x: T) -> T {
        let p = x.max(T::zero());
        p * p * lit(0.5)
    }

    fn psi_prime(&self, x: T) -> T {
        x.max(T::zero())
    }

    fn phi_at_zero(&self) -> T {
        T::zero()
    }

    fn inf_psi(&self) -> T {
        T::zero()
    }

    fn flags(&self) -> RegularizerFlags {
        RegularizerFlags {
            strictly_convex_psi: false,
            c1_psi: true,
        }
    }

    fn kinks(&self) -> Vec<T> {
        vec![T::zero()]
    }
}

/// Tsallis entropy `φ_q(t) = (t^q − t)/(q − 1)`, `q > 1`.
///
/// With `s = 1 + (q−1)x`, the conjugate is `ψ(x) = (s₊/q)^{q/(q−1)}` and
/// `ψ'(x) = (s₊/q)^{1/(q−1)}`; `ψ` vanishes identically for `x ≤ −1/(q−1)`.
#[derive(Clone, Copy, Debug)]
pub struct Tsallis<T> {
    q: T,
}

impl<T: Real> Tsallis<T> {
    pub fn new(q: T) -> Result<Self> {
        if !(q > T::one()) || !q.is_finite() {
            return Err(QotError::InvalidInput(format!(
                "tsallis index must satisfy q > 1, got {q}"
            )));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> T {
        self.q
    }

    fn base(&self, x: T) -> T {
        let s = T::one() + (self.q - T::one()) * x;
        s.max(T::zero()) / self.q
    }
}

impl<T: Real> ConvexPair<T> for Tsallis<T> {
    fn name(&self) -> String {
        format!("tsallis:q={}", self.q)
    }

    fn phi(&self, t: T) -> Extended<T> {
        if t < T::zero() {
            Extended::PosInf
        } else {
            Extended::Finite((t.powf(self.q) - t) / (self.q - T::one()))
        }
    }

    fn phi_prime(&self, t: T) -> T {
        (self.q * t.powf(self.q - T::one()) - T::one()) / (self.q - T::one())
    }

    fn psi(&self, x: T) -> T {
        let b = self.base(x);
        if b == T::zero() {
            return T::zero();
        }
        b.powf(self.q / (self.q - T::one()))
    }

    fn psi_prime(&self, x: T) -> T {
        let b = self.base(x);
        if b == T::zero() {
            return T::zero();
        }
        b.powf(T::one() / (self.q - T::one()))
    }

    fn phi_at_zero(&self) -> T {
        T::zero()
    }

    fn inf_psi(&self) -> T {
        T::zero()
    }

    fn flags(&self) -> RegularizerFlags {
        RegularizerFlags {
            strictly_convex_psi: false,
            c1_psi: true,
        }
    }

    fn kinks(&self) -> Vec<T> {
        vec![-T::one() / (self.q - T::one())]
    }
}

type ScalarFn<T> = Box<dyn Fn(T) -> T + Send + Sync>;

/// A regularizer assembled from closures, mainly for experiments and
/// negative controls. Missing pieces evaluate to NaN.
pub struct FnPair<T: Real> {
    pub name: String,
    pub psi: ScalarFn<T>,
    pub psi_prime: Option<ScalarFn<T>>,
    pub phi: Option<ScalarFn<T>>,
    pub phi_prime: Option<ScalarFn<T>>,
    pub phi_at_zero: T,
    pub inf_psi: T,
    pub strictly_convex: bool,
}

impl<T: Real> fmt::Debug for FnPair<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPair").field("name", &self.name).finish()
    }
}

impl<T: Real> FnPair<T> {
    /// Only `ψ` is known; everything else is left undefined.
    pub fn psi_only(name: &str, psi: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            psi: Box::new(psi),
            psi_prime: None,
            phi: None,
            phi_prime: None,
            phi_at_zero: T::zero(),
            inf_psi: T::zero(),
            strictly_convex: false,
        }
    }
}

impl<T: Real> ConvexPair<T> for FnPair<T> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn phi(&self, t: T) -> Extended<T> {
        if t < T::zero() {
            return Extended::PosInf;
        }
        match &self.phi {
            Some(f) => Extended::Finite(f(t)),
            None => Extended::Finite(lit(f64::NAN)),
        }
    }

    fn phi_prime(&self, t: T) -> T {
        self.phi_prime.as_ref().map_or(lit(f64::NAN), |f| f(t))
    }

    fn psi(&self, x: T) -> T {
        (self.psi)(x)
    }

    fn psi_prime(&self, x: T) -> T {
        self.psi_prime.as_ref().map_or(lit(f64::NAN), |f| f(x))
    }

    fn phi_at_zero(&self) -> T {
        self.phi_at_zero
    }

    fn inf_psi(&self) -> T {
        self.inf_psi
    }

    fn flags(&self) -> RegularizerFlags {
        RegularizerFlags {
            strictly_convex_psi: self.strictly_convex,
            c1_psi: self.psi_prime.is_some(),
        }
    }
}
