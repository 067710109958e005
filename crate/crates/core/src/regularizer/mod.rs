//! Convex regularizer pairs `(φ, ψ = φ*)`.
//!
//! `φ` acts on the spectrum of a plan (defined on `[0, ∞)`, `+∞` on negative
//! arguments) and `ψ` on the spectrum of `(U ⊕ V − C)/ε`. Solvers only ever
//! evaluate these scalar maps through the spectral lifting.

mod builtin;
mod check;
mod legendre;
mod mollify;

use std::fmt;
use std::sync::Arc;

pub use builtin::{FnPair, Quadratic, Tsallis, VonNeumann};
pub use check::{check_assumptions, AssumptionReport};
pub use legendre::{legendre_numeric, numeric_conjugate_point};
pub use mollify::{bump, bump_derivative, gauss_legendre, Mollified};

use crate::error::{QotError, Result};
use crate::scalar::{Extended, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RegularizerFlags {
    pub strictly_convex_psi: bool,
    pub c1_psi: bool,
}

/// A convex conjugate pair of scalar functions.
pub trait ConvexPair<T: Real>: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// `φ(t)`, with `+∞` for `t < 0`.
    fn phi(&self, t: T) -> Extended<T>;

    /// `φ'(t)` for `t > 0`.
    fn phi_prime(&self, t: T) -> T;

    /// `(φ(t), φ'(t))` for `t > 0`; override when the two share work.
    fn phi_and_prime(&self, t: T) -> (Extended<T>, T) {
        (self.phi(t), self.phi_prime(t))
    }

    fn psi(&self, x: T) -> T;

    /// Only meaningful when [`RegularizerFlags::c1_psi`] is set.
    fn psi_prime(&self, x: T) -> T;

    fn phi_at_zero(&self) -> T;

    /// `m = inf ψ`.
    fn inf_psi(&self) -> T;

    fn flags(&self) -> RegularizerFlags;

    /// Points where `ψ` fails to be smooth. Used to split quadrature panels.
    fn kinks(&self) -> Vec<T> {
        Vec::new()
    }
}

/// Shared handle to a [`ConvexPair`].
#[derive(Clone)]
pub struct Regularizer<T: Real> {
    inner: Arc<dyn ConvexPair<T>>,
}

impl<T: Real> fmt::Debug for Regularizer<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Regularizer({})", self.name())
    }
}

impl<T: Real> fmt::Display for Regularizer<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl<T: Real> Regularizer<T> {
    pub fn new(pair: impl ConvexPair<T> + 'static) -> Self {
        Self {
            inner: Arc::new(pair),
        }
    }

    pub fn von_neumann() -> Self {
        Self::new(VonNeumann)
    }

    pub fn quadratic() -> Self {
        Self::new(Quadratic)
    }

    pub fn tsallis(q: T) -> Result<Self> {
        Ok(Self::new(Tsallis::new(q)?))
    }

    /// `ψ_n = (ψ + n⁻¹ eᵗ) * ρ_n`.
    pub fn mollified(base: Regularizer<T>, n: u32) -> Result<Self> {
        Ok(Self::new(Mollified::with_exp(base, n)?))
    }

    /// Parses `von_neumann`, `quadratic`, `tsallis:q=<float>` or
    /// `mollified:<base>:n=<int>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let unknown = || QotError::InvalidInput(format!("unknown regularizer '{spec}'"));
        match spec {
            "von_neumann" => return Ok(Self::von_neumann()),
            "quadratic" => return Ok(Self::quadratic()),
            _ => {}
        }
        if let Some(rest) = spec.strip_prefix("tsallis:") {
            let q = rest
                .strip_prefix("q=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(unknown)?;
            let q = T::from_f64(q).ok_or_else(unknown)?;
            return Self::tsallis(q);
        }
        if let Some(rest) = spec.strip_prefix("mollified:") {
            let (base, n) = rest.rsplit_once(":n=").ok_or_else(unknown)?;
            let n: u32 = n.parse().map_err(|_| unknown())?;
            if n == 0 {
                return Err(QotError::InvalidInput(
                    "mollification index n must be positive".into(),
                ));
            }
            return Self::mollified(Self::parse(base)?, n);
        }
        Err(unknown())
    }

    pub fn name(&self) -> String {
        self.inner.name()
    }

    pub fn pair(&self) -> &dyn ConvexPair<T> {
        self.inner.as_ref()
    }

    pub fn phi(&self, t: T) -> Extended<T> {
        self.inner.phi(t)
    }

    pub fn phi_prime(&self, t: T) -> T {
        self.inner.phi_prime(t)
    }

    pub fn phi_and_prime(&self, t: T) -> (Extended<T>, T) {
        self.inner.phi_and_prime(t)
    }

    pub fn psi(&self, x: T) -> T {
        self.inner.psi(x)
    }

    pub fn psi_prime(&self, x: T) -> T {
        self.inner.psi_prime(x)
    }

    pub fn phi_at_zero(&self) -> T {
        self.inner.phi_at_zero()
    }

    pub fn inf_psi(&self) -> T {
        self.inner.inf_psi()
    }

    pub fn flags(&self) -> RegularizerFlags {
        self.inner.flags()
    }

    pub fn kinks(&self) -> Vec<T> {
        self.inner.kinks()
    }

    pub fn require_c1(&self) -> Result<()> {
        if self.flags().c1_psi {
            Ok(())
        } else {
            Err(QotError::Capability {
                name: self.name(),
                missing: "ψ is not C¹".into(),
            })
        }
    }

    pub fn require_strictly_convex(&self) -> Result<()> {
        if self.flags().strictly_convex_psi {
            Ok(())
        } else {
            Err(QotError::Capability {
                name: self.name(),
                missing: "ψ is not strictly convex".into(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtin_names() {
        let r = Regularizer::<f64>::parse("tsallis:q=1.5").unwrap();
        assert_eq!(r.name(), "tsallis:q=1.5");
        assert_eq!(Regularizer::<f64>::parse("von_neumann").unwrap().name(), "von_neumann");
        assert_eq!(Regularizer::<f64>::parse("quadratic").unwrap().name(), "quadratic");
        let m = Regularizer::<f64>::parse("mollified:quadratic:n=16").unwrap();
        assert_eq!(m.name(), "mollified:quadratic:n=16");
        let nested = Regularizer::<f64>::parse("mollified:tsallis:q=2:n=4").unwrap();
        assert_eq!(nested.name(), "mollified:tsallis:q=2:n=4");
    }

    #[test]
    fn rejects_unknown_names() {
        for bad in ["entropy", "tsallis:q=abc", "tsallis:q=0.5", "mollified:quadratic", "mollified:quadratic:n=0"] {
            assert!(Regularizer::<f64>::parse(bad).is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn capability_checks() {
        let q = Regularizer::<f64>::quadratic();
        assert!(q.require_c1().is_ok());
        assert!(matches!(q.require_strictly_convex(), Err(QotError::Capability { .. })));
        let vn = Regularizer::<f64>::von_neumann();
        assert!(vn.require_strictly_convex().is_ok());
    }
}
