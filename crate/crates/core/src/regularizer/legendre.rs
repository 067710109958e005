use crate::error::{QotError, Result};
use crate::scalar::{abs, lit, to_f64, Extended, Real};

const GRID_POINTS: usize = 4000;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `sup_{0 ≤ t ≤ bound} { x t − φ(t) }` by a dense grid scan refined with
/// golden-section search around the best grid point.
pub fn legendre_numeric<T: Real>(
    phi: impl Fn(T) -> Extended<T>,
    x: T,
    search_bound: T,
) -> Result<T> {
    Ok(numeric_conjugate_point(phi, x, search_bound)?.1)
}

/// Returns `(t*, x t* − φ(t*))` for the maximizer located by
/// [`legendre_numeric`].
pub fn numeric_conjugate_point<T: Real>(
    phi: impl Fn(T) -> Extended<T>,
    x: T,
    search_bound: T,
) -> Result<(T, T)> {
    if !(search_bound > T::zero()) {
        return Err(QotError::InvalidInput("search bound must be positive".into()));
    }
    let objective = |t: T| match phi(t) {
        Extended::Finite(v) if v.is_finite() => Some(x * t - v),
        _ => None,
    };
    let h = search_bound / lit(GRID_POINTS as f64);
    let mut best: Option<(usize, T)> = None;
    for i in 0..=GRID_POINTS {
        let t = h * lit(i as f64);
        if let Some(v) = objective(t) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    let (k, grid_best) = best.ok_or_else(|| {
        QotError::Numeric("φ is infinite on the whole search interval".into())
    })?;
    if k == GRID_POINTS {
        return Err(QotError::BoundTooSmall {
            bound: to_f64(search_bound),
        });
    }
    // concavity of t ↦ x t − φ(t) puts the maximizer in the neighbouring cells
    let mut lo = h * lit(k.saturating_sub(1) as f64);
    let mut hi = h * lit((k + 1) as f64);
    let g = lit::<T>(INV_PHI);
    let eval = |t: T| objective(t).unwrap_or(-T::max_value().unwrap_or(lit(f64::MAX)));
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (eval(a), eval(b));
    let stop = lit::<T>(1e-15) * (T::one() + search_bound);
    for _ in 0..200 {
        if hi - lo <= stop {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = eval(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = eval(a);
        }
    }
    let (t_star, v_star) = if fa >= fb { (a, fa) } else { (b, fb) };
    let grid_t = h * lit(k as f64);
    if grid_best >= v_star && abs(grid_best - v_star) > T::zero() {
        return Ok((grid_t, grid_best));
    }
    Ok((t_star, v_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizer::Regularizer;

    #[test]
    fn known_pairs() {
        let vn = Regularizer::<f64>::von_neumann();
        let v = legendre_numeric(|t| vn.phi(t), 0.0, 10.0).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
        let q = Regularizer::<f64>::quadratic();
        let v = legendre_numeric(|t| q.phi(t), -3.0, 10.0).unwrap();
        assert!(v.abs() < 1e-8);
    }

    #[test]
    fn matches_von_neumann_on_grid() {
        let vn = Regularizer::<f64>::von_neumann();
        for i in 0..=100 {
            let x = -5.0 + 0.1 * i as f64;
            let v = legendre_numeric(|t| vn.phi(t), x, 200.0).unwrap();
            assert!((v - x.exp()).abs() < 1e-6, "x = {x}: {v} vs {}", x.exp());
        }
    }

    #[test]
    fn bound_too_small() {
        let vn = Regularizer::<f64>::von_neumann();
        // maximizer e^3 ≈ 20 lies outside [0, 5]
        assert!(matches!(
            legendre_numeric(|t| vn.phi(t), 3.0, 5.0),
            Err(QotError::BoundTooSmall { .. })
        ));
    }

    #[test]
    fn tsallis_closed_form_agrees_with_numeric_conjugate() {
        for q in [1.5, 2.0, 3.0] {
            let r = Regularizer::<f64>::tsallis(q).unwrap();
            for i in 0..=60 {
                let x = -4.0 + 0.1 * i as f64;
                let v = legendre_numeric(|t| r.phi(t), x, 50.0).unwrap();
                assert!((v - r.psi(x)).abs() < 1e-6, "q={q}, x={x}");
            }
        }
    }
}
