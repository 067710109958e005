//! Gradient ascent with Barzilai–Borwein steps and backtracking for concave
//! functionals of one or more Hermitian blocks.

use std::collections::VecDeque;

use crate::error::{QotError, Result};
use crate::herm::HermitianOperator;
use crate::scalar::{abs, lit, Real};

type Blocks<T> = Vec<HermitianOperator<T>>;

pub(crate) trait Concave<T: Real> {
    /// Value and HS-gradient.
    fn eval(&self, x: &[HermitianOperator<T>]) -> Result<(T, Blocks<T>)>;

    /// Moves `x` along a direction that leaves value and gradient unchanged.
    fn renormalize(&self, _x: &mut Blocks<T>) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AscentOptions<T> {
    /// Stop once the HS norm of the gradient is at most `tol`.
    pub tol: T,
    pub max_iter: usize,
    /// Sufficient-increase constant.
    pub armijo: T,
    pub max_backtracks: usize,
    /// Length of the nonmonotone reference window.
    pub memory: usize,
}

impl<T: Real> AscentOptions<T> {
    pub fn new(tol: T, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            armijo: lit(1e-4),
            max_backtracks: 60,
            memory: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct AscentOutcome<T: Real> {
    pub x: Blocks<T>,
    pub grad_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn blocks_inner<T: Real>(a: &[HermitianOperator<T>], b: &[HermitianOperator<T>]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.hs_inner(y).expect("matching blocks"))
}

pub(crate) fn blocks_norm<T: Real>(a: &[HermitianOperator<T>]) -> T {
    blocks_inner(a, a).sqrt()
}

pub(crate) fn maximize<T: Real>(
    objective: &impl Concave<T>,
    x0: Blocks<T>,
    opts: &AscentOptions<T>,
) -> Result<AscentOutcome<T>> {
    let mut x = x0;
    objective.renormalize(&mut x)?;
    let (mut f, mut g) = objective.eval(&x)?;
    if !f.is_finite() {
        return Err(QotError::Numeric("objective is not finite at the starting point".into()));
    }
    let mut gn = blocks_norm(&g);
    let mut window: VecDeque<T> = VecDeque::from([f]);
    let mut step = T::one() / T::one().max(gn);
    // absorbs roundoff in value comparisons once increases drop below it
    let noise = lit::<T>(1e3) * T::default_epsilon();

    let mut it = 0;
    while it < opts.max_iter {
        if gn <= opts.tol {
            break;
        }
        let reference = window.iter().copied().fold(f, |a, b| a.min(b));
        let gg = gn * gn;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial: Blocks<T> = x.iter().zip(&g).map(|(xi, gi)| xi.axpy(t, gi)).collect();
            if let Ok((ft, gt)) = objective.eval(&trial) {
                let slack = noise * (T::one() + abs(f));
                // the second test certifies an increase by concavity once
                // value differences drown in roundoff
                let armijo = ft >= reference + opts.armijo * t * gg - slack;
                if ft.is_finite() && (armijo || blocks_inner(&gt, &g) >= T::zero()) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= lit(0.5);
        }
        let Some((mut trial, ft, gt)) = accepted else {
            return Err(QotError::Numeric(format!(
                "line search failed after {} halvings (gradient norm {:e})",
                opts.max_backtracks,
                crate::scalar::to_f64(gn)
            )));
        };
        // s = t·g, y = g⁺ − g
        let y: Blocks<T> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = t * blocks_inner(&g, &y);
        let ss = t * t * gg;
        step = if sy < T::zero() {
            (ss / -sy).max(lit(1e-12)).min(lit(1e12))
        } else {
            (t * lit(2.0)).min(lit(1e12))
        };
        objective.renormalize(&mut trial)?;
        x = trial;
        f = ft;
        g = gt;
        gn = blocks_norm(&g);
        window.push_back(f);
        if window.len() > opts.memory {
            window.pop_front();
        }
        it += 1;
    }
    Ok(AscentOutcome {
        converged: gn <= opts.tol,
        x,
        grad_norm: gn,
        iterations: it,
    })
}
