//! Bracketing root finder and monotone fixed-point iteration.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy)]
pub struct Root<T> {
    pub x: T,
    /// `|f(x)|`.
    pub residual: T,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]`, where `f(lo)` and `f(hi)` must not share a sign.
///
/// Stops as soon as `|f| <= tol` or the bracket cannot be halved any further,
/// and returns the best point seen.
pub fn bisect<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, lo: T, hi: T, tol: T, max_iter: usize) -> Result<Root<T>> {
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == T::zero() {
        return Ok(Root { x: lo, residual: T::zero(), iterations: 0 });
    }
    if f_hi == T::zero() {
        return Ok(Root { x: hi, residual: T::zero(), iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoBracket {
            what: "bisection",
            detail: format!(
                "f({}) = {}, f({}) = {}",
                to_f64(lo),
                to_f64(f_lo),
                to_f64(hi),
                to_f64(f_hi)
            ),
        });
    }
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo.abs()) } else { (hi, f_hi.abs()) };
    for it in 1..=max_iter {
        let mid = lo + (hi - lo) * lit(0.5);
        if mid <= lo || mid >= hi {
            return Ok(Root { x: best.0, residual: best.1, iterations: it });
        }
        let fm = f(mid)?;
        if fm.abs() < best.1 {
            best = (mid, fm.abs());
        }
        if fm.abs() <= tol {
            return Ok(Root { x: mid, residual: fm.abs(), iterations: it });
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(Root { x: best.0, residual: best.1, iterations: max_iter })
}

/// Grows `hi` geometrically from `start` until `done(hi)` holds.
pub fn expand_until<T: Real, F: FnMut(T) -> Result<bool>>(mut done: F, start: T, factor: T, max_steps: usize) -> Result<T> {
    let mut hi = start;
    for _ in 0..max_steps {
        if done(hi)? {
            return Ok(hi);
        }
        hi = hi * factor;
    }
    Err(Error::NoBracket {
        what: "bracket expansion",
        detail: format!("no bracket up to {}", to_f64(hi)),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPoint<T> {
    pub value: T,
    pub iterations: usize,
    /// `|value - map(value)|`.
    pub residual: T,
    /// False if some iterate decreased by more than the stopping tolerance.
    pub monotone: bool,
}

/// Iterates `c <- map(c)` from `start` until the increment drops below
/// `rel_tol * (1 + |c|)`, or until a non-increasing step within `100 rel_tol`
/// shows the iterates have hit the rounding floor. Intended for increasing
/// maps with a stable fixed point above `start`, where the iterates increase
/// monotonically.
pub fn monotone_fixed_point<T: Real, F: FnMut(T) -> Result<T>>(
    mut map: F,
    start: T,
    rel_tol: T,
    max_iter: usize,
) -> Result<FixedPoint<T>> {
    let mut c = start;
    let mut monotone = true;
    for it in 1..=max_iter {
        let next = map(c)?;
        let step = next - c;
        let tol = rel_tol * (T::one() + next.abs());
        c = next;
        if step.abs() <= tol || (step <= T::zero() && -step <= lit::<T>(100.0) * tol) {
            let residual = (map(c)? - c).abs();
            return Ok(FixedPoint { value: c, iterations: it, residual, monotone });
        }
        if step < T::zero() {
            monotone = false;
        }
    }
    let residual = (map(c)? - c).abs();
    Err(Error::NoConvergence {
        what: "fixed-point iteration",
        iterations: max_iter,
        residual: to_f64(residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt_two() {
        let r = bisect(|x: f64| Ok(x * x - 2.0), 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((r.x - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(matches!(
            bisect(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 100),
            Err(Error::NoBracket { .. })
        ));
    }

    #[test]
    fn expand_finds_bracket() {
        let hi = expand_until(|x: f64| Ok(x * x > 1e6), 1.0, 2.0, 100).unwrap();
        assert!(hi >= 1e3 && hi < 2.1e3);
    }

    #[test]
    fn fixed_point_of_concave_map() {
        // c = sqrt(c + 1) has fixed point golden ratio, iterates increase from 0.
        let fp = monotone_fixed_point(|c: f64| Ok((c + 1.0).sqrt()), 0.0, 1e-15, 1000).unwrap();
        assert!((fp.value - (1.0 + 5.0_f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!(fp.monotone);
        assert!(fp.residual < 1e-14);
    }
}
