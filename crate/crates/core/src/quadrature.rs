//! Double-exponential (tanh-sinh) quadrature with level refinement and
//! interval bisection as a fallback.
//!
//! The integrands in this crate are smooth inside each piece but carry
//! algebraic singularities at `r = 0` (powers of the Levy densities) and slow
//! power-law decay at infinity. The tanh-sinh rule converges exponentially in
//! both situations, provided discontinuities (indicators) are placed on
//! breakpoints. Semi-infinite pieces are mapped to `[0, 1)` with
//! `r = a + u / (1 - u)`.
//!
//! Nodes hand the integrand the exact distance to each end of the *original*
//! interval ([`Node::lo_gap`], [`Node::hi_gap`]) so that integrands with a
//! singular endpoint can be evaluated without cancellation.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    /// Finest level: step `2^-max_level` in the transformed variable.
    pub max_level: u32,
    /// How many times an interval may be halved when a level sweep fails.
    pub max_depth: u32,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        let eps_floor = lit::<T>(64.0) * T::epsilon();
        Self {
            abs_tol: lit(1e-16),
            rel_tol: lit::<T>(1e-12).max(eps_floor),
            max_level: 8,
            max_depth: 12,
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn with_tolerances(abs_tol: T, rel_tol: T) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

/// Result of a quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Integral<T> {
    pub value: T,
    /// Difference between the last two refinement levels, summed over pieces.
    pub error: T,
    pub evaluations: usize,
}

impl<T: Real> Integral<T> {
    fn zero() -> Self {
        Self {
            value: T::zero(),
            error: T::zero(),
            evaluations: 0,
        }
    }

    fn add(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            error: self.error + other.error,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

/// Quadrature abscissa together with its distances to the interval ends.
#[derive(Debug, Clone, Copy)]
pub struct Node<T> {
    pub x: T,
    pub lo_gap: T,
    pub hi_gap: T,
}

struct Abscissa<T> {
    weight: T,
    gap: T,
}

/// Largest `s = (pi/2) sinh t` used; `exp(-2 s)` bounds the smallest endpoint gap.
fn max_exponent<T: Real>() -> T {
    let capped = lit::<T>(0.4) * T::max_value().ln();
    capped.min(lit(150.0))
}

fn abscissa<T: Real>(t: T) -> Abscissa<T> {
    let half_pi = T::FRAC_PI_2();
    let s = half_pi * t.sinh();
    let e = (lit::<T>(-2.0) * s).exp();
    let one_e = T::one() + e;
    Abscissa {
        weight: half_pi * t.cosh() * lit::<T>(4.0) * e / (one_e * one_e),
        gap: lit::<T>(2.0) * e / one_e,
    }
}

struct Piece<T> {
    lo: T,
    hi: T,
    lo_offset: T,
    hi_offset: T,
}

fn evaluate<T: Real, F: FnMut(Node<T>) -> T>(f: &mut F, node: Node<T>) -> Result<T> {
    let v = f(node);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { x: to_f64(node.x) })
    }
}

/// One tanh-sinh sweep over all levels. Returns `None` if the finest level is
/// reached without meeting tolerance.
fn sweep<T: Real, F: FnMut(Node<T>) -> T>(
    f: &mut F,
    piece: &Piece<T>,
    abs_tol: T,
    rel_tol: T,
    max_level: u32,
) -> Result<(Option<Integral<T>>, T, usize)> {
    let hw = (piece.hi - piece.lo) * lit(0.5);
    let width = piece.hi - piece.lo;
    let t_max = (max_exponent::<T>() / T::FRAC_PI_2()).asinh();

    let mut evals = 0usize;
    let mut pair = |f: &mut F, t: T| -> Result<T> {
        let a = abscissa(t);
        let g = hw * a.gap;
        if g <= T::zero() || a.weight <= T::zero() {
            return Ok(T::zero());
        }
        let right = Node {
            x: piece.hi - g,
            lo_gap: piece.lo_offset + (width - g),
            hi_gap: piece.hi_offset + g,
        };
        let left = Node {
            x: piece.lo + g,
            lo_gap: piece.lo_offset + g,
            hi_gap: piece.hi_offset + (width - g),
        };
        evals += 2;
        Ok(a.weight * (evaluate(f, right)? + evaluate(f, left)?))
    };

    let mid = Node {
        x: piece.lo + hw,
        lo_gap: piece.lo_offset + hw,
        hi_gap: piece.hi_offset + hw,
    };
    let mut sum = T::FRAC_PI_2() * evaluate(f, mid)?;
    let mut k = T::one();
    while k <= t_max {
        sum = sum + pair(f, k)?;
        k = k + T::one();
    }
    let mut estimate = hw * sum;

    for level in 1..=max_level {
        let h = lit::<T>(0.5).powi(level as i32);
        let mut j = 1u64;
        loop {
            let t = h * lit(j as f64);
            if t > t_max {
                break;
            }
            sum = sum + pair(f, t)?;
            j += 2;
        }
        let refined = hw * h * sum;
        let diff = (refined - estimate).abs();
        estimate = refined;
        if level >= 3 && diff <= abs_tol.max(rel_tol * refined.abs()) {
            return Ok((
                Some(Integral {
                    value: refined,
                    error: diff,
                    evaluations: evals + 1,
                }),
                estimate,
                evals + 1,
            ));
        }
    }
    Ok((None, estimate, evals + 1))
}

fn adapt<T: Real, F: FnMut(Node<T>) -> T>(
    f: &mut F,
    piece: Piece<T>,
    abs_tol: T,
    rel_tol: T,
    cfg: &QuadConfig<T>,
    depth: u32,
) -> Result<Integral<T>> {
    let (done, estimate, evals) = sweep(f, &piece, abs_tol, rel_tol, cfg.max_level)?;
    if let Some(result) = done {
        return Ok(result);
    }
    if depth >= cfg.max_depth {
        return Err(Error::Quadrature {
            lo: to_f64(piece.lo),
            hi: to_f64(piece.hi),
            estimate: to_f64(estimate),
            error: f64::NAN,
        });
    }
    let half = (piece.hi - piece.lo) * lit(0.5);
    let mid = piece.lo + half;
    let left = Piece {
        lo: piece.lo,
        hi: mid,
        lo_offset: piece.lo_offset,
        hi_offset: piece.hi_offset + half,
    };
    let right = Piece {
        lo: mid,
        hi: piece.hi,
        lo_offset: piece.lo_offset + half,
        hi_offset: piece.hi_offset,
    };
    let sub_abs = abs_tol * lit(0.5);
    let a = adapt(f, left, sub_abs, rel_tol, cfg, depth + 1)?;
    let b = adapt(f, right, sub_abs, rel_tol, cfg, depth + 1)?;
    let mut total = a.add(b);
    total.evaluations += evals;
    Ok(total)
}

/// Integrates `f` over `[a, b]`, passing each abscissa with its endpoint gaps.
pub fn integrate_nodes<T: Real, F: FnMut(Node<T>) -> T>(
    mut f: F,
    a: T,
    b: T,
    cfg: &QuadConfig<T>,
) -> Result<Integral<T>> {
    if a == b {
        return Ok(Integral::zero());
    }
    if a > b {
        let piece = Piece {
            lo: b,
            hi: a,
            lo_offset: T::zero(),
            hi_offset: T::zero(),
        };
        let mut swapped = |n: Node<T>| {
            f(Node {
                x: n.x,
                lo_gap: n.hi_gap,
                hi_gap: n.lo_gap,
            })
        };
        let r = adapt(&mut swapped, piece, cfg.abs_tol, cfg.rel_tol, cfg, 0)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }
    let piece = Piece {
        lo: a,
        hi: b,
        lo_offset: T::zero(),
        hi_offset: T::zero(),
    };
    adapt(&mut f, piece, cfg.abs_tol, cfg.rel_tol, cfg, 0)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, cfg: &QuadConfig<T>) -> Result<Integral<T>> {
    integrate_nodes(|n| f(n.x), a, b, cfg)
}

/// Integrates `f` over `[a, inf)` through `r = a + u / (1 - u)`.
pub fn integrate_tail<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, cfg: &QuadConfig<T>) -> Result<Integral<T>> {
    integrate_nodes(
        |n: Node<T>| {
            let one_minus_u = n.hi_gap;
            let r = a + n.x / one_minus_u;
            let v = f(r);
            if v == T::zero() {
                T::zero()
            } else {
                v / (one_minus_u * one_minus_u)
            }
        },
        T::zero(),
        T::one(),
        cfg,
    )
}

/// Integrates `f` over `(0, inf)`, split at the given positive breakpoints.
///
/// Breakpoints are sorted and deduplicated; the last one starts the tail.
pub fn integrate_half_line<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    breaks: &[T],
    cfg: &QuadConfig<T>,
) -> Result<Integral<T>> {
    let mut points: Vec<T> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > T::zero())
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    points.dedup();
    if points.is_empty() {
        points.push(T::one());
    }
    let mut total = integrate(&mut f, T::zero(), points[0], cfg)?;
    for w in points.windows(2) {
        total = total.add(integrate(&mut f, w[0], w[1], cfg)?);
    }
    let last = *points.last().expect("non-empty");
    Ok(total.add(integrate_tail(&mut f, last, cfg)?))
}
