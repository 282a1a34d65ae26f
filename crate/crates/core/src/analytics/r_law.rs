use crate::error::{domain, Error, Result};
use crate::mechanism::{BranchingMechanism, TiltedMechanism};
use crate::roots::{bisect, monotone_fixed_point};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RLawRoot<T> {
    pub v: T,
    /// `|beta + psi(gamma + theta + v) - psi(v + theta) - psi(v + gamma)|`.
    pub residual: T,
    pub iterations: usize,
}

fn check<T: Real>(beta: T, gamma: T) -> Result<()> {
    if !(beta >= T::zero() && beta.is_finite()) {
        return Err(domain("beta", beta, "finite and >= 0"));
    }
    if !gamma.is_finite() {
        return Err(domain("gamma", gamma, "finite"));
    }
    Ok(())
}

/// Nonnegative root `v` of `beta + psi(gamma + theta + v) = psi(v + theta) + psi(v + gamma)`,
/// searched on `v >= max(0, -gamma)` so that every argument of `psi` is nonnegative.
pub fn solve_r_law_root<T: Real, M: BranchingMechanism<T>>(t: &TiltedMechanism<M, T>, beta: T, gamma: T) -> Result<RLawRoot<T>> {
    check(beta, gamma)?;
    let psi = t.base();
    let theta = t.theta();
    let f = |v: T| -> Result<T> {
        Ok(beta + psi.psi(gamma + theta + v)? - psi.psi(v + theta)? - psi.psi(v + gamma)?)
    };
    let lo = T::zero().max(-gamma);
    let f_lo = f(lo)?;
    if f_lo == T::zero() {
        return Ok(RLawRoot { v: lo, residual: T::zero(), iterations: 0 });
    }
    if f_lo < T::zero() {
        return Err(Error::NoBracket {
            what: "R-law root",
            detail: format!(
                "f({}) = {} < 0 at the edge of the domain v >= max(0, -gamma); no nonnegative root for beta = {}, gamma = {}",
                to_f64(lo),
                to_f64(f_lo),
                to_f64(beta),
                to_f64(gamma)
            ),
        });
    }
    let mut width = T::one();
    let mut hi = lo + width;
    let mut steps = 0;
    while f(hi)? > T::zero() {
        width = width * lit(2.0);
        hi = lo + width;
        steps += 1;
        if steps > 200 {
            return Err(Error::NoBracket { what: "R-law root", detail: "bracket expansion diverged".into() });
        }
    }
    let tol = lit::<T>(1e-12) * (T::one() + beta);
    let root = bisect(f, lo, hi, tol * lit(0.01), 400)?;
    if root.residual > tol {
        return Err(Error::NoConvergence { what: "R-law root", iterations: root.iterations, residual: to_f64(root.residual) });
    }
    Ok(RLawRoot { v: root.x, residual: root.residual, iterations: root.iterations + steps })
}

/// The same root through `c = G(gamma + psi_theta^{-1}(beta + c))`, `v = psi_theta^{-1}(beta + c)`.
/// Returns `(v, c)`.
pub fn r_law_fixed_point_route<T: Real, M: BranchingMechanism<T>>(t: &TiltedMechanism<M, T>, beta: T, gamma: T) -> Result<(T, T)> {
    check(beta, gamma)?;
    let map = |c: T| -> Result<T> {
        let a = gamma + t.psi_inverse(beta + c)?;
        if !(a >= T::zero()) {
            return Err(Error::OutOfDomain {
                what: "G argument",
                detail: format!("gamma + psi_theta^-1(beta + c) = {} < 0 at c = {}", to_f64(a), to_f64(c)),
            });
        }
        t.big_g(a)
    };
    let fp = monotone_fixed_point(map, T::zero(), lit::<T>(1e-14).max(lit::<T>(4.0) * T::epsilon()), 100_000)?;
    Ok((t.psi_inverse(beta + fp.value)?, fp.value))
}
