use crate::error::{domain, Error, Result};
use crate::mechanism::BranchingMechanism;
use crate::scalar::{to_f64, Real};

use super::laplace::{tagged_integral, LaplaceArgs};
use super::Tilted;

/// Second-order expansion of the fixed point `c'(t)` when the weights
/// `(x, y, gamma)` are scaled by `t`: `c'(t) = c0 + c1 t + c2 t^2 / 2 + ...`,
/// together with the matching expansion `a0 + a1 t + a2 t^2 / 2` of the
/// argument of `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCoeffs<T> {
    pub h_beta: T,
    pub c0: T,
    pub c1: T,
    pub c2: T,
    pub a0: T,
    pub a1: T,
    pub a2: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoment<T> {
    pub coeffs: MomentCoeffs<T>,
    /// `e^{-h s0} (c1^2 s0 - c2) s0`: the weighted second moment of
    /// `x N + y M + gamma R` given the root fragment size `s0`.
    pub conditional: T,
    /// The same integrated against the law of the root fragment.
    pub unconditional: T,
    /// `G'(a0) N[e^{-h r} r]` by quadrature.
    pub contraction: T,
}

/// The contraction `G'(a0) N[e^{-h r} r]` two ways: by quadrature, and as
/// `(psi_theta'(a0) - psi'(a0)) / psi_theta'(a0)`.
pub fn contraction_routes<T: Real>(t: &Tilted<T>, beta: T, eps: T) -> Result<(T, T)> {
    if !(beta > T::zero() && beta.is_finite()) {
        return Err(domain("beta", beta, "finite and > 0"));
    }
    let a0 = t.base().psi_inverse(beta)?;
    let h = t.psi(a0)?;
    let quad = t.big_g_prime(a0)? * tagged_integral(t, |r| r, h, eps)?;
    let dt = t.psi_prime(a0)?;
    Ok((quad, (dt - t.base().psi_prime(a0)?) / dt))
}

pub fn second_moment<T: Real>(t: &Tilted<T>, args: &LaplaceArgs<T>, s0: T) -> Result<SecondMoment<T>> {
    args.validate()?;
    if !(args.beta > T::zero()) {
        return Err(domain("beta", args.beta, "> 0"));
    }
    if !(s0 >= T::zero() && s0.is_finite()) {
        return Err(domain("s0", s0, "finite and >= 0"));
    }
    let eps = args.eps;
    let a0 = t.base().psi_inverse(args.beta)?;
    let h = t.psi(a0)?;
    let g1 = t.big_g_prime(a0)?;
    let g2 = t.big_g_second(a0)?;
    let n_r = tagged_integral(t, |r| r, h, eps)?;
    let n_r2 = tagged_integral(t, |r| r * r, h, eps)?;
    let n_w = tagged_integral(t, |r| args.weight(r), h, eps)?;
    let contraction = g1 * n_r;
    let denom = T::one() - contraction;
    if !(denom > T::zero()) {
        return Err(Error::OutOfDomain {
            what: "second moment",
            detail: format!("1 - G'(a0) N[e^(-h r) r] = {} is not positive", to_f64(denom)),
        });
    }
    let c1 = g1 * (args.gamma + n_w) / denom;
    let n_sq = tagged_integral(t, |r| (args.weight(r) + c1 * r).powi(2), h, eps)?;
    let c2 = if c1 == T::zero() && n_sq == T::zero() {
        T::zero()
    } else {
        (c1 * c1 * g2 / (g1 * g1) - g1 * n_sq) / denom
    };
    let coeffs = MomentCoeffs {
        h_beta: h,
        c0: h - args.beta,
        c1,
        c2,
        a0,
        a1: c1 / g1,
        a2: c2 * n_r - n_sq,
    };
    Ok(SecondMoment {
        coeffs,
        conditional: (-h * s0).exp() * (c1 * c1 * s0 - c2) * s0,
        unconditional: c1 * c1 * n_r2 - c2 * n_r,
        contraction,
    })
}
