use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_half_line, QuadConfig};
use crate::scalar::{lit, one_minus_exp_neg, to_f64, Real};

use super::Tilted;

/// Weights `x` on the fragment count above `eps`, `y` on the mass below,
/// `gamma` on the marked mass `R` and `beta` on the total mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceArgs<T> {
    pub x: T,
    pub y: T,
    pub gamma: T,
    pub beta: T,
    pub eps: T,
}

impl<T: Real> LaplaceArgs<T> {
    pub fn new(x: T, y: T, gamma: T, beta: T, eps: T) -> Result<Self> {
        let a = Self { x, y, gamma, beta, eps };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x >= T::zero() && self.x.is_finite()) {
            return Err(domain("x", self.x, "finite and >= 0"));
        }
        if !(self.y >= T::zero() && self.y.is_finite()) {
            return Err(domain("y", self.y, "finite and >= 0"));
        }
        if !self.gamma.is_finite() {
            return Err(domain("gamma", self.gamma, "finite"));
        }
        if !(self.beta >= T::zero() && self.beta.is_finite()) {
            return Err(domain("beta", self.beta, "finite and >= 0"));
        }
        if !(self.eps > T::zero() && self.eps.is_finite()) {
            return Err(domain("eps", self.eps, "finite and > 0"));
        }
        Ok(())
    }

    /// `x 1_{r > eps} + y r 1_{r <= eps}`.
    pub fn weight(&self, r: T) -> T {
        if r > self.eps {
            self.x
        } else {
            self.y * r
        }
    }
}

/// `int f(r) e^{-(psi(theta) + extra) r} pi_*(dr)`, with breakpoints at
/// `eps` and at the decay scale.
pub fn tagged_integral<T: Real, F: Fn(T) -> T>(t: &Tilted<T>, f: F, extra: T, eps: T) -> Result<T> {
    let k = t.base().excursion_constant();
    let p = -t.base().alpha().recip();
    let rate = t.psi_at_theta() + extra;
    let scale = if rate > T::zero() { rate.recip() } else { T::one() };
    let integrand = |r: T| {
        let v = f(r);
        if v == T::zero() {
            T::zero()
        } else {
            // (v / r) r^{-1/alpha} stays finite as r -> 0 for integrands O(r)
            v / r * k * r.powf(p) * (-rate * r).exp()
        }
    };
    Ok(integrate_half_line(integrand, &[eps, scale], &QuadConfig::default())?.value)
}

/// `T(c) = int (1 - e^{-(w(r) + c r)}) e^{-psi(theta) r} pi_*(dr)`.
pub fn tilted_excursion_functional<T: Real>(t: &Tilted<T>, args: &LaplaceArgs<T>, c: T) -> Result<T> {
    args.validate()?;
    if !(c >= T::zero()) {
        return Err(domain("c", c, ">= 0"));
    }
    tagged_integral(t, |r| one_minus_exp_neg(args.weight(r) + c * r), T::zero(), args.eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointResult<T> {
    pub c_prime: T,
    pub iterations: usize,
    /// `|c' - H(c' + beta)|`.
    pub residual: T,
    /// Every iterate exceeded the previous one, up to quadrature noise.
    pub monotone: bool,
}

fn h_map<T: Real>(t: &Tilted<T>, args: &LaplaceArgs<T>, c: T) -> Result<T> {
    let a = args.gamma + tilted_excursion_functional(t, args, c + args.beta)?;
    if !(a >= T::zero()) {
        return Err(Error::OutOfDomain {
            what: "G argument",
            detail: format!(
                "gamma + T(c + beta) = {} < 0 at c = {}; gamma = {} is below the admissible range",
                to_f64(a),
                to_f64(c),
                to_f64(args.gamma)
            ),
        });
    }
    t.big_g(a)
}

/// Iterates `c <- H(c + beta)` from 0, where `H(c) = G(gamma + T(c))`.
pub fn solve_fixed_point<T: Real>(t: &Tilted<T>, args: &LaplaceArgs<T>) -> Result<FixedPointResult<T>> {
    args.validate()?;
    if !(args.beta > T::zero() || args.gamma > T::zero()) {
        return Err(Error::OutOfDomain {
            what: "fixed point",
            detail: "needs beta > 0 or gamma > 0".into(),
        });
    }
    let step_tol = lit::<T>(1e-14).max(lit::<T>(4.0) * T::epsilon());
    let noise_tol = lit::<T>(1e-12).max(lit::<T>(64.0) * T::epsilon());
    let max_iter = 10_000;
    let mut c = T::zero();
    let mut monotone = true;
    for it in 1..=max_iter {
        let next = h_map(t, args, c)?;
        let step = next - c;
        let scale = T::one() + next.abs();
        if step.abs() <= step_tol * scale || (step <= T::zero() && -step <= noise_tol * scale) {
            let residual = (h_map(t, args, next)? - next).abs();
            return Ok(FixedPointResult { c_prime: next, iterations: it, residual, monotone });
        }
        if step < T::zero() {
            monotone = false;
        }
        c = next;
    }
    Err(Error::NoConvergence {
        what: "Laplace fixed point",
        iterations: max_iter,
        residual: to_f64((h_map(t, args, c)? - c).abs()),
    })
}

/// `exp(-(beta + c') s0)`: the Laplace functional given the root fragment size.
pub fn conditional_laplace<T: Real>(t: &Tilted<T>, args: &LaplaceArgs<T>, s0: T) -> Result<T> {
    if !(s0 >= T::zero() && s0.is_finite()) {
        return Err(domain("s0", s0, "finite and >= 0"));
    }
    let fp = solve_fixed_point(t, args)?;
    Ok((-(args.beta + fp.c_prime) * s0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{BranchingMechanism, StableMechanism, TiltedMechanism};

    fn tilted(alpha: f64, theta: f64) -> Tilted<f64> {
        TiltedMechanism::new(StableMechanism::new(alpha).unwrap(), theta).unwrap()
    }

    fn args(x: f64, y: f64, gamma: f64, beta: f64) -> LaplaceArgs<f64> {
        LaplaceArgs::new(x, y, gamma, beta, 0.01).unwrap()
    }

    #[test]
    fn functional_special_cases() {
        let t = tilted(1.5, 1.0);
        assert_eq!(tilted_excursion_functional(&t, &args(0.0, 0.0, 0.0, 0.0), 0.0).unwrap(), 0.0);
        for c in [0.1, 1.0, 10.0] {
            let v = tilted_excursion_functional(&t, &args(0.0, 0.0, 0.0, 0.0), c).unwrap();
            assert!((v - t.psi_inverse(c).unwrap()).abs() < 1e-10, "c = {c}");
        }
        let big_x = tilted_excursion_functional(&t, &args(50.0, 0.0, 0.0, 0.0), 0.0).unwrap();
        let above = tagged_integral(&t, |r| if r > 0.01 { 1.0 } else { 0.0 }, 0.0, 0.01).unwrap();
        assert!((big_x - above).abs() < 1e-6);
    }

    #[test]
    fn fixed_point_without_weights() {
        let t = tilted(1.5, 1.0);
        let fp = solve_fixed_point(&t, &args(0.0, 0.0, 0.0, 1.0)).unwrap();
        assert!((fp.c_prime - (2f64.powf(1.5) - 2.0)).abs() < 1e-10);
        assert!(fp.monotone);
        assert!(fp.residual <= 1e-12 * (1.0 + fp.c_prime));
        let l = conditional_laplace(&t, &args(0.0, 0.0, 0.0, 1.0), 1.0).unwrap();
        assert!((l - (-(2f64.powf(1.5) - 1.0)).exp()).abs() < 1e-10);
        assert!((l - 0.160_67).abs() < 1e-5);
        assert_eq!(conditional_laplace(&t, &args(0.0, 0.0, 0.0, 1.0), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn fixed_point_preconditions() {
        let t = tilted(1.5, 1.0);
        assert!(solve_fixed_point(&t, &args(0.3, 0.3, 0.0, 0.0)).is_err());
        assert!(LaplaceArgs::new(-1.0, 0.0, 0.0, 1.0, 0.01).is_err());
        assert!(matches!(
            solve_fixed_point(&t, &args(0.0, 0.0, -5.0, 1.0)),
            Err(Error::OutOfDomain { what: "G argument", .. })
        ));
    }

    #[test]
    fn laplace_decreases_in_each_weight() {
        let t = tilted(1.5, 1.0);
        let base = conditional_laplace(&t, &args(0.1, 0.1, 0.1, 1.0), 1.0).unwrap();
        for a in [args(0.2, 0.1, 0.1, 1.0), args(0.1, 0.2, 0.1, 1.0), args(0.1, 0.1, 0.1, 1.1)] {
            assert!(conditional_laplace(&t, &a, 1.0).unwrap() < base);
        }
        assert!(conditional_laplace(&t, &args(0.1, 0.1, 0.1, 1.0), 1.1).unwrap() < base);
    }

    #[test]
    fn single_precision_fixed_point() {
        let t = TiltedMechanism::new(StableMechanism::new(1.5f32).unwrap(), 1.0f32).unwrap();
        let a = LaplaceArgs::new(0.0f32, 0.0, 0.0, 1.0, 0.01).unwrap();
        let fp = solve_fixed_point(&t, &a).unwrap();
        assert!((fp.c_prime - (2f32.powf(1.5) - 2.0)).abs() < 1e-4);
    }
}
