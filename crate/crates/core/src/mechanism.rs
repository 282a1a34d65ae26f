//! Branching mechanisms: the stable mechanism `psi(l) = l^alpha` in closed
//! form, a general mechanism given by drift and Levy density (quadrature
//! backed), and the tilt `psi_theta(l) = psi(l + theta) - psi(theta)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, integrate_tail, Integral, QuadConfig};
use crate::roots::{bisect, expand_until};
use crate::scalar::{exp_neg_remainder, lit, one_minus_exp_neg, to_f64, Real};
use crate::special::gamma;

/// Laplace exponent of a spectrally positive Levy process without Brownian part.
pub trait BranchingMechanism<T: Real>: Send + Sync {
    fn psi(&self, lambda: T) -> Result<T>;
    fn psi_prime(&self, lambda: T) -> Result<T>;
    fn psi_second(&self, lambda: T) -> Result<T>;
    fn psi_inverse(&self, v: T) -> Result<T>;
}

impl<T: Real, M: BranchingMechanism<T> + ?Sized> BranchingMechanism<T> for &M {
    fn psi(&self, lambda: T) -> Result<T> {
        (**self).psi(lambda)
    }
    fn psi_prime(&self, lambda: T) -> Result<T> {
        (**self).psi_prime(lambda)
    }
    fn psi_second(&self, lambda: T) -> Result<T> {
        (**self).psi_second(lambda)
    }
    fn psi_inverse(&self, v: T) -> Result<T> {
        (**self).psi_inverse(v)
    }
}

fn nonneg<T: Real>(name: &'static str, x: T) -> Result<T> {
    if x >= T::zero() {
        Ok(x)
    } else {
        Err(domain(name, x, ">= 0"))
    }
}

fn positive<T: Real>(name: &'static str, x: T) -> Result<T> {
    if x > T::zero() && x.is_finite() {
        Ok(x)
    } else {
        Err(domain(name, x, "> 0"))
    }
}

/// `psi(l) = l^alpha` with `1 < alpha < 2`.
///
/// Its Levy measure is `pi(dl) = alpha (alpha - 1) / Gamma(2 - alpha) l^{-1-alpha} dl`
/// and the Levy measure of the subordinator with exponent `psi^{-1}` (the law
/// of the excursion length) is `pi_*(dr) = r^{-1-1/alpha} dr / (alpha Gamma(1 - 1/alpha))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableMechanism<T> {
    alpha: T,
}

impl<T: Real> StableMechanism<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha > T::one() && alpha < lit(2.0) {
            Ok(Self { alpha })
        } else {
            Err(domain("alpha", alpha, "1 < alpha < 2"))
        }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Constant in front of `l^{-1-alpha}` in the Levy density.
    pub fn levy_constant(&self) -> T {
        let a = self.alpha;
        a * (a - T::one()) / gamma(lit::<T>(2.0) - a)
    }

    /// Constant in front of `r^{-1-1/alpha}` in the excursion-length density.
    pub fn excursion_constant(&self) -> T {
        let a = self.alpha;
        T::one() / (a * gamma(T::one() - a.recip()))
    }

    pub fn pi_density(&self, l: T) -> T {
        self.levy_constant() * l.powf(-T::one() - self.alpha)
    }

    pub fn pi_star_density(&self, r: T) -> T {
        self.excursion_constant() * r.powf(-T::one() - self.alpha.recip())
    }

    /// `pi_*((eps, inf)) = eps^{-1/alpha} / Gamma(1 - 1/alpha)`.
    pub fn pi_star_tail(&self, eps: T) -> Result<T> {
        let eps = positive("eps", eps)?;
        let inv = self.alpha.recip();
        Ok(eps.powf(-inv) / gamma(T::one() - inv))
    }

    /// `int_(0, eps] r pi_*(dr) = eps^{1-1/alpha} / ((alpha - 1) Gamma(1 - 1/alpha))`.
    pub fn phi_small_mass(&self, eps: T) -> Result<T> {
        let eps = positive("eps", eps)?;
        let inv = self.alpha.recip();
        Ok(eps.powf(T::one() - inv) / ((self.alpha - T::one()) * gamma(T::one() - inv)))
    }
}

impl<T: Real> BranchingMechanism<T> for StableMechanism<T> {
    fn psi(&self, lambda: T) -> Result<T> {
        Ok(nonneg("lambda", lambda)?.powf(self.alpha))
    }

    fn psi_prime(&self, lambda: T) -> Result<T> {
        let l = nonneg("lambda", lambda)?;
        Ok(self.alpha * l.powf(self.alpha - T::one()))
    }

    fn psi_second(&self, lambda: T) -> Result<T> {
        let l = nonneg("lambda", lambda)?;
        let a = self.alpha;
        Ok(a * (a - T::one()) * l.powf(a - lit(2.0)))
    }

    fn psi_inverse(&self, v: T) -> Result<T> {
        Ok(nonneg("v", v)?.powf(self.alpha.recip()))
    }
}

/// Density of a Levy measure on `(0, inf)`.
pub type LevyDensity<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `psi(l) = drift l + int pi(dl') [exp(-l l') - 1 + l l']` for a user-supplied
/// density, evaluated by quadrature.
#[derive(Clone)]
pub struct GeneralMechanism<T> {
    drift: T,
    density: LevyDensity<T>,
    support_end: Option<T>,
    infinite_variation: bool,
    quad: QuadConfig<T>,
}

impl<T: Real> fmt::Debug for GeneralMechanism<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralMechanism")
            .field("drift", &self.drift)
            .field("support_end", &self.support_end)
            .field("infinite_variation", &self.infinite_variation)
            .finish_non_exhaustive()
    }
}

impl<T: Real> GeneralMechanism<T> {
    /// `support_end` truncates the density (it is taken to vanish beyond).
    /// `infinite_variation` records the user's assertion that
    /// `int_(0,1) l pi(dl) = inf`; it cannot be checked numerically.
    pub fn new(drift: T, density: LevyDensity<T>, support_end: Option<T>, infinite_variation: bool) -> Result<Self> {
        nonneg("drift", drift)?;
        if let Some(end) = support_end {
            positive("support_end", end)?;
        }
        let mech = Self {
            drift,
            density,
            support_end,
            infinite_variation,
            quad: QuadConfig::with_tolerances(lit(1e-18), lit::<T>(1e-13).max(lit::<T>(64.0) * T::epsilon())),
        };
        for k in -16..=16 {
            let l = lit::<T>(10.0).powi(k) * lit(0.5);
            if mech.support_end.is_some_and(|e| l > e) {
                continue;
            }
            let d = (mech.density)(l);
            if !(d >= T::zero() && d.is_finite()) {
                return Err(Error::OutOfDomain {
                    what: "levy density",
                    detail: format!("density({}) = {}", to_f64(l), to_f64(d)),
                });
            }
        }
        let mass = mech.levy_integral(|l| l.min(l * l), T::one())?;
        if !mass.value.is_finite() {
            return Err(Error::OutOfDomain {
                what: "levy density",
                detail: "int (l ^ l^2) pi(dl) is not finite".into(),
            });
        }
        Ok(mech)
    }

    pub fn drift(&self) -> T {
        self.drift
    }

    pub fn infinite_variation(&self) -> bool {
        self.infinite_variation
    }

    pub fn density(&self, l: T) -> T {
        match self.support_end {
            Some(e) if l > e => T::zero(),
            _ => (self.density)(l),
        }
    }

    /// `int_(0, inf) g(l) pi(dl)` split at `scale` (and at the support end).
    ///
    /// Quadrature nodes below `1e-100 scale` where the density overflows are
    /// dropped.
    pub fn levy_integral<F: Fn(T) -> T>(&self, g: F, scale: T) -> Result<Integral<T>> {
        let floor = scale * lit(1e-100);
        let h = |l: T| {
            let d = (self.density)(l);
            if d == T::zero() || (!d.is_finite() && l < floor) {
                T::zero()
            } else {
                g(l) * d
            }
        };
        match self.support_end {
            Some(end) => {
                let cut = scale.min(end);
                let a = integrate(h, T::zero(), cut, &self.quad)?;
                let b = integrate(h, cut, end, &self.quad)?;
                Ok(Integral { value: a.value + b.value, error: a.error + b.error, evaluations: a.evaluations + b.evaluations })
            }
            None => {
                let a = integrate(h, T::zero(), scale, &self.quad)?;
                let b = integrate_tail(h, scale, &self.quad)?;
                Ok(Integral { value: a.value + b.value, error: a.error + b.error, evaluations: a.evaluations + b.evaluations })
            }
        }
    }

    /// `psi(lambda)` with the quadrature error estimate.
    pub fn psi_with_error(&self, lambda: T) -> Result<Integral<T>> {
        let lambda = nonneg("lambda", lambda)?;
        if lambda == T::zero() {
            return Ok(Integral { value: T::zero(), error: T::zero(), evaluations: 0 });
        }
        let r = self.levy_integral(|l| exp_neg_remainder(lambda * l), lambda.recip())?;
        Ok(Integral { value: self.drift * lambda + r.value, ..r })
    }
}

impl<T: Real> BranchingMechanism<T> for GeneralMechanism<T> {
    fn psi(&self, lambda: T) -> Result<T> {
        Ok(self.psi_with_error(lambda)?.value)
    }

    fn psi_prime(&self, lambda: T) -> Result<T> {
        let lambda = nonneg("lambda", lambda)?;
        if lambda == T::zero() {
            return Ok(self.drift);
        }
        let r = self.levy_integral(|l| l * one_minus_exp_neg(lambda * l), lambda.recip())?;
        Ok(self.drift + r.value)
    }

    fn psi_second(&self, lambda: T) -> Result<T> {
        let lambda = nonneg("lambda", lambda)?;
        let scale = if lambda > T::zero() { lambda.recip() } else { T::one() };
        Ok(self.levy_integral(|l| l * l * (-lambda * l).exp(), scale)?.value)
    }

    fn psi_inverse(&self, v: T) -> Result<T> {
        let v = nonneg("v", v)?;
        if v == T::zero() {
            return Ok(T::zero());
        }
        let tol = lit::<T>(1e-12) * (T::one() + v);
        let start = T::one().max(v) + v;
        let hi = expand_until(|x| Ok(self.psi(x)? > v), start, lit(2.0), 200)?;
        let root = bisect(|x| Ok(self.psi(x)? - v), T::zero(), hi, tol * lit(0.1), 400)?;
        if root.residual > tol {
            return Err(Error::NoConvergence {
                what: "psi inverse",
                iterations: root.iterations,
                residual: to_f64(root.residual),
            });
        }
        Ok(root.x)
    }
}

/// `psi_theta(l) = psi(l + theta) - psi(theta)`: the mechanism of the subtree
/// holding the root once nodes are marked at rate `theta`.
#[derive(Debug, Clone)]
pub struct TiltedMechanism<M, T> {
    base: M,
    theta: T,
    psi_at_theta: T,
}

impl<T: Real, M: BranchingMechanism<T>> TiltedMechanism<M, T> {
    pub fn new(base: M, theta: T) -> Result<Self> {
        let theta = nonneg("theta", theta)?;
        let psi_at_theta = base.psi(theta)?;
        Ok(Self { base, theta, psi_at_theta })
    }

    pub fn base(&self) -> &M {
        &self.base
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// `psi(theta)`.
    pub fn psi_at_theta(&self) -> T {
        self.psi_at_theta
    }

    /// `G(a) = int pi(dr) (1 - e^{-theta r})(1 - e^{-a r}) = psi(theta + a) - psi(a) - psi(theta)`.
    pub fn big_g(&self, a: T) -> Result<T> {
        let a = nonneg("G argument", a)?;
        if a == T::zero() {
            return Ok(T::zero());
        }
        Ok(self.base.psi(self.theta + a)? - self.base.psi(a)? - self.psi_at_theta)
    }

    pub fn big_g_prime(&self, a: T) -> Result<T> {
        let a = nonneg("G argument", a)?;
        Ok(self.base.psi_prime(self.theta + a)? - self.base.psi_prime(a)?)
    }

    pub fn big_g_second(&self, a: T) -> Result<T> {
        let a = nonneg("G argument", a)?;
        Ok(self.base.psi_second(self.theta + a)? - self.base.psi_second(a)?)
    }
}

impl<T: Real> TiltedMechanism<StableMechanism<T>, T> {
    /// Density of the size of the fragment holding the root under the
    /// excursion measure: `e^{-psi(theta) r} pi_*(dr)`.
    pub fn tagged_density(&self, r: T) -> T {
        (-self.psi_at_theta * r).exp() * self.base.pi_star_density(r)
    }
}

impl<T: Real, M: BranchingMechanism<T>> BranchingMechanism<T> for TiltedMechanism<M, T> {
    fn psi(&self, lambda: T) -> Result<T> {
        let l = nonneg("lambda", lambda)?;
        Ok(self.base.psi(l + self.theta)? - self.psi_at_theta)
    }

    fn psi_prime(&self, lambda: T) -> Result<T> {
        let l = nonneg("lambda", lambda)?;
        self.base.psi_prime(l + self.theta)
    }

    fn psi_second(&self, lambda: T) -> Result<T> {
        let l = nonneg("lambda", lambda)?;
        self.base.psi_second(l + self.theta)
    }

    /// `psi_theta^{-1}(v) = psi^{-1}(v + psi(theta)) - theta`.
    fn psi_inverse(&self, v: T) -> Result<T> {
        let v = nonneg("v", v)?;
        if v == T::zero() {
            return Ok(T::zero());
        }
        Ok((self.base.psi_inverse(v + self.psi_at_theta)? - self.theta).max(T::zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stable(alpha: f64) -> StableMechanism<f64> {
        StableMechanism::new(alpha).unwrap()
    }

    #[test]
    fn rejects_alpha_outside_open_interval() {
        for a in [1.0, 2.0, 0.5, 2.5, f64::NAN] {
            assert!(StableMechanism::new(a).is_err(), "alpha = {a}");
        }
    }

    #[test]
    fn psi_values() {
        let m = stable(1.5);
        assert_eq!(m.psi(0.0).unwrap(), 0.0);
        assert!((m.psi(2.0).unwrap() - 2.828_427_124_746_19).abs() < 1e-13);
        assert!(matches!(m.psi(-1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn psi_inverse_values() {
        let m = stable(1.5);
        assert!((m.psi_inverse(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.psi_inverse(8.0).unwrap() - 4.0).abs() < 1e-13);
        let v = m.psi(3.7).unwrap();
        assert!((m.psi_inverse(v).unwrap() - 3.7).abs() < 1e-10);
    }

    #[test]
    fn tilt_values() {
        let t = TiltedMechanism::new(stable(1.5), 1.0).unwrap();
        assert!((t.psi(1.0).unwrap() - (2.0_f64.powf(1.5) - 1.0)).abs() < 1e-14);
        assert_eq!(t.psi_inverse(0.0).unwrap(), 0.0);
        for v in [0.1, 1.0, 7.0] {
            let l = t.psi_inverse(v).unwrap();
            assert!((t.psi(l).unwrap() - v).abs() < 1e-10);
        }
        let zero = TiltedMechanism::new(stable(1.5), 0.0).unwrap();
        for l in [0.0, 0.3, 2.0, 11.0] {
            assert_eq!(zero.psi(l).unwrap(), stable(1.5).psi(l).unwrap());
        }
    }

    #[test]
    fn big_g_values() {
        let t = TiltedMechanism::new(stable(1.5), 1.0).unwrap();
        assert_eq!(t.big_g(0.0).unwrap(), 0.0);
        assert!((t.big_g(1.0).unwrap() - (2.0_f64.powf(1.5) - 2.0)).abs() < 1e-14);
        assert!(t.big_g(-0.1).is_err());
    }

    #[test]
    fn tail_and_small_mass_closed_forms() {
        let m = stable(1.5);
        let g13 = 2.678_938_534_707_747_6;
        assert!((m.pi_star_tail(1.0).unwrap() - 1.0 / g13).abs() < 1e-12);
        assert!((m.pi_star_tail(0.01).unwrap() - 10f64.powf(4.0 / 3.0) / g13).abs() < 1e-10);
        assert!((m.phi_small_mass(0.01).unwrap() - 0.160_84).abs() < 5e-5);
        assert!(m.pi_star_tail(0.0).is_err());
        assert!(m.phi_small_mass(-1.0).is_err());
    }

    #[test]
    fn small_mass_over_tail_ratio() {
        for alpha in [1.1, 1.5, 1.9] {
            let m = stable(alpha);
            for eps in [1e-6, 1e-3, 0.5, 1.0, 3.0] {
                let ratio = m.phi_small_mass(eps).unwrap() / (eps * m.pi_star_tail(eps).unwrap());
                assert!((ratio - 1.0 / (alpha - 1.0)).abs() < 1e-12 * ratio, "alpha {alpha} eps {eps}");
            }
        }
    }

    #[test]
    fn general_mechanism_rejects_bad_inputs() {
        let neg: LevyDensity<f64> = Arc::new(|_| -1.0);
        assert!(GeneralMechanism::new(0.0, neg, None, true).is_err());
        let ok: LevyDensity<f64> = Arc::new(|l: f64| l.powf(-2.5));
        assert!(GeneralMechanism::new(-1.0, ok, None, true).is_err());
    }

    #[test]
    fn general_mechanism_with_finite_support() {
        // pi(dl) = 1_{l <= 1} dl: psi(l) = int_0^1 (e^{-l x} - 1 + l x) dx
        let d: LevyDensity<f64> = Arc::new(|_| 1.0);
        let m = GeneralMechanism::new(0.5, d, Some(1.0), false).unwrap();
        let lam = 2.0_f64;
        let exact = 0.5 * lam + ((1.0 - (-lam).exp()) / lam - 1.0 + lam / 2.0);
        assert!((m.psi(lam).unwrap() - exact).abs() < 1e-13);
        assert_eq!(m.psi_prime(0.0).unwrap(), 0.5);
        assert!(!m.infinite_variation());
    }
}
