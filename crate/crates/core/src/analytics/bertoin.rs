//! Small-fragment functions of the dislocation measure of the stable
//! fragmentation, in closed form and by Monte Carlo over the terminal value
//! `S_1` of a stable subordinator with exponent `l^{1/alpha}`.

use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::mechanism::StableMechanism;
use crate::rng::RngStream;
use crate::samplers::PositiveStable;
use crate::scalar::{lit, Real};
use crate::special::gamma;
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertoinClosedForms<T> {
    pub f_b: T,
    pub phi_b: T,
    /// `c_alpha eps^{2-2/alpha}`, the asymptotic of the cross term of `g_b`
    /// bracketed by the sandwich expectations.
    pub cross_term_asymptotic: T,
    /// `C c_alpha eps^{2-2/alpha}` with `C` the dislocation constant: the
    /// asymptotic of `g_b` itself.
    pub g_b_asymptotic: T,
    pub c_alpha: T,
    pub dislocation_constant: T,
}

/// `alpha (alpha - 1) Gamma(1 - 1/alpha) / Gamma(2 - alpha)`.
pub fn dislocation_constant<T: Real>(alpha: T) -> T {
    let one = T::one();
    alpha * (alpha - one) * gamma(one - alpha.recip()) / gamma(lit::<T>(2.0) - alpha)
}

/// `Gamma(3 - alpha) / ((alpha - 1)^2 Gamma(2/alpha) Gamma(1 - 1/alpha)^2)`.
pub fn c_alpha<T: Real>(alpha: T) -> T {
    let one = T::one();
    let g = gamma(one - alpha.recip());
    gamma(lit::<T>(3.0) - alpha) / ((alpha - one).powi(2) * gamma(lit::<T>(2.0) / alpha) * g * g)
}

pub fn bertoin_closed_forms<T: Real>(alpha: T, eps: T) -> Result<BertoinClosedForms<T>> {
    StableMechanism::new(alpha)?;
    if !(eps > T::zero() && eps < T::one()) {
        return Err(domain("eps", eps, "0 < eps < 1"));
    }
    let one = T::one();
    let inv = alpha.recip();
    let q = eps / (one - eps);
    let g1 = gamma(one + inv);
    let f_b = q.powf(one - inv) / g1;
    let phi_b = (alpha - one) / g1 * q.powf(-inv) - f_b;
    let ca = c_alpha(alpha);
    let cross = ca * eps.powf(lit::<T>(2.0) - lit::<T>(2.0) * inv);
    let c = dislocation_constant(alpha);
    Ok(BertoinClosedForms {
        f_b,
        phi_b,
        cross_term_asymptotic: cross,
        g_b_asymptotic: c * cross,
        c_alpha: ca,
        dislocation_constant: c,
    })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn scaled(m: &Moments, k: f64) -> Self {
        Self { mean: k * m.mean(), stderr: k * m.stderr() }
    }

    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertoinEstimates {
    pub eps: f64,
    pub draws: u64,
    pub f_hat: Estimate,
    pub phi_hat: Estimate,
    /// `(1-eps)/(1+2eps) E[S^{-1} phi(eps S/(1-eps))^2]`.
    pub g_lower: Estimate,
    /// `E[S^{-1} phi(eps S/(1-2eps))^2]`.
    pub g_upper: Estimate,
    /// Bound on the diagonal term, `E[S^{-1} int_0^{eps S/(1-eps)} r^2 pi_*(dr)]`.
    pub g_diagonal: Estimate,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    f: Moments,
    phi: Moments,
    lower: Moments,
    upper: Moments,
    diagonal: Moments,
}

impl Acc {
    fn merge(&mut self, o: &Acc) {
        self.f.merge(&o.f);
        self.phi.merge(&o.phi);
        self.lower.merge(&o.lower);
        self.upper.merge(&o.upper);
        self.diagonal.merge(&o.diagonal);
    }
}

struct Kernel {
    mech: StableMechanism<f64>,
    k_star: f64,
    inv: f64,
    eps: f64,
}

impl Kernel {
    fn new(alpha: f64, eps: f64) -> Result<Self> {
        let mech = StableMechanism::new(alpha)?;
        if !(eps > 0.0 && eps < 0.5) {
            return Err(domain("eps", eps, "0 < eps < 1/2"));
        }
        Ok(Self { k_star: mech.excursion_constant(), inv: 1.0 / alpha, mech, eps })
    }

    fn push(&self, acc: &mut Acc, s: f64) -> Result<()> {
        let e = self.eps;
        let u = e * s / (1.0 - e);
        let w = e * s / (1.0 - 2.0 * e);
        let phi_u = self.mech.phi_small_mass(u)?;
        acc.f.push(phi_u);
        acc.phi.push(s * self.mech.pi_star_tail(u)? - phi_u);
        acc.lower.push(phi_u * phi_u / s);
        let phi_w = self.mech.phi_small_mass(w)?;
        acc.upper.push(phi_w * phi_w / s);
        let p = 2.0 - self.inv;
        acc.diagonal.push(self.k_star * u.powf(p) / p / s);
        Ok(())
    }

    fn finish(&self, acc: &Acc) -> BertoinEstimates {
        let c = dislocation_constant(1.0 / self.inv);
        let e = self.eps;
        BertoinEstimates {
            eps: e,
            draws: acc.f.count(),
            f_hat: Estimate::scaled(&acc.f, c),
            phi_hat: Estimate::scaled(&acc.phi, c),
            g_lower: Estimate::scaled(&acc.lower, (1.0 - e) / (1.0 + 2.0 * e)),
            g_upper: Estimate::scaled(&acc.upper, 1.0),
            g_diagonal: Estimate::scaled(&acc.diagonal, 1.0),
        }
    }
}

/// Monte Carlo estimates from `n` draws of `S_1` taken from `rng`.
pub fn bertoin_mc<R: Rng + ?Sized>(alpha: f64, eps: f64, n: u64, rng: &mut R) -> Result<BertoinEstimates> {
    if n == 0 {
        return Err(domain("n", 0.0, ">= 1"));
    }
    let kernel = Kernel::new(alpha, eps)?;
    let law = PositiveStable::new(1.0 / alpha)?;
    let mut acc = Acc::default();
    for _ in 0..n {
        kernel.push(&mut acc, law.sample(rng))?;
    }
    Ok(kernel.finish(&acc))
}

/// Draws per stream in [`bertoin_mc_grid`].
pub const CHUNK: u64 = 1 << 16;

/// Estimates on a grid of `eps` from one common set of `n` draws. Chunk `i`
/// of [`CHUNK`] draws uses `RngStream::new(seed, i)`; chunks are merged in
/// order, so the result does not depend on the thread count.
pub fn bertoin_mc_grid(alpha: f64, eps_grid: &[f64], n: u64, seed: u64) -> Result<Vec<BertoinEstimates>> {
    if n == 0 {
        return Err(domain("n", 0.0, ">= 1"));
    }
    let kernels: Vec<Kernel> = eps_grid.iter().map(|&e| Kernel::new(alpha, e)).collect::<Result<_>>()?;
    let law = PositiveStable::new(1.0 / alpha)?;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<Acc>> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i);
            let len = CHUNK.min(n - i * CHUNK);
            let mut accs = vec![Acc::default(); kernels.len()];
            for _ in 0..len {
                let s = law.sample(&mut rng);
                for (k, a) in kernels.iter().zip(accs.iter_mut()) {
                    k.push(a, s)?;
                }
            }
            Ok(accs)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![Acc::default(); kernels.len()];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(kernels.iter().zip(&total).map(|(k, a)| k.finish(a)).collect())
}
