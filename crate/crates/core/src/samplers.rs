//! Positive stable variables and the two truncated Poisson point processes
//! driving the cascade.
//!
//! Fragment sizes of generation `k` form a Poisson process with intensity
//! `R_k e^{-psi(theta) r} pi_*(dr)`; marked-node masses hanging off generation
//! `k - 1` form one with intensity `L_{k-1} (1 - e^{-theta r}) pi(dr)`. Both
//! intensities have infinite mass at 0. Atoms above a cutoff are sampled
//! exactly by thinning a Pareto envelope; the atoms below are replaced by
//! the mean of their sum.

use rand::Rng;
use rand_distr::{Distribution, Open01, Poisson};

use crate::error::{domain, Error, Result};
use crate::mechanism::StableMechanism;
use crate::quadrature::{integrate, integrate_tail, QuadConfig};
use crate::special::gamma;
use crate::TiltedStable;

/// Realisation of a truncated Poisson point process.
#[derive(Debug, Clone, PartialEq)]
pub struct PppSample {
    /// Atoms above the cutoff, in descending order.
    pub atoms: Vec<f64>,
    pub count: usize,
    /// Mean of the sum of the atoms below the cutoff.
    pub compensation_mass: f64,
    pub cutoff: f64,
}

impl PppSample {
    fn from_atoms(mut atoms: Vec<f64>, compensation_mass: f64, cutoff: f64) -> Self {
        atoms.sort_unstable_by(|a, b| b.total_cmp(a));
        Self { count: atoms.len(), atoms, compensation_mass, cutoff }
    }

    pub fn atom_sum(&self) -> f64 {
        self.atoms.iter().sum()
    }

    /// Sum of the atoms plus the compensation.
    pub fn total(&self) -> f64 {
        self.atom_sum() + self.compensation_mass
    }
}

/// Law of `S` with `E[exp(-l S)] = exp(-l^rho)`, sampled with Kanter's
/// representation.
#[derive(Debug, Clone, Copy)]
pub struct PositiveStable {
    rho: f64,
}

impl PositiveStable {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho < 1.0 {
            Ok(Self { rho })
        } else {
            Err(domain("rho", rho, "0 < rho < 1"))
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl Distribution<f64> for PositiveStable {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let rho = self.rho;
        let u = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
        let w = -rng.sample::<f64, _>(Open01).ln();
        let a = (rho * u).sin() / u.sin().powf(1.0 / rho);
        let b = ((1.0 - rho) * u).sin() / w;
        a * b.powf((1.0 - rho) / rho)
    }
}

pub fn sample_positive_stable<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> Result<f64> {
    Ok(PositiveStable::new(rho)?.sample(rng))
}

fn check_rate(rate: f64) -> Result<f64> {
    if rate >= 0.0 && rate.is_finite() {
        Ok(rate)
    } else {
        Err(domain("rate", rate, "finite and >= 0"))
    }
}

fn check_cutoff(cutoff: f64) -> Result<f64> {
    if cutoff > 0.0 && cutoff.is_finite() {
        Ok(cutoff)
    } else {
        Err(domain("cutoff", cutoff, "finite and > 0"))
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let law = Poisson::new(mean).map_err(|e| Error::OutOfDomain {
        what: "poisson count",
        detail: format!("mean {mean}: {e}"),
    })?;
    Ok(law.sample(rng) as u64)
}

fn quad() -> QuadConfig<f64> {
    QuadConfig::default()
}

/// `int_a^inf f`, split at `scale` when it lies above `a`.
fn above(f: impl Fn(f64) -> f64, a: f64, scale: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut start = a;
    if scale > a {
        total += integrate(&f, a, scale, &quad())?.value;
        start = scale;
    }
    Ok(total + integrate_tail(&f, start, &quad())?.value)
}

/// `int_0^c f`, split at `scale` when it lies below `c`.
fn below(f: impl Fn(f64) -> f64, c: f64, scale: f64) -> Result<f64> {
    if scale < c {
        Ok(integrate(&f, 0.0, scale, &quad())?.value + integrate(&f, scale, c, &quad())?.value)
    } else {
        Ok(integrate(&f, 0.0, c, &quad())?.value)
    }
}

/// Sampler for fragment sizes, intensity `rate * e^{-psi(theta) r} pi_*(dr)` on
/// `(cutoff, inf)`. The per-unit-rate constants are computed once.
#[derive(Debug, Clone)]
pub struct FragmentSampler {
    alpha: f64,
    tilt: f64,
    cutoff: f64,
    envelope_mass: f64,
    mean_count: f64,
    compensation: f64,
}

impl FragmentSampler {
    pub fn new(t: &TiltedStable, cutoff: f64) -> Result<Self> {
        let cutoff = check_cutoff(cutoff)?;
        let base = t.base();
        let tilt = t.psi_at_theta();
        let scale = if tilt > 0.0 { 1.0 / tilt } else { 1.0 };
        let mean_count = above(|r| t.tagged_density(r), cutoff, scale)?;
        let compensation = below(|r| r * t.tagged_density(r), cutoff, scale)?;
        Ok(Self {
            alpha: base.alpha(),
            tilt,
            cutoff,
            envelope_mass: base.pi_star_tail(cutoff)?,
            mean_count,
            compensation,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// `int_cutoff^inf e^{-psi(theta) r} pi_*(dr)`.
    pub fn mean_count_per_rate(&self) -> f64 {
        self.mean_count
    }

    /// `int_0^cutoff r e^{-psi(theta) r} pi_*(dr)`.
    pub fn compensation_per_rate(&self) -> f64 {
        self.compensation
    }

    pub fn sample<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Result<PppSample> {
        let rate = check_rate(rate)?;
        let n = poisson_count(rate * self.envelope_mass, rng)?;
        let mut atoms = Vec::with_capacity((n as f64 * self.mean_count / self.envelope_mass) as usize + 1);
        for _ in 0..n {
            let u: f64 = rng.sample(Open01);
            let r = self.cutoff * u.powf(-self.alpha);
            if rng.random::<f64>() < (-self.tilt * r).exp() {
                atoms.push(r);
            }
        }
        Ok(PppSample::from_atoms(atoms, rate * self.compensation, self.cutoff))
    }
}

/// Sampler for marked-node masses, intensity `rate * (1 - e^{-theta r}) pi(dr)`
/// on `(cutoff, inf)`.
///
/// The envelope is `pi(dr) min(theta r, 1)`: a `r^{-alpha}` piece on
/// `(cutoff, b)` and a `r^{-1-alpha}` piece on `(b, inf)` with
/// `b = max(cutoff, 1/theta)`.
#[derive(Debug, Clone)]
pub struct NodeSampler {
    alpha: f64,
    theta: f64,
    cutoff: f64,
    split: f64,
    low_mass: f64,
    high_mass: f64,
    mean_count: f64,
    compensation: f64,
}

impl NodeSampler {
    pub fn new(t: &TiltedStable, cutoff: f64) -> Result<Self> {
        let cutoff = check_cutoff(cutoff)?;
        let base = t.base();
        let (alpha, theta) = (base.alpha(), t.theta());
        if theta == 0.0 {
            return Ok(Self {
                alpha,
                theta,
                cutoff,
                split: cutoff,
                low_mass: 0.0,
                high_mass: 0.0,
                mean_count: 0.0,
                compensation: 0.0,
            });
        }
        let c_pi = base.levy_constant();
        let split = cutoff.max(1.0 / theta);
        let low_mass = theta * c_pi * (cutoff.powf(1.0 - alpha) - split.powf(1.0 - alpha)) / (alpha - 1.0);
        let high_mass = c_pi * split.powf(-alpha) / alpha;
        // (1 - e^{-theta r}) r^{-alpha}, written to stay finite as r -> 0
        let weighted = move |r: f64| {
            let x = theta * r;
            let ratio = if x > 0.0 { -(-x).exp_m1() / x } else { 1.0 };
            c_pi * theta * ratio * r.powf(1.0 - alpha)
        };
        let mean_count = above(|r| weighted(r) / r, cutoff, 1.0 / theta)?;
        let compensation = below(weighted, cutoff, 1.0 / theta)?;
        Ok(Self { alpha, theta, cutoff, split, low_mass, high_mass, mean_count, compensation })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// `int_cutoff^inf (1 - e^{-theta r}) pi(dr)`.
    pub fn mean_count_per_rate(&self) -> f64 {
        self.mean_count
    }

    /// `int_0^cutoff r (1 - e^{-theta r}) pi(dr)`.
    pub fn compensation_per_rate(&self) -> f64 {
        self.compensation
    }

    pub fn sample<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Result<PppSample> {
        let rate = check_rate(rate)?;
        if self.theta == 0.0 {
            return Ok(PppSample::from_atoms(Vec::new(), 0.0, self.cutoff));
        }
        let (a, theta) = (self.alpha, self.theta);
        let mut atoms = Vec::new();
        let n_low = poisson_count(rate * self.low_mass, rng)?;
        let c1 = self.cutoff.powf(1.0 - a);
        let span = c1 - self.split.powf(1.0 - a);
        for _ in 0..n_low {
            let u: f64 = rng.sample(Open01);
            let r = (c1 - u * span).powf(1.0 / (1.0 - a)).clamp(self.cutoff, self.split);
            let x = theta * r;
            if rng.random::<f64>() * x < -(-x).exp_m1() {
                atoms.push(r);
            }
        }
        let n_high = poisson_count(rate * self.high_mass, rng)?;
        for _ in 0..n_high {
            let u: f64 = rng.sample(Open01);
            let r = self.split * u.powf(-1.0 / a);
            if rng.random::<f64>() < -(-theta * r).exp_m1() {
                atoms.push(r);
            }
        }
        atoms.retain(|&r| r > self.cutoff);
        Ok(PppSample::from_atoms(atoms, rate * self.compensation, self.cutoff))
    }
}

/// Node cutoff whose discarded atoms have variance at most `1e-10` per unit
/// rate: `theta C_pi c^{3-alpha} / (3 - alpha) = 1e-10`.
pub fn default_node_cutoff(t: &TiltedStable) -> f64 {
    let base = t.base();
    let a = base.alpha();
    if t.theta() == 0.0 {
        return 1.0;
    }
    (1e-10 * (3.0 - a) / (t.theta() * base.levy_constant())).powf(1.0 / (3.0 - a))
}

/// One hundredth of the smallest grid point.
pub fn default_fragment_cutoff(eps_grid: &[f64]) -> Result<f64> {
    let min = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 && min.is_finite() {
        Ok(min / 100.0)
    } else {
        Err(domain("eps grid minimum", min, "finite and > 0"))
    }
}

pub fn sample_fragment_ppp<R: Rng + ?Sized>(rate: f64, t: &TiltedStable, cutoff: f64, rng: &mut R) -> Result<PppSample> {
    check_rate(rate)?;
    FragmentSampler::new(t, cutoff)?.sample(rate, rng)
}

pub fn sample_node_ppp<R: Rng + ?Sized>(rate: f64, t: &TiltedStable, cutoff: f64, rng: &mut R) -> Result<PppSample> {
    check_rate(rate)?;
    NodeSampler::new(t, cutoff)?.sample(rate, rng)
}

/// `E[S^b] = Gamma(1 - alpha b) / Gamma(1 - b)` for `S` positive stable of
/// index `1/alpha`, finite for `b < 1/alpha`.
pub fn stable_fractional_moment(alpha: f64, b: f64) -> Result<f64> {
    StableMechanism::new(alpha)?;
    if !(b >= 0.0 && b < 1.0 / alpha) {
        return Err(Error::OutOfDomain {
            what: "fractional moment",
            detail: format!("b = {b} must lie in [0, 1/alpha) = [0, {}): moment infinite", 1.0 / alpha),
        });
    }
    Ok(gamma(1.0 - alpha * b) / gamma(1.0 - b))
}
