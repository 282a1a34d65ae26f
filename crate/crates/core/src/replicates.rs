//! Independent cascade replicates reduced to the Monte Carlo summaries used by
//! the experiments.
//!
//! Replicate `i` draws from `RngStream::new(seed, i)`. Replicates run in
//! parallel but are reduced sequentially in index order, so the summary does
//! not depend on the number of threads.

use rayon::prelude::*;

use crate::cascade::{check_eps_grid, fragment_statistics, record_identities_hold, Cascade};
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;
use crate::special::gamma;
use crate::stats::Moments;

/// Weights of one Laplace functional `exp(-(x N + y M + gamma R + beta sigma))`
/// at threshold `eps`, with `N` and `M` excluding the root fragment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacePoint {
    pub x: f64,
    pub y: f64,
    pub gamma: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatePlan {
    pub eps_grid: Vec<f64>,
    pub beta: f64,
    /// `(lambda_1, lambda_2)` of the mixed error functional.
    pub lambda: (f64, f64),
    pub laplace: Vec<LaplacePoint>,
}

impl ReplicatePlan {
    pub fn new(eps_grid: Vec<f64>, beta: f64) -> Self {
        Self { eps_grid, beta, lambda: (1.0, 1.0), laplace: Vec::new() }
    }
}

/// Per-threshold summaries.
#[derive(Debug, Clone, Default)]
pub struct EpsSummary {
    pub eps: f64,
    /// `N / pibar_*(eps)`.
    pub n_scaled: Moments,
    /// `M / phi(eps)`.
    pub m_scaled: Moments,
    /// `(N / pibar_* - R)^2 e^{-beta sigma}`.
    pub d_n: Moments,
    /// `(M / phi - R)^2 e^{-beta sigma}`.
    pub d_m: Moments,
    /// `(l1 N / pibar_* + l2 M / phi - (l1 + l2) R)^2 e^{-beta sigma}`.
    pub d_mix: Moments,
    /// `|Gamma(1 - 1/alpha) eps^{1/alpha} N - R|`, root included in the count.
    pub count_gap: Moments,
}

#[derive(Debug, Clone, Default)]
pub struct LaplaceSummary {
    pub point: Option<LaplacePoint>,
    /// `exp(-(x N + y M + gamma R + beta sigma))`.
    pub laplace: Moments,
    /// `(x N + y M + gamma R)^2 e^{-beta sigma}`.
    pub second_moment: Moments,
}

#[derive(Debug, Clone, Default)]
pub struct ReplicateSummary {
    pub replicates: u64,
    pub seed: u64,
    pub per_eps: Vec<EpsSummary>,
    pub laplace: Vec<LaplaceSummary>,
    pub r: Moments,
    pub sigma: Moments,
    pub weight: Moments,
    /// `L_0 .. L_3`.
    pub generation_mass: Vec<Moments>,
    /// `R_1 .. R_3`.
    pub node_mass: Vec<Moments>,
    pub generations: Moments,
    pub fragment_compensation: Moments,
    pub node_compensation: Moments,
    pub kmax_hits: u64,
    pub cap_hits: u64,
    pub identity_failures: u64,
}

const TRACKED_GENERATIONS: usize = 4;

struct ReplicateValues {
    per_eps: Vec<[f64; 6]>,
    laplace: Vec<[f64; 2]>,
    r: f64,
    sigma: f64,
    weight: f64,
    generation_mass: [f64; TRACKED_GENERATIONS],
    node_mass: [f64; TRACKED_GENERATIONS - 1],
    generations: f64,
    fragment_compensation: f64,
    node_compensation: f64,
    kmax: bool,
    capped: bool,
    identities: bool,
}

struct Normalisers {
    tail: Vec<f64>,
    small_mass: Vec<f64>,
    count_scale: Vec<f64>,
    laplace_index: Vec<usize>,
}

fn one_replicate(cascade: &Cascade, plan: &ReplicatePlan, norm: &Normalisers, rng: &mut RngStream) -> Result<ReplicateValues> {
    let rec = cascade.simulate(rng)?;
    let s0 = cascade.params().s0;
    let excl = fragment_statistics(&rec, &plan.eps_grid, false)?;
    let incl = fragment_statistics(&rec, &plan.eps_grid, true)?;
    let r = rec.r_total;
    let weight = (-plan.beta * rec.sigma).exp();
    let (l1, l2) = plan.lambda;
    let per_eps = (0..plan.eps_grid.len())
        .map(|i| {
            let n = excl.n_eps[i] as f64 / norm.tail[i];
            let m = excl.m_eps[i] / norm.small_mass[i];
            [
                n,
                m,
                (n - r).powi(2) * weight,
                (m - r).powi(2) * weight,
                (l1 * n + l2 * m - (l1 + l2) * r).powi(2) * weight,
                (norm.count_scale[i] * incl.n_eps[i] as f64 - r).abs(),
            ]
        })
        .collect();
    let laplace = plan
        .laplace
        .iter()
        .zip(&norm.laplace_index)
        .map(|(p, &i)| {
            let form = p.x * excl.n_eps[i] as f64 + p.y * excl.m_eps[i] + p.gamma * r;
            [(-(form + plan.beta * rec.sigma)).exp(), form * form * weight]
        })
        .collect();
    let mut generation_mass = [0.0; TRACKED_GENERATIONS];
    for (k, g) in generation_mass.iter_mut().enumerate() {
        *g = rec.generation_mass(k);
    }
    let mut node_mass = [0.0; TRACKED_GENERATIONS - 1];
    for (k, g) in node_mass.iter_mut().enumerate() {
        *g = rec.node_mass(k + 1);
    }
    Ok(ReplicateValues {
        per_eps,
        laplace,
        r,
        sigma: rec.sigma,
        weight,
        generation_mass,
        node_mass,
        generations: (rec.generations.len() - 1) as f64,
        fragment_compensation: rec.total_fragment_compensation(),
        node_compensation: rec.total_node_compensation(),
        kmax: rec.truncated_at_kmax,
        capped: rec.capped,
        identities: record_identities_hold(&excl, s0) && record_identities_hold(&incl, s0),
    })
}

fn normalisers(cascade: &Cascade, plan: &ReplicatePlan) -> Result<Normalisers> {
    check_eps_grid(&plan.eps_grid, cascade.params().fragment_cutoff)?;
    if !(plan.beta >= 0.0 && plan.beta.is_finite()) {
        return Err(domain("beta", plan.beta, "finite and >= 0"));
    }
    let base = cascade.mechanism().base();
    let alpha = base.alpha();
    let mut n = Normalisers { tail: vec![], small_mass: vec![], count_scale: vec![], laplace_index: vec![] };
    for &eps in &plan.eps_grid {
        n.tail.push(base.pi_star_tail(eps)?);
        n.small_mass.push(base.phi_small_mass(eps)?);
        n.count_scale.push(gamma(1.0 - 1.0 / alpha) * eps.powf(1.0 / alpha));
    }
    for p in &plan.laplace {
        let i = plan.eps_grid.iter().position(|&e| e == p.eps).ok_or_else(|| Error::OutOfDomain {
            what: "laplace point",
            detail: format!("eps {} is not on the grid", p.eps),
        })?;
        if !(p.x >= 0.0 && p.y >= 0.0 && p.gamma.is_finite()) {
            return Err(Error::OutOfDomain {
                what: "laplace point",
                detail: format!("need x, y >= 0 and finite gamma, got {p:?}"),
            });
        }
        n.laplace_index.push(i);
    }
    Ok(n)
}

pub fn run_replicates(cascade: &Cascade, plan: &ReplicatePlan, n: u64, seed: u64) -> Result<ReplicateSummary> {
    if n == 0 {
        return Err(domain("replicates", 0.0, ">= 1"));
    }
    let norm = normalisers(cascade, plan)?;
    let values: Vec<ReplicateValues> = (0..n)
        .into_par_iter()
        .map(|i| one_replicate(cascade, plan, &norm, &mut RngStream::new(seed, i)))
        .collect::<Result<_>>()?;
    let mut s = ReplicateSummary {
        replicates: n,
        seed,
        per_eps: plan.eps_grid.iter().map(|&eps| EpsSummary { eps, ..Default::default() }).collect(),
        laplace: plan.laplace.iter().map(|&p| LaplaceSummary { point: Some(p), ..Default::default() }).collect(),
        generation_mass: vec![Moments::new(); TRACKED_GENERATIONS],
        node_mass: vec![Moments::new(); TRACKED_GENERATIONS - 1],
        ..Default::default()
    };
    for v in &values {
        for (e, x) in s.per_eps.iter_mut().zip(&v.per_eps) {
            e.n_scaled.push(x[0]);
            e.m_scaled.push(x[1]);
            e.d_n.push(x[2]);
            e.d_m.push(x[3]);
            e.d_mix.push(x[4]);
            e.count_gap.push(x[5]);
        }
        for (l, x) in s.laplace.iter_mut().zip(&v.laplace) {
            l.laplace.push(x[0]);
            l.second_moment.push(x[1]);
        }
        s.r.push(v.r);
        s.sigma.push(v.sigma);
        s.weight.push(v.weight);
        for (m, &x) in s.generation_mass.iter_mut().zip(&v.generation_mass) {
            m.push(x);
        }
        for (m, &x) in s.node_mass.iter_mut().zip(&v.node_mass) {
            m.push(x);
        }
        s.generations.push(v.generations);
        s.fragment_compensation.push(v.fragment_compensation);
        s.node_compensation.push(v.node_compensation);
        s.kmax_hits += u64::from(v.kmax);
        s.cap_hits += u64::from(v.capped);
        s.identity_failures += u64::from(!v.identities);
    }
    Ok(s)
}

/// `(sigma, R)` of each replicate, in replicate order.
pub fn replicate_totals(cascade: &Cascade, n: u64, seed: u64) -> Result<Vec<(f64, f64)>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let rec = cascade.simulate(&mut RngStream::new(seed, i))?;
            Ok((rec.sigma, rec.r_total))
        })
        .collect()
}
