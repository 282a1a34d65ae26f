//! Generation-by-generation simulation of the fragmentation at marked nodes,
//! started from the fragment holding the root conditioned to have size `s0`.
//!
//! Generation 0 is the root fragment. Given the mass `L_{k-1}` of generation
//! `k - 1`, the marked nodes on it carry masses forming a Poisson process of
//! intensity `L_{k-1} (1 - e^{-theta r}) pi(dr)` with sum `R_k`; given `R_k`,
//! the fragments of generation `k` form a Poisson process of intensity
//! `R_k e^{-psi(theta) r} pi_*(dr)` with sum `L_k`.

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::mechanism::{StableMechanism, TiltedMechanism};
use crate::samplers::{default_node_cutoff, FragmentSampler, NodeSampler};
use crate::TiltedStable;

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeParams {
    pub alpha: f64,
    pub theta: f64,
    pub s0: f64,
    pub fragment_cutoff: f64,
    pub node_cutoff: f64,
    pub k_max: usize,
    /// Stop once a generation's mass falls below this.
    pub mass_tolerance: f64,
    /// Stop once the accumulated mass exceeds this.
    pub sigma_cap: Option<f64>,
    /// Keep individual marked-node masses in the record.
    pub keep_node_atoms: bool,
}

impl CascadeParams {
    /// Defaults: fragment cutoff `1e-6`, node cutoff from
    /// [`default_node_cutoff`], `k_max = 60`, mass tolerance `1e-10 s0`,
    /// sigma cap `1e3 s0`.
    pub fn new(alpha: f64, theta: f64, s0: f64) -> Result<Self> {
        let t = TiltedMechanism::new(StableMechanism::new(alpha)?, theta)?;
        let p = Self {
            alpha,
            theta,
            s0,
            fragment_cutoff: 1e-6,
            node_cutoff: default_node_cutoff(&t),
            k_max: 60,
            mass_tolerance: 1e-10 * s0,
            sigma_cap: Some(1e3 * s0),
            keep_node_atoms: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        StableMechanism::new(self.alpha)?;
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(domain("theta", self.theta, "finite and > 0"));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(domain("s0", self.s0, "finite and > 0"));
        }
        if !(self.fragment_cutoff > 0.0 && self.fragment_cutoff.is_finite()) {
            return Err(domain("fragment_cutoff", self.fragment_cutoff, "finite and > 0"));
        }
        if !(self.node_cutoff > 0.0 && self.node_cutoff.is_finite()) {
            return Err(domain("node_cutoff", self.node_cutoff, "finite and > 0"));
        }
        if self.k_max == 0 {
            return Err(domain("k_max", 0.0, ">= 1"));
        }
        if !(self.mass_tolerance >= 0.0 && self.mass_tolerance < self.s0) {
            return Err(domain("mass_tolerance", self.mass_tolerance, "0 <= tolerance < s0"));
        }
        if let Some(cap) = self.sigma_cap {
            if !(cap > self.s0) {
                return Err(domain("sigma_cap", cap, "> s0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub k: usize,
    /// Marked-node mass: atoms plus node compensation.
    pub r_k: f64,
    pub node_count: usize,
    pub node_compensation: f64,
    pub node_atoms: Option<Vec<f64>>,
    /// Fragment sizes above the fragment cutoff, descending.
    pub fragment_sizes: Vec<f64>,
    /// Fragment sizes plus fragment compensation.
    pub l_k: f64,
    pub fragment_compensation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeRecord {
    pub params: CascadeParams,
    pub generations: Vec<GenerationRecord>,
    /// Sum of the `L_k`.
    pub sigma: f64,
    /// Sum of the `R_k`.
    pub r_total: f64,
    /// The last generation was `k_max` and still carried mass above the tolerance.
    pub truncated_at_kmax: bool,
    /// Stopped by the sigma cap.
    pub capped: bool,
    /// Mass of the last simulated generation.
    pub residual_mass: f64,
}

impl CascadeRecord {
    pub fn generation_mass(&self, k: usize) -> f64 {
        self.generations.get(k).map_or(0.0, |g| g.l_k)
    }

    pub fn node_mass(&self, k: usize) -> f64 {
        self.generations.get(k).map_or(0.0, |g| g.r_k)
    }

    pub fn total_fragment_compensation(&self) -> f64 {
        self.generations.iter().map(|g| g.fragment_compensation).sum()
    }

    pub fn total_node_compensation(&self) -> f64 {
        self.generations.iter().map(|g| g.node_compensation).sum()
    }
}

/// Validated parameters with the samplers' constants precomputed.
#[derive(Debug, Clone)]
pub struct Cascade {
    params: CascadeParams,
    mechanism: TiltedStable,
    nodes: NodeSampler,
    fragments: FragmentSampler,
}

impl Cascade {
    pub fn new(params: CascadeParams) -> Result<Self> {
        params.validate()?;
        let mechanism = TiltedMechanism::new(StableMechanism::new(params.alpha)?, params.theta)?;
        let nodes = NodeSampler::new(&mechanism, params.node_cutoff)?;
        let fragments = FragmentSampler::new(&mechanism, params.fragment_cutoff)?;
        Ok(Self { params, mechanism, nodes, fragments })
    }

    pub fn params(&self) -> &CascadeParams {
        &self.params
    }

    pub fn mechanism(&self) -> &TiltedStable {
        &self.mechanism
    }

    pub fn node_sampler(&self) -> &NodeSampler {
        &self.nodes
    }

    pub fn fragment_sampler(&self) -> &FragmentSampler {
        &self.fragments
    }

    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CascadeRecord> {
        let p = &self.params;
        let mut generations = vec![GenerationRecord {
            k: 0,
            r_k: 0.0,
            node_count: 0,
            node_compensation: 0.0,
            node_atoms: p.keep_node_atoms.then(Vec::new),
            fragment_sizes: vec![p.s0],
            l_k: p.s0,
            fragment_compensation: 0.0,
        }];
        let (mut sigma, mut r_total, mut last) = (p.s0, 0.0, p.s0);
        let mut capped = false;
        for k in 1..=p.k_max {
            if last < p.mass_tolerance {
                break;
            }
            if p.sigma_cap.is_some_and(|cap| sigma > cap) {
                capped = true;
                break;
            }
            let nodes = self.nodes.sample(last, rng)?;
            let r_k = nodes.total();
            let frags = self.fragments.sample(r_k, rng)?;
            let l_k = frags.total();
            sigma += l_k;
            r_total += r_k;
            last = l_k;
            generations.push(GenerationRecord {
                k,
                r_k,
                node_count: nodes.count,
                node_compensation: nodes.compensation_mass,
                node_atoms: p.keep_node_atoms.then_some(nodes.atoms),
                fragment_sizes: frags.atoms,
                l_k,
                fragment_compensation: frags.compensation_mass,
            });
        }
        let truncated_at_kmax = !capped && generations.len() == p.k_max + 1 && last >= p.mass_tolerance;
        Ok(CascadeRecord {
            params: p.clone(),
            generations,
            sigma,
            r_total,
            truncated_at_kmax,
            capped,
            residual_mass: last,
        })
    }
}

pub fn simulate_cascade<R: Rng + ?Sized>(params: &CascadeParams, rng: &mut R) -> Result<CascadeRecord> {
    Cascade::new(params.clone())?.simulate(rng)
}

/// Small-fragment statistics of one record on a grid of thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentStats {
    pub eps_grid: Vec<f64>,
    /// Number of fragments of size `> eps`.
    pub n_eps: Vec<u64>,
    /// Mass of fragments of size `<= eps`, plus all fragment compensation.
    pub m_eps: Vec<f64>,
    /// Mass of fragments of size `> eps`.
    pub mass_above: Vec<f64>,
    pub r: f64,
    pub sigma: f64,
    pub include_root: bool,
}

impl FragmentStats {
    /// `sigma`, less `s0` when the root is excluded: what `M + mass_above` must equal.
    pub fn accounted_mass(&self, s0: f64) -> f64 {
        if self.include_root {
            self.sigma
        } else {
            self.sigma - s0
        }
    }
}

pub fn check_eps_grid(eps_grid: &[f64], fragment_cutoff: f64) -> Result<()> {
    if eps_grid.is_empty() {
        return Err(Error::OutOfDomain { what: "eps grid", detail: "empty".into() });
    }
    if !eps_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::OutOfDomain { what: "eps grid", detail: "not strictly ascending".into() });
    }
    if !(eps_grid[0] > fragment_cutoff) || !eps_grid[eps_grid.len() - 1].is_finite() {
        return Err(Error::OutOfDomain {
            what: "eps grid",
            detail: format!("smallest eps {} must exceed the fragment cutoff {fragment_cutoff}", eps_grid[0]),
        });
    }
    Ok(())
}

pub fn fragment_statistics(rec: &CascadeRecord, eps_grid: &[f64], include_root: bool) -> Result<FragmentStats> {
    check_eps_grid(eps_grid, rec.params.fragment_cutoff)?;
    let skip = usize::from(!include_root);
    let mut sizes: Vec<f64> = rec.generations.iter().skip(skip).flat_map(|g| g.fragment_sizes.iter().copied()).collect();
    sizes.sort_unstable_by(f64::total_cmp);
    let compensation: f64 = rec.generations.iter().skip(skip).map(|g| g.fragment_compensation).sum();
    let mut prefix = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for &s in &sizes {
        acc += s;
        prefix.push(acc);
    }
    let mut n_eps = Vec::with_capacity(eps_grid.len());
    let mut m_eps = Vec::with_capacity(eps_grid.len());
    let mut mass_above = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let i = sizes.partition_point(|&s| s <= eps);
        n_eps.push((sizes.len() - i) as u64);
        m_eps.push(prefix[i] + compensation);
        mass_above.push(acc - prefix[i]);
    }
    Ok(FragmentStats {
        eps_grid: eps_grid.to_vec(),
        n_eps,
        m_eps,
        mass_above,
        r: rec.r_total,
        sigma: rec.sigma,
        include_root,
    })
}

/// Mass partition to `1e-10` relative, `N` nonincreasing, `M` nondecreasing.
pub fn record_identities_hold(stats: &FragmentStats, s0: f64) -> bool {
    let target = stats.accounted_mass(s0);
    let partition = stats
        .m_eps
        .iter()
        .zip(&stats.mass_above)
        .all(|(m, a)| (m + a - target).abs() <= 1e-10 * stats.sigma.max(s0));
    let monotone_n = stats.n_eps.windows(2).all(|w| w[0] >= w[1]);
    let monotone_m = stats.m_eps.windows(2).all(|w| w[0] <= w[1]);
    partition && monotone_n && monotone_m
}
