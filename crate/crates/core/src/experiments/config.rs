//! Flat TOML experiment configuration (`schema = 1`).

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Convergence,
    LaplaceXval,
    SecondMoment,
    RLaw,
    Bertoin,
    Moments,
    SamplerGof,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Convergence,
        Self::LaplaceXval,
        Self::SecondMoment,
        Self::RLaw,
        Self::Bertoin,
        Self::Moments,
        Self::SamplerGof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::LaplaceXval => "laplace-xval",
            Self::SecondMoment => "second-moment",
            Self::RLaw => "r-law",
            Self::Bertoin => "bertoin",
            Self::Moments => "moments",
            Self::SamplerGof => "sampler-gof",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self, ExpError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ExpError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Every key is optional except `schema`; unset keys take the per-experiment
/// defaults of [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub experiment: Option<ExperimentKind>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub s0: Option<f64>,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub eps_grid: Option<Vec<f64>>,
    pub replicates: Option<u64>,
    pub draws: Option<u64>,
    pub seed: Option<u64>,
    pub b_over_alpha_grid: Option<Vec<f64>>,
    pub fragment_cutoff: Option<f64>,
    pub node_cutoff: Option<f64>,
    pub k_max: Option<usize>,
    pub mass_tolerance: Option<f64>,
    pub sigma_cap: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub gamma: Option<f64>,
    pub x_grid: Option<Vec<f64>>,
    pub y_grid: Option<Vec<f64>>,
    pub gamma_grid: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<f64>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub b_grid: Option<Vec<f64>>,
    pub rate: Option<f64>,
    pub cutoff: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ExpError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))?;
        if cfg.schema != 1 {
            return Err(ExpError::Config(format!("unsupported schema {} (expected 1)", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ExpError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Configuration with defaults filled in and every constraint checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub experiment: ExperimentKind,
    pub alpha: f64,
    pub theta: f64,
    pub s0: f64,
    pub beta: f64,
    pub eps: f64,
    pub eps_grid: Vec<f64>,
    pub replicates: u64,
    pub draws: u64,
    pub seed: u64,
    pub fragment_cutoff: Option<f64>,
    pub node_cutoff: Option<f64>,
    pub k_max: usize,
    pub mass_tolerance: f64,
    pub sigma_cap: Option<f64>,
    pub lambda: (f64, f64),
    pub x: f64,
    pub y: f64,
    pub gamma: f64,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub b_grid: Vec<f64>,
    pub b_over_alpha_grid: Vec<f64>,
    pub rate: f64,
    pub cutoff: f64,
}

fn bad(msg: impl Into<String>) -> ExpError {
    ExpError::Config(msg.into())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ExpError> {
    if cond {
        Ok(())
    } else {
        Err(bad(msg()))
    }
}

fn check_alpha(a: f64) -> Result<(), ExpError> {
    check(a > 1.0 && a < 2.0, || format!("alpha = {a} must lie in (1, 2)"))
}

fn check_grid(name: &str, grid: &[f64], positive: bool) -> Result<(), ExpError> {
    check(!grid.is_empty(), || format!("{name} is empty"))?;
    for &v in grid {
        check(v.is_finite() && (!positive || v > 0.0), || format!("{name} contains invalid value {v}"))?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn resolve(&self, experiment: ExperimentKind, seed: Option<u64>) -> Result<Resolved, ExpError> {
        if let Some(k) = self.experiment {
            check(k == experiment, || {
                format!("config is for `{}` but `{}` was requested", k.name(), experiment.name())
            })?;
        }
        use ExperimentKind::*;
        let eps_default = match experiment {
            Convergence => vec![1e-4, 10f64.powf(-3.5), 1e-3, 10f64.powf(-2.5), 1e-2],
            _ => vec![0.01],
        };
        let beta = self.beta.unwrap_or(1.0);
        let r = Resolved {
            experiment,
            alpha: self.alpha.unwrap_or(1.5),
            theta: self.theta.unwrap_or(1.0),
            s0: self.s0.unwrap_or(1.0),
            beta,
            eps: self.eps.unwrap_or(0.01),
            eps_grid: self.eps_grid.clone().unwrap_or(match experiment {
                Bertoin => vec![1e-3, 1e-2, 1e-1],
                _ => eps_default,
            }),
            replicates: self.replicates.unwrap_or(match experiment {
                RLaw => 2_000,
                _ => 10_000,
            }),
            draws: self.draws.unwrap_or(1_000_000),
            seed: seed.or(self.seed).unwrap_or(1),
            fragment_cutoff: self.fragment_cutoff,
            node_cutoff: self.node_cutoff,
            k_max: self.k_max.unwrap_or(60),
            mass_tolerance: self.mass_tolerance.unwrap_or(1e-10),
            sigma_cap: self.sigma_cap.or(if beta > 0.0 { Some(50.0 / beta) } else { None }),
            lambda: (self.lambda1.unwrap_or(1.0), self.lambda2.unwrap_or(1.0)),
            x: self.x.unwrap_or(0.1),
            y: self.y.unwrap_or(0.1),
            gamma: self.gamma.unwrap_or(-0.2),
            x_grid: self.x_grid.clone().unwrap_or(vec![0.0, 0.1, 0.3]),
            y_grid: self.y_grid.clone().unwrap_or(vec![0.0, 0.1, 0.3]),
            gamma_grid: self.gamma_grid.clone().unwrap_or(match experiment {
                RLaw => vec![-0.2, -0.05, 0.0, 0.3, 1.0],
                _ => vec![0.0, 0.1, 0.3],
            }),
            beta_grid: self.beta_grid.clone().unwrap_or(vec![0.1, 0.5, 1.0, 2.0, 5.0]),
            alpha_grid: self.alpha_grid.clone().unwrap_or(match experiment {
                Bertoin | Moments => vec![1.2, 1.5, 1.8],
                _ => vec![self.alpha.unwrap_or(1.5)],
            }),
            b_grid: self.b_grid.clone().unwrap_or(vec![0.2, 1.0 / 3.0]),
            b_over_alpha_grid: self.b_over_alpha_grid.clone().unwrap_or(vec![0.45]),
            rate: self.rate.unwrap_or(1.0),
            cutoff: self.cutoff.unwrap_or(1e-3),
        };
        r.validate()?;
        Ok(r)
    }
}

impl Resolved {
    fn validate(&self) -> Result<(), ExpError> {
        use ExperimentKind::*;
        check_alpha(self.alpha)?;
        for &a in &self.alpha_grid {
            check_alpha(a)?;
        }
        check(self.theta > 0.0 && self.theta.is_finite(), || format!("theta = {} must be > 0", self.theta))?;
        check(self.s0 > 0.0 && self.s0.is_finite(), || format!("s0 = {} must be > 0", self.s0))?;
        check(self.beta >= 0.0 && self.beta.is_finite(), || format!("beta = {} must be >= 0", self.beta))?;
        check(self.replicates >= 1, || "replicates must be at least 1".into())?;
        check(self.draws >= 1, || "draws must be at least 1".into())?;
        check(self.k_max >= 1, || "k_max must be at least 1".into())?;
        check(self.mass_tolerance >= 0.0 && self.mass_tolerance < 1.0, || {
            "mass_tolerance (relative to s0) must lie in [0, 1)".into()
        })?;
        if let Some(c) = self.sigma_cap {
            check(c > self.s0, || format!("sigma_cap = {c} must exceed s0"))?;
        }
        for (name, v) in [("fragment_cutoff", self.fragment_cutoff), ("node_cutoff", self.node_cutoff)] {
            if let Some(v) = v {
                check(v > 0.0 && v.is_finite(), || format!("{name} = {v} must be > 0"))?;
            }
        }
        check(self.eps > 0.0, || format!("eps = {} must be > 0", self.eps))?;
        check_grid("eps_grid", &self.eps_grid, true)?;
        check(self.eps_grid.windows(2).all(|w| w[0] < w[1]), || {
            "eps_grid must be strictly ascending".into()
        })?;
        if let Some(c) = self.fragment_cutoff {
            let min = self.eps_grid.iter().copied().fold(f64::INFINITY, f64::min).min(self.eps);
            check(c < min, || format!("fragment_cutoff = {c} must be below the smallest eps {min}"))?;
        }
        for (name, g) in [("x_grid", &self.x_grid), ("y_grid", &self.y_grid)] {
            check_grid(name, g, false)?;
            check(g.iter().all(|&v| v >= 0.0), || format!("{name} must be nonnegative"))?;
        }
        check_grid("gamma_grid", &self.gamma_grid, false)?;
        check_grid("beta_grid", &self.beta_grid, false)?;
        check(self.beta_grid.iter().all(|&b| b >= 0.0), || "beta_grid must be nonnegative".into())?;
        check_grid("b_grid", &self.b_grid, false)?;
        check(self.x >= 0.0 && self.y >= 0.0 && self.gamma.is_finite(), || "x, y must be >= 0".into())?;
        check(self.rate >= 0.0 && self.rate.is_finite(), || format!("rate = {} must be >= 0", self.rate))?;
        check(self.cutoff > 0.0 && self.cutoff.is_finite(), || format!("cutoff = {} must be > 0", self.cutoff))?;
        match self.experiment {
            Convergence => check(self.eps_grid.len() >= 4, || "convergence needs at least 4 eps grid points for the slope fit".into())?,
            LaplaceXval | SecondMoment => check(self.beta > 0.0, || "beta must be > 0".into())?,
            Bertoin => check(self.eps_grid.iter().all(|&e| e < 0.5), || "bertoin eps must lie in (0, 1/2)".into())?,
            _ => {}
        }
        Ok(())
    }
}
