//! Numerical toolkit for the fragmentation of stable Levy trees obtained by
//! marking nodes of the tree at a Poisson rate.
//!
//! The crate is generic over the scalar type ([`Real`], i.e. `f32` or `f64`);
//! the aliases at the crate root pin `f64`, which is what the experiments use.

pub mod analytics;
pub mod cascade;
pub mod error;
pub mod experiments;
pub mod mechanism;
pub mod quadrature;
pub mod replicates;
pub mod rng;
pub mod roots;
pub mod samplers;
pub mod scalar;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use mechanism::{BranchingMechanism, GeneralMechanism, LevyDensity, StableMechanism, TiltedMechanism};
pub use scalar::Real;

pub type Stable = StableMechanism<f64>;
pub type Stable32 = StableMechanism<f32>;
pub type General = GeneralMechanism<f64>;
pub type TiltedStable = TiltedMechanism<Stable, f64>;
