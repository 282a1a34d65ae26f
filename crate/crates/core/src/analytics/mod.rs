//! Deterministic oracles: the Laplace fixed point, second-moment
//! coefficients, the root equation for the law of `R`, and the small-fragment
//! functions of the dislocation measure.

pub mod bertoin;
pub mod laplace;
pub mod moments;
pub mod r_law;

pub use bertoin::{bertoin_closed_forms, bertoin_mc, bertoin_mc_grid, BertoinClosedForms, BertoinEstimates, Estimate};
pub use laplace::{
    conditional_laplace, solve_fixed_point, tagged_integral, tilted_excursion_functional, FixedPointResult, LaplaceArgs,
};
pub use moments::{contraction_routes, second_moment, MomentCoeffs, SecondMoment};
pub use r_law::{r_law_fixed_point_route, solve_r_law_root, RLawRoot};

use crate::mechanism::{StableMechanism, TiltedMechanism};

/// Stable mechanism tilted by `theta`, in any scalar type.
pub type Tilted<T> = TiltedMechanism<StableMechanism<T>, T>;
