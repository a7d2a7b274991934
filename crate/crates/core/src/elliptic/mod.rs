//! Steady states `ζ = g(Gζ + βp·x)`: nonlinearity extension, Legendre
//! transform, damped fixed-point solver and rigidity diagnostics.

mod conjugate;
mod nonlinearity;
mod rigidity;
mod solver;

pub use conjugate::{legendre_transform, legendre_transform_of, LegendreTransform};
pub use nonlinearity::{extend_nonlinearity, Monotonicity, NonlinearitySpec, ScalarFn};
pub use rigidity::{
    best_axis, rotation_defect_outside_e2, spectral_gap, zonality_defect, AxisChoice,
    MOMENT_TOLERANCE,
};
pub(crate) use rigidity::real_basis;
pub use solver::{solve_fixed_point, steady_map, FixedPointOptions, SteadyState};
