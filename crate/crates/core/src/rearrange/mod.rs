//! Rearrangement classes: quantile couplings, class and orbit distances, and
//! measure-preserving perturbations for extremality probes.

mod flow;
mod orbit;
mod quantile;

pub use flow::{
    extremality_probe, flow_perturbation, random_stream, FlowResult, ProbeMode, ProbeOptions, ProbeReport,
    ProbeSample,
};
pub use orbit::{e2_orbit_distance, orbit_distance, Group, OrbitDistanceReport, DEFAULT_KAPPA};
pub(crate) use orbit::lp_distance;
pub use quantile::{
    class_distance, in_class, quantile, smooth_class_distance, SmoothQuantile, WeightedSample,
};
