//! Poisson problems `Δu = f` with decaying sources, and the certificates of
//! growth, decay and barrier bounds.

pub mod certificates;
pub mod routes;
pub mod series;
pub mod source;

pub use certificates::{
    barrier_check, decay_certificate, growth_certificate, BarrierReport, DecayCertificate,
    GrowthFit,
};
pub use routes::{
    radial_values, route_agreement, solve_exhaustion, solve_green_integral, solve_radial,
    ExhaustionRun, PoissonSolution, Route, RouteAgreement,
};
pub use series::{
    claim_bound, levelset_estimate_check, levelset_estimate_sweep, m0, series_tail_check,
    LevelSetEstimate, SeriesTail,
};
pub use source::{manufactured_solution, DecayingSource, RadialFn};
