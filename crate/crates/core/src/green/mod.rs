//! Minimal Green's functions with the normalization `ΔG = −δ` (unit flux).

pub mod bounds;
pub mod kernel;
pub mod levelset;

pub use bounds::{
    annulus_l2_decay, gradient_estimate_check, inclusion_checks, levelset_flux_bound,
    lower_envelope_check, pointwise_bounds_scan, AnnulusDecay, FluxBoundFit, GradientReport,
    InclusionReport, LowerEnvelope, PointwiseFit,
};
pub use kernel::{
    exhaustion_green, radial_green, radial_green_derivative, radial_kernel, symmetry_check,
    Construction, GreenKernel, SymmetryReport,
};
pub use levelset::{
    band_integrals, band_source_integral, coarea_identity_check, default_flux_thresholds,
    flux_on_level_set, flux_statistics, superlevel_mass, CoareaReport, FluxStats, GradientField,
    LevelSetDecomposition,
};
