//! Numerical laboratory for the Neumann p-Laplacian on thin two-dimensional
//! domains whose top boundary oscillates with period `eps^alpha`.
//!
//! The crate solves the full 2D problem, the periodic cell problem on the
//! reference cell, and the 1D limit problem; computes the effective diffusion
//! coefficient `q` in the three oscillation regimes (weak `alpha < 1`,
//! resonant `alpha = 1`, strong `alpha > 1`); and validates unfolding-operator
//! identities and corrector error functionals over epsilon sweeps.

pub mod correctors;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod homogenization;
pub mod linalg;
pub mod mesh;
pub mod sweep;
pub mod unfolding;
pub mod util;

pub use correctors::{
    average_v, corrector, error_metrics, rescaled_w1p_norm, CorrectorField, ErrorMetrics,
    VerticalAverage,
};
pub use error::{Error, Result};
pub use fem::{
    assemble_jacobian, assemble_residual, energy, flux, solve_cell, solve_limit_1d, solve_neumann, CellSolution, FemFunction, FemFunction1d,
    NonlinearReport, SolverSettings, SourceTerm, SymTriplets,
};
pub use geometry::{
    eval_profile, mean_over_period, partition, BoundaryProfile, CellDomain, CellGeometry,
    DomainPartition, PLaplaceExponent, ProfileKind, Regime, ThinDomainSpec, Transform,
};
pub use homogenization::{
    effective_coefficient, limit_forcing, q_resonant, q_strong, q_weak, solve_limit, FhatForm,
    Forcing, ForcingSpec, LimitForcing, LimitProblem,
};
pub use mesh::{
    connected_components, matching_cell_mesh, mesh_cell, mesh_interval, mesh_thin_domain,
    split_at_height, write_mesh_dump, BoundaryTag, IntervalMesh, MeshLocator, TriangleMesh,
};
pub use sweep::{
    emit_outputs, parse_config, parse_config_str, run_sweep, MeshPolicy, RunConfig, SweepReport,
    SweepRow,
};
pub use unfolding::{
    property_suite, rescale_pi, rescaled_norm, unfold, unfold_fn, unfold_integral_check,
    PropertyCheck, UnfoldedField, YStarQuadrature,
};
