//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use thinhom_core::{
    mesh_thin_domain, BoundaryProfile, ThinDomainSpec, TriangleMesh,
};

pub fn comb_profile() -> BoundaryProfile {
    BoundaryProfile::piecewise_constant(2.0, &[0.0, 1.0], &[1.0, 2.0]).expect("valid profile")
}

pub fn comb_spec(eps: f64, alpha: f64) -> ThinDomainSpec {
    ThinDomainSpec::new(eps, alpha, comb_profile()).expect("valid spec")
}

pub fn thin_mesh(eps: f64, alpha: f64) -> (ThinDomainSpec, Arc<TriangleMesh>) {
    let spec = comb_spec(eps, alpha);
    let h = spec.cell_width() / 8.0;
    let mesh = Arc::new(mesh_thin_domain(&spec, h).expect("meshable"));
    (spec, mesh)
}
