//! Regime-specific corrector fields, the flat-layer averaging operator, and
//! the error functionals of the convergence study.
//!
//! The corrector `W_eps` is the explicitly constructible approximation of
//! `grad u_eps`: in the weak regime
//! `W = (u' / (g^(p'-1) <g^-(p'-1)>), 0)` with `g` at the fast abscissa; in
//! the resonant regime `W = u'(x) grad_y v(x/eps mod L, y/eps)` with `v` the
//! cell solution; in the strong regime `W = (u', 0)` on the flat layer and
//! zero above it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{ap_vec, CellSolution, FemFunction, FemFunction1d, TRI_QUAD3};
use crate::geometry::{mean_over_period, PLaplaceExponent, Regime, ThinDomainSpec, Transform};
use crate::mesh::{vertical_segment_integral, MeshLocator, TriangleMesh};

struct CellEval {
    locator: MeshLocator,
    /// `grad v = e1 + grad w` per cell element.
    grad_v: Vec<[f64; 2]>,
    period: f64,
    g_max: f64,
}

/// Evaluator of the corrector `W_eps(x, y)`.
pub struct CorrectorField {
    pub regime: Regime,
    spec: ThinDomainSpec,
    u: FemFunction1d,
    cell: Option<CellEval>,
    /// `<g^-(p'-1)>` over one period (weak regime only).
    weak_inv_mean: Option<f64>,
    pprime_m1: f64,
    sx: f64,
    eps_g0: f64,
}

impl CorrectorField {
    /// Derivative of the limit solution at `x` (elementwise constant).
    pub fn du(&self, x: f64) -> f64 {
        self.u.slope_at(x)
    }

    /// The corrector vector at a point of the thin domain.
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let du = self.u.slope_at(x);
        match self.regime {
            Regime::Weak => {
                let g = self.spec.profile.eval(x / self.sx);
                let denom = g.powf(self.pprime_m1) * self.weak_inv_mean.unwrap();
                [du / denom, 0.0]
            }
            Regime::Resonant => {
                let cell = self.cell.as_ref().unwrap();
                let y1 = (x / self.sx).rem_euclid(cell.period);
                let y2 = (y / self.spec.epsilon).min(cell.g_max);
                let (e, _) = cell
                    .locator
                    .locate(y1, y2)
                    .expect("fast point must lie in the cell mesh");
                let g = cell.grad_v[e];
                [du * g[0], du * g[1]]
            }
            Regime::Strong => {
                if y < self.eps_g0 {
                    [du, 0.0]
                } else {
                    [0.0, 0.0]
                }
            }
        }
    }
}

/// Builds the corrector for the given regime. The cell solution is required
/// exactly in the resonant regime; the exponent enters the weak-regime
/// formula through `p' - 1`.
pub fn corrector(
    regime: Regime,
    u: &FemFunction1d,
    cell: Option<&CellSolution>,
    spec: &ThinDomainSpec,
    exponent: &PLaplaceExponent,
) -> Result<CorrectorField> {
    let pprime_m1 = exponent.p_conj - 1.0;
    let cell_eval = match regime {
        Regime::Resonant => {
            let cs = cell.ok_or(Error::MissingCellSolution)?;
            let grad_v = (0..cs.mesh.n_elements()).map(|e| cs.grad_v(e)).collect();
            Some(CellEval {
                locator: MeshLocator::new(cs.mesh.clone()),
                grad_v,
                period: spec.profile.period(),
                g_max: spec.profile.g_max(),
            })
        }
        _ => None,
    };
    let weak_inv_mean = match regime {
        Regime::Weak => Some(mean_over_period(
            &spec.profile,
            Transform::Power(-pprime_m1),
        )?),
        _ => None,
    };
    Ok(CorrectorField {
        regime,
        spec: spec.clone(),
        u: u.clone(),
        cell: cell_eval,
        weak_inv_mean,
        pprime_m1,
        sx: spec.x_scale(),
        eps_g0: spec.epsilon * spec.profile.g_min(),
    })
}

/// The flat-layer vertical average
/// `V(x) = (1 / (eps g0)) int_0^{eps g0} u(x, s) ds`,
/// evaluated by exact per-element line quadrature.
pub struct VerticalAverage {
    mesh: Arc<TriangleMesh>,
    values: Vec<f64>,
    height: f64,
}

impl VerticalAverage {
    pub fn eval(&self, x: f64) -> f64 {
        vertical_segment_integral(&self.mesh, &self.values, x, 0.0, self.height) / self.height
    }
}

pub fn average_v(spec: &ThinDomainSpec, u_eps: &FemFunction) -> VerticalAverage {
    VerticalAverage {
        mesh: u_eps.mesh.clone(),
        values: u_eps.values.clone(),
        height: spec.epsilon * spec.profile.g_min(),
    }
}

/// The error functionals of one epsilon row.
#[derive(Clone, Debug)]
pub struct ErrorMetrics {
    /// `||| u_eps - u |||_{L^p(R^eps)}`.
    pub lp_error: f64,
    /// `||| grad u_eps - W_eps |||_{L^p(R^eps)}`.
    pub corrector_error: f64,
    /// `||| u_eps - V_eps |||_{L^p(R^eps)}`.
    pub v_average_error: f64,
    /// `|| Pi_eps grad u_eps - (u', 0) ||_{L^p(R_-)}` (strong regime only).
    pub grad_rminus_error: Option<f64>,
    /// `||| grad u_eps |||_{L^p(R_+^eps)}` (strong regime only).
    pub grad_rplus_norm: Option<f64>,
}

/// Evaluates every error functional in one sweep over the mesh. The limit
/// solution is extended to the thin domain as a function of `x` alone.
pub fn error_metrics(
    spec: &ThinDomainSpec,
    u_eps: &FemFunction,
    u: &FemFunction1d,
    w: &CorrectorField,
    p: f64,
) -> ErrorMetrics {
    let mesh = &u_eps.mesh;
    let vavg = average_v(spec, u_eps);
    let strong = matches!(spec.regime(), Regime::Strong);
    let y_split = spec.epsilon * spec.profile.g_min();

    let mut lp = 0.0;
    let mut corr = 0.0;
    let mut vdev = 0.0;
    let mut rminus = 0.0;
    let mut rplus = 0.0;
    for e in 0..mesh.n_elements() {
        let area = mesh.areas[e];
        let grad = u_eps.gradient(e);
        let below = strong && mesh.centroid(e)[1] < y_split;
        let pts = mesh.element_coords(e);
        for (bary, wq) in &TRI_QUAD3 {
            let x = bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0];
            let y = bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1];
            let aw = area * wq;
            let ue = u_eps.value_at(e, bary);
            let ux = u.eval(x);
            lp += aw * (ue - ux).abs().powf(p);
            let wv = w.eval(x, y);
            corr += aw
                * ((grad[0] - wv[0]).powi(2) + (grad[1] - wv[1]).powi(2))
                    .sqrt()
                    .powf(p);
            vdev += aw * (ue - vavg.eval(x)).abs().powf(p);
            if strong {
                if below {
                    let du = u.slope_at(x);
                    rminus += aw
                        * ((grad[0] - du).powi(2) + grad[1].powi(2)).sqrt().powf(p);
                } else {
                    rplus += aw * (grad[0].powi(2) + grad[1].powi(2)).sqrt().powf(p);
                }
            }
        }
    }
    let root = |v: f64| (v / spec.epsilon).powf(1.0 / p);
    ErrorMetrics {
        lp_error: root(lp),
        corrector_error: root(corr),
        v_average_error: root(vdev),
        grad_rminus_error: strong.then(|| root(rminus)),
        grad_rplus_norm: strong.then(|| root(rplus)),
    }
}

/// `||| u |||_{W^{1,p}(R^eps)} = eps^(-1/p) (int |u|^p + |grad u|^p)^(1/p)`.
pub fn rescaled_w1p_norm(spec: &ThinDomainSpec, u_eps: &FemFunction, p: f64) -> f64 {
    let mesh = &u_eps.mesh;
    let mut acc = 0.0;
    for e in 0..mesh.n_elements() {
        let grad = u_eps.gradient(e);
        let gn = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
        let area = mesh.areas[e];
        acc += area * gn.powf(p);
        for (bary, wq) in &TRI_QUAD3 {
            acc += area * wq * u_eps.value_at(e, bary).abs().powf(p);
        }
    }
    (acc / spec.epsilon).powf(1.0 / p)
}

/// Flux of the converged field, `a_p(grad u)` per element; used by audits.
pub fn element_flux(u_eps: &FemFunction, p: f64, e: usize) -> [f64; 2] {
    ap_vec(p, u_eps.gradient(e))
}
