//! Discrete p-Laplacian problems: the full Neumann problem on the thin
//! domain, the periodic zero-average cell problem, and the 1D limit problem.
//!
//! All three share one Newton solver with continuation over a decreasing
//! regularization `delta`: the flux is `(delta^2 + |s|^2)^((p-2)/2) s`, which
//! covers both the singular (`p < 2`) and degenerate (`p > 2`) cases, and the
//! zeroth-order term is regularized the same way so the Jacobian stays
//! definite. Linear systems go through the skyline Cholesky; the cell
//! problem's zero-average constraint is handled with a single scalar
//! multiplier solved exactly through a rank-one grounding of the stiffness.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::PLaplaceExponent;
use crate::linalg::SkylineSolver;
use crate::mesh::{IntervalMesh, TriangleMesh};

/// Interior 3-point triangle rule, exact for quadratics.
pub const TRI_QUAD3: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// 7-point triangle rule, exact for quintics. Used where quadrature error
/// must stay below the quantity being measured (error norms in tests).
pub const TRI_QUAD7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    (
        [0.059_715_871_789_77, 0.470_142_064_105_115, 0.470_142_064_105_115],
        0.132_394_152_788_506,
    ),
    (
        [0.470_142_064_105_115, 0.059_715_871_789_77, 0.470_142_064_105_115],
        0.132_394_152_788_506,
    ),
    (
        [0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_77],
        0.132_394_152_788_506,
    ),
    (
        [0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456],
        0.125_939_180_544_827,
    ),
    (
        [0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456],
        0.125_939_180_544_827,
    ),
    (
        [0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087],
        0.125_939_180_544_827,
    ),
];

/// Two-point Gauss rule on [0, 1].
pub const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187, 0.5),
    (0.788_675_134_594_813, 0.5),
];

/// The regularized flux `(delta^2 + |s|^2)^((p-2)/2) s`. At `delta = 0` this
/// is `a_p(s) = |s|^(p-2) s`, singular at `s = 0` when `p < 2`.
pub fn flux(exponent: &PLaplaceExponent, delta: f64, s: [f64; 2]) -> Result<[f64; 2]> {
    let p = exponent.p;
    let norm2 = delta * delta + s[0] * s[0] + s[1] * s[1];
    if norm2 == 0.0 {
        if p < 2.0 {
            return Err(Error::SingularFlux);
        }
        return Ok([0.0, 0.0]);
    }
    let c = norm2.powf(0.5 * (p - 2.0));
    Ok([c * s[0], c * s[1]])
}

/// `a_p` extended by continuity with `a_p(0) = 0`; total for every `p > 1`.
/// Used in quadratures of converged solutions, where the limit value is the
/// right one.
pub fn ap_vec(p: f64, s: [f64; 2]) -> [f64; 2] {
    let norm2 = s[0] * s[0] + s[1] * s[1];
    if norm2 == 0.0 {
        return [0.0, 0.0];
    }
    let c = norm2.powf(0.5 * (p - 2.0));
    [c * s[0], c * s[1]]
}

fn ap_scalar(p: f64, delta: f64, s: f64) -> f64 {
    let norm2 = delta * delta + s * s;
    if norm2 == 0.0 {
        return 0.0;
    }
    norm2.powf(0.5 * (p - 2.0)) * s
}

/// Derivative of the scalar regularized flux.
fn ap_scalar_prime(p: f64, delta: f64, s: f64) -> f64 {
    let norm2 = delta * delta + s * s;
    if norm2 == 0.0 {
        return 0.0;
    }
    norm2.powf(0.5 * (p - 2.0)) * (1.0 + (p - 2.0) * s * s / norm2)
}

/// `(1/p) (delta^2 + |s|^2)^(p/2)`, the gradient-term energy density.
fn grad_energy_density(p: f64, delta: f64, norm2: f64) -> f64 {
    (delta * delta + norm2).powf(0.5 * p) / p
}

/// Zeroth-order energy density with the constant shifted off so it vanishes
/// at `u = 0`: `(1/p) [(delta^2 + u^2)^(p/2) - delta^p]`.
fn zeroth_energy_density(p: f64, delta: f64, u: f64) -> f64 {
    ((delta * delta + u * u).powf(0.5 * p) - (delta * delta).powf(0.5 * p)) / p
}

/// A piecewise-linear field on a triangle mesh. Nodal values of periodic
/// pairs always agree.
#[derive(Clone, Debug)]
pub struct FemFunction {
    pub mesh: Arc<TriangleMesh>,
    pub values: Vec<f64>,
}

impl FemFunction {
    pub fn zeros(mesh: Arc<TriangleMesh>) -> Self {
        let n = mesh.n_nodes();
        Self {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn interpolate(mesh: Arc<TriangleMesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh.nodes.iter().map(|n| f(n[0], n[1])).collect();
        Self { mesh, values }
    }

    pub fn value_at(&self, e: usize, bary: &[f64; 3]) -> f64 {
        let [a, b, c] = self.mesh.elements[e];
        bary[0] * self.values[a] + bary[1] * self.values[b] + bary[2] * self.values[c]
    }

    /// Constant gradient on element `e`.
    pub fn gradient(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.mesh.elements[e];
        let g = self.mesh.hat_gradients(e);
        [
            self.values[a] * g[0][0] + self.values[b] * g[1][0] + self.values[c] * g[2][0],
            self.values[a] * g[0][1] + self.values[b] * g[1][1] + self.values[c] * g[2][1],
        ]
    }
}

/// A piecewise-linear field on an interval mesh.
#[derive(Clone, Debug)]
pub struct FemFunction1d {
    pub mesh: Arc<IntervalMesh>,
    pub values: Vec<f64>,
}

impl FemFunction1d {
    pub fn interpolate(mesh: Arc<IntervalMesh>, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.nodes.iter().map(|&x| f(x)).collect();
        Self { mesh, values }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let e = self.mesh.element_of(x);
        let (x0, x1) = (self.mesh.nodes[e], self.mesh.nodes[e + 1]);
        let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        self.values[e] * (1.0 - t) + self.values[e + 1] * t
    }

    /// Elementwise-constant derivative at `x`.
    pub fn slope_at(&self, x: f64) -> f64 {
        self.slope(self.mesh.element_of(x))
    }

    pub fn slope(&self, e: usize) -> f64 {
        (self.values[e + 1] - self.values[e]) / (self.mesh.nodes[e + 1] - self.mesh.nodes[e])
    }
}

/// Forcing data for the 2D problem: an x-only callable or a nodal field.
pub enum SourceTerm<'a> {
    XOnly(&'a (dyn Fn(f64) -> f64 + Sync)),
    Fem(&'a FemFunction),
}

impl<'a> SourceTerm<'a> {
    fn eval(&self, e: usize, x: f64, _y: f64, bary: &[f64; 3]) -> f64 {
        match self {
            SourceTerm::XOnly(f) => f(x),
            SourceTerm::Fem(u) => u.value_at(e, bary),
        }
    }
}

/// Continuation and Newton controls.
#[derive(Clone, Debug)]
pub struct SolverSettings {
    /// Strictly decreasing positive regularization values.
    pub delta_schedule: Vec<f64>,
    pub newton_tol_rel: f64,
    pub newton_tol_abs: f64,
    /// Iteration cap per delta stage.
    pub max_newton: usize,
    pub backtrack_factor: f64,
    pub sufficient_decrease: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            delta_schedule: (1..=10).map(|k| 10f64.powi(-k)).collect(),
            newton_tol_rel: 1e-10,
            newton_tol_abs: 1e-12,
            max_newton: 50,
            backtrack_factor: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        let s = &self.delta_schedule;
        if s.is_empty() || s.iter().any(|&d| !(d > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "delta_schedule must be strictly decreasing and positive".into(),
            ));
        }
        Ok(())
    }

    /// The schedule actually run: a single stage suffices when the problem is
    /// linear (p = 2 makes the flux independent of delta).
    fn effective_schedule(&self, exponent: &PLaplaceExponent) -> Vec<f64> {
        if exponent.is_linear() {
            vec![*self.delta_schedule.last().unwrap()]
        } else {
            self.delta_schedule.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct DeltaStage {
    pub delta: f64,
    pub iterations: usize,
    /// Energy at stage entry, then after each accepted step.
    pub energies: Vec<f64>,
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct NonlinearReport {
    pub stages: Vec<DeltaStage>,
    pub converged: bool,
    pub total_newton_iterations: usize,
    pub final_residual_norm: f64,
    pub final_energy: f64,
}

// ---------------------------------------------------------------------------
// degrees of freedom
// ---------------------------------------------------------------------------

/// Node-to-dof map folding periodic pairs into shared unknowns.
#[derive(Clone, Debug)]
pub(crate) struct DofMap {
    pub node_dof: Vec<usize>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn new(n_nodes: usize, pairs: &[(usize, usize)]) -> Self {
        let mut parent: Vec<usize> = (0..n_nodes).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for &(a, b) in pairs {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut node_dof = vec![usize::MAX; n_nodes];
        let mut n_dofs = 0;
        for i in 0..n_nodes {
            let r = find(&mut parent, i);
            if node_dof[r] == usize::MAX {
                node_dof[r] = n_dofs;
                n_dofs += 1;
            }
            node_dof[i] = node_dof[r];
        }
        Self { node_dof, n_dofs }
    }

    /// Spreads dof values back to nodes.
    pub fn scatter(&self, dof_values: &[f64]) -> Vec<f64> {
        self.node_dof.iter().map(|&d| dof_values[d]).collect()
    }
}

// ---------------------------------------------------------------------------
// 2D assembly
// ---------------------------------------------------------------------------

struct Assembler2d<'a> {
    mesh: &'a TriangleMesh,
    dofs: &'a DofMap,
    grads: Vec<[[f64; 2]; 3]>,
    exponent: PLaplaceExponent,
    /// Added to the P1 gradient before the flux (the cell problem shifts by
    /// `e_1` to solve for `w = v - y1`).
    grad_shift: [f64; 2],
    with_zeroth: bool,
    source: Option<&'a SourceTerm<'a>>,
}

impl<'a> Assembler2d<'a> {
    fn new(
        mesh: &'a TriangleMesh,
        dofs: &'a DofMap,
        exponent: PLaplaceExponent,
        grad_shift: [f64; 2],
        with_zeroth: bool,
        source: Option<&'a SourceTerm<'a>>,
    ) -> Self {
        let grads = (0..mesh.n_elements()).map(|e| mesh.hat_gradients(e)).collect();
        Self {
            mesh,
            dofs,
            grads,
            exponent,
            grad_shift,
            with_zeroth,
            source,
        }
    }

    fn nodal(&self, u_dof: &[f64], e: usize) -> ([usize; 3], [f64; 3]) {
        let nodes = self.mesh.elements[e];
        let vals = [
            u_dof[self.dofs.node_dof[nodes[0]]],
            u_dof[self.dofs.node_dof[nodes[1]]],
            u_dof[self.dofs.node_dof[nodes[2]]],
        ];
        (nodes, vals)
    }

    fn local_gradient(&self, e: usize, vals: &[f64; 3]) -> [f64; 2] {
        let g = &self.grads[e];
        [
            vals[0] * g[0][0] + vals[1] * g[1][0] + vals[2] * g[2][0] + self.grad_shift[0],
            vals[0] * g[0][1] + vals[1] * g[1][1] + vals[2] * g[2][1] + self.grad_shift[1],
        ]
    }

    fn energy(&self, u_dof: &[f64], delta: f64) -> f64 {
        let p = self.exponent.p;
        let mut acc = 0.0;
        for e in 0..self.mesh.n_elements() {
            let (nodes, vals) = self.nodal(u_dof, e);
            let area = self.mesh.areas[e];
            let s = self.local_gradient(e, &vals);
            acc += area * grad_energy_density(p, delta, s[0] * s[0] + s[1] * s[1]);
            if self.with_zeroth || self.source.is_some() {
                let coords = [
                    self.mesh.nodes[nodes[0]],
                    self.mesh.nodes[nodes[1]],
                    self.mesh.nodes[nodes[2]],
                ];
                for (bary, w) in &TRI_QUAD3 {
                    let uq = bary[0] * vals[0] + bary[1] * vals[1] + bary[2] * vals[2];
                    let xq =
                        bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0];
                    let yq =
                        bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1];
                    let mut dens = 0.0;
                    if self.with_zeroth {
                        dens += zeroth_energy_density(p, delta, uq);
                    }
                    if let Some(f) = self.source {
                        dens -= f.eval(e, xq, yq, bary) * uq;
                    }
                    acc += area * w * dens;
                }
            }
        }
        acc
    }

    fn residual(&self, u_dof: &[f64], delta: f64) -> Vec<f64> {
        let p = self.exponent.p;
        let mut r = vec![0.0; self.dofs.n_dofs];
        for e in 0..self.mesh.n_elements() {
            let (nodes, vals) = self.nodal(u_dof, e);
            let area = self.mesh.areas[e];
            let g = &self.grads[e];
            let s = self.local_gradient(e, &vals);
            let sn2 = delta * delta + s[0] * s[0] + s[1] * s[1];
            let c = if sn2 == 0.0 { 0.0 } else { sn2.powf(0.5 * (p - 2.0)) };
            let fl = [c * s[0], c * s[1]];
            for k in 0..3 {
                r[self.dofs.node_dof[nodes[k]]] += area * (fl[0] * g[k][0] + fl[1] * g[k][1]);
            }
            if self.with_zeroth || self.source.is_some() {
                let coords = [
                    self.mesh.nodes[nodes[0]],
                    self.mesh.nodes[nodes[1]],
                    self.mesh.nodes[nodes[2]],
                ];
                for (bary, w) in &TRI_QUAD3 {
                    let uq = bary[0] * vals[0] + bary[1] * vals[1] + bary[2] * vals[2];
                    let xq =
                        bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0];
                    let yq =
                        bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1];
                    let mut dens = 0.0;
                    if self.with_zeroth {
                        dens += ap_scalar(p, delta, uq);
                    }
                    if let Some(f) = self.source {
                        dens -= f.eval(e, xq, yq, bary);
                    }
                    for k in 0..3 {
                        r[self.dofs.node_dof[nodes[k]]] += area * w * dens * bary[k];
                    }
                }
            }
        }
        r
    }

    /// Fills the Jacobian; returns the mean diagonal magnitude (used to scale
    /// the constraint grounding).
    fn fill_jacobian(&self, u_dof: &[f64], delta: f64, solver: &mut SkylineSolver) -> f64 {
        let p = self.exponent.p;
        solver.reset();
        let mut diag_sum = 0.0;
        for e in 0..self.mesh.n_elements() {
            let (nodes, vals) = self.nodal(u_dof, e);
            let area = self.mesh.areas[e];
            let g = &self.grads[e];
            let s = self.local_gradient(e, &vals);
            let sn2 = delta * delta + s[0] * s[0] + s[1] * s[1];
            let (c, cf) = if sn2 == 0.0 {
                (0.0, 0.0)
            } else {
                let c = sn2.powf(0.5 * (p - 2.0));
                (c, c * (p - 2.0) / sn2)
            };
            // flux Jacobian D = c I + cf s s^T
            let d = [
                [c + cf * s[0] * s[0], cf * s[0] * s[1]],
                [cf * s[0] * s[1], c + cf * s[1] * s[1]],
            ];
            let mut mass = [[0.0f64; 3]; 3];
            if self.with_zeroth {
                for (bary, w) in &TRI_QUAD3 {
                    let uq = bary[0] * vals[0] + bary[1] * vals[1] + bary[2] * vals[2];
                    let m = ap_scalar_prime(p, delta, uq);
                    for i in 0..3 {
                        for j in 0..=i {
                            mass[i][j] += area * w * m * bary[i] * bary[j];
                        }
                    }
                }
            }
            for i in 0..3 {
                for j in 0..=i {
                    let stiff = area
                        * (g[i][0] * (d[0][0] * g[j][0] + d[0][1] * g[j][1])
                            + g[i][1] * (d[1][0] * g[j][0] + d[1][1] * g[j][1]));
                    let v = stiff + mass[i][j];
                    let (di, dj) = (self.dofs.node_dof[nodes[i]], self.dofs.node_dof[nodes[j]]);
                    solver.add(di, dj, if di == dj && i != j { 2.0 * v } else { v });
                    if di == dj {
                        diag_sum += if i != j { 2.0 * v } else { v };
                    }
                }
            }
        }
        diag_sum / self.dofs.n_dofs as f64
    }

    fn scale_hint(&self, u_dof: &[f64]) -> f64 {
        let mut m = u_dof.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for e in 0..self.mesh.n_elements() {
            let (_, vals) = self.nodal(u_dof, e);
            let s = self.local_gradient(e, &vals);
            m = m.max((s[0] * s[0] + s[1] * s[1]).sqrt());
        }
        m
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(3 * self.mesh.n_elements());
        for e in &self.mesh.elements {
            for k in 0..3 {
                let a = self.dofs.node_dof[e[k]];
                let b = self.dofs.node_dof[e[(k + 1) % 3]];
                edges.push((a, b));
            }
        }
        edges
    }
}

// ---------------------------------------------------------------------------
// Newton with continuation
// ---------------------------------------------------------------------------

trait NonlinearSystem {
    fn residual(&self, u: &[f64], delta: f64) -> Vec<f64>;
    fn fill_jacobian(&self, u: &[f64], delta: f64, solver: &mut SkylineSolver) -> f64;
    fn energy(&self, u: &[f64], delta: f64) -> f64;
    /// Zero-average constraint vector, if any.
    fn constraint(&self) -> Option<&[f64]>;
    /// Largest gradient/value magnitude of the iterate; rough iterates get
    /// extra continuation stages at comparable regularization.
    fn scale_hint(&self, u: &[f64]) -> f64;
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One Newton direction. Without a constraint this is `J dx = -r`; with the
/// zero-average vector `a` it solves the saddle system
/// `[J a; a^T 0] [dx; mu] = [-r; -a^T u]` exactly via the rank-one grounding
/// `K = J + sigma e_g e_g^T` (which makes `K` definite on the constant mode)
/// and three SPD solves.
fn newton_direction(
    solver: &mut SkylineSolver,
    r: &[f64],
    constraint: Option<&[f64]>,
    u: &[f64],
    sigma: f64,
    ground: usize,
) -> Result<Vec<f64>> {
    let b: Vec<f64> = r.iter().map(|x| -x).collect();
    match constraint {
        None => {
            solver.factorize()?;
            Ok(solver.solve(&b))
        }
        Some(a) => {
            solver.add(ground, ground, sigma);
            solver.factorize()?;
            let uu = solver.solve(&b);
            let mut eg = vec![0.0; b.len()];
            eg[ground] = 1.0;
            let v = solver.solve(&eg);
            let z = solver.solve(a);
            let c = -dot(a, u);
            // [1 - sigma v_g    z_g ] [t ]   [u_g    ]
            // [sigma a.v      -(a.z)] [mu] = [c - a.u]
            let a11 = 1.0 - sigma * v[ground];
            let a12 = z[ground];
            let a21 = sigma * dot(a, &v);
            let a22 = -dot(a, &z);
            let rhs1 = uu[ground];
            let rhs2 = c - dot(a, &uu);
            let det = a11 * a22 - a12 * a21;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::SingularJacobian { row: 0, pivot: det });
            }
            let t = (rhs1 * a22 - a12 * rhs2) / det;
            let mu = (a11 * rhs2 - a21 * rhs1) / det;
            Ok((0..b.len())
                .map(|i| uu[i] + sigma * t * v[i] - mu * z[i])
                .collect())
        }
    }
}

fn solve_continuation(
    sys: &dyn NonlinearSystem,
    solver: &mut SkylineSolver,
    exponent: &PLaplaceExponent,
    settings: &SolverSettings,
    x0: Vec<f64>,
) -> Result<(Vec<f64>, NonlinearReport)> {
    settings.validate()?;
    let mut schedule = settings.effective_schedule(exponent);
    let mut x = x0;
    // a rough start needs regularization at its own scale before the
    // requested schedule takes over, otherwise Newton creeps on the nearly
    // flat (p < 2) or nearly degenerate (p > 2) energy
    if !exponent.is_linear() {
        let hint = sys.scale_hint(&x).min(1e6);
        let d0 = schedule[0];
        if hint > 10.0 * d0 {
            let mut extra = Vec::new();
            let mut d = d0 * 10.0;
            while d < hint {
                extra.push(d);
                d *= 10.0;
            }
            extra.reverse();
            extra.extend_from_slice(&schedule);
            schedule = extra;
        }
    }

    let n = x.len();
    let direction = |solver: &mut SkylineSolver,
                     sys: &dyn NonlinearSystem,
                     xx: &[f64],
                     r: &[f64],
                     delta: f64|
     -> Result<Vec<f64>> {
        let diag_scale = sys.fill_jacobian(xx, delta, solver);
        let sigma = diag_scale.abs().max(1e-300);
        newton_direction(solver, r, sys.constraint(), xx, sigma, 0)
    };

    // convergence is measured by the Newton decrement sqrt(r . J^-1 r), the
    // discrete dual norm of the residual in the current metric; the
    // reference value is taken at the zero field so the tolerance does not
    // depend on the initial guess
    let dec_of = |r: &[f64], dx: &[f64]| (-dot(r, dx)).max(0.0).sqrt();
    let zero = vec![0.0; n];
    let r_zero = sys.residual(&zero, schedule[0]);
    let dx_zero = direction(solver, sys, &zero, &r_zero, schedule[0])?;
    let dec_ref = dec_of(&r_zero, &dx_zero);
    let tol = (settings.newton_tol_rel * dec_ref).max(settings.newton_tol_abs);

    let mut stages = Vec::with_capacity(schedule.len());
    let mut total_iters = 0;
    for &delta in &schedule {
        let mut stage = DeltaStage {
            delta,
            iterations: 0,
            energies: vec![sys.energy(&x, delta)],
            final_residual: f64::NAN,
            converged: false,
        };
        let mut best_dec = f64::INFINITY;
        let mut stalled = 0usize;
        for _ in 0..settings.max_newton {
            let r = sys.residual(&x, delta);
            stage.final_residual = norm2(&r);
            let dx = direction(solver, sys, &x, &r, delta)?;
            let dec = dec_of(&r, &dx);
            if dec <= tol {
                stage.converged = true;
                break;
            }
            // a decrement bouncing at its rounding floor cannot improve
            // within this stage; move on and let the next stage refine
            if dec <= 0.9 * best_dec {
                best_dec = dec;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 6 {
                    break;
                }
            }
            stage.iterations += 1;
            total_iters += 1;
            let slope = dot(&r, &dx);
            if !(slope < 0.0) {
                break; // not a descent direction; cannot make progress
            }
            let e0 = *stage.energies.last().unwrap();
            // near convergence the Armijo decrease drops below the energy's
            // floating-point resolution; the allowance keeps full Newton
            // steps acceptable there
            let fp_slack = 1e-14 * (1.0 + e0.abs());
            let mut step = 1.0;
            let mut accepted = false;
            let mut best: Option<(f64, f64)> = None;
            for _ in 0..60 {
                let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + step * d).collect();
                let et = sys.energy(&xt, delta);
                if et <= e0 + settings.sufficient_decrease * step * slope + fp_slack {
                    x = xt;
                    stage.energies.push(et);
                    accepted = true;
                    break;
                }
                if et < e0 && best.map_or(true, |(be, _)| et < be) {
                    best = Some((et, step));
                }
                step *= settings.backtrack_factor;
            }
            if !accepted {
                if let Some((et, bs)) = best {
                    x = x.iter().zip(&dx).map(|(a, d)| a + bs * d).collect();
                    stage.energies.push(et);
                } else {
                    break; // no decrease found at all
                }
            }
        }
        stages.push(stage);
    }

    // restore the exact zero average; constants do not change the residual
    if let Some(a) = sys.constraint() {
        let total: f64 = a.iter().sum();
        let shift = dot(a, &x) / total;
        x.iter_mut().for_each(|v| *v -= shift);
    }

    let last_delta = *schedule.last().unwrap();
    let final_residual_norm = norm2(&sys.residual(&x, last_delta));
    let converged = stages.last().map(|s| s.converged).unwrap_or(false);
    let report = NonlinearReport {
        converged,
        total_newton_iterations: total_iters,
        final_residual_norm,
        final_energy: sys.energy(&x, last_delta),
        stages,
    };
    Ok((x, report))
}

// ---------------------------------------------------------------------------
// public solvers
// ---------------------------------------------------------------------------

struct NeumannSystem<'a> {
    asm: Assembler2d<'a>,
}

impl NonlinearSystem for NeumannSystem<'_> {
    fn residual(&self, u: &[f64], delta: f64) -> Vec<f64> {
        self.asm.residual(u, delta)
    }
    fn fill_jacobian(&self, u: &[f64], delta: f64, solver: &mut SkylineSolver) -> f64 {
        self.asm.fill_jacobian(u, delta, solver)
    }
    fn energy(&self, u: &[f64], delta: f64) -> f64 {
        self.asm.energy(u, delta)
    }
    fn constraint(&self) -> Option<&[f64]> {
        None
    }
    fn scale_hint(&self, u: &[f64]) -> f64 {
        self.asm.scale_hint(u)
    }
}

struct CellSystem<'a> {
    asm: Assembler2d<'a>,
    average: Vec<f64>,
}

impl NonlinearSystem for CellSystem<'_> {
    fn residual(&self, u: &[f64], delta: f64) -> Vec<f64> {
        self.asm.residual(u, delta)
    }
    fn fill_jacobian(&self, u: &[f64], delta: f64, solver: &mut SkylineSolver) -> f64 {
        self.asm.fill_jacobian(u, delta, solver)
    }
    fn energy(&self, u: &[f64], delta: f64) -> f64 {
        self.asm.energy(u, delta)
    }
    fn constraint(&self) -> Option<&[f64]> {
        Some(&self.average)
    }
    fn scale_hint(&self, u: &[f64]) -> f64 {
        self.asm.scale_hint(u)
    }
}

/// Solves the Neumann problem
/// `-div(a_p(grad u)) + |u|^(p-2) u = f`
/// by continuation over the delta schedule, warm-starting each stage.
pub fn solve_neumann(
    mesh: &Arc<TriangleMesh>,
    exponent: &PLaplaceExponent,
    f: &SourceTerm<'_>,
    settings: &SolverSettings,
) -> Result<(FemFunction, NonlinearReport)> {
    solve_neumann_from(mesh, exponent, f, settings, None)
}

/// As [`solve_neumann`] with an explicit nodal initial guess.
pub fn solve_neumann_from(
    mesh: &Arc<TriangleMesh>,
    exponent: &PLaplaceExponent,
    f: &SourceTerm<'_>,
    settings: &SolverSettings,
    initial: Option<&[f64]>,
) -> Result<(FemFunction, NonlinearReport)> {
    let dofs = DofMap::new(mesh.n_nodes(), &mesh.periodic_pairs);
    let asm = Assembler2d::new(mesh, &dofs, *exponent, [0.0, 0.0], true, Some(f));
    let mut solver = SkylineSolver::new(dofs.n_dofs, &asm.edges());
    let x0 = match initial {
        Some(nodal) => fold_nodal(&dofs, nodal),
        None => vec![0.0; dofs.n_dofs],
    };
    let sys = NeumannSystem { asm };
    let (x, report) = solve_continuation(&sys, &mut solver, exponent, settings, x0)?;
    Ok((
        FemFunction {
            mesh: mesh.clone(),
            values: dofs.scatter(&x),
        },
        report,
    ))
}

fn fold_nodal(dofs: &DofMap, nodal: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; dofs.n_dofs];
    for (node, &d) in dofs.node_dof.iter().enumerate() {
        x[d] = nodal[node];
    }
    x
}

/// The cell corrector `w = v - y1` on the periodic cell together with the
/// homogenized coefficient.
#[derive(Clone, Debug)]
pub struct CellSolution {
    pub mesh: Arc<TriangleMesh>,
    /// Periodic part with zero average over the cell.
    pub w: FemFunction,
    /// Flux form `(1/|Y*|) int |grad v|^(p-2) d_y1 v`.
    pub q: f64,
    /// Energy form `(1/|Y*|) int |grad v|^p`; agrees with `q` at convergence.
    pub q_energy_form: f64,
    pub cell_area: f64,
    pub report: NonlinearReport,
}

impl CellSolution {
    /// `grad v = e_1 + grad w` on element `e`.
    pub fn grad_v(&self, e: usize) -> [f64; 2] {
        let g = self.w.gradient(e);
        [1.0 + g[0], g[1]]
    }
}

/// Solves the periodic cell problem on `Y*`: find `w` periodic with zero
/// average such that `int a_p(e_1 + grad w) . grad phi = 0` for all periodic
/// `phi`. The zero average is enforced with a single scalar multiplier. The
/// homogenized coefficient is evaluated elementwise at `delta = 0`, exact for
/// P1 gradients.
pub fn solve_cell(
    mesh: &Arc<TriangleMesh>,
    exponent: &PLaplaceExponent,
    settings: &SolverSettings,
) -> Result<CellSolution> {
    solve_cell_from(mesh, exponent, settings, None)
}

pub fn solve_cell_from(
    mesh: &Arc<TriangleMesh>,
    exponent: &PLaplaceExponent,
    settings: &SolverSettings,
    initial: Option<&[f64]>,
) -> Result<CellSolution> {
    if mesh.periodic_pairs.is_empty() {
        return Err(Error::InvalidParameter(
            "cell problem needs a periodic mesh".into(),
        ));
    }
    let dofs = DofMap::new(mesh.n_nodes(), &mesh.periodic_pairs);
    let asm = Assembler2d::new(mesh, &dofs, *exponent, [1.0, 0.0], false, None);
    let mut solver = SkylineSolver::new(dofs.n_dofs, &asm.edges());
    // a_i = int phi_i over the cell, with periodic pairs folded
    let mut average = vec![0.0; dofs.n_dofs];
    for e in 0..mesh.n_elements() {
        for &node in &mesh.elements[e] {
            average[dofs.node_dof[node]] += mesh.areas[e] / 3.0;
        }
    }
    let x0 = match initial {
        Some(nodal) => fold_nodal(&dofs, nodal),
        None => vec![0.0; dofs.n_dofs],
    };
    let sys = CellSystem { asm, average };
    let (x, report) = solve_continuation(&sys, &mut solver, exponent, settings, x0)?;

    let w = FemFunction {
        mesh: mesh.clone(),
        values: dofs.scatter(&x),
    };
    let p = exponent.p;
    let mut q_flux = 0.0;
    let mut q_energy = 0.0;
    let area: f64 = mesh.total_area();
    for e in 0..mesh.n_elements() {
        let g = w.gradient(e);
        let v = [1.0 + g[0], g[1]];
        let fl = ap_vec(p, v);
        q_flux += mesh.areas[e] * fl[0];
        q_energy += mesh.areas[e] * (fl[0] * v[0] + fl[1] * v[1]);
    }
    Ok(CellSolution {
        mesh: mesh.clone(),
        w,
        q: q_flux / area,
        q_energy_form: q_energy / area,
        cell_area: area,
        report,
    })
}

// ---------------------------------------------------------------------------
// 1D limit problem
// ---------------------------------------------------------------------------

struct Assembler1d<'a> {
    mesh: &'a IntervalMesh,
    q: f64,
    exponent: PLaplaceExponent,
    fbar: &'a (dyn Fn(f64) -> f64 + Sync),
}

impl Assembler1d<'_> {
    fn energy(&self, u: &[f64], delta: f64) -> f64 {
        let p = self.exponent.p;
        let mut acc = 0.0;
        for e in 0..self.mesh.n_elements() {
            let (x0, x1) = (self.mesh.nodes[e], self.mesh.nodes[e + 1]);
            let h = x1 - x0;
            let du = (u[e + 1] - u[e]) / h;
            acc += self.q * h * grad_energy_density(p, delta, du * du);
            for (t, w) in &GAUSS2 {
                let uq = u[e] * (1.0 - t) + u[e + 1] * t;
                let xq = x0 + t * h;
                acc += h * w * (zeroth_energy_density(p, delta, uq) - (self.fbar)(xq) * uq);
            }
        }
        acc
    }

    fn residual(&self, u: &[f64], delta: f64) -> Vec<f64> {
        let p = self.exponent.p;
        let mut r = vec![0.0; u.len()];
        for e in 0..self.mesh.n_elements() {
            let (x0, x1) = (self.mesh.nodes[e], self.mesh.nodes[e + 1]);
            let h = x1 - x0;
            let du = (u[e + 1] - u[e]) / h;
            let fl = self.q * ap_scalar(p, delta, du);
            r[e] -= fl;
            r[e + 1] += fl;
            for (t, w) in &GAUSS2 {
                let uq = u[e] * (1.0 - t) + u[e + 1] * t;
                let xq = x0 + t * h;
                let dens = ap_scalar(p, delta, uq) - (self.fbar)(xq);
                r[e] += h * w * dens * (1.0 - t);
                r[e + 1] += h * w * dens * t;
            }
        }
        r
    }

    fn fill_jacobian(&self, u: &[f64], delta: f64, solver: &mut SkylineSolver) -> f64 {
        let p = self.exponent.p;
        solver.reset();
        let mut diag = 0.0;
        for e in 0..self.mesh.n_elements() {
            let (x0, x1) = (self.mesh.nodes[e], self.mesh.nodes[e + 1]);
            let h = x1 - x0;
            let du = (u[e + 1] - u[e]) / h;
            let kf = self.q * ap_scalar_prime(p, delta, du) / h;
            let mut k = [[kf, -kf], [-kf, kf]];
            for (t, w) in &GAUSS2 {
                let uq = u[e] * (1.0 - t) + u[e + 1] * t;
                let m = ap_scalar_prime(p, delta, uq);
                let b = [1.0 - t, *t];
                for i in 0..2 {
                    for j in 0..2 {
                        k[i][j] += h * w * m * b[i] * b[j];
                    }
                }
            }
            solver.add(e, e, k[0][0]);
            solver.add(e + 1, e + 1, k[1][1]);
            solver.add(e, e + 1, k[0][1]);
            diag += k[0][0] + k[1][1];
        }
        diag / u.len() as f64
    }
}

struct LimitSystem<'a> {
    asm: Assembler1d<'a>,
}

impl NonlinearSystem for LimitSystem<'_> {
    fn residual(&self, u: &[f64], delta: f64) -> Vec<f64> {
        self.asm.residual(u, delta)
    }
    fn fill_jacobian(&self, u: &[f64], delta: f64, solver: &mut SkylineSolver) -> f64 {
        self.asm.fill_jacobian(u, delta, solver)
    }
    fn energy(&self, u: &[f64], delta: f64) -> f64 {
        self.asm.energy(u, delta)
    }
    fn constraint(&self) -> Option<&[f64]> {
        None
    }
    fn scale_hint(&self, u: &[f64]) -> f64 {
        let mut m = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for e in 0..self.asm.mesh.n_elements() {
            let h = self.asm.mesh.nodes[e + 1] - self.asm.mesh.nodes[e];
            m = m.max(((u[e + 1] - u[e]) / h).abs());
        }
        m
    }
}

/// Solves the 1D limit problem
/// `-q (|u'|^(p-2) u')' + |u|^(p-2) u = fbar` on `(0, 1)` with natural
/// boundary conditions, on a uniform mesh with `n` elements.
pub fn solve_limit_1d(
    q: f64,
    exponent: &PLaplaceExponent,
    fbar: &(dyn Fn(f64) -> f64 + Sync),
    n: usize,
    settings: &SolverSettings,
) -> Result<(FemFunction1d, NonlinearReport)> {
    solve_limit_1d_from(q, exponent, fbar, n, settings, None)
}

pub fn solve_limit_1d_from(
    q: f64,
    exponent: &PLaplaceExponent,
    fbar: &(dyn Fn(f64) -> f64 + Sync),
    n: usize,
    settings: &SolverSettings,
    initial: Option<&[f64]>,
) -> Result<(FemFunction1d, NonlinearReport)> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "limit problem needs q > 0, got {q}"
        )));
    }
    let mesh = Arc::new(crate::mesh::mesh_interval(n));
    let asm = Assembler1d {
        mesh: &mesh,
        q,
        exponent: *exponent,
        fbar,
    };
    let edges: Vec<(usize, usize)> = (0..n).map(|e| (e, e + 1)).collect();
    let mut solver = SkylineSolver::new(n + 1, &edges);
    let x0 = initial
        .map(|v| v.to_vec())
        .unwrap_or_else(|| vec![0.0; n + 1]);
    let sys = LimitSystem { asm };
    let (x, report) = solve_continuation(&sys, &mut solver, exponent, settings, x0)?;
    Ok((FemFunction1d { mesh, values: x }, report))
}

// ---------------------------------------------------------------------------
// public assembly surface
// ---------------------------------------------------------------------------

/// Symmetric sparse matrix as folded-dof triplets (lower triangle).
#[derive(Clone, Debug)]
pub struct SymTriplets {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymTriplets {
    /// Symmetric matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }
}

/// The regularized energy
/// `(1/p) int (d^2 + |grad u|^2)^(p/2) + (1/p) int [(d^2 + u^2)^(p/2) - d^p]
///  - int f u`.
pub fn energy(
    mesh: &TriangleMesh,
    exponent: &PLaplaceExponent,
    delta: f64,
    f: Option<&SourceTerm<'_>>,
    u: &FemFunction,
) -> f64 {
    let dofs = DofMap::new(mesh.n_nodes(), &mesh.periodic_pairs);
    let asm = Assembler2d::new(mesh, &dofs, *exponent, [0.0, 0.0], true, f);
    asm.energy(&fold_nodal(&dofs, &u.values), delta)
}

/// The residual covector of the Neumann problem: component `i` is
/// `int a_d(grad u) . grad phi_i + (d^2+u^2)^((p-2)/2) u phi_i - f phi_i`,
/// with periodic pairs folded into shared degrees of freedom.
pub fn assemble_residual(
    mesh: &TriangleMesh,
    exponent: &PLaplaceExponent,
    delta: f64,
    f: Option<&SourceTerm<'_>>,
    u: &FemFunction,
) -> Vec<f64> {
    let dofs = DofMap::new(mesh.n_nodes(), &mesh.periodic_pairs);
    let asm = Assembler2d::new(mesh, &dofs, *exponent, [0.0, 0.0], true, f);
    asm.residual(&fold_nodal(&dofs, &u.values), delta)
}

/// The Jacobian of [`assemble_residual`] at `u`, symmetric positive definite
/// for `p >= 2` or `delta > 0`.
pub fn assemble_jacobian(
    mesh: &TriangleMesh,
    exponent: &PLaplaceExponent,
    delta: f64,
    u: &FemFunction,
) -> SymTriplets {
    assert!(
        delta > 0.0 || exponent.p >= 2.0,
        "p < 2 needs delta > 0 for a definite Jacobian"
    );
    let dofs = DofMap::new(mesh.n_nodes(), &mesh.periodic_pairs);
    let asm = Assembler2d::new(mesh, &dofs, *exponent, [0.0, 0.0], true, None);
    let mut solver = SkylineSolver::new(dofs.n_dofs, &asm.edges());
    asm.fill_jacobian(&fold_nodal(&dofs, &u.values), delta, &mut solver);
    SymTriplets {
        n: dofs.n_dofs,
        entries: solver.lower_triplets(),
    }
}

// ---------------------------------------------------------------------------
// quadrature helpers shared by the other modules
// ---------------------------------------------------------------------------

/// Integrates `f(element, x, y, bary)` over the mesh with the 3-point rule.
pub fn integrate(mesh: &TriangleMesh, f: impl Fn(usize, f64, f64, &[f64; 3]) -> f64) -> f64 {
    integrate_over(mesh, None, f)
}

/// As [`integrate`], restricted to the listed elements when given.
pub fn integrate_over(
    mesh: &TriangleMesh,
    elems: Option<&[usize]>,
    f: impl Fn(usize, f64, f64, &[f64; 3]) -> f64,
) -> f64 {
    let mut acc = 0.0;
    let mut run = |e: usize| {
        let [a, b, c] = mesh.elements[e];
        let pts = [mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]];
        for (bary, w) in &TRI_QUAD3 {
            let x = bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0];
            let y = bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1];
            acc += mesh.areas[e] * w * f(e, x, y, bary);
        }
    };
    match elems {
        Some(list) => list.iter().for_each(|&e| run(e)),
        None => (0..mesh.n_elements()).for_each(run),
    }
    acc
}

/// High-order variant (7-point rule) for error integrals in tests.
pub fn integrate_d5(mesh: &TriangleMesh, f: impl Fn(usize, f64, f64, &[f64; 3]) -> f64) -> f64 {
    let mut acc = 0.0;
    for e in 0..mesh.n_elements() {
        let [a, b, c] = mesh.elements[e];
        let pts = [mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]];
        for (bary, w) in &TRI_QUAD7 {
            let x = bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0];
            let y = bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1];
            acc += mesh.areas[e] * w * f(e, x, y, bary);
        }
    }
    acc
}
