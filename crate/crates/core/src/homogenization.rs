//! The homogenized coefficient `q` in the three oscillation regimes, the
//! limit forcing, and the 1D limit solution.
//!
//! Weak oscillation (`alpha < 1`):
//! `q = 1 / (<g> <g^-(p'-1)>^(p-1))`, closed form.
//! Resonant oscillation (`alpha = 1`): `q` comes from the periodic cell
//! problem on `Y*`. Strong oscillation (`alpha > 1`): `q = g0 / <g>`,
//! independent of `p`.

use crate::error::{Error, Result};
use crate::fem::{solve_cell, solve_limit_1d, CellSolution, FemFunction1d, NonlinearReport, SolverSettings};
use crate::geometry::{
    mean_over_period, BoundaryProfile, CellDomain, CellGeometry, PLaplaceExponent, Regime,
    Transform,
};
use crate::mesh::mesh_cell;
use crate::util::adaptive_simpson;
use std::sync::Arc;

/// Analytic x-only forcing terms accepted by the limit pipeline.
#[derive(Clone, Debug)]
pub enum Forcing {
    Constant(f64),
    /// `amplitude * cos(pi * frequency * x)`.
    Cosine { amplitude: f64, frequency: f64 },
    /// Coefficients of `sum c_k x^k`.
    Polynomial(Vec<f64>),
}

impl Forcing {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Forcing::Constant(c) => *c,
            Forcing::Cosine {
                amplitude,
                frequency,
            } => amplitude * (std::f64::consts::PI * frequency * x).cos(),
            Forcing::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Forcing::Constant(c) => format!("constant {c}"),
            Forcing::Cosine {
                amplitude,
                frequency,
            } => format!("{amplitude} cos({frequency} pi x)"),
            Forcing::Polynomial(c) => format!("polynomial {c:?}"),
        }
    }
}

/// Forcing as given to the 2D solver: x-only data is the case the limit
/// pipeline reduces; genuinely y-dependent data is accepted by the 2D solver
/// only.
#[derive(Clone, Debug)]
pub enum ForcingSpec {
    XOnly(Forcing),
    General2d,
}

/// The intermediate weak limit `f-hat`, exposed for audit.
#[derive(Clone, Debug)]
pub enum FhatForm {
    /// `alpha <= 1`: the unfolding limit `f-hat(x, y1, y2) = f(x)` on the
    /// cylinder `(0,1) x Y*`.
    Cylindrical(Forcing),
    /// `alpha > 1`: `f-hat^eps(x) = f(x) g(x/eps^alpha)` converges weakly to
    /// `f <g>`.
    MeanScaled { f: Forcing, mean_g: f64 },
}

/// The limit forcing `f-bar` together with its intermediate form.
#[derive(Clone, Debug)]
pub struct LimitForcing {
    pub fbar: Forcing,
    pub fhat: FhatForm,
}

/// The 1D limit problem data.
#[derive(Clone, Debug)]
pub struct LimitProblem {
    pub q: f64,
    pub fbar: Forcing,
    pub exponent: PLaplaceExponent,
    pub regime: Regime,
}

/// Weak-regime coefficient `1 / (<g> <g^-(p'-1)>^(p-1))`.
pub fn q_weak(profile: &BoundaryProfile, exponent: &PLaplaceExponent) -> Result<f64> {
    let mean_g = mean_over_period(profile, Transform::Identity)?;
    let mean_inv = mean_over_period(profile, Transform::Power(-(exponent.p_conj - 1.0)))?;
    Ok(1.0 / (mean_g * mean_inv.powf(exponent.p - 1.0)))
}

/// Strong-regime coefficient `g0 / <g>`, independent of `p`.
pub fn q_strong(profile: &BoundaryProfile) -> Result<f64> {
    let mean_g = mean_over_period(profile, Transform::Identity)?;
    Ok(profile.g_min() / mean_g)
}

/// Resonant coefficient from the periodic cell problem at mesh size `h`.
pub fn q_resonant(
    profile: &BoundaryProfile,
    exponent: &PLaplaceExponent,
    h: f64,
    settings: &SolverSettings,
) -> Result<CellSolution> {
    let geom = CellGeometry::new(CellDomain::YStar, profile.clone())?;
    let mesh = Arc::new(mesh_cell(&geom, h, true)?);
    solve_cell(&mesh, exponent, settings)
}

/// Dispatches on the regime; the resonant case also returns the cell
/// solution.
pub fn effective_coefficient(
    profile: &BoundaryProfile,
    exponent: &PLaplaceExponent,
    alpha: f64,
    h: f64,
    settings: &SolverSettings,
) -> Result<(f64, Option<CellSolution>)> {
    match Regime::from_alpha(alpha) {
        Regime::Weak => Ok((q_weak(profile, exponent)?, None)),
        Regime::Strong => Ok((q_strong(profile)?, None)),
        Regime::Resonant => {
            let cell = q_resonant(profile, exponent, h, settings)?;
            Ok((cell.q, Some(cell)))
        }
    }
}

/// The limit forcing for x-only data. In every regime `f-bar = f`: for
/// `alpha <= 1` the unfolding limit of `f(x)` is `f(x)` itself and the cell
/// average drops out; for `alpha > 1` the weak limit `f <g>` is divided by
/// `<g>` again. Genuinely y-dependent forcing is refused.
pub fn limit_forcing(
    f: &ForcingSpec,
    profile: &BoundaryProfile,
    alpha: f64,
) -> Result<LimitForcing> {
    let f = match f {
        ForcingSpec::XOnly(f) => f.clone(),
        ForcingSpec::General2d => return Err(Error::ForcingNotReducible),
    };
    let fhat = if alpha > 1.0 {
        FhatForm::MeanScaled {
            f: f.clone(),
            mean_g: mean_over_period(profile, Transform::Identity)?,
        }
    } else {
        FhatForm::Cylindrical(f.clone())
    };
    Ok(LimitForcing { fbar: f, fhat })
}

/// Solves the 1D limit problem on a uniform mesh with `n` elements.
pub fn solve_limit(
    problem: &LimitProblem,
    n: usize,
    settings: &SolverSettings,
) -> Result<(FemFunction1d, NonlinearReport)> {
    let fbar = problem.fbar.clone();
    let f = move |x: f64| fbar.eval(x);
    solve_limit_1d(problem.q, &problem.exponent, &f, n, settings)
}

/// Audit for the strong-regime forcing: the defect
/// `| int f(x) g(x/eps^alpha) t(x) dx  -  <g> int f(x) t(x) dx |`
/// for a smooth test function `t`, which must vanish as `eps -> 0`.
pub fn weak_forcing_defect(
    f: &Forcing,
    profile: &BoundaryProfile,
    alpha: f64,
    eps: f64,
    test_fn: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let sx = if alpha == alpha.round() && alpha.abs() < 64.0 {
        eps.powi(alpha as i32)
    } else {
        eps.powf(alpha)
    };
    let l = profile.period();
    // split (0,1) at every piece image so each interval is smooth
    let mut cuts = vec![0.0f64];
    let breaks = profile.piece_breaks();
    'outer: for k in 0.. {
        for &b in &breaks {
            let x = sx * (k as f64 * l + b);
            if x >= 1.0 {
                break 'outer;
            }
            if x > 0.0 {
                cuts.push(x);
            }
        }
    }
    cuts.push(1.0);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    let mut lhs = 0.0;
    for w in cuts.windows(2) {
        // g is smooth strictly inside the interval; clamp its argument off
        // the endpoints so rounding cannot land on the wrong side of a jump
        let inset = 1e-9 * (w[1] - w[0]);
        let (lo, hi) = (w[0] + inset, w[1] - inset);
        let integrand =
            |x: f64| f.eval(x) * profile.eval(x.clamp(lo, hi) / sx) * test_fn(x);
        lhs += adaptive_simpson(&integrand, w[0], w[1], 1e-12)?;
    }
    let mean_g = mean_over_period(profile, Transform::Identity)?;
    let plain = adaptive_simpson(&|x: f64| f.eval(x) * test_fn(x), 0.0, 1.0, 1e-13)?;
    Ok((lhs - mean_g * plain).abs())
}
