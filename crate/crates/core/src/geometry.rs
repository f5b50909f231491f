//! The periodic boundary profile `g`, the thin domain `R^eps`, the reference
//! cells, and the cell partition of `(0, 1)`.
//!
//! The profile is strictly positive, bounded and `L`-periodic; at a jump the
//! evaluated value is the minimum of the two one-sided limits (lower
//! semicontinuity). Five shapes are supported: constant, piecewise constant,
//! piecewise linear, cosine, and tabulated samples (interpreted as the
//! piecewise-linear interpolant of the nodes).

use crate::error::{Error, Result};
use crate::util::adaptive_simpson;

/// Tolerance treated as "equal" when classifying near-exact tilings.
const TILE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileKind {
    Constant,
    PiecewiseConstant,
    PiecewiseLinear,
    Cosine,
    Tabulated,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Constant => "constant",
            ProfileKind::PiecewiseConstant => "piecewise_constant",
            ProfileKind::PiecewiseLinear => "piecewise_linear",
            ProfileKind::Cosine => "cosine",
            ProfileKind::Tabulated => "tabulated",
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Constant(f64),
    /// Piece `i` takes the value `values[i]` on `[breaks[i], breaks[i+1])`,
    /// with `breaks[0] == 0` and the last piece ending at the period.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// Piece `i` runs linearly from `start[i]` at `breaks[i]` to `end[i]` at
    /// `breaks[i+1]`. Adjacent pieces may disagree at a breakpoint (a jump).
    PiecewiseLinear {
        breaks: Vec<f64>,
        start: Vec<f64>,
        end: Vec<f64>,
    },
    /// `mean + amplitude * cos(2 pi y / L)`.
    Cosine { mean: f64, amplitude: f64 },
}

/// An `L`-periodic boundary profile with cached extrema.
#[derive(Clone, Debug)]
pub struct BoundaryProfile {
    kind: ProfileKind,
    shape: Shape,
    period: f64,
    g0: f64,
    g1: f64,
}

/// Transform applied pointwise under a period average. The `Power` variant is
/// integrated analytically on piecewise-linear profiles.
pub enum Transform<'a> {
    Identity,
    Power(f64),
    Map(&'a dyn Fn(f64) -> f64),
}

impl<'a> Transform<'a> {
    fn apply(&self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Power(e) => v.powf(*e),
            Transform::Map(f) => f(v),
        }
    }
}

fn check_breaks(breaks: &[f64], period: f64) -> Result<()> {
    if breaks.is_empty() {
        return Err(Error::InvalidProfile("no pieces given".into()));
    }
    if breaks[0] != 0.0 {
        return Err(Error::InvalidProfile(format!(
            "first breakpoint must be 0, got {}",
            breaks[0]
        )));
    }
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidProfile(
                "breakpoints must be strictly increasing".into(),
            ));
        }
    }
    if *breaks.last().unwrap() >= period {
        return Err(Error::InvalidProfile(
            "breakpoints must lie in [0, period)".into(),
        ));
    }
    Ok(())
}

fn check_positive(values: &[f64]) -> Result<()> {
    for &v in values {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "profile values must be finite and positive, got {v}"
            )));
        }
    }
    Ok(())
}

impl BoundaryProfile {
    pub fn constant(value: f64) -> Result<Self> {
        check_positive(&[value])?;
        Ok(Self {
            kind: ProfileKind::Constant,
            shape: Shape::Constant(value),
            period: 1.0,
            g0: value,
            g1: value,
        })
    }

    pub fn constant_with_period(value: f64, period: f64) -> Result<Self> {
        let mut p = Self::constant(value)?;
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidProfile("period must be positive".into()));
        }
        p.period = period;
        Ok(p)
    }

    pub fn piecewise_constant(period: f64, breaks: &[f64], values: &[f64]) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidProfile("period must be positive".into()));
        }
        check_breaks(breaks, period)?;
        if breaks.len() != values.len() {
            return Err(Error::InvalidProfile(
                "breakpoints and values must have equal length".into(),
            ));
        }
        check_positive(values)?;
        let g0 = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let g1 = values.iter().cloned().fold(0.0_f64, f64::max);
        Ok(Self {
            kind: ProfileKind::PiecewiseConstant,
            shape: Shape::PiecewiseConstant {
                breaks: breaks.to_vec(),
                values: values.to_vec(),
            },
            period,
            g0,
            g1,
        })
    }

    pub fn piecewise_linear(
        period: f64,
        breaks: &[f64],
        start: &[f64],
        end: &[f64],
    ) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidProfile("period must be positive".into()));
        }
        check_breaks(breaks, period)?;
        if breaks.len() != start.len() || breaks.len() != end.len() {
            return Err(Error::InvalidProfile(
                "breakpoints, start values and end values must have equal length".into(),
            ));
        }
        check_positive(start)?;
        check_positive(end)?;
        let g0 = start
            .iter()
            .chain(end.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let g1 = start.iter().chain(end.iter()).cloned().fold(0.0_f64, f64::max);
        Ok(Self {
            kind: ProfileKind::PiecewiseLinear,
            shape: Shape::PiecewiseLinear {
                breaks: breaks.to_vec(),
                start: start.to_vec(),
                end: end.to_vec(),
            },
            period,
            g0,
            g1,
        })
    }

    pub fn cosine(period: f64, mean: f64, amplitude: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidProfile("period must be positive".into()));
        }
        if !(mean.is_finite() && amplitude.is_finite() && mean - amplitude.abs() > 0.0) {
            return Err(Error::InvalidProfile(
                "cosine profile requires mean - |amplitude| > 0".into(),
            ));
        }
        Ok(Self {
            kind: ProfileKind::Cosine,
            shape: Shape::Cosine { mean, amplitude },
            period,
            g0: mean - amplitude.abs(),
            g1: mean + amplitude.abs(),
        })
    }

    /// Samples `(y1, g)` with `y1` in `[0, period)`, interpolated linearly and
    /// wrapped around the period. Extrema are taken over the nodes.
    pub fn tabulated(period: f64, points: &[(f64, f64)]) -> Result<Self> {
        let breaks: Vec<f64> = points.iter().map(|p| p.0).collect();
        check_breaks(&breaks, period)?;
        let vals: Vec<f64> = points.iter().map(|p| p.1).collect();
        check_positive(&vals)?;
        let n = points.len();
        let mut start = Vec::with_capacity(n);
        let mut end = Vec::with_capacity(n);
        for i in 0..n {
            start.push(vals[i]);
            end.push(vals[(i + 1) % n]);
        }
        let g0 = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let g1 = vals.iter().cloned().fold(0.0_f64, f64::max);
        Ok(Self {
            kind: ProfileKind::Tabulated,
            shape: Shape::PiecewiseLinear { breaks, start, end },
            period,
            g0,
            g1,
        })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Global minimum of `g`.
    pub fn g_min(&self) -> f64 {
        self.g0
    }

    /// Global maximum of `g`.
    pub fn g_max(&self) -> f64 {
        self.g1
    }

    /// Breakpoints of the pieces within one period, always starting at 0.
    pub fn piece_breaks(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Constant(_) | Shape::Cosine { .. } => vec![0.0],
            Shape::PiecewiseConstant { breaks, .. } => breaks.clone(),
            Shape::PiecewiseLinear { breaks, .. } => breaks.clone(),
        }
    }

    /// One-sided limits `(left, right)` of `g` at a point of `[0, period)`.
    pub fn one_sided_limits(&self, y: f64) -> (f64, f64) {
        let y = y.rem_euclid(self.period);
        match &self.shape {
            Shape::Constant(v) => (*v, *v),
            Shape::Cosine { mean, amplitude } => {
                let v = mean + amplitude * (2.0 * std::f64::consts::PI * y / self.period).cos();
                (v, v)
            }
            Shape::PiecewiseConstant { breaks, values } => {
                let n = breaks.len();
                match breaks.binary_search_by(|b| b.partial_cmp(&y).unwrap()) {
                    Ok(i) => {
                        let left = values[(i + n - 1) % n];
                        (left, values[i])
                    }
                    Err(i) => (values[i - 1], values[i - 1]),
                }
            }
            Shape::PiecewiseLinear { breaks, start, end } => {
                let n = breaks.len();
                match breaks.binary_search_by(|b| b.partial_cmp(&y).unwrap()) {
                    Ok(i) => (end[(i + n - 1) % n], start[i]),
                    Err(i) => {
                        let i = i - 1;
                        let b0 = breaks[i];
                        let b1 = if i + 1 < n { breaks[i + 1] } else { self.period };
                        let t = (y - b0) / (b1 - b0);
                        let v = start[i] + t * (end[i] - start[i]);
                        (v, v)
                    }
                }
            }
        }
    }

    /// Jump locations in `[0, period)` with their one-sided limits.
    pub fn jumps(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for b in self.piece_breaks() {
            let (l, r) = self.one_sided_limits(b);
            if l != r {
                out.push((b, l, r));
            }
        }
        out
    }

    pub fn is_continuous(&self) -> bool {
        self.jumps().is_empty()
    }

    /// Evaluates `g` at `y1` (any real), returning the minimum of the
    /// one-sided limits at a jump.
    pub fn eval(&self, y1: f64) -> f64 {
        let (l, r) = self.one_sided_limits(y1);
        l.min(r)
    }

    /// Period average `(1/L) int_0^L transform(g)`, computed piecewise-exactly
    /// for constant and power transforms of piecewise profiles and by adaptive
    /// quadrature (relative tolerance 1e-12) otherwise.
    pub fn mean(&self, transform: Transform<'_>) -> Result<f64> {
        let l = self.period;
        match &self.shape {
            Shape::Constant(v) => Ok(transform.apply(*v)),
            Shape::PiecewiseConstant { breaks, values } => {
                let mut acc = 0.0;
                for i in 0..breaks.len() {
                    let b1 = if i + 1 < breaks.len() { breaks[i + 1] } else { l };
                    acc += (b1 - breaks[i]) * transform.apply(values[i]);
                }
                Ok(acc / l)
            }
            Shape::PiecewiseLinear { breaks, start, end } => {
                let mut acc = 0.0;
                for i in 0..breaks.len() {
                    let b1 = if i + 1 < breaks.len() { breaks[i + 1] } else { l };
                    let len = b1 - breaks[i];
                    let (v0, v1) = (start[i], end[i]);
                    acc += match &transform {
                        Transform::Identity => 0.5 * len * (v0 + v1),
                        Transform::Power(e) => len * power_segment_mean(v0, v1, *e),
                        Transform::Map(f) => {
                            adaptive_simpson(&|t| f(v0 + t * (v1 - v0)), 0.0, 1.0, 1e-12)? * len
                        }
                    };
                }
                Ok(acc / l)
            }
            Shape::Cosine { mean, amplitude } => match transform {
                Transform::Identity => Ok(*mean),
                _ => {
                    let two_pi = 2.0 * std::f64::consts::PI;
                    let v = adaptive_simpson(
                        &|y| transform.apply(mean + amplitude * (two_pi * y / l).cos()),
                        0.0,
                        l,
                        1e-12,
                    )?;
                    Ok(v / l)
                }
            },
        }
    }
}

/// Mean of `v^e` along a unit-length linear segment from `v0` to `v1`.
fn power_segment_mean(v0: f64, v1: f64, e: f64) -> f64 {
    let slope = v1 - v0;
    if slope.abs() <= 1e-14 * v0.abs().max(v1.abs()) {
        return (0.5 * (v0 + v1)).powf(e);
    }
    if (e + 1.0).abs() < 1e-14 {
        return (v1.ln() - v0.ln()) / slope;
    }
    (v1.powf(e + 1.0) - v0.powf(e + 1.0)) / (slope * (e + 1.0))
}

/// Evaluates `g` at `y1`. Total on valid profiles.
pub fn eval_profile(profile: &BoundaryProfile, y1: f64) -> f64 {
    profile.eval(y1)
}

/// Period average of a pointwise transform of `g`.
pub fn mean_over_period(profile: &BoundaryProfile, transform: Transform<'_>) -> Result<f64> {
    profile.mean(transform)
}

/// The p-Laplacian exponent together with its conjugate.
#[derive(Clone, Copy, Debug)]
pub struct PLaplaceExponent {
    pub p: f64,
    pub p_conj: f64,
}

impl PLaplaceExponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParameter("p must lie in (1, \u{221e})".into()));
        }
        Ok(Self {
            p,
            p_conj: p / (p - 1.0),
        })
    }

    pub fn is_linear(&self) -> bool {
        (self.p - 2.0).abs() < 1e-12
    }
}

/// Oscillation regime selected by the exponent `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Weak,
    Resonant,
    Strong,
}

impl Regime {
    pub fn from_alpha(alpha: f64) -> Self {
        if alpha < 1.0 {
            Regime::Weak
        } else if alpha == 1.0 {
            Regime::Resonant
        } else {
            Regime::Strong
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Weak => "weak",
            Regime::Resonant => "resonant",
            Regime::Strong => "strong",
        }
    }
}

/// `(eps, alpha, profile)` defining the thin domain
/// `R^eps = {0 < x < 1, 0 < y < eps g(x / eps^alpha)}`.
#[derive(Clone, Debug)]
pub struct ThinDomainSpec {
    pub epsilon: f64,
    pub alpha: f64,
    pub profile: BoundaryProfile,
}

impl ThinDomainSpec {
    pub fn new(epsilon: f64, alpha: f64, profile: BoundaryProfile) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            epsilon,
            alpha,
            profile,
        })
    }

    pub fn regime(&self) -> Regime {
        Regime::from_alpha(self.alpha)
    }

    /// `eps^alpha`, computed with `powi` for integer alpha so that exact
    /// tilings stay exact. Every module uses this one definition.
    pub fn x_scale(&self) -> f64 {
        if self.alpha == self.alpha.round() && self.alpha.abs() < 64.0 {
            self.epsilon.powi(self.alpha as i32)
        } else {
            self.epsilon.powf(self.alpha)
        }
    }

    /// Width `L eps^alpha` of one oscillation cell in physical coordinates.
    pub fn cell_width(&self) -> f64 {
        self.x_scale() * self.profile.period()
    }

    /// Top boundary height `eps g(x / eps^alpha)` at abscissa `x`.
    pub fn height(&self, x: f64) -> f64 {
        self.epsilon * self.profile.eval(x / self.x_scale())
    }
}

/// The cells `[k L eps^alpha, (k+1) L eps^alpha]`, `k = 0..=N_eps`, together
/// with the leftover interval `Lambda_eps = [L eps^alpha (N_eps + 1), 1)`.
#[derive(Clone, Debug)]
pub struct DomainPartition {
    /// Number of full cells, `N_eps + 1`.
    pub n_cells: usize,
    /// Left endpoints `k L eps^alpha` of the full cells.
    pub cell_origins: Vec<f64>,
    /// Width of one full cell.
    pub cell_width: f64,
    /// Start of `Lambda_eps` (equals 1 when `Lambda_eps` is empty).
    pub lambda_start: f64,
    pub lambda_empty: bool,
}

/// Partitions `(0, 1)` into the full oscillation cells and `Lambda_eps`.
/// `N_eps` is the largest integer with `eps^alpha L (N_eps + 1) <= 1`; layouts
/// within `TILE_TOL` of an exact tiling are classified as exact. When one
/// cell is already wider than the domain, `n_cells` is zero and `Lambda_eps`
/// is all of `(0, 1)`.
pub fn partition(spec: &ThinDomainSpec) -> DomainPartition {
    let w = spec.cell_width();
    let tol = TILE_TOL * w;
    let mut m = (1.0 / w).floor() as i64; // candidate N_eps + 1
    while ((m + 1) as f64) * w <= 1.0 + tol {
        m += 1;
    }
    while m > 0 && (m as f64) * w > 1.0 + tol {
        m -= 1;
    }
    let m = m.max(0) as usize;
    let end = m as f64 * w;
    let lambda_empty = m > 0 && (end - 1.0).abs() <= tol;
    DomainPartition {
        n_cells: m,
        cell_origins: (0..m).map(|k| k as f64 * w).collect(),
        cell_width: w,
        lambda_start: if lambda_empty {
            1.0
        } else {
            end.min(1.0)
        },
        lambda_empty,
    }
}

/// Reference domains for cell meshes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellDomain {
    /// `Y* = {0 < y1 < L, 0 < y2 < g(y1)}`.
    YStar,
    /// `Y*_+ = {0 < y1 < L, g0 < y2 < g(y1)}`; may be disconnected.
    YStarPlus,
    /// The fixed rectangle `R_- = (0,1) x (0, g0)`.
    RMinus,
    /// The fixed rectangle `R_+ = (0,1) x (g0, g1)`.
    RPlus,
}

/// A reference cell with its analytic area.
#[derive(Clone, Debug)]
pub struct CellGeometry {
    pub domain: CellDomain,
    pub profile: BoundaryProfile,
    pub area: f64,
}

impl CellGeometry {
    pub fn new(domain: CellDomain, profile: BoundaryProfile) -> Result<Self> {
        let l = profile.period();
        let mean_g = profile.mean(Transform::Identity)?;
        let area = match domain {
            CellDomain::YStar => l * mean_g,
            CellDomain::YStarPlus => l * (mean_g - profile.g_min()),
            CellDomain::RMinus => profile.g_min(),
            CellDomain::RPlus => profile.g_max() - profile.g_min(),
        };
        Ok(Self {
            domain,
            profile,
            area,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::SplitMix64;

    fn comb12() -> BoundaryProfile {
        BoundaryProfile::piecewise_constant(2.0, &[0.0, 1.0], &[1.0, 2.0]).unwrap()
    }

    #[test]
    fn constant_profile_eval() {
        let g = BoundaryProfile::constant(2.0).unwrap();
        assert_eq!(eval_profile(&g, 0.37), 2.0);
    }

    #[test]
    fn comb_periodic_extension() {
        let g = comb12();
        assert_eq!(eval_profile(&g, 2.5), 1.0);
        assert_eq!(eval_profile(&g, 0.5), 1.0);
        assert_eq!(eval_profile(&g, 1.5), 2.0);
    }

    #[test]
    fn comb_jump_takes_min() {
        let g = comb12();
        // jump at y1 = 1 between the values 1 and 2
        assert_eq!(eval_profile(&g, 1.0), 1.0);
        // wrap jump at y1 = 0 between 2 (left limit) and 1 (right limit)
        assert_eq!(eval_profile(&g, 0.0), 1.0);
        assert_eq!(eval_profile(&g, 2.0), 1.0);
    }

    #[test]
    fn eval_bounded_by_extrema() {
        let profiles = [
            BoundaryProfile::constant(1.5).unwrap(),
            comb12(),
            BoundaryProfile::cosine(1.0, 2.0, 1.0).unwrap(),
            BoundaryProfile::piecewise_linear(2.0, &[0.0, 1.0], &[1.0, 2.0], &[2.0, 1.0]).unwrap(),
            BoundaryProfile::tabulated(1.0, &[(0.0, 1.0), (0.25, 3.0), (0.7, 2.0)]).unwrap(),
        ];
        let mut rng = SplitMix64::new(42);
        for g in &profiles {
            for _ in 0..1000 {
                let y = rng.uniform(-3.0 * g.period(), 3.0 * g.period());
                let v = g.eval(y);
                assert!(v >= g.g_min() - 1e-12 && v <= g.g_max() + 1e-12);
            }
        }
    }

    #[test]
    fn exact_periodicity_on_dyadic_points() {
        let profiles = [
            comb12(),
            BoundaryProfile::cosine(2.0, 2.0, 1.0).unwrap(),
            BoundaryProfile::piecewise_linear(2.0, &[0.0, 1.0], &[1.0, 2.0], &[2.0, 1.0]).unwrap(),
        ];
        for g in &profiles {
            let l = g.period();
            for k in 0..1024 {
                let y = k as f64 * (l / 1024.0);
                assert_eq!(g.eval(y + l), g.eval(y), "kind {:?}, y = {y}", g.kind());
            }
        }
    }

    #[test]
    fn mean_identity_comb() {
        let g = comb12();
        assert!((g.mean(Transform::Identity).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn mean_identity_constant_is_exact() {
        let g = BoundaryProfile::constant(0.73).unwrap();
        assert_eq!(g.mean(Transform::Identity).unwrap(), 0.73);
    }

    #[test]
    fn mean_cosine_identity() {
        let g = BoundaryProfile::cosine(1.0, 2.0, 1.0).unwrap();
        assert!((g.mean(Transform::Identity).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mean_comb_inverse_sqrt() {
        // p = 3 gives p' - 1 = 1/2; the comb average of g^(-1/2) is exact
        let g = comb12();
        let v = g.mean(Transform::Power(-0.5)).unwrap();
        let expect = 0.5 * (1.0 + 0.5_f64.sqrt());
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.853_553_390_6).abs() < 1e-9);
    }

    #[test]
    fn mean_piecewise_linear_power_matches_quadrature() {
        let g =
            BoundaryProfile::piecewise_linear(2.0, &[0.0, 0.7], &[1.0, 2.5], &[2.5, 1.2]).unwrap();
        let exact = g.mean(Transform::Power(-0.5)).unwrap();
        let quad = g.mean(Transform::Map(&|v| v.powf(-0.5))).unwrap();
        assert!((exact - quad).abs() < 1e-11);
    }

    #[test]
    fn mean_cosine_map() {
        // <1/(2+cos)> over a period = 1/sqrt(3)
        let g = BoundaryProfile::cosine(1.0, 2.0, 1.0).unwrap();
        let v = g.mean(Transform::Map(&|t| 1.0 / t)).unwrap();
        assert!((v - 1.0 / 3.0_f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn exponent_conjugate_identity() {
        for p in [1.1, 1.5, 2.0, 3.0, 7.5] {
            let e = PLaplaceExponent::new(p).unwrap();
            assert!((1.0 / e.p + 1.0 / e.p_conj - 1.0).abs() < 1e-15);
            assert!(((e.p_conj - 1.0) * (e.p - 1.0) - 1.0).abs() < 1e-14);
        }
        assert!(PLaplaceExponent::new(1.0).is_err());
        assert!(PLaplaceExponent::new(0.5).is_err());
    }

    #[test]
    fn partition_exact_tiling() {
        let g = BoundaryProfile::constant(1.0).unwrap();
        let spec = ThinDomainSpec::new(0.1, 1.0, g).unwrap();
        let part = partition(&spec);
        assert_eq!(part.n_cells, 10); // N_eps = 9
        assert!(part.lambda_empty);
        assert_eq!(part.lambda_start, 1.0);
    }

    #[test]
    fn partition_with_leftover() {
        let g = BoundaryProfile::constant(1.0).unwrap();
        let spec = ThinDomainSpec::new(0.15, 1.0, g).unwrap();
        let part = partition(&spec);
        assert_eq!(part.n_cells, 6); // N_eps = 5
        assert!(!part.lambda_empty);
        assert!((part.lambda_start - 0.9).abs() < 1e-12);
    }

    #[test]
    fn partition_alpha_two() {
        let g = BoundaryProfile::constant_with_period(1.0, 2.0).unwrap();
        let spec = ThinDomainSpec::new(0.25, 2.0, g).unwrap();
        let part = partition(&spec);
        assert!((part.cell_width - 0.125).abs() < 1e-15);
        assert_eq!(part.n_cells, 8); // N_eps = 7
        assert!(part.lambda_empty);
    }

    #[test]
    fn partition_tiles_unit_interval() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..200 {
            let eps = rng.uniform(0.01, 0.5);
            let alpha = rng.uniform(0.3, 2.5);
            let l = rng.uniform(0.5, 2.5);
            let g = BoundaryProfile::constant_with_period(1.0, l).unwrap();
            let spec = ThinDomainSpec::new(eps, alpha, g).unwrap();
            let part = partition(&spec);
            let covered = part.n_cells as f64 * part.cell_width + (1.0 - part.lambda_start);
            // when lambda is empty the classification tolerance bounds the gap
            let slack = if part.lambda_empty {
                1e-11 * part.cell_width
            } else {
                1e-14
            };
            assert!(
                (covered - 1.0).abs() <= slack,
                "cells + lambda must cover (0,1): {covered}"
            );
            assert!(part.lambda_start <= 1.0 + 1e-12);
            if !part.lambda_empty && part.n_cells > 0 {
                // one more cell must not fit
                assert!((part.n_cells + 1) as f64 * part.cell_width > 1.0);
            }
        }
    }

    #[test]
    fn cell_areas() {
        let geom = CellGeometry::new(CellDomain::YStar, comb12()).unwrap();
        assert!((geom.area - 3.0).abs() < 1e-15);
        let plus = CellGeometry::new(CellDomain::YStarPlus, comb12()).unwrap();
        assert!((plus.area - 1.0).abs() < 1e-15);
        let rminus = CellGeometry::new(CellDomain::RMinus, comb12()).unwrap();
        assert!((rminus.area - 1.0).abs() < 1e-15);
        let rplus = CellGeometry::new(CellDomain::RPlus, comb12()).unwrap();
        assert!((rplus.area - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regime_classification() {
        assert_eq!(Regime::from_alpha(0.5), Regime::Weak);
        assert_eq!(Regime::from_alpha(1.0), Regime::Resonant);
        assert_eq!(Regime::from_alpha(2.0), Regime::Strong);
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(BoundaryProfile::constant(0.0).is_err());
        assert!(BoundaryProfile::constant(-1.0).is_err());
        assert!(BoundaryProfile::piecewise_constant(2.0, &[0.5, 1.0], &[1.0, 2.0]).is_err());
        assert!(BoundaryProfile::piecewise_constant(2.0, &[0.0, 2.5], &[1.0, 2.0]).is_err());
        assert!(BoundaryProfile::cosine(1.0, 1.0, 1.0).is_err());
        assert!(ThinDomainSpec::new(1.5, 1.0, BoundaryProfile::constant(1.0).unwrap()).is_err());
        assert!(ThinDomainSpec::new(0.5, 0.0, BoundaryProfile::constant(1.0).unwrap()).is_err());
    }

    #[test]
    fn tabulated_extrema_over_nodes() {
        let g = BoundaryProfile::tabulated(1.0, &[(0.0, 1.0), (0.5, 2.0)]).unwrap();
        assert_eq!(g.g_min(), 1.0);
        assert_eq!(g.g_max(), 2.0);
        assert!(g.is_continuous());
        assert!((g.eval(0.25) - 1.5).abs() < 1e-15);
        // wraps back to the first node across the period
        assert!((g.eval(0.75) - 1.5).abs() < 1e-15);
    }
}
