//! Structured triangle meshes of the thin domain `R^eps`, the reference cells
//! `Y*`, `Y*_+`, the fixed rectangles, and interval meshes of `(0, 1)`.
//!
//! All meshes come from one column construction: vertical lines carry sorted
//! node levels and each column between two lines is tiled with quads (split
//! into two triangles) plus a fan where one side degenerates. Piecewise
//! constant profiles use a global ladder of levels so comb geometry is exact
//! and jump walls are conforming; continuous profiles use terrain-following
//! levels above a fixed grid on `[0, eps*g0]`. Every period of the thin
//! domain is the affine image of the same unit-cell pattern, which is what
//! makes the discrete unfolding identities exact.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{
    partition, BoundaryProfile, CellDomain, CellGeometry, ProfileKind, ThinDomainSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTag {
    Bottom,
    Top,
    Left,
    Right,
    Jump,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Jump => "jump",
        }
    }
}

/// Structured column bookkeeping kept alongside the raw arrays; powers point
/// location and exact vertical line integrals.
#[derive(Clone, Debug)]
pub struct Columns {
    /// Abscissas of the vertical node lines.
    pub line_x: Vec<f64>,
    /// First node id of each line (nodes are stored line-major, bottom-up).
    pub line_start: Vec<usize>,
    /// Node count of each line.
    pub line_count: Vec<usize>,
    /// Element id range of each column, `col_elems[c]..col_elems[c+1]`.
    pub col_elems: Vec<usize>,
}

/// A conforming triangle mesh with counterclockwise elements.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    /// Cached element areas (all positive).
    pub areas: Vec<f64>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    /// (left node, right node) pairs sharing one periodic degree of freedom.
    pub periodic_pairs: Vec<(usize, usize)>,
    /// Target edge length the mesh was built for.
    pub h: f64,
    pub columns: Columns,
}

impl TriangleMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.elements[e];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.element_coords(e);
        [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
        ]
    }

    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for n in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(n[d]);
                hi[d] = hi[d].max(n[d]);
            }
        }
        (lo, hi)
    }

    /// Constant gradient coefficients of the three hat functions on element
    /// `e`: `grad phi_i = [b_i, c_i]`.
    pub fn hat_gradients(&self, e: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.element_coords(e);
        let two_a = 2.0 * self.areas[e];
        [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ]
    }
}

/// A 1D mesh of `[0, 1]` with sorted nodes.
#[derive(Clone, Debug)]
pub struct IntervalMesh {
    pub nodes: Vec<f64>,
}

impl IntervalMesh {
    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Element containing `x` (clamped to the mesh).
    pub fn element_of(&self, x: f64) -> usize {
        let n = self.n_elements();
        match self
            .nodes
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }
}

/// Uniform mesh of `[0, 1]` with `n >= 1` elements.
pub fn mesh_interval(n: usize) -> IntervalMesh {
    assert!(n >= 1, "interval mesh needs at least one element");
    IntervalMesh {
        nodes: (0..=n).map(|i| i as f64 / n as f64).collect(),
    }
}

fn signed_area(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

// ---------------------------------------------------------------------------
// line/column construction
// ---------------------------------------------------------------------------

/// Vertical lines with node levels, ready to triangulate. Levels of adjacent
/// lines agree on the part both columns use (either nested ladder prefixes or
/// identical terrain grids), which keeps the mesh conforming.
struct LineAssembly {
    xs: Vec<f64>,
    levels: Vec<Vec<f64>>,
    /// Per column: node counts used on the left and right line.
    counts: Vec<(usize, usize)>,
    /// Pair first/last line nodes with equal height up to this value.
    pair_cap: Option<f64>,
    target_h: f64,
}

fn build_mesh(mut asm: LineAssembly) -> Result<TriangleMesh> {
    let m = asm.counts.len();
    assert_eq!(asm.xs.len(), m + 1);

    // drop levels no adjacent column references (tops of boundary lines)
    for j in 0..=m {
        let mut used = 0usize;
        if j > 0 {
            used = used.max(asm.counts[j - 1].1);
        }
        if j < m {
            used = used.max(asm.counts[j].0);
        }
        asm.levels[j].truncate(used.max(1));
    }

    let mut line_start = Vec::with_capacity(m + 1);
    let mut line_count = Vec::with_capacity(m + 1);
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    for j in 0..=m {
        line_start.push(nodes.len());
        line_count.push(asm.levels[j].len());
        for &y in &asm.levels[j] {
            nodes.push([asm.xs[j], y]);
        }
    }

    let mut elements: Vec<[usize; 3]> = Vec::new();
    let mut col_elems = Vec::with_capacity(m + 1);
    for c in 0..m {
        col_elems.push(elements.len());
        let (cl, cr) = asm.counts[c];
        debug_assert!(cl <= line_count[c] && cr <= line_count[c + 1]);
        let ln = |j: usize| line_start[c] + j;
        let rn = |j: usize| line_start[c + 1] + j;
        let common = cl.min(cr);
        for j in 0..common.saturating_sub(1) {
            elements.push([ln(j), rn(j), rn(j + 1)]);
            elements.push([ln(j), rn(j + 1), ln(j + 1)]);
        }
        if cl > common {
            let apex = rn(common - 1);
            for j in (common - 1)..(cl - 1) {
                elements.push([ln(j), apex, ln(j + 1)]);
            }
        } else if cr > common {
            let apex = ln(common - 1);
            for j in (common - 1)..(cr - 1) {
                elements.push([apex, rn(j), rn(j + 1)]);
            }
        }
    }
    col_elems.push(elements.len());

    let mut areas = Vec::with_capacity(elements.len());
    for e in &elements {
        let a = signed_area(nodes[e[0]], nodes[e[1]], nodes[e[2]]);
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "degenerate element with signed area {a:e}"
            )));
        }
        areas.push(a);
    }

    // boundary edges: every edge used by exactly one element
    let mut edge_count: HashMap<u64, ([usize; 2], u32)> =
        HashMap::with_capacity(3 * elements.len() / 2);
    let key = |a: usize, b: usize| ((a.min(b) as u64) << 32) | a.max(b) as u64;
    for e in &elements {
        for k in 0..3 {
            let (a, b) = (e[k], e[(k + 1) % 3]);
            edge_count
                .entry(key(a, b))
                .and_modify(|v| v.1 += 1)
                .or_insert(([a, b], 1));
        }
    }
    let xmin = asm.xs[0];
    let xmax = asm.xs[m];
    let ymin = asm
        .levels
        .iter()
        .map(|l| l[0])
        .fold(f64::INFINITY, f64::min);
    let mut boundary_edges: Vec<([usize; 2], BoundaryTag)> = Vec::new();
    for (_, (edge, count)) in edge_count {
        if count != 1 {
            continue;
        }
        let [a, b] = edge;
        let (pa, pb) = (nodes[a], nodes[b]);
        let tag = if pa[1] == ymin && pb[1] == ymin {
            BoundaryTag::Bottom
        } else if pa[0] == xmin && pb[0] == xmin {
            BoundaryTag::Left
        } else if pa[0] == xmax && pb[0] == xmax {
            BoundaryTag::Right
        } else if pa[0] == pb[0] {
            BoundaryTag::Jump
        } else {
            BoundaryTag::Top
        };
        boundary_edges.push((edge, tag));
    }
    boundary_edges.sort_unstable_by_key(|(e, _)| (e[0].min(e[1]), e[0].max(e[1])));

    let mut periodic_pairs = Vec::new();
    if let Some(cap) = asm.pair_cap {
        let tol = 1e-12 * (1.0 + cap.abs());
        let (la, lb) = (0, m);
        let (mut i, mut j) = (0usize, 0usize);
        while i < line_count[la] && j < line_count[lb] {
            let ya = nodes[line_start[la] + i][1];
            let yb = nodes[line_start[lb] + j][1];
            if ya == yb {
                if ya <= cap + tol {
                    periodic_pairs.push((line_start[la] + i, line_start[lb] + j));
                }
                i += 1;
                j += 1;
            } else if ya < yb {
                i += 1;
            } else {
                j += 1;
            }
        }
        // the overlap below the cap must be fully matched on both sides
        let expect_a = asm.levels[la].iter().filter(|&&y| y <= cap + tol).count();
        let expect_b = asm.levels[lb].iter().filter(|&&y| y <= cap + tol).count();
        if periodic_pairs.len() != expect_a || periodic_pairs.len() != expect_b {
            return Err(Error::IncompatiblePeriodicTrace);
        }
    }

    Ok(TriangleMesh {
        nodes,
        elements,
        areas,
        boundary_edges,
        periodic_pairs,
        h: asm.target_h,
        columns: Columns {
            line_x: asm.xs,
            line_start,
            line_count,
            col_elems,
        },
    })
}

/// Inserts `ceil(len / h)` uniform subdivisions of `[a, b]` into `out`,
/// excluding the right endpoint.
fn push_subdivided(out: &mut Vec<f64>, a: f64, b: f64, h: f64) {
    let n = (((b - a) / h).ceil() as usize).max(1);
    for i in 0..n {
        out.push(a + (b - a) * (i as f64 / n as f64));
    }
}

/// The unit-cell pattern: lines, levels, and per-column node counts, all in
/// cell coordinates over the span `[0, clip]` (`clip = L` for a full period).
struct UnitPattern {
    xs: Vec<f64>,
    levels: Vec<Vec<f64>>,
    counts: Vec<(usize, usize)>,
}

fn refine_ladder(rungs: &[f64], h: f64) -> Vec<f64> {
    let mut ladder = Vec::new();
    for w in rungs.windows(2) {
        push_subdivided(&mut ladder, w[0], w[1], h);
    }
    ladder.push(*rungs.last().unwrap());
    ladder
}

fn ladder_count(ladder: &[f64], top: f64) -> usize {
    // number of ladder entries <= top; piece values sit exactly on rungs
    ladder
        .iter()
        .take_while(|&&y| y <= top + 1e-12 * (1.0 + top.abs()))
        .count()
}

/// Pattern for piecewise-constant profiles (including constant): a global
/// ladder of levels containing every piece value, so jumps mesh exactly and
/// the level sets of different lines are nested.
fn pattern_bands(profile: &BoundaryProfile, h: f64, clip: f64) -> UnitPattern {
    let period = profile.period();
    let mut rungs: Vec<f64> = vec![0.0];
    let breaks = profile.piece_breaks();
    for (i, &b) in breaks.iter().enumerate() {
        let end = if i + 1 < breaks.len() { breaks[i + 1] } else { period };
        let v = profile.eval(0.5 * (b + end));
        rungs.push(v);
    }
    rungs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    rungs.dedup();
    let ladder = refine_ladder(&rungs, h);

    let mut xs: Vec<f64> = Vec::new();
    let mut piece_of_col: Vec<f64> = Vec::new();
    for (i, &b) in breaks.iter().enumerate() {
        if b >= clip {
            break;
        }
        let end = (if i + 1 < breaks.len() { breaks[i + 1] } else { period }).min(clip);
        let v = profile.eval(0.5 * (b + end));
        let start = xs.len();
        push_subdivided(&mut xs, b, end, h);
        for _ in start..xs.len() {
            piece_of_col.push(v);
        }
    }
    xs.push(clip);

    let counts: Vec<(usize, usize)> = piece_of_col
        .iter()
        .map(|&v| {
            let c = ladder_count(&ladder, v);
            (c, c)
        })
        .collect();

    let m = xs.len() - 1;
    let mut levels = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let mut used = 0usize;
        if j > 0 {
            used = used.max(counts[j - 1].1);
        }
        if j < m {
            used = used.max(counts[j].0);
        }
        // full-period patterns wrap: boundary lines carry the union of both
        // wrap sides so a later period can share the line
        if clip == period && (j == 0 || j == m) {
            let (l, r) = profile.one_sided_limits(0.0);
            used = used.max(ladder_count(&ladder, l.max(r)));
        }
        levels.push(ladder[..used].to_vec());
    }

    UnitPattern { xs, levels, counts }
}

/// Pattern for continuous profiles: a fixed grid on `[0, g0]` plus
/// terrain-following levels from `g0` up to `g(x)` on each line.
fn pattern_terrain(profile: &BoundaryProfile, h: f64, clip: f64) -> UnitPattern {
    let period = profile.period();
    let g0 = profile.g_min();
    let g1 = profile.g_max();
    let n_lo = ((g0 / h).ceil() as usize).max(1);
    let n_up = (((g1 - g0) / h).ceil() as usize).max(1);
    let bottom: Vec<f64> = (0..=n_lo).map(|i| g0 * i as f64 / n_lo as f64).collect();
    let degenerate_tol = 1e-12 * (1.0 + g1);

    let breaks = profile.piece_breaks();
    let mut xs: Vec<f64> = Vec::new();
    for (i, &b) in breaks.iter().enumerate() {
        if b >= clip {
            break;
        }
        let end = (if i + 1 < breaks.len() { breaks[i + 1] } else { period }).min(clip);
        push_subdivided(&mut xs, b, end, h);
    }
    xs.push(clip);

    let levels: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            let t = profile.eval(x);
            let mut lv = bottom.clone();
            if t - g0 > degenerate_tol {
                for j in 1..=n_up {
                    lv.push(if j == n_up {
                        t
                    } else {
                        g0 + (t - g0) * j as f64 / n_up as f64
                    });
                }
            }
            lv
        })
        .collect();

    let counts: Vec<(usize, usize)> = (0..xs.len() - 1)
        .map(|c| (levels[c].len(), levels[c + 1].len()))
        .collect();

    UnitPattern { xs, levels, counts }
}

fn unit_pattern(profile: &BoundaryProfile, h: f64, clip: f64) -> Result<UnitPattern> {
    match profile.kind() {
        ProfileKind::Constant | ProfileKind::PiecewiseConstant => {
            Ok(pattern_bands(profile, h, clip))
        }
        _ => {
            if !profile.is_continuous() {
                return Err(Error::DiscontinuousProfileUnsupported);
            }
            Ok(pattern_terrain(profile, h, clip))
        }
    }
}

// ---------------------------------------------------------------------------
// public mesh generators
// ---------------------------------------------------------------------------

/// Meshes `R^eps = {0 < x < 1, 0 < y < eps g(x / eps^alpha)}` with target
/// physical edge length `h` in x. Every full oscillation period is the affine
/// image of the same unit-cell pattern; the pattern resolves each profile
/// piece, so comb tops are exact. Fails with `MeshTooCoarse` unless
/// `h <= eps^alpha L / 4`.
pub fn mesh_thin_domain(spec: &ThinDomainSpec, h: f64) -> Result<TriangleMesh> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("mesh size must be positive".into()));
    }
    let limit = spec.cell_width() / 4.0;
    if h > limit * (1.0 + 1e-12) {
        return Err(Error::MeshTooCoarse { h, limit });
    }
    let sx = spec.x_scale();
    let eps = spec.epsilon;
    let l = spec.profile.period();
    let h_cell = h / sx;
    let pat = unit_pattern(&spec.profile, h_cell, l)?;
    let part = partition(spec);

    let scaled: Vec<Vec<f64>> = pat
        .levels
        .iter()
        .map(|lv| lv.iter().map(|&y| eps * y).collect())
        .collect();
    let m = pat.xs.len() - 1;

    let mut xs: Vec<f64> = Vec::new();
    let mut levels: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for k in 0..part.n_cells {
        for j in 0..m {
            xs.push(sx * (k as f64 * l + pat.xs[j]));
            levels.push(scaled[j].clone());
        }
        counts.extend_from_slice(&pat.counts);
    }
    if part.lambda_empty {
        xs.push(1.0);
        levels.push(scaled[m].clone());
    } else {
        let w_cell = (1.0 - part.lambda_start) / sx;
        let strip = unit_pattern(&spec.profile, h_cell, w_cell.min(l))?;
        let sm = strip.xs.len() - 1;
        let base = part.n_cells as f64 * l;
        // the strip's first line is the previous period's wrap line (its own
        // first line when no full period fits)
        xs.push(sx * base);
        if part.n_cells > 0 {
            levels.push(scaled[m].clone());
        } else {
            levels.push(strip.levels[0].iter().map(|&y| eps * y).collect());
        }
        for j in 1..sm {
            xs.push(sx * (base + strip.xs[j]));
            levels.push(strip.levels[j].iter().map(|&y| eps * y).collect());
        }
        xs.push(1.0);
        levels.push(strip.levels[sm].iter().map(|&y| eps * y).collect());
        counts.extend_from_slice(&strip.counts);
    }

    build_mesh(LineAssembly {
        xs,
        levels,
        counts,
        pair_cap: None,
        target_h: h,
    })
}

/// Meshes a reference cell with target edge length `h` in cell coordinates.
/// With `periodic` set (only meaningful for `Y*` and `Y*_+`), left/right
/// boundary nodes with matching heights are recorded in `periodic_pairs`.
pub fn mesh_cell(geom: &CellGeometry, h: f64, periodic: bool) -> Result<TriangleMesh> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("mesh size must be positive".into()));
    }
    let profile = &geom.profile;
    let l = profile.period();
    match geom.domain {
        CellDomain::RMinus => {
            let g0 = profile.g_min();
            mesh_rectangle(0.0, 1.0, 0.0, g0, h)
        }
        CellDomain::RPlus => {
            let g0 = profile.g_min();
            let g1 = profile.g_max();
            mesh_rectangle(0.0, 1.0, g0, g1, h)
        }
        CellDomain::YStar => {
            if h > l / 2.0 {
                return Err(Error::MeshTooCoarse { h, limit: l / 2.0 });
            }
            let pat = unit_pattern(profile, h, l)?;
            build_mesh(LineAssembly {
                xs: pat.xs,
                levels: pat.levels,
                counts: pat.counts,
                pair_cap: periodic.then(|| profile.eval(0.0)),
                target_h: h,
            })
        }
        CellDomain::YStarPlus => {
            if h > l / 2.0 {
                return Err(Error::MeshTooCoarse { h, limit: l / 2.0 });
            }
            let pat = unit_pattern(profile, h, l)?;
            let g0 = profile.g_min();
            let tol = 1e-12 * (1.0 + profile.g_max());
            // keep only the part above g0
            let levels: Vec<Vec<f64>> = pat
                .levels
                .iter()
                .map(|lv| {
                    let upper: Vec<f64> =
                        lv.iter().copied().filter(|&y| y >= g0 - tol).collect();
                    if upper.is_empty() {
                        vec![g0]
                    } else {
                        upper
                    }
                })
                .collect();
            let drop_below = |line: usize, used: usize| -> usize {
                let kept = pat.levels[line].iter().filter(|&&y| y < g0 - tol).count();
                used.saturating_sub(kept).max(1)
            };
            let counts: Vec<(usize, usize)> = pat
                .counts
                .iter()
                .enumerate()
                .map(|(c, &(cl, cr))| (drop_below(c, cl), drop_below(c + 1, cr)))
                .collect();
            let cap = periodic.then(|| profile.eval(0.0));
            build_mesh(LineAssembly {
                xs: pat.xs,
                levels,
                counts,
                pair_cap: cap,
                target_h: h,
            })
        }
    }
}

fn mesh_rectangle(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<TriangleMesh> {
    let nx = (((x1 - x0) / h).ceil() as usize).max(1);
    let ny = (((y1 - y0) / h).ceil() as usize).max(1);
    let xs: Vec<f64> = (0..=nx)
        .map(|i| x0 + (x1 - x0) * i as f64 / nx as f64)
        .collect();
    let grid: Vec<f64> = (0..=ny)
        .map(|j| y0 + (y1 - y0) * j as f64 / ny as f64)
        .collect();
    build_mesh(LineAssembly {
        xs,
        levels: vec![grid; nx + 1],
        counts: vec![(ny + 1, ny + 1); nx],
        pair_cap: None,
        target_h: h,
    })
}

/// The `Y*` mesh whose affine images tile the thin-domain mesh built by
/// [`mesh_thin_domain`] with the same `h`. Using it as the unfolding
/// quadrature mesh makes the discrete unfolding identities exact.
pub fn matching_cell_mesh(spec: &ThinDomainSpec, h: f64) -> Result<TriangleMesh> {
    let geom = CellGeometry::new(CellDomain::YStar, spec.profile.clone())?;
    mesh_cell(&geom, h / spec.x_scale(), true)
}

/// Extracts the layer `y <= y_split` of a column mesh (the split must be a
/// node level of every line) and rescales heights by `1 / y_scale`. Returns
/// the new mesh and the map from new node ids to old ones. This realizes the
/// rescaling operator image exactly: the affine map takes P1 to P1.
pub(crate) fn extract_bottom_rescaled(
    mesh: &TriangleMesh,
    y_split: f64,
    y_scale: f64,
) -> Result<(TriangleMesh, Vec<usize>)> {
    let cols = &mesh.columns;
    let tol = 1e-12 * (1.0 + y_split.abs());
    let m = cols.line_x.len() - 1;
    let mut levels = Vec::with_capacity(m + 1);
    let mut node_map = Vec::new();
    for j in 0..=m {
        let start = cols.line_start[j];
        let mut lv = Vec::new();
        for i in 0..cols.line_count[j] {
            let y = mesh.nodes[start + i][1];
            if y <= y_split + tol {
                lv.push(y / y_scale);
                node_map.push(start + i);
            } else {
                break;
            }
        }
        if lv.is_empty() || (lv.last().unwrap() * y_scale - y_split).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "y = {y_split} is not a node level of every line"
            )));
        }
        levels.push(lv);
    }
    let counts: Vec<(usize, usize)> = (0..m)
        .map(|c| (levels[c].len(), levels[c + 1].len()))
        .collect();
    let sub = build_mesh(LineAssembly {
        xs: cols.line_x.clone(),
        levels,
        counts,
        pair_cap: None,
        target_h: mesh.h,
    })?;
    Ok((sub, node_map))
}

/// Splits element ids at the horizontal line `y` (by centroid): returns
/// (below, above).
pub fn split_at_height(mesh: &TriangleMesh, y: f64) -> (Vec<usize>, Vec<usize>) {
    let mut below = Vec::new();
    let mut above = Vec::new();
    for e in 0..mesh.n_elements() {
        if mesh.centroid(e)[1] < y {
            below.push(e);
        } else {
            above.push(e);
        }
    }
    (below, above)
}

/// Number of connected components (node connectivity).
pub fn connected_components(mesh: &TriangleMesh) -> usize {
    let n = mesh.n_nodes();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for e in &mesh.elements {
        let r = find(&mut parent, e[0]);
        for &v in &e[1..] {
            let rv = find(&mut parent, v);
            parent[rv] = r;
        }
    }
    let mut roots = std::collections::HashSet::new();
    let mut isolated = 0;
    let mut touched = vec![false; n];
    for e in &mesh.elements {
        for &v in e {
            touched[v] = true;
        }
    }
    for i in 0..n {
        if touched[i] {
            roots.insert(find(&mut parent, i));
        } else {
            isolated += 1;
        }
    }
    let _ = isolated;
    roots.len()
}

// ---------------------------------------------------------------------------
// point location and line integrals
// ---------------------------------------------------------------------------

/// Locates points in a column mesh: binary search on the vertical lines, then
/// a barycentric test over the column's elements (lowest element id wins on
/// ties). Boundary-grazing points within `tol` are clamped.
pub struct MeshLocator {
    mesh: Arc<TriangleMesh>,
    tol: f64,
}

impl MeshLocator {
    pub fn new(mesh: Arc<TriangleMesh>) -> Self {
        let (lo, hi) = mesh.bbox();
        let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        Self {
            mesh,
            tol: 1e-12 * (1.0 + scale),
        }
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    /// Returns the containing element and barycentric coordinates.
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, [f64; 3])> {
        let cols = &self.mesh.columns;
        let m = cols.line_x.len() - 1;
        let c0 = column_of(&cols.line_x, x);
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for c in candidate_columns(c0, m) {
            let (start, end) = (cols.col_elems[c], cols.col_elems[c + 1]);
            for e in start..end {
                let (bary, viol) = self.bary_with_violation(e, x, y);
                if viol >= 0.0 {
                    return Ok((e, bary));
                }
                if best.map_or(true, |(bv, _, _)| viol > bv) {
                    best = Some((viol, e, bary));
                }
            }
        }
        match best {
            Some((viol, e, bary)) if viol >= -self.tol => Ok((e, bary)),
            _ => Err(Error::PointOutsideDomain { x, y }),
        }
    }

    /// Barycentric coordinates plus the most negative inward distance (zero
    /// or positive means inside).
    fn bary_with_violation(&self, e: usize, x: f64, y: f64) -> ([f64; 3], f64) {
        let [p0, p1, p2] = self.mesh.element_coords(e);
        let a = self.mesh.areas[e];
        let l0 = signed_area([x, y], p1, p2) / a;
        let l1 = signed_area(p0, [x, y], p2) / a;
        let l2 = 1.0 - l0 - l1;
        let edge = |u: [f64; 2], v: [f64; 2]| ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2)).sqrt();
        // inward distance of the point past edge k is lambda_k * 2A / |edge_k|
        let d0 = l0 * 2.0 * a / edge(p1, p2);
        let d1 = l1 * 2.0 * a / edge(p0, p2);
        let d2 = l2 * 2.0 * a / edge(p0, p1);
        ([l0, l1, l2], d0.min(d1).min(d2))
    }
}

fn column_of(line_x: &[f64], x: f64) -> usize {
    let m = line_x.len() - 1;
    let idx = line_x.partition_point(|&v| v <= x);
    idx.saturating_sub(1).min(m - 1)
}

fn candidate_columns(c: usize, m: usize) -> Vec<usize> {
    let mut v = vec![c];
    if c > 0 {
        v.push(c - 1);
    }
    if c + 1 < m {
        v.push(c + 1);
    }
    v
}

/// Exact integral of the piecewise-linear field `values` along the vertical
/// segment `{x} x [y_lo, y_hi]`. The segment is clipped against each element
/// of the owning column, where the restriction is linear.
pub fn vertical_segment_integral(
    mesh: &TriangleMesh,
    values: &[f64],
    x: f64,
    y_lo: f64,
    y_hi: f64,
) -> f64 {
    let cols = &mesh.columns;
    let c = column_of(&cols.line_x, x);
    let mut acc = 0.0;
    for e in cols.col_elems[c]..cols.col_elems[c + 1] {
        let [n0, n1, n2] = mesh.elements[e];
        let pts = [mesh.nodes[n0], mesh.nodes[n1], mesh.nodes[n2]];
        let mut cut: [f64; 4] = [0.0; 4];
        let mut nc = 0;
        for k in 0..3 {
            let (p, q) = (pts[k], pts[(k + 1) % 3]);
            let (dp, dq) = (p[0] - x, q[0] - x);
            if dp == 0.0 && dq == 0.0 {
                if nc + 2 <= 4 {
                    cut[nc] = p[1];
                    cut[nc + 1] = q[1];
                    nc += 2;
                }
            } else if dp * dq <= 0.0 && dp != dq {
                let t = dp / (dp - dq);
                if nc < 4 {
                    cut[nc] = p[1] + t * (q[1] - p[1]);
                    nc += 1;
                }
            }
        }
        if nc < 2 {
            continue;
        }
        let seg_lo = cut[..nc].iter().cloned().fold(f64::INFINITY, f64::min).max(y_lo);
        let seg_hi = cut[..nc]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            .min(y_hi);
        if seg_hi <= seg_lo {
            continue;
        }
        let eval_at = |yy: f64| -> f64 {
            let a = mesh.areas[e];
            let l0 = signed_area([x, yy], pts[1], pts[2]) / a;
            let l1 = signed_area(pts[0], [x, yy], pts[2]) / a;
            let l2 = 1.0 - l0 - l1;
            values[n0] * l0 + values[n1] * l1 + values[n2] * l2
        };
        acc += (seg_hi - seg_lo) * 0.5 * (eval_at(seg_lo) + eval_at(seg_hi));
    }
    acc
}

// ---------------------------------------------------------------------------
// dump format
// ---------------------------------------------------------------------------

/// Writes the text dump: `nodes N elements M`, then `N` node lines `x y`,
/// then `M` element lines `i j k tag` where `tag` is the column index.
pub fn write_mesh_dump<W: std::io::Write>(mesh: &TriangleMesh, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "nodes {} elements {}", mesh.n_nodes(), mesh.n_elements())?;
    for n in &mesh.nodes {
        writeln!(w, "{:.17e} {:.17e}", n[0], n[1])?;
    }
    let cols = &mesh.columns;
    let mut col = 0usize;
    for (e, el) in mesh.elements.iter().enumerate() {
        while col + 1 < cols.col_elems.len() - 1 && e >= cols.col_elems[col + 1] {
            col += 1;
        }
        writeln!(w, "{} {} {} {}", el[0], el[1], el[2], col)?;
    }
    Ok(())
}
