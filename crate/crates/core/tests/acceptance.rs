//! Acceptance suite: every criterion of the convergence laboratory, one test
//! and one printed pass/fail line per criterion.
//!
//! The criteria are serialized through a mutex so the stated runtime budgets
//! are measured without cross-test contention; criteria 5 and 8 share the
//! nine sweep reports.

use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use thinhom_core::fem::integrate_d5;
use thinhom_core::sweep::MeshPolicy;
use thinhom_core::*;

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn comb12() -> BoundaryProfile {
    BoundaryProfile::piecewise_constant(2.0, &[0.0, 1.0], &[1.0, 2.0]).unwrap()
}

fn exponent(p: f64) -> PLaplaceExponent {
    PLaplaceExponent::new(p).unwrap()
}

fn verdict(name: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("[PASS] {name}");
    } else {
        println!("[FAIL] {name}");
        for f in failures {
            println!("       - {f}");
        }
    }
    assert!(failures.is_empty(), "{name}: {failures:?}");
}

// -------------------------------------------------------------------------
// criterion 1: constant-data exactness
// -------------------------------------------------------------------------

#[test]
fn criterion_1_constant_data_exactness() {
    let _g = gate();
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let settings = SolverSettings::default();
    let profile = comb12();

    for &p in &[1.5, 2.0, 3.0] {
        let exp = exponent(p);
        let exact = 2.0f64.powf(1.0 / (p - 1.0));
        // cell solution for the resonant corrector, once per p
        let cell = q_resonant(&profile, &exp, 2.0 / 8.0, &settings).unwrap();
        for &alpha in &[0.5, 1.0, 2.0] {
            let tag = format!("p={p}, alpha={alpha}");
            let spec = ThinDomainSpec::new(0.1, alpha, profile.clone()).unwrap();
            let h = spec.cell_width() / 8.0;
            let mesh = std::sync::Arc::new(mesh_thin_domain(&spec, h).unwrap());
            let f = |_x: f64| 2.0;
            let (u_eps, rep) = solve_neumann(&mesh, &exp, &SourceTerm::XOnly(&f), &settings).unwrap();
            if !rep.converged {
                failures.push(format!("{tag}: 2D solve did not converge"));
                continue;
            }
            let dev2d = u_eps
                .values
                .iter()
                .fold(0.0f64, |m, v| m.max((v - exact).abs()));
            if dev2d >= 1e-8 {
                failures.push(format!("{tag}: |u_eps - {exact}| = {dev2d:e}"));
            }

            let regime = Regime::from_alpha(alpha);
            let q = match regime {
                Regime::Weak => q_weak(&profile, &exp).unwrap(),
                Regime::Resonant => cell.q,
                Regime::Strong => q_strong(&profile).unwrap(),
            };
            let fbar = |_x: f64| 2.0;
            let (u, lrep) = solve_limit_1d(q, &exp, &fbar, 256, &settings).unwrap();
            if !lrep.converged {
                failures.push(format!("{tag}: limit solve did not converge"));
                continue;
            }
            let dev1d = u.values.iter().fold(0.0f64, |m, v| m.max((v - exact).abs()));
            if dev1d >= 1e-8 {
                failures.push(format!("{tag}: |u - {exact}| = {dev1d:e}"));
            }

            let w = corrector(
                regime,
                &u,
                matches!(regime, Regime::Resonant).then_some(&cell),
                &spec,
                &exp,
            )
            .unwrap();
            let m = error_metrics(&spec, &u_eps, &u, &w, p);
            let mut worst: f64 = m.lp_error.max(m.corrector_error).max(m.v_average_error);
            if let (Some(a), Some(b)) = (m.grad_rminus_error, m.grad_rplus_norm) {
                worst = worst.max(a).max(b);
            }
            if worst >= 1e-8 {
                failures.push(format!("{tag}: metric {worst:e} above 1e-8"));
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    if dt >= 30.0 {
        failures.push(format!("runtime {dt:.1} s exceeds 30 s"));
    }
    println!("criterion 1 runtime: {dt:.1} s");
    verdict("criterion 1: constant-data exactness", &failures);
}

// -------------------------------------------------------------------------
// criterion 2: closed-form coefficients
// -------------------------------------------------------------------------

#[test]
fn criterion_2_closed_form_coefficients() {
    let _g = gate();
    let mut failures = Vec::new();
    let profile = comb12();

    let q2 = q_weak(&profile, &exponent(2.0)).unwrap();
    if (q2 - 8.0 / 9.0).abs() >= 1e-12 {
        failures.push(format!("q_weak(comb, p=2) = {q2} != 8/9"));
    }
    let qs = q_strong(&profile).unwrap();
    if (qs - 2.0 / 3.0).abs() >= 1e-12 {
        failures.push(format!("q_strong(comb) = {qs} != 2/3"));
    }
    // exact-arithmetic oracle for p = 3: <g^(-1/2)> = (1 + 2^(-1/2))/2
    let q3 = q_weak(&profile, &exponent(3.0)).unwrap();
    let mean = 0.5 * (1.0 + 0.5f64.sqrt());
    let oracle = 1.0 / (1.5 * mean * mean);
    if (q3 - oracle).abs() >= 1e-12 {
        failures.push(format!("q_weak(comb, p=3) = {q3} != {oracle}"));
    }

    // constant profiles: q = 1 in every regime
    let settings = SolverSettings::default();
    for &c in &[0.5, 1.0, 2.0] {
        let g = BoundaryProfile::constant(c).unwrap();
        for &p in &[1.5, 2.0, 3.0] {
            let qw = q_weak(&g, &exponent(p)).unwrap();
            if (qw - 1.0).abs() >= 1e-12 {
                failures.push(format!("q_weak(const {c}, p={p}) = {qw}"));
            }
        }
        let qs = q_strong(&g).unwrap();
        if (qs - 1.0).abs() >= 1e-12 {
            failures.push(format!("q_strong(const {c}) = {qs}"));
        }
        let cell = q_resonant(&g, &exponent(2.0), g.period() / 16.0, &settings).unwrap();
        if (cell.q - 1.0).abs() >= 1e-8 {
            failures.push(format!("q_resonant(const {c}) = {}", cell.q));
        }
    }
    verdict("criterion 2: closed-form coefficients", &failures);
}

// -------------------------------------------------------------------------
// criterion 3: cell-problem sanity at alpha = 1
// -------------------------------------------------------------------------

#[test]
fn criterion_3_cell_problem_sanity() {
    let _g = gate();
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let settings = SolverSettings::default();

    // constant profile at h = L/32
    let g = BoundaryProfile::constant(1.0).unwrap();
    let cell = q_resonant(&g, &exponent(2.0), 1.0 / 32.0, &settings).unwrap();
    if !cell.report.converged || (cell.q - 1.0).abs() >= 1e-8 {
        failures.push(format!("constant profile q = {} (converged {})", cell.q, cell.report.converged));
    }

    // comb cell problem: q > 0, flux and energy forms agree, h-refinement is
    // a Cauchy sequence over h, h/2, h/4 starting at h = L/32
    let profile = comb12();
    for &p in &[2.0, 3.0] {
        let mut qs = Vec::new();
        for div in [32.0, 64.0, 128.0] {
            // Richardson refinement only required for p = 2
            if p != 2.0 && div > 32.0 {
                continue;
            }
            let cell = q_resonant(&profile, &exponent(p), 2.0 / div, &settings).unwrap();
            if !cell.report.converged {
                failures.push(format!("comb p={p} h=L/{div}: not converged"));
            }
            if cell.q <= 0.0 {
                failures.push(format!("comb p={p} h=L/{div}: q = {} <= 0", cell.q));
            }
            if (cell.q - cell.q_energy_form).abs() >= 1e-8 {
                failures.push(format!(
                    "comb p={p} h=L/{div}: flux form {} vs energy form {}",
                    cell.q, cell.q_energy_form
                ));
            }
            qs.push(cell.q);
        }
        if p == 2.0 {
            let d1 = (qs[1] - qs[0]).abs();
            let d2 = (qs[2] - qs[1]).abs();
            if d2 >= d1 {
                failures.push(format!("not Cauchy: |q(h/2)-q(h/4)| = {d2:e} >= |q(h)-q(h/2)| = {d1:e}"));
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    if dt >= 120.0 {
        failures.push(format!("runtime {dt:.1} s exceeds 2 min"));
    }
    println!("criterion 3 runtime: {dt:.1} s");
    verdict("criterion 3: cell-problem sanity", &failures);
}

// -------------------------------------------------------------------------
// criterion 4: strong-regime bounds
// -------------------------------------------------------------------------

#[test]
fn criterion_4_strong_regime_bounds() {
    let _g = gate();
    let mut failures = Vec::new();
    let profiles: Vec<(&str, BoundaryProfile)> = vec![
        ("comb(1,2)", comb12()),
        (
            "three-step",
            BoundaryProfile::piecewise_constant(3.0, &[0.0, 1.0, 2.0], &[1.0, 3.0, 2.0]).unwrap(),
        ),
        ("cosine", BoundaryProfile::cosine(1.0, 2.0, 1.0).unwrap()),
        (
            "triangle wave",
            BoundaryProfile::piecewise_linear(2.0, &[0.0, 1.0], &[1.0, 2.0], &[2.0, 1.0]).unwrap(),
        ),
        (
            "tabulated",
            BoundaryProfile::tabulated(1.0, &[(0.0, 1.0), (0.3, 2.5), (0.8, 1.5)]).unwrap(),
        ),
    ];
    for (name, g) in &profiles {
        let q = q_strong(g).unwrap();
        let lower = g.g_min() / g.g_max();
        if q < lower - 1e-12 {
            failures.push(format!("{name}: q = {q} below g0/g1 = {lower}"));
        }
        if q >= 1.0 {
            failures.push(format!("{name}: q = {q} not below 1"));
        }
    }
    verdict("criterion 4: strong-regime bounds", &failures);
}

// -------------------------------------------------------------------------
// criteria 5 and 8 share the nine sweeps
// -------------------------------------------------------------------------

struct SweepCase {
    p: f64,
    alpha: f64,
    report: SweepReport,
}

struct SweepBundle {
    cases: Vec<SweepCase>,
    wall_s: f64,
}

static SWEEPS: OnceLock<SweepBundle> = OnceLock::new();

fn sweeps() -> &'static SweepBundle {
    SWEEPS.get_or_init(|| {
        let t0 = Instant::now();
        let mut cases = Vec::new();
        for &p in &[1.5, 2.0, 3.0] {
            for &alpha in &[0.5, 1.0, 2.0] {
                let config = RunConfig {
                    profile: comb12(),
                    p,
                    alpha,
                    epsilon_list: vec![0.1, 0.05, 0.025, 0.0125],
                    forcing: Forcing::Cosine {
                        amplitude: 1.0,
                        frequency: 1.0,
                    },
                    mesh: MeshPolicy {
                        // discretization error must decay along the sweep in
                        // the strong regime, where the fixed-relative-
                        // resolution floor would otherwise dominate
                        grading: if alpha > 1.0 { 0.5 } else { 0.0 },
                        ..MeshPolicy::default()
                    },
                    solver: SolverSettings::default(),
                    out_dir: std::env::temp_dir(),
                    seed: 0,
                    threads: 0,
                    fixed_timing: true,
                };
                let report = run_sweep(&config).unwrap();
                cases.push(SweepCase { p, alpha, report });
            }
        }
        SweepBundle {
            cases,
            wall_s: t0.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_5_convergence_sweeps() {
    let _g = gate();
    let bundle = sweeps();
    let mut failures = Vec::new();
    for case in &bundle.cases {
        let tag = format!("p={}, alpha={}", case.p, case.alpha);
        let rows = &case.report.rows;
        if rows.iter().any(|r| !r.converged) {
            failures.push(format!("{tag}: unconverged rows"));
            continue;
        }
        let lp: Vec<f64> = rows.iter().map(|r| r.lp_error).collect();
        let corr: Vec<f64> = rows.iter().map(|r| r.corrector_error).collect();
        if !lp.windows(2).all(|w| w[1] < w[0]) {
            failures.push(format!("{tag}: lp_error not strictly decreasing: {lp:?}"));
        }
        if !corr.windows(2).all(|w| w[1] < w[0]) {
            failures.push(format!(
                "{tag}: corrector_error not strictly decreasing: {corr:?}"
            ));
        }
        let ratio = lp[3] / lp[0];
        if ratio > 0.5 {
            failures.push(format!("{tag}: lp ratio {ratio:.3} above 0.5"));
        }
        if case.alpha > 1.0 {
            let rplus: Vec<f64> = rows.iter().map(|r| r.grad_rplus_norm.unwrap()).collect();
            if !rplus.windows(2).all(|w| w[1] < w[0]) {
                failures.push(format!(
                    "{tag}: grad_rplus_norm not decreasing: {rplus:?}"
                ));
            }
        }
        println!(
            "  {tag}: lp {:.3e} -> {:.3e} (ratio {:.3}), corrector {:.3e} -> {:.3e}",
            lp[0],
            lp[3],
            ratio,
            corr[0],
            corr[3]
        );
    }
    if bundle.wall_s >= 900.0 {
        failures.push(format!("runtime {:.0} s exceeds 15 min", bundle.wall_s));
    }
    println!("criterion 5 sweep runtime: {:.0} s", bundle.wall_s);
    verdict("criterion 5: convergence sweeps", &failures);
}

#[test]
fn criterion_8_a_priori_bound() {
    let _g = gate();
    let bundle = sweeps();
    let mut failures = Vec::new();
    for case in &bundle.cases {
        let norms: Vec<f64> = case.report.rows.iter().map(|r| r.u_w1p_norm).collect();
        if norms.iter().any(|n| !n.is_finite()) {
            failures.push(format!(
                "p={}, alpha={}: non-finite W^(1,p) norm",
                case.p, case.alpha
            ));
            continue;
        }
        let max = norms.iter().cloned().fold(f64::MIN, f64::max);
        let min = norms.iter().cloned().fold(f64::MAX, f64::min);
        if max / min >= 2.0 {
            failures.push(format!(
                "p={}, alpha={}: |||u_eps|||_W1p varies by {:.2} over the sweep",
                case.p,
                case.alpha,
                max / min
            ));
        }
    }
    verdict("criterion 8: a priori bound", &failures);
}

// -------------------------------------------------------------------------
// criterion 6: unfolding identities
// -------------------------------------------------------------------------

#[test]
fn criterion_6_unfolding_identities() {
    let _g = gate();
    let t0 = Instant::now();
    let mut failures = Vec::new();
    // full cells, leftover set, weak and strong scalings, terrain mesher
    let specs = vec![
        ThinDomainSpec::new(0.1, 1.0, comb12()).unwrap(),
        ThinDomainSpec::new(0.15, 1.0, comb12()).unwrap(),
        ThinDomainSpec::new(0.2, 0.5, comb12()).unwrap(),
        ThinDomainSpec::new(0.1, 2.0, comb12()).unwrap(),
        ThinDomainSpec::new(0.1, 1.0, BoundaryProfile::cosine(1.0, 2.0, 1.0).unwrap()).unwrap(),
    ];
    for spec in &specs {
        let checks = property_suite(spec, spec.cell_width() / 8.0, 42).unwrap();
        for c in &checks {
            if !c.pass {
                failures.push(format!(
                    "eps={}, alpha={}: {} defect {:e} above {:e}",
                    spec.epsilon, spec.alpha, c.name, c.defect, c.tolerance
                ));
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    if dt >= 30.0 {
        failures.push(format!("runtime {dt:.1} s exceeds 30 s"));
    }
    println!("criterion 6 runtime: {dt:.1} s");
    verdict("criterion 6: unfolding identities", &failures);
}

// -------------------------------------------------------------------------
// criterion 7: solver correctness
// -------------------------------------------------------------------------

/// Independent linear P1 assembly for p = 2: explicit element stiffness and
/// consistent mass formulas, no shared code with the production assembler.
mod linear_oracle {
    use thinhom_core::TriangleMesh;

    pub struct Linear {
        pub stiffness: Vec<Vec<(usize, f64)>>,
        pub mass: Vec<Vec<(usize, f64)>>,
    }

    pub fn assemble(mesh: &TriangleMesh) -> Linear {
        let n = mesh.n_nodes();
        let mut k = vec![Vec::new(); n];
        let mut m = vec![Vec::new(); n];
        for e in 0..mesh.n_elements() {
            let [a, b, c] = mesh.elements[e];
            let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
            let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            let area = 0.5 * det;
            // gradients of the hats from the cofactor formulas
            let grads = [
                [(pb[1] - pc[1]) / det, (pc[0] - pb[0]) / det],
                [(pc[1] - pa[1]) / det, (pa[0] - pc[0]) / det],
                [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det],
            ];
            let nodes = [a, b, c];
            for i in 0..3 {
                for j in 0..3 {
                    let kij = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    let mij = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                    k[nodes[i]].push((nodes[j], kij));
                    m[nodes[i]].push((nodes[j], mij));
                }
            }
        }
        Linear { stiffness: k, mass: m }
    }

    impl Linear {
        pub fn apply(&self, which: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
            let mut y = vec![0.0; x.len()];
            for (i, row) in which.iter().enumerate() {
                for &(j, v) in row {
                    y[i] += v * x[j];
                }
            }
            y
        }
    }
}

#[test]
fn criterion_7_solver_correctness() {
    let _g = gate();
    let mut failures = Vec::new();
    let mut rng = thinhom_core::util::SplitMix64::new(2024);
    let settings = SolverSettings::default();

    let spec = ThinDomainSpec::new(0.1, 1.0, comb12()).unwrap();
    let mesh = std::sync::Arc::new(mesh_thin_domain(&spec, spec.cell_width() / 8.0).unwrap());

    // finite-difference gradient of the energy
    for &p in &[1.5, 2.0, 3.0, 4.0] {
        let exp = exponent(p);
        let delta = if p < 2.0 { 1e-3 } else { 0.0 };
        let u = FemFunction {
            values: (0..mesh.n_nodes()).map(|_| rng.symmetric()).collect(),
            mesh: mesh.clone(),
        };
        let umax = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f = |x: f64| (std::f64::consts::PI * x).cos();
        let src = SourceTerm::XOnly(&f);
        let r = fem::assemble_residual(&mesh, &exp, delta, Some(&src), &u);
        let step = 1e-6 * (1.0 + umax);
        for _ in 0..20 {
            let i = rng.index(mesh.n_nodes());
            let mut up = u.clone();
            let mut um = u.clone();
            up.values[i] += step;
            um.values[i] -= step;
            let fd = (fem::energy(&mesh, &exp, delta, Some(&src), &up)
                - fem::energy(&mesh, &exp, delta, Some(&src), &um))
                / (2.0 * step);
            let denom = r[i].abs().max(1e-8);
            if (fd - r[i]).abs() / denom >= 1e-5 {
                failures.push(format!(
                    "p={p}: residual/energy gradient mismatch {:e} at dof {i}",
                    (fd - r[i]).abs() / denom
                ));
                break;
            }
        }
    }

    // p = 2 against the independent linear assembly
    {
        let exp = exponent(2.0);
        let lin = linear_oracle::assemble(&mesh);
        let u = FemFunction {
            values: (0..mesh.n_nodes()).map(|_| rng.symmetric()).collect(),
            mesh: mesh.clone(),
        };
        let fvals = FemFunction {
            values: (0..mesh.n_nodes()).map(|_| rng.symmetric()).collect(),
            mesh: mesh.clone(),
        };
        let src = SourceTerm::Fem(&fvals);
        let r = fem::assemble_residual(&mesh, &exp, 0.0, Some(&src), &u);
        let ku = lin.apply(&lin.stiffness, &u.values);
        let mu = lin.apply(&lin.mass, &u.values);
        let mf = lin.apply(&lin.mass, &fvals.values);
        let scale = ku
            .iter()
            .zip(&mu)
            .fold(0.0f64, |m, (a, b)| m.max(a.abs() + b.abs()));
        let worst = (0..mesh.n_nodes())
            .map(|i| (r[i] - (ku[i] + mu[i] - mf[i])).abs())
            .fold(0.0f64, f64::max);
        if worst / scale >= 1e-12 {
            failures.push(format!(
                "p=2 residual deviates from the linear oracle by {:e} (relative)",
                worst / scale
            ));
        }
        // energy against the quadratic form of the oracle
        let e = fem::energy(&mesh, &exp, 0.0, Some(&src), &u);
        let quad = 0.5
            * (u.values.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>()
                + u.values.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>())
            - u.values.iter().zip(&mf).map(|(a, b)| a * b).sum::<f64>();
        if (e - quad).abs() >= 1e-12 * (1.0 + quad.abs()) {
            failures.push(format!("p=2 energy {e} deviates from the quadratic form {quad}"));
        }
        // Jacobian adjointness through the public triplets, and independence
        // of the linearization point at p = 2
        let jac = fem::assemble_jacobian(&mesh, &exp, 0.0, &u);
        let other = FemFunction {
            values: (0..mesh.n_nodes()).map(|_| rng.symmetric()).collect(),
            mesh: mesh.clone(),
        };
        let jac_other = fem::assemble_jacobian(&mesh, &exp, 0.0, &other);
        let probe: Vec<f64> = (0..jac.n).map(|_| rng.symmetric()).collect();
        let dev = jac
            .apply(&probe)
            .iter()
            .zip(jac_other.apply(&probe))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if dev >= 1e-13 {
            failures.push(format!("p=2 Jacobian depends on u: {dev:e}"));
        }
        let x: Vec<f64> = (0..jac.n).map(|_| rng.symmetric()).collect();
        let y: Vec<f64> = (0..jac.n).map(|_| rng.symmetric()).collect();
        let jx = jac.apply(&x);
        let jy = jac.apply(&y);
        let sym = (jx.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
            - jy.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
        .abs();
        if sym >= 1e-13 * scale {
            failures.push(format!("Jacobian asymmetry {sym:e}"));
        }
    }

    // two-start uniqueness: 2D, cell problem, 1D
    {
        let f = |x: f64| (std::f64::consts::PI * x).cos();
        let src = SourceTerm::XOnly(&f);
        for &p in &[1.5, 3.0] {
            let exp = exponent(p);
            let a: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.symmetric()).collect();
            let b: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.symmetric()).collect();
            let (ua, ra) = fem::solve_neumann_from(&mesh, &exp, &src, &settings, Some(&a)).unwrap();
            let (ub, rb) = fem::solve_neumann_from(&mesh, &exp, &src, &settings, Some(&b)).unwrap();
            let gap = ua
                .values
                .iter()
                .zip(&ub.values)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            if !(ra.converged && rb.converged) || gap >= 1e-8 {
                failures.push(format!("2D two-start p={p}: gap {gap:e}"));
            }
        }
        let geom = CellGeometry::new(CellDomain::YStar, comb12()).unwrap();
        let cmesh = std::sync::Arc::new(mesh_cell(&geom, 2.0 / 16.0, true).unwrap());
        let exp = exponent(3.0);
        let a: Vec<f64> = (0..cmesh.n_nodes()).map(|_| rng.symmetric()).collect();
        let b: Vec<f64> = (0..cmesh.n_nodes()).map(|_| rng.symmetric()).collect();
        let ca = fem::solve_cell_from(&cmesh, &exp, &settings, Some(&a)).unwrap();
        let cb = fem::solve_cell_from(&cmesh, &exp, &settings, Some(&b)).unwrap();
        let gap = ca
            .w
            .values
            .iter()
            .zip(&cb.w.values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if gap >= 1e-8 {
            failures.push(format!("cell two-start: gap {gap:e}"));
        }
        let exp = exponent(1.5);
        let a: Vec<f64> = (0..65).map(|_| rng.symmetric()).collect();
        let b: Vec<f64> = (0..65).map(|_| rng.symmetric()).collect();
        let f1 = |x: f64| 1.0 + (std::f64::consts::PI * x).cos();
        let (ua, _) = fem::solve_limit_1d_from(0.9, &exp, &f1, 64, &settings, Some(&a)).unwrap();
        let (ub, _) = fem::solve_limit_1d_from(0.9, &exp, &f1, 64, &settings, Some(&b)).unwrap();
        let gap = ua
            .values
            .iter()
            .zip(&ub.values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if gap >= 1e-8 {
            failures.push(format!("1D two-start: gap {gap:e}"));
        }
    }

    // manufactured solution, p = 2: u = cos(pi x) with f = (1 + pi^2) cos(pi x)
    {
        let pi = std::f64::consts::PI;
        let exp = exponent(2.0);
        let geom = CellGeometry::new(CellDomain::YStar, BoundaryProfile::constant(1.0).unwrap())
            .unwrap();
        let mut errs = Vec::new();
        for div in [8.0, 16.0, 32.0] {
            let m = std::sync::Arc::new(mesh_cell(&geom, 1.0 / div, false).unwrap());
            let f = move |x: f64| (1.0 + pi * pi) * (pi * x).cos();
            let (u, rep) = solve_neumann(&m, &exp, &SourceTerm::XOnly(&f), &settings).unwrap();
            assert!(rep.converged);
            let e2 = integrate_d5(&m, |e, x, _, bary| {
                (u.value_at(e, bary) - (pi * x).cos()).powi(2)
            });
            errs.push(e2.sqrt());
        }
        let r1 = (errs[0] / errs[1]).log2();
        let r2 = (errs[1] / errs[2]).log2();
        if r1 < 1.9 || r2 < 1.9 {
            failures.push(format!("2D manufactured L2 rates {r1:.2}, {r2:.2} below 1.9"));
        }

        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let f = move |x: f64| (1.0 + pi * pi) * (pi * x).cos();
            let (u, rep) = solve_limit_1d(1.0, &exp, &f, n, &settings).unwrap();
            assert!(rep.converged);
            let mut e2 = 0.0;
            for e in 0..n {
                let (a, b) = (u.mesh.nodes[e], u.mesh.nodes[e + 1]);
                let h = b - a;
                let g = |x: f64| (u.eval(x) - (pi * x).cos()).powi(2);
                e2 += h / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b - 1e-15));
            }
            errs.push(e2.sqrt());
        }
        let r1 = (errs[0] / errs[1]).log2();
        let r2 = (errs[1] / errs[2]).log2();
        if r1 < 1.9 || r2 < 1.9 {
            failures.push(format!("1D manufactured L2 rates {r1:.2}, {r2:.2} below 1.9"));
        }
    }

    verdict("criterion 7: solver correctness", &failures);
}
