//! Run configurations, the epsilon-sweep driver, and file outputs.
//!
//! Config files are plain `section.key = value` lines ('#' starts a comment,
//! lists are comma separated). A sweep solves the 2D problem for every
//! epsilon, computes the homogenized coefficient and the 1D limit once, and
//! evaluates all error metrics per row; rows run in a work pool and each row
//! is deterministic.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::correctors::{corrector, error_metrics, rescaled_w1p_norm};
use crate::error::{Error, Result};
use crate::fem::{solve_neumann, CellSolution, SolverSettings, SourceTerm};
use crate::geometry::{BoundaryProfile, PLaplaceExponent, Regime, ThinDomainSpec};
use crate::homogenization::{
    limit_forcing, q_resonant, q_strong, q_weak, solve_limit, Forcing, ForcingSpec, LimitProblem,
};
use crate::mesh::mesh_thin_domain;
use crate::util::fnv1a_hex;

/// Mesh resolution policy: the thin domain gets `cells_per_period` columns
/// per oscillation period (`h = eps^alpha L / cells_per_period`), the cell
/// problem used for `q` is refined `cell_refine` times beyond that, and the
/// limit problem uses `limit_elements` intervals.
#[derive(Clone, Debug)]
pub struct MeshPolicy {
    pub cells_per_period: usize,
    pub cell_refine: usize,
    pub limit_elements: usize,
    /// Grades the per-row resolution with epsilon:
    /// `cells(eps) = cells_per_period * (eps_first / eps)^grading`. Zero
    /// keeps the relative resolution fixed; convergence studies use a
    /// positive exponent so discretization error decays along the sweep.
    pub grading: f64,
}

impl Default for MeshPolicy {
    fn default() -> Self {
        Self {
            cells_per_period: 8,
            cell_refine: 8,
            limit_elements: 1024,
            grading: 0.0,
        }
    }
}

impl MeshPolicy {
    /// Columns per oscillation period for the row at `eps`.
    pub fn cells_for(&self, eps_first: f64, eps: f64) -> usize {
        let factor = (eps_first / eps).powf(self.grading);
        ((self.cells_per_period as f64 * factor).round() as usize).max(4)
    }
}

/// A validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub profile: BoundaryProfile,
    pub p: f64,
    pub alpha: f64,
    /// Strictly decreasing, all in (0, 1).
    pub epsilon_list: Vec<f64>,
    pub forcing: Forcing,
    pub mesh: MeshPolicy,
    pub solver: SolverSettings,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    /// Write zero wall times so outputs are byte-reproducible.
    pub fixed_timing: bool,
}

/// One epsilon row of a sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub epsilon: f64,
    pub dofs: usize,
    pub lp_error: f64,
    pub corrector_error: f64,
    pub v_avg_error: f64,
    pub grad_rminus_error: Option<f64>,
    pub grad_rplus_norm: Option<f64>,
    pub newton_iters: usize,
    pub wall_time_s: f64,
    /// `||| u_eps |||_{W^{1,p}}`, for the a priori bound check.
    pub u_w1p_norm: f64,
    pub converged: bool,
    pub failure: Option<String>,
}

/// Sweep results: the header block and one row per epsilon (decreasing).
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub regime: Regime,
    pub p: f64,
    pub alpha: f64,
    pub profile_digest: String,
    pub profile_kind: &'static str,
    pub forcing: String,
    pub q: f64,
    pub q_energy_form: Option<f64>,
    pub q_closed_form: Option<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| !r.converged)
    }
}

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            let Some(eq) = stripped.find('=') else {
                return Err(Error::ConfigParse {
                    line,
                    message: format!("expected `key = value`, got `{stripped}`"),
                });
            };
            let key = stripped[..eq].trim().to_string();
            let value = stripped[eq + 1..].trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(Error::ConfigParse {
                    line,
                    message: "empty key or value".into(),
                });
            }
            if entries.insert(key.clone(), (line, value)).is_some() {
                return Err(Error::ConfigParse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<f64>().map_err(|_| Error::ConfigParse {
                    line,
                    message: format!("`{key}` expects a number, got `{v}`"),
                })
            })
            .transpose()
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<usize>().map_err(|_| Error::ConfigParse {
                    line,
                    message: format!("`{key}` expects an integer, got `{v}`"),
                })
            })
            .transpose()
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<u64>().map_err(|_| Error::ConfigParse {
                    line,
                    message: format!("`{key}` expects an integer, got `{v}`"),
                })
            })
            .transpose()
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<bool>().map_err(|_| Error::ConfigParse {
                    line,
                    message: format!("`{key}` expects true or false, got `{v}`"),
                })
            })
            .transpose()
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key)
            .map(|(line, v)| {
                v.split(',')
                    .map(|tok| {
                        tok.trim().parse::<f64>().map_err(|_| Error::ConfigParse {
                            line,
                            message: format!("`{key}` expects numbers, got `{tok}`"),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Parses and validates a run configuration file. Unknown keys are rejected.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut raw = RawConfig::parse(text)?;

    let profile = {
        let (line, kind) = raw
            .take("profile.kind")
            .ok_or_else(|| Error::ConfigValidation("profile.kind is required".into()))?;
        let period = raw.f64("profile.period")?.unwrap_or(1.0);
        let breaks = raw.list("profile.breakpoints")?;
        let values = raw.list("profile.values")?;
        let values_end = raw.list("profile.values_end")?;
        let mean = raw.f64("profile.mean")?;
        let amplitude = raw.f64("profile.amplitude")?;
        let missing = |what: &str| {
            Error::ConfigValidation(format!("profile.kind = {kind} needs {what}"))
        };
        match kind.as_str() {
            "constant" => {
                let v = values
                    .as_deref()
                    .and_then(|v| v.first().copied())
                    .ok_or_else(|| missing("profile.values with one entry"))?;
                BoundaryProfile::constant_with_period(v, period)
            }
            "piecewise_constant" => BoundaryProfile::piecewise_constant(
                period,
                &breaks.ok_or_else(|| missing("profile.breakpoints"))?,
                &values.ok_or_else(|| missing("profile.values"))?,
            ),
            "piecewise_linear" => {
                let b = breaks.ok_or_else(|| missing("profile.breakpoints"))?;
                let start = values.ok_or_else(|| missing("profile.values"))?;
                let end = values_end.ok_or_else(|| missing("profile.values_end"))?;
                BoundaryProfile::piecewise_linear(period, &b, &start, &end)
            }
            "cosine" => BoundaryProfile::cosine(
                period,
                mean.ok_or_else(|| missing("profile.mean"))?,
                amplitude.ok_or_else(|| missing("profile.amplitude"))?,
            ),
            "tabulated" => {
                let b = breaks.ok_or_else(|| missing("profile.breakpoints"))?;
                let v = values.ok_or_else(|| missing("profile.values"))?;
                if b.len() != v.len() {
                    return Err(Error::ConfigValidation(
                        "profile.breakpoints and profile.values must have equal length".into(),
                    ));
                }
                let pts: Vec<(f64, f64)> = b.into_iter().zip(v).collect();
                BoundaryProfile::tabulated(period, &pts)
            }
            other => {
                return Err(Error::ConfigParse {
                    line,
                    message: format!("unknown profile.kind `{other}`"),
                })
            }
        }
        .map_err(|e| Error::ConfigValidation(format!("profile: {e}")))?
    };

    let p = raw
        .f64("problem.p")?
        .ok_or_else(|| Error::ConfigValidation("problem.p is required".into()))?;
    let exponent = PLaplaceExponent::new(p)
        .map_err(|_| Error::ConfigValidation("p must lie in (1, \u{221e})".into()))?;
    let alpha = raw
        .f64("problem.alpha")?
        .ok_or_else(|| Error::ConfigValidation("problem.alpha is required".into()))?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::ConfigValidation("alpha must be positive".into()));
    }
    let epsilon_list = raw
        .list("problem.epsilon_list")?
        .ok_or_else(|| Error::ConfigValidation("problem.epsilon_list is required".into()))?;
    if epsilon_list.is_empty()
        || epsilon_list.iter().any(|&e| !(e > 0.0 && e < 1.0))
        || epsilon_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::ConfigValidation(
            "epsilon_list must be strictly decreasing with entries in (0, 1)".into(),
        ));
    }

    let forcing = match raw.take("forcing.kind") {
        None => Forcing::Constant(raw.f64("forcing.value")?.unwrap_or(1.0)),
        Some((line, kind)) => match kind.as_str() {
            "constant" => Forcing::Constant(raw.f64("forcing.value")?.unwrap_or(1.0)),
            "cosine" => Forcing::Cosine {
                amplitude: raw.f64("forcing.amplitude")?.unwrap_or(1.0),
                frequency: raw.f64("forcing.frequency")?.unwrap_or(1.0),
            },
            "polynomial" => Forcing::Polynomial(
                raw.list("forcing.coefficients")?
                    .ok_or_else(|| {
                        Error::ConfigValidation(
                            "forcing.kind = polynomial needs forcing.coefficients".into(),
                        )
                    })?,
            ),
            other => {
                return Err(Error::ConfigParse {
                    line,
                    message: format!("unknown forcing.kind `{other}`"),
                })
            }
        },
    };

    let mesh = MeshPolicy {
        cells_per_period: raw.usize("mesh.cells_per_period")?.unwrap_or(8),
        cell_refine: raw.usize("mesh.cell_refine")?.unwrap_or(8),
        limit_elements: raw.usize("mesh.limit_elements")?.unwrap_or(1024),
        grading: raw.f64("mesh.grading")?.unwrap_or(0.0),
    };
    if mesh.cells_per_period < 4 {
        return Err(Error::ConfigValidation(
            "mesh.cells_per_period must be at least 4 to resolve one period".into(),
        ));
    }
    if mesh.cell_refine == 0 || mesh.limit_elements == 0 {
        return Err(Error::ConfigValidation(
            "mesh.cell_refine and mesh.limit_elements must be positive".into(),
        ));
    }

    let mut solver = SolverSettings::default();
    if let Some(s) = raw.list("solver.delta_schedule")? {
        solver.delta_schedule = s;
    }
    if let Some(v) = raw.f64("solver.newton_tol_rel")? {
        solver.newton_tol_rel = v;
    }
    if let Some(v) = raw.f64("solver.newton_tol_abs")? {
        solver.newton_tol_abs = v;
    }
    if let Some(v) = raw.usize("solver.max_newton")? {
        solver.max_newton = v;
    }
    if let Some(v) = raw.f64("solver.backtrack_factor")? {
        solver.backtrack_factor = v;
    }
    if let Some(v) = raw.f64("solver.sufficient_decrease")? {
        solver.sufficient_decrease = v;
    }
    if solver.delta_schedule.is_empty()
        || solver.delta_schedule.iter().any(|&d| !(d > 0.0))
        || solver.delta_schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::ConfigValidation(
            "solver.delta_schedule must be strictly decreasing and positive".into(),
        ));
    }

    let out_dir = raw
        .take("output.dir")
        .map(|(_, v)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("out"));
    let fixed_timing = raw.bool("output.fixed_timing")?.unwrap_or(false);
    let seed = raw.u64("run.seed")?.unwrap_or(0);
    let threads = raw.usize("run.threads")?.unwrap_or(0);

    if let Some((key, (line, _))) = raw.entries.iter().next() {
        return Err(Error::ConfigParse {
            line: *line,
            message: format!("unknown key `{key}`"),
        });
    }

    let _ = exponent;
    Ok(RunConfig {
        profile,
        p,
        alpha,
        epsilon_list,
        forcing,
        mesh,
        solver,
        out_dir,
        seed,
        threads,
        fixed_timing,
    })
}

// ---------------------------------------------------------------------------
// sweep driver
// ---------------------------------------------------------------------------

fn profile_digest(profile: &BoundaryProfile) -> String {
    let canon = format!(
        "{}|{:.17e}|{:.17e}|{:.17e}|{:?}",
        profile.kind().name(),
        profile.period(),
        profile.g_min(),
        profile.g_max(),
        profile
            .piece_breaks()
            .iter()
            .map(|&b| (b, profile.one_sided_limits(b)))
            .collect::<Vec<_>>()
    );
    fnv1a_hex(canon.as_bytes())
}

fn nan_row(epsilon: f64, err: &Error) -> SweepRow {
    SweepRow {
        epsilon,
        dofs: 0,
        lp_error: f64::NAN,
        corrector_error: f64::NAN,
        v_avg_error: f64::NAN,
        grad_rminus_error: None,
        grad_rplus_norm: None,
        newton_iters: 0,
        wall_time_s: 0.0,
        u_w1p_norm: f64::NAN,
        converged: false,
        failure: Some(err.to_string()),
    }
}

/// Runs the full sweep: the coefficient and limit solution once, then one 2D
/// solve plus metrics per epsilon, concurrently across rows. Per-row solver
/// failures are recorded in the row and the sweep continues.
pub fn run_sweep(config: &RunConfig) -> Result<SweepReport> {
    let exponent = PLaplaceExponent::new(config.p)?;
    let regime = Regime::from_alpha(config.alpha);
    let profile = &config.profile;
    let l = profile.period();

    // homogenized coefficient: closed forms off-resonance, fine cell solve at
    // resonance (the corrector uses a separate cell solve at the resolution
    // of the thin-domain pattern, so discrete two-scale structure matches)
    let h_fine = l / (config.mesh.cells_per_period * config.mesh.cell_refine) as f64;
    let h_pattern = l / config.mesh.cells_per_period as f64;
    let (q, q_energy_form, q_closed_form, cell_for_corrector): (
        f64,
        Option<f64>,
        Option<f64>,
        Option<CellSolution>,
    ) = match regime {
        Regime::Weak => {
            let q = q_weak(profile, &exponent)?;
            (q, None, Some(q), None)
        }
        Regime::Strong => {
            let q = q_strong(profile)?;
            (q, None, Some(q), None)
        }
        Regime::Resonant => {
            let fine = q_resonant(profile, &exponent, h_fine, &config.solver)?;
            if !fine.report.converged {
                return Err(Error::NoConvergence(
                    "cell problem for the homogenized coefficient".into(),
                ));
            }
            let pattern = q_resonant(profile, &exponent, h_pattern, &config.solver)?;
            (fine.q, Some(fine.q_energy_form), None, Some(pattern))
        }
    };

    let lf = limit_forcing(&ForcingSpec::XOnly(config.forcing.clone()), profile, config.alpha)?;
    let problem = LimitProblem {
        q,
        fbar: lf.fbar,
        exponent,
        regime,
    };
    let (u_limit, limit_report) = solve_limit(&problem, config.mesh.limit_elements, &config.solver)?;
    if !limit_report.converged {
        return Err(Error::NoConvergence("limit problem".into()));
    }

    let run_row = |&epsilon: &f64| -> SweepRow {
        let t0 = Instant::now();
        let attempt = || -> Result<SweepRow> {
            let spec = ThinDomainSpec::new(epsilon, config.alpha, profile.clone())?;
            let cells = config.mesh.cells_for(config.epsilon_list[0], epsilon);
            let h = spec.cell_width() / cells as f64;
            let mesh = Arc::new(mesh_thin_domain(&spec, h)?);
            let f = |x: f64| config.forcing.eval(x);
            let (u_eps, report) =
                solve_neumann(&mesh, &exponent, &SourceTerm::XOnly(&f), &config.solver)?;
            let w = corrector(
                regime,
                &u_limit,
                cell_for_corrector.as_ref(),
                &spec,
                &exponent,
            )?;
            let metrics = error_metrics(&spec, &u_eps, &u_limit, &w, config.p);
            let u_w1p = rescaled_w1p_norm(&spec, &u_eps, config.p);
            Ok(SweepRow {
                epsilon,
                dofs: mesh.n_nodes(),
                lp_error: metrics.lp_error,
                corrector_error: metrics.corrector_error,
                v_avg_error: metrics.v_average_error,
                grad_rminus_error: metrics.grad_rminus_error,
                grad_rplus_norm: metrics.grad_rplus_norm,
                newton_iters: report.total_newton_iterations,
                wall_time_s: 0.0,
                u_w1p_norm: u_w1p,
                converged: report.converged,
                failure: report
                    .converged
                    .then_some(None)
                    .unwrap_or_else(|| Some("newton did not reach tolerance".into())),
            })
        };
        let mut row = attempt().unwrap_or_else(|e| nan_row(epsilon, &e));
        row.wall_time_s = if config.fixed_timing {
            0.0
        } else {
            t0.elapsed().as_secs_f64()
        };
        row
    };

    let rows: Vec<SweepRow> = if config.threads == 1 {
        config.epsilon_list.iter().map(run_row).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| config.epsilon_list.par_iter().map(run_row).collect())
    };

    Ok(SweepReport {
        regime,
        p: config.p,
        alpha: config.alpha,
        profile_digest: profile_digest(profile),
        profile_kind: profile.kind().name(),
        forcing: config.forcing.describe(),
        q,
        q_energy_form,
        q_closed_form,
        rows,
    })
}

// ---------------------------------------------------------------------------
// outputs
// ---------------------------------------------------------------------------

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.12e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Writes `sweep.csv`, `summary.txt` and `plot.gp` into the output directory
/// and returns their paths. Output bytes are a pure function of the report
/// and config.
pub fn emit_outputs(report: &SweepReport, config: &RunConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&config.out_dir)?;
    let csv_path = config.out_dir.join("sweep.csv");
    let summary_path = config.out_dir.join("summary.txt");
    let plot_path = config.out_dir.join("plot.gp");

    let mut csv = String::new();
    csv.push_str(
        "epsilon,dofs,q,q_energy_form,lp_error,corrector_error,v_avg_error,grad_rminus_error,grad_rplus_norm,newton_iters,wall_time_s\n",
    );
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt(r.epsilon),
            r.dofs,
            fmt(report.q),
            fmt_opt(report.q_energy_form),
            fmt(r.lp_error),
            fmt(r.corrector_error),
            fmt(r.v_avg_error),
            fmt_opt(r.grad_rminus_error),
            fmt_opt(r.grad_rplus_norm),
            r.newton_iters,
            fmt(r.wall_time_s),
        ));
    }
    std::fs::write(&csv_path, csv)?;

    let mut s = String::new();
    s.push_str(&format!("regime = {}\n", report.regime.name()));
    s.push_str(&format!("p = {}\n", report.p));
    s.push_str(&format!("alpha = {}\n", report.alpha));
    s.push_str(&format!(
        "profile = {} (digest {})\n",
        report.profile_kind, report.profile_digest
    ));
    s.push_str(&format!("forcing = {}\n", report.forcing));
    s.push_str(&format!("q = {}\n", fmt(report.q)));
    if let Some(qc) = report.q_closed_form {
        s.push_str(&format!("q_closed_form = {}\n", fmt(qc)));
    }
    if let Some(qe) = report.q_energy_form {
        s.push_str(&format!("q_energy_form = {}\n", fmt(qe)));
    }
    let converged = report.rows.iter().filter(|r| r.converged).count();
    s.push_str(&format!(
        "rows = {} (converged {}/{})\n",
        report.rows.len(),
        converged,
        report.rows.len()
    ));
    let ratio = |get: &dyn Fn(&SweepRow) -> Option<f64>| -> Option<(f64, f64, f64)> {
        let first = report.rows.first().and_then(|r| get(r))?;
        let last = report.rows.last().and_then(|r| get(r))?;
        Some((first, last, last / first))
    };
    let columns: [(&str, Box<dyn Fn(&SweepRow) -> Option<f64>>); 4] = [
        ("lp_error", Box::new(|r: &SweepRow| Some(r.lp_error))),
        (
            "corrector_error",
            Box::new(|r: &SweepRow| Some(r.corrector_error)),
        ),
        ("v_avg_error", Box::new(|r: &SweepRow| Some(r.v_avg_error))),
        (
            "grad_rplus_norm",
            Box::new(|r: &SweepRow| r.grad_rplus_norm),
        ),
    ];
    for (name, get) in &columns {
        if let Some((first, last, ratio)) = ratio(get.as_ref()) {
            s.push_str(&format!(
                "{name}: first = {}, last = {}, last/first = {}\n",
                fmt(first),
                fmt(last),
                fmt(ratio)
            ));
        }
    }
    for r in &report.rows {
        if let Some(msg) = &r.failure {
            s.push_str(&format!("failure at epsilon = {}: {msg}\n", fmt(r.epsilon)));
        }
    }
    std::fs::write(&summary_path, s)?;

    let mut g = String::new();
    g.push_str("# gnuplot script over sweep.csv\n");
    g.push_str("set datafile separator ','\n");
    g.push_str("set logscale xy\n");
    g.push_str("set key left top\n");
    g.push_str("set xlabel 'epsilon'\n");
    g.push_str("set ylabel 'error'\n");
    g.push_str(&format!(
        "set title 'regime {}, p = {}'\n",
        report.regime.name(),
        report.p
    ));
    g.push_str("plot 'sweep.csv' using 1:5 every ::1 with linespoints title 'lp error', \\\n");
    g.push_str("     'sweep.csv' using 1:6 every ::1 with linespoints title 'corrector error', \\\n");
    g.push_str("     'sweep.csv' using 1:7 every ::1 with linespoints title 'v average error'\n");
    let mut plot_file = std::fs::File::create(&plot_path)?;
    plot_file.write_all(g.as_bytes())?;

    Ok(vec![csv_path, summary_path, plot_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
profile.kind = constant
profile.values = 1.0
problem.p = 2.0
problem.alpha = 1.0
problem.epsilon_list = 0.1, 0.05
";

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.p, 2.0);
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.epsilon_list, vec![0.1, 0.05]);
        assert_eq!(cfg.mesh.cells_per_period, 8);
        assert!(!cfg.fixed_timing);
    }

    #[test]
    fn non_decreasing_epsilon_list_rejected() {
        let text = MINIMAL.replace("0.1, 0.05", "0.05, 0.1");
        match parse_config_str(&text) {
            Err(Error::ConfigValidation(msg)) => assert!(msg.contains("epsilon_list")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn p_equal_one_rejected_with_message() {
        let text = MINIMAL.replace("problem.p = 2.0", "problem.p = 1.0");
        match parse_config_str(&text) {
            Err(Error::ConfigValidation(msg)) => {
                assert_eq!(msg, "p must lie in (1, \u{221e})")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = format!("{MINIMAL}who.knows = 3\n");
        match parse_config_str(&text) {
            Err(Error::ConfigParse { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("who.knows"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn comment_and_spacing_tolerated() {
        let text = "\
# comment line
profile.kind = constant   # trailing comment
profile.values = 2.0

problem.p = 3.0
problem.alpha = 0.5
problem.epsilon_list = 0.2,0.1,0.05
forcing.kind = cosine
forcing.amplitude = 2.0
";
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.epsilon_list.len(), 3);
        assert!((cfg.forcing.eval(0.0) - 2.0).abs() < 1e-15);
    }

    fn tiny_config(dir: &Path) -> RunConfig {
        let mut cfg = parse_config_str(MINIMAL).unwrap();
        cfg.alpha = 0.5;
        cfg.out_dir = dir.to_path_buf();
        cfg.fixed_timing = true;
        cfg.threads = 1;
        cfg.mesh.limit_elements = 64;
        cfg
    }

    #[test]
    fn constant_profile_sweep_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let report = run_sweep(&cfg).unwrap();
        assert!(!report.any_failed());
        assert!((report.q - 1.0).abs() < 1e-12);
        for row in &report.rows {
            assert!(row.converged);
            assert!(row.lp_error < 1e-8, "lp {}", row.lp_error);
            assert!(row.corrector_error < 1e-8, "corr {}", row.corrector_error);
            assert!(row.v_avg_error < 1e-8);
        }
    }

    #[test]
    fn csv_schema_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let report = run_sweep(&cfg).unwrap();
        let paths = emit_outputs(&report, &cfg).unwrap();
        let csv = std::fs::read_to_string(&paths[0]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epsilon,dofs,q,q_energy_form,lp_error,corrector_error,v_avg_error,grad_rminus_error,grad_rplus_norm,newton_iters,wall_time_s"
        );
        assert_eq!(lines.count(), 2);
        // weak regime: q_energy_form and split columns are empty
        let row = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 11);
        assert!(fields[3].is_empty());
        assert!(fields[7].is_empty() && fields[8].is_empty());

        // rerun: byte-identical outputs under fixed timing
        let report2 = run_sweep(&cfg).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.out_dir = dir2.path().to_path_buf();
        let paths2 = emit_outputs(&report2, &cfg2).unwrap();
        let csv2 = std::fs::read_to_string(&paths2[0]).unwrap();
        assert_eq!(csv, csv2);
        let s1 = std::fs::read_to_string(&paths[1]).unwrap();
        let s2 = std::fs::read_to_string(&paths2[1]).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn strong_regime_rows_fill_split_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.alpha = 2.0;
        cfg.epsilon_list = vec![0.2];
        let report = run_sweep(&cfg).unwrap();
        assert!(report.rows[0].grad_rminus_error.is_some());
        assert!(report.rows[0].grad_rplus_norm.is_some());
        let paths = emit_outputs(&report, &cfg).unwrap();
        let csv = std::fs::read_to_string(&paths[0]).unwrap();
        let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert!(!fields[7].is_empty() && !fields[8].is_empty());
    }

    #[test]
    fn summary_and_plot_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let report = run_sweep(&cfg).unwrap();
        let paths = emit_outputs(&report, &cfg).unwrap();
        let summary = std::fs::read_to_string(&paths[1]).unwrap();
        assert!(summary.contains("regime = weak"));
        assert!(summary.contains("q_closed_form"));
        assert!(summary.contains("lp_error: first"));
        let plot = std::fs::read_to_string(&paths[2]).unwrap();
        assert!(plot.contains("sweep.csv"));
        assert!(plot.contains("logscale"));
    }
}
