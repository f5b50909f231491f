//! Command-line front end: coefficient queries, cell and single-epsilon
//! solves, full epsilon sweeps, and the unfolding-operator property suite.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use thinhom_core::{
    effective_coefficient, emit_outputs, mesh_thin_domain, parse_config, property_suite,
    q_resonant, run_sweep, solve_neumann, write_mesh_dump, Regime, RunConfig, SourceTerm,
    ThinDomainSpec,
};

#[derive(Parser)]
#[command(name = "thinhom", version, about = "p-Laplacian homogenization on thin oscillating domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep rows (0 = all cores; overrides run.threads)
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for randomized checks (overrides run.seed)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the homogenized coefficient q for the configured profile
    Coeff(Common),
    /// Solve the periodic cell problem; dump the corrector and print q
    Cell(Common),
    /// Solve the 2D problem at one epsilon and dump the solution
    Solve {
        #[command(flatten)]
        common: Common,
        /// Epsilon to solve at (default: first entry of epsilon_list)
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run the full epsilon sweep and write sweep.csv, summary.txt, plot.gp
    Sweep(Common),
    /// Run the unfolding-operator property suite at every epsilon
    UnfoldCheck(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = parse_config(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn cmd_coeff(cfg: &RunConfig) -> Result<ExitCode> {
    let exponent = thinhom_core::PLaplaceExponent::new(cfg.p)?;
    let l = cfg.profile.period();
    let h = l / (cfg.mesh.cells_per_period * cfg.mesh.cell_refine) as f64;
    let (q, cell) = effective_coefficient(&cfg.profile, &exponent, cfg.alpha, h, &cfg.solver)?;
    println!("regime = {}", Regime::from_alpha(cfg.alpha).name());
    println!("p = {}", cfg.p);
    println!("q = {q:.12e}");
    if let Some(cell) = cell {
        println!("q_energy_form = {:.12e}", cell.q_energy_form);
        println!("cell_dofs = {}", cell.mesh.n_nodes());
        println!("cell_converged = {}", cell.report.converged);
        return Ok(if cell.report.converged {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        });
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_cell(cfg: &RunConfig) -> Result<ExitCode> {
    let exponent = thinhom_core::PLaplaceExponent::new(cfg.p)?;
    let l = cfg.profile.period();
    let h = l / (cfg.mesh.cells_per_period * cfg.mesh.cell_refine) as f64;
    let cell = q_resonant(&cfg.profile, &exponent, h, &cfg.solver)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mesh_path = cfg.out_dir.join("cell_mesh.txt");
    let mut f = std::fs::File::create(&mesh_path)?;
    write_mesh_dump(&cell.mesh, &mut f)?;
    let vals_path = cfg.out_dir.join("cell_w.txt");
    let mut body = String::new();
    for v in &cell.w.values {
        body.push_str(&format!("{v:.17e}\n"));
    }
    std::fs::write(&vals_path, body)?;
    println!("q = {:.12e}", cell.q);
    println!("q_energy_form = {:.12e}", cell.q_energy_form);
    println!("newton_iterations = {}", cell.report.total_newton_iterations);
    println!("converged = {}", cell.report.converged);
    println!("wrote {}", mesh_path.display());
    println!("wrote {}", vals_path.display());
    Ok(if cell.report.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_solve(cfg: &RunConfig, epsilon: Option<f64>) -> Result<ExitCode> {
    let exponent = thinhom_core::PLaplaceExponent::new(cfg.p)?;
    let eps = epsilon.unwrap_or(cfg.epsilon_list[0]);
    let spec = ThinDomainSpec::new(eps, cfg.alpha, cfg.profile.clone())?;
    let h = spec.cell_width() / cfg.mesh.cells_per_period as f64;
    let mesh = Arc::new(mesh_thin_domain(&spec, h)?);
    let forcing = cfg.forcing.clone();
    let f = move |x: f64| forcing.eval(x);
    let (u, report) = solve_neumann(&mesh, &exponent, &SourceTerm::XOnly(&f), &cfg.solver)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mesh_path = cfg.out_dir.join("solution_mesh.txt");
    let mut fh = std::fs::File::create(&mesh_path)?;
    write_mesh_dump(&mesh, &mut fh)?;
    let vals_path = cfg.out_dir.join("solution_u.txt");
    let mut body = String::new();
    for v in &u.values {
        body.push_str(&format!("{v:.17e}\n"));
    }
    std::fs::write(&vals_path, body)?;
    println!("epsilon = {eps}");
    println!("dofs = {}", mesh.n_nodes());
    println!("newton_iterations = {}", report.total_newton_iterations);
    println!("final_residual = {:.3e}", report.final_residual_norm);
    println!("converged = {}", report.converged);
    println!("wrote {}", mesh_path.display());
    println!("wrote {}", vals_path.display());
    Ok(if report.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<ExitCode> {
    let report = run_sweep(cfg)?;
    let paths = emit_outputs(&report, cfg)?;
    println!(
        "regime = {}, p = {}, q = {:.12e}",
        report.regime.name(),
        report.p,
        report.q
    );
    for row in &report.rows {
        let status = if row.converged { "ok" } else { "FAILED" };
        println!(
            "epsilon = {:>10.6}  dofs = {:>8}  lp_error = {:>12.5e}  corrector_error = {:>12.5e}  [{status}]",
            row.epsilon, row.dofs, row.lp_error, row.corrector_error
        );
    }
    for p in &paths {
        println!("wrote {}", p.display());
    }
    Ok(if report.any_failed() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_unfold_check(cfg: &RunConfig) -> Result<ExitCode> {
    let mut all_pass = true;
    for &eps in &cfg.epsilon_list {
        let spec = ThinDomainSpec::new(eps, cfg.alpha, cfg.profile.clone())?;
        let h = spec.cell_width() / cfg.mesh.cells_per_period as f64;
        let checks = property_suite(&spec, h, cfg.seed)?;
        println!("epsilon = {eps}");
        for c in &checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            println!(
                "  [{status}] {:<26} defect = {:>12.5e}  (tolerance {:.1e})",
                c.name, c.defect, c.tolerance
            );
            all_pass &= c.pass;
        }
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Coeff(c) => cmd_coeff(&load(c)?),
        Command::Cell(c) => cmd_cell(&load(c)?),
        Command::Solve { common, epsilon } => cmd_solve(&load(common)?, *epsilon),
        Command::Sweep(c) => cmd_sweep(&load(c)?),
        Command::UnfoldCheck(c) => cmd_unfold_check(&load(c)?),
    }
}
