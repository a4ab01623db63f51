//! Command-line driver: flow runs, refinement studies, and the verification
//! suite. Outputs are plain CSV plus a JSON run summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analysis::{energy_report, run_convergence_study};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::solver::run_flow;
use crate::verify::run_verification;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::Nonconvergence(_) | Error::NearSingular(_) => EXIT_SOLVER,
        Error::Io(_) => EXIT_IO,
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// Executes a flow run: writes `snapshot_<step>.csv` for each scheduled
/// step, `snapshot_final.csv`, `diagnostics.csv`, and `run.json`.
pub fn cmd_run(config_path: &Path, out_dir: &Path) -> Result<()> {
    let cfg = RunConfig::from_file(config_path)?;
    ensure_dir(out_dir)?;
    let model = cfg.build_model()?;
    let initial = cfg.build_initial(&model)?;
    let h0 = initial.mesh_size();
    let solver = cfg.solver_config(h0);
    let traj = run_flow(&model, &initial, &solver)?;

    for &k in &cfg.snapshots {
        let mut f = std::io::BufWriter::new(std::fs::File::create(
            out_dir.join(format!("snapshot_{k}.csv")),
        )?);
        traj.surfaces[k].write_curve_csv(&mut f)?;
    }
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("snapshot_final.csv"))?);
        traj.final_surface().write_curve_csv(&mut f)?;
    }

    let report = energy_report(&model, &traj, cfg.exact_r0)?;
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("diagnostics.csv"))?);
        writeln!(
            f,
            "step,time,newton_iterations,residual,e_out,e_out_trivial,a_gamma,willmore,area,mesh_size,radius,error"
        )?;
        for (d, r) in traj.steps.iter().zip(&report) {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                d.step,
                d.time,
                d.newton_iterations,
                d.final_residual,
                d.e_out,
                d.e_out_trivial,
                d.a_gamma,
                d.willmore,
                d.area,
                d.mesh_size,
                d.dual_radius_mean,
                r.error.map(|e| format!("{e}")).unwrap_or_default()
            )?;
        }
    }

    let summary = serde_json::json!({
        "config": cfg.to_map(),
        "h0": h0,
        "tau": solver.tau,
        "tau_tilde": solver.tau_tilde,
        "steps_run": traj.steps.len(),
        "final_time": traj.times.last().copied().unwrap_or(0.0),
        "final_mesh_size": traj.final_surface().mesh_size(),
        "steps": traj.steps,
    });
    let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("run.json"))?);
    serde_json::to_writer_pretty(&mut f, &summary).map_err(|e| Error::Io(e.into()))?;
    writeln!(f)?;
    Ok(())
}

/// Executes a refinement study and writes `study.csv` plus `study.json`.
pub fn cmd_convergence(config_path: &Path, out_dir: &Path, threads: usize) -> Result<()> {
    let cfg = RunConfig::from_file(config_path)?;
    ensure_dir(out_dir)?;
    let model = cfg.build_model()?;
    let study_cfg = cfg.study_config(threads)?;
    let study = run_convergence_study(&model, &study_cfg)
        .map_err(|e| Error::Nonconvergence(format!("study failed: {e}")))?;
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("study.csv"))?);
        study.write_csv(&mut f)?;
    }
    let summary = serde_json::json!({
        "config": cfg.to_map(),
        "rows": study.rows,
    });
    let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("study.json"))?);
    serde_json::to_writer_pretty(&mut f, &summary).map_err(|e| Error::Io(e.into()))?;
    writeln!(f)?;
    Ok(())
}

/// Runs the verification suite and prints one line per property.
pub fn cmd_verify(seed: u64, seeds: usize, sizes: &[usize], out: &mut dyn Write) -> Result<bool> {
    let sizes = if sizes.is_empty() { vec![8] } else { sizes.to_vec() };
    let report = run_verification(seed, seeds, &sizes, 1.0);
    report.print(out)?;
    Ok(report.all_pass())
}

#[derive(clap::Parser)]
#[command(name = "awflow", version, about = "Anisotropic Willmore flow of closed planar curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Subcommand)]
pub enum Command {
    /// Run a flow from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a mesh-refinement study from a configuration file.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the derivative and oracle verification suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances per derivative family.
        #[arg(long, default_value_t = 20)]
        rounds: usize,
        /// Polygon sizes for the assembled-derivative checks.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

pub fn run_cli(cli: Cli) -> i32 {
    let result: Result<bool> = match cli.command {
        Command::Run { config, out, .. } => cmd_run(&config, &out).map(|_| true),
        Command::Convergence { config, out, threads, .. } => {
            cmd_convergence(&config, &out, threads).map(|_| true)
        }
        Command::Verify { seed, rounds, sizes, .. } => {
            cmd_verify(seed, rounds, &sizes, &mut std::io::stdout())
        }
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("verification reported failures");
            EXIT_SOLVER
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
