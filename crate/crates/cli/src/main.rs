//! Batch front end: run, sweep and study subcommands emitting plot-ready
//! artifacts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 contact halt (with `events.json` written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use fsi_core::config::RunConfig;
use fsi_core::diagnostics::{energy_ledger, gamma_sweep, projector_error_study, SweepConfig};
use fsi_core::error::Error;
use fsi_core::fields::{lift, ContainerGrid, SobolevConfig};
use fsi_core::geometry::{build_lower_envelope, positive_part_shift};
use fsi_core::grid::Grid1;
use fsi_core::solver::{self, run};
use fsi_core::store::{columns_csv, save_trajectory};

#[derive(Parser)]
#[command(name = "fsi", version, about = "Coupled fluid-film / beam simulator")]
struct Cli {
    /// Verbosity (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Path to the run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created fresh).
    #[arg(long)]
    out: PathBuf,
    /// Override the time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the horizontal resolution.
    #[arg(long)]
    nx: Option<usize>,
    /// Override the vertical resolution.
    #[arg(long)]
    nz: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a configuration and its initial data without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate one run and persist checkpoints, ledger and events.
    Run(CommonArgs),
    /// Run a decreasing sequence of damping values and compare the members.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated damping values, overriding the config's gamma.
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        /// Envelope gap target.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Worker threads for sweep members.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Build the piecewise-in-time lower envelope of a run's interface.
    StudyEnvelope {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.2)]
        theta: f64,
    },
    /// Tabulate the projection-error decay of the competitor construction.
    StudyProjector {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        nx: usize,
        #[arg(long, default_value_t = 0.1)]
        s: f64,
        #[arg(long, default_value_t = 0.25)]
        kappa: f64,
    },
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dt) = args.dt {
        cfg.grid.dt = dt;
    }
    if let Some(nx) = args.nx {
        cfg.grid.nx = nx;
    }
    if let Some(nz) = args.nz {
        cfg.grid.nz = nz;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)
}

fn classify(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Serde(_) => 2,
        _ => 3,
    }
}

fn cmd_validate(config: &Path) -> Result<u8, Error> {
    let cfg = RunConfig::load(config)?;
    let tols = solver::fluid::FluidTols::default();
    let data = solver::init::assemble_initial_data(&cfg, &tols)?;
    println!(
        "config ok: hash {}, initial energy {:.6e}, min height {:.4}, lambda {:.4}",
        &cfg.hash()[..16],
        data.energy,
        data.sim.beam.min_height(),
        data.lambda
    );
    Ok(0)
}

fn cmd_run(args: &CommonArgs, verbose: u8) -> Result<u8, Error> {
    let cfg = load_config(args)?;
    prepare_out(&args.out)?;
    let started = Instant::now();
    let outcome = run(&cfg)?;
    let wall = started.elapsed().as_secs_f64();
    let ledger = energy_ledger(&outcome.trajectory, &cfg.params)?;
    save_trajectory(&outcome.trajectory, &ledger, &args.out, wall)?;
    let t = &outcome.trajectory;
    println!(
        "run {}: {} steps, final t {:.4}, min h {:.4}, ledger residual {:.3e}, wall {:.1}s",
        &t.config_hash[..12],
        t.stats.steps,
        t.final_sample().time,
        t.stats.min_height,
        ledger.max_abs_residual(),
        wall
    );
    if verbose > 0 {
        println!(
            "  per-step extrema: |mean eta_dot| {:.2e}, divergence {:.2e}, kinematic {:.2e}, coupling iters {}",
            t.stats.max_abs_mean_eta_dot,
            t.stats.max_div_residual,
            t.stats.max_kinematic_mismatch,
            t.stats.max_coupling_iters
        );
    }
    if let Some(event) = outcome.contact {
        println!(
            "contact halt at t = {:.6}, node {}, min height {:.3e}",
            event.time, event.node, event.min_height
        );
        return Ok(4);
    }
    Ok(0)
}

fn cmd_sweep(
    common: &CommonArgs,
    gammas: &[f64],
    delta: f64,
    workers: usize,
) -> Result<u8, Error> {
    let cfg = load_config(common)?;
    prepare_out(&common.out)?;
    let gammas = if gammas.is_empty() {
        vec![cfg.params.gamma]
    } else {
        gammas.to_vec()
    };
    let sweep = SweepConfig {
        gammas,
        delta,
        theta: 0.2,
        workers,
    };
    let started = Instant::now();
    let (report, trajectories) = gamma_sweep(&cfg, &sweep)?;
    for traj in &trajectories {
        let dir = common
            .out
            .join(format!("gamma-{:.6e}", traj.config.params.gamma));
        let ledger = energy_ledger(traj, &traj.config.params)?;
        save_trajectory(traj, &ledger, &dir, 0.0)?;
    }
    std::fs::write(
        common.out.join("sweep_report.json"),
        serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )?;
    let tables = common.out.join("tables");
    std::fs::create_dir_all(&tables)?;
    let mids: Vec<f64> = report
        .gammas
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    std::fs::write(
        tables.join("cauchy.csv"),
        columns_csv(
            "gamma_mid",
            &mids,
            &[
                ("velocity_l2", &report.cauchy_velocity),
                ("beam_l2", &report.cauchy_beam),
            ],
        ),
    )?;
    let min_heights: Vec<f64> = report.members.iter().map(|m| m.min_height).collect();
    let residuals: Vec<f64> = report
        .members
        .iter()
        .map(|m| m.ledger_max_abs_residual)
        .collect();
    let l4: Vec<f64> = report.members.iter().map(|m| m.l4.space_time_l4).collect();
    std::fs::write(
        tables.join("members.csv"),
        columns_csv(
            "gamma",
            &report.gammas,
            &[
                ("min_height", &min_heights),
                ("ledger_residual", &residuals),
                ("l4_space_time", &l4),
            ],
        ),
    )?;
    println!(
        "sweep over {:?}: cauchy velocity {:?}, wall {:.1}s",
        report.gammas,
        report.cauchy_velocity,
        started.elapsed().as_secs_f64()
    );
    Ok(0)
}

fn cmd_study_envelope(common: &CommonArgs, delta: f64, theta: f64) -> Result<u8, Error> {
    let cfg = load_config(common)?;
    prepare_out(&common.out)?;
    let outcome = run(&cfg)?;
    let traj = outcome.trajectory.height_trajectory()?;
    let envelope = build_lower_envelope(&traj, delta, theta)?;
    std::fs::write(
        common.out.join("envelope.json"),
        serde_json::to_string_pretty(&envelope).map_err(Error::from)?,
    )?;
    let tables = common.out.join("tables");
    std::fs::create_dir_all(&tables)?;
    let xs = traj.grid.nodes();
    for (k, row) in envelope.rows.iter().enumerate() {
        std::fs::write(
            tables.join(format!("envelope_row_{k:04}.csv")),
            columns_csv("x", &xs, &[("h_lower", row)]),
        )?;
    }
    println!(
        "envelope: delta {:.3}, eps {:.5}, {} slabs, max gap {:.5}",
        envelope.delta, envelope.epsilon, envelope.num_intervals, envelope.max_gap
    );
    Ok(0)
}

fn cmd_study_projector(out: &Path, nx: usize, s: f64, kappa: f64) -> Result<u8, Error> {
    prepare_out(out)?;
    let cfg = SobolevConfig::new(kappa, s)?;
    let x = Grid1::new(nx, 1.0);
    let grid = ContainerGrid::new(x, 1.5, nx / 2)?;
    let h: Vec<f64> = x.sample(|xx| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * xx).sin());
    let d = x.sample(|xx| 0.5 * (2.0 * std::f64::consts::PI * xx).cos());
    let pair = lift(&d, 0.5, &h, grid)?;
    let family: Vec<Vec<f64>> = (2..=8)
        .map(|j| positive_part_shift(&h, 2f64.powi(-j)))
        .collect::<Result<_, _>>()?;
    let rows = projector_error_study(&pair, &h, &family, &cfg)?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.xs_error).collect();
    let tables = out.join("tables");
    std::fs::create_dir_all(&tables)?;
    std::fs::write(
        tables.join("projector_decay.csv"),
        columns_csv("gap_w1inf", &gaps, &[("xs_error", &errs)]),
    )?;
    std::fs::write(
        out.join("projector_study.json"),
        serde_json::to_string_pretty(&rows).map_err(Error::from)?,
    )?;
    println!("projector study: first error {:.4e}, last {:.4e}", errs[0], errs[errs.len() - 1]);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Run(common) => cmd_run(common, cli.verbose),
        Command::Sweep {
            common,
            gammas,
            delta,
            workers,
        } => cmd_sweep(common, gammas, *delta, *workers),
        Command::StudyEnvelope {
            common,
            delta,
            theta,
        } => cmd_study_envelope(common, *delta, *theta),
        Command::StudyProjector { out, nx, s, kappa } => cmd_study_projector(out, *nx, *s, *kappa),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}
