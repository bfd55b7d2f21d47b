use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use swe_barrier::config::load_config;
use swe_barrier::driver::run;
use swe_barrier::geometry::{intersect_barrier, Grid};
use swe_barrier::io;
use swe_barrier::study::{compare_effectiveness, convergence_study};

#[derive(Parser)]
#[command(name = "swe-barrier", version, about = "Shallow water runs around a zero-width permeable barrier")]
struct Cli {
    /// Directory for all output files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; writes gauge, snapshot and stats CSVs.
    Run { config: PathBuf },
    /// Grid convergence of the cut-cell solver against a mapped reference.
    Converge {
        config: PathBuf,
        /// Study grids, coarse to fine.
        #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
        grids: Vec<usize>,
        /// Reference resolution of the mapped grid.
        #[arg(long = "ref", default_value_t = 300)]
        reference: usize,
    },
    /// Peak gauge depth without a barrier, with the straight barrier and
    /// with the folded V barrier.
    Compare { config: PathBuf },
    /// Dump the cut-cell table of the configured barrier.
    Geometry { config: PathBuf },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => cmd_run(&config, &cli.out),
        Command::Converge { config, grids, reference } => cmd_converge(&config, &grids, reference, &cli.out),
        Command::Compare { config } => cmd_compare(&config, &cli.out),
        Command::Geometry { config } => cmd_geometry(&config, &cli.out),
    }
}

fn load(path: &Path) -> Result<swe_barrier::driver::ScenarioConfig> {
    load_config(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_run(path: &Path, out: &Path) -> Result<()> {
    let config = load(path)?;
    info!("running {} on {}x{} to t = {}", path.display(), config.n, config.n, config.end_time);
    let output = run(&config)?;
    let files = io::write_run(out, &output)?;
    let st = output.stats;
    println!("steps {} min_dt {} mean_dt {}", st.steps, st.min_dt, st.mean_dt);
    println!("mass {} -> {} (drying fix {})", output.initial_mass, output.final_mass, output.drywet_mass);
    info!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn cmd_converge(path: &Path, grids: &[usize], reference: usize, out: &Path) -> Result<()> {
    let config = load(path)?;
    let times = if config.sample_times.is_empty() {
        bail!("{}: convergence needs output.sample_times", path.display());
    } else {
        config.sample_times.clone()
    };
    info!("convergence on grids {grids:?} against mapped {reference}x{reference}");
    let report = convergence_study(&config, grids, reference, &times)?;
    let csv = io::convergence_csv(&report);
    io::write_atomic(&out.join("convergence.csv"), &csv)?;
    println!("reference: mapped {reference}x{reference}; cut-cell grids {grids:?}");
    print!("{csv}");
    for g in 0..config.gauges.len() {
        if let Some(order) = report.sweep_order(g) {
            println!("gauge {} sweep order {order:.3}", g + 1);
        }
    }
    Ok(())
}

fn cmd_compare(path: &Path, out: &Path) -> Result<()> {
    let config = load(path)?;
    let e = compare_effectiveness(&config)?;
    let csv = io::effectiveness_csv(&e);
    io::write_atomic(&out.join("effectiveness.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_geometry(path: &Path, out: &Path) -> Result<()> {
    let config = load(path)?;
    let Some(barrier) = &config.barrier else {
        bail!("{}: no barrier configured", path.display());
    };
    let table = intersect_barrier(Grid::square(config.n), barrier)?;
    io::write_atomic(&out.join("geometry.csv"), &io::geometry_csv(&table))?;
    println!("{} cut cells", table.cells.len());
    Ok(())
}
