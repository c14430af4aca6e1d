use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use realtraj::harness::{compare_trajectories, run_file, RunConfig, TrajectoryTable, OUT_DIR_ENV};
use realtraj::receiver::{effective_bandwidth, PhysicalReceiver};
use realtraj::Error;

#[derive(Parser)]
#[command(name = "realtraj", version, about = "Quantum trajectories for realistic photodetectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML config.
    Run {
        config: PathBuf,
        /// Default output directory when the config sets none.
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
    /// Maximum trace distance between two trajectory CSVs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Also write the per-snapshot distances here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Photoreceiver filter rate, noise power and effective bandwidth.
    Bandwidth(BandwidthArgs),
    /// Check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct BandwidthArgs {
    /// Dimensionless filter rate γ (with --noise).
    #[arg(long, requires = "noise", conflicts_with_all = ["resistance", "capacitance"])]
    gamma: Option<f64>,
    /// Dimensionless Johnson-noise power N.
    #[arg(long)]
    noise: Option<f64>,
    /// Feedback resistance (Ω).
    #[arg(long, requires_all = ["capacitance", "temperature", "lo_power", "wavelength"])]
    resistance: Option<f64>,
    /// Feedback capacitance (F).
    #[arg(long)]
    capacitance: Option<f64>,
    /// Resistor temperature (K).
    #[arg(long)]
    temperature: Option<f64>,
    /// Local-oscillator power (W).
    #[arg(long)]
    lo_power: Option<f64>,
    /// Optical wavelength (m).
    #[arg(long)]
    wavelength: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Parse(_) | Error::GridMismatch(_) => 3,
        e if e.is_numerical() => 2,
        _ => 1,
    }
}

fn bandwidth(args: &BandwidthArgs) -> Result<(), Error> {
    let (gamma, noise) = match (args.gamma, args.noise, args.resistance) {
        (Some(g), Some(n), None) => (g, n),
        (None, None, Some(resistance)) => {
            let scales = PhysicalReceiver {
                resistance,
                capacitance: args.capacitance.unwrap_or_default(),
                temperature: args.temperature.unwrap_or_default(),
                lo_power: args.lo_power.unwrap_or_default(),
                optical_frequency: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / args.wavelength.unwrap_or_default(),
                efficiency: args.efficiency,
            }
            .scales()?;
            (scales.filter_rate, scales.noise_power)
        }
        _ => {
            return Err(Error::Config(
                "give --gamma and --noise, or the physical parameters starting with --resistance".into(),
            ))
        }
    };
    println!("gamma = {gamma:e}");
    println!("noise_power = {noise:e}");
    match effective_bandwidth(gamma, noise) {
        Ok(b) => println!("bandwidth = {b:e}"),
        Err(e) => println!("bandwidth = none ({e})"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out_dir } => {
            if let Some(dir) = out_dir {
                std::env::set_var(OUT_DIR_ENV, dir);
            }
            let report = run_file(&config)?;
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if let Some(d) = report.me_distance {
                println!("max trace distance to master equation: {d:.6}");
            }
        }
        Command::Compare { a, b, report } => {
            let cmp = compare_trajectories(&TrajectoryTable::read_file(&a)?, &TrajectoryTable::read_file(&b)?)?;
            if let Some(path) = report {
                cmp.write_csv(std::fs::File::create(path)?)?;
            }
            println!("{:e}", cmp.max_distance());
        }
        Command::Bandwidth(args) => bandwidth(&args)?,
        Command::Validate { config } => {
            let (c, src) = RunConfig::load(&config)?;
            let setup = c.validate(Some(&src))?;
            println!(
                "ok: {} {:?}, {} steps, {} trajectories, sha256 {}",
                c.detector.name(),
                c.run.mode,
                setup.steps,
                c.run.trajectories,
                setup.hash
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
