use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use phonon_qc::experiments::{
    emit, parse_decoherence, parse_dephasing, run, ExperimentConfig, ExperimentKind, Shots, SpamMode,
};

#[derive(Parser, Debug)]
#[command(name = "phonon-qc", version, about = "Simulate transmon-phonon experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its tables plus summary.json.
    Run(RunArgs),
    /// Print the bundled device file.
    Device,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// rb | cphi-tomo | cphi-repeat | qft-tomo | qpf | calibrate
    experiment: ExperimentKind,
    /// Device JSON; the bundled three-mode device when omitted.
    #[arg(long)]
    device: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// none | full | infinite-phonon | infinite-qubit
    #[arg(long, default_value = "full", value_parser = |s: &str| parse_decoherence(s))]
    decoherence: phonon_qc::device::DecoherenceMode,
    /// standard | sigma-z
    #[arg(long, default_value = "standard", value_parser = |s: &str| parse_dephasing(s))]
    dephasing: phonon_qc::device::DephasingConvention,
    /// ideal | prep | measure | full
    #[arg(long, default_value = "ideal")]
    spam: SpamMode,
    /// `exact` or a shot count per setting
    #[arg(long, default_value = "exact")]
    shots: Shots,
    /// Corrupt sampled shots with readout misassignment, then invert it.
    #[arg(long)]
    readout_error: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// QPF oracle period (1, 2 or 4); all three when omitted.
    #[arg(long)]
    period: Option<u32>,
    /// Controlled phase in radians (default pi).
    #[arg(long)]
    phi: Option<f64>,
    /// Phonon mode index, 0-based.
    #[arg(long, default_value_t = 0)]
    mode: usize,
}

impl RunArgs {
    fn config(self) -> ExperimentConfig {
        ExperimentConfig {
            experiment: self.experiment,
            device_path: self.device,
            seed: self.seed,
            decoherence: self.decoherence,
            dephasing: self.dephasing,
            spam: self.spam,
            shots: self.shots,
            readout_error: self.readout_error,
            out: self.out,
            period: self.period,
            phi: self.phi,
            mode: self.mode,
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Device => {
            print!("{}", phonon_qc::device::DeviceParams::default_json());
        }
        Command::Run(args) => {
            let config = args.config();
            let bundle = run(&config).with_context(|| format!("running {}", config.experiment))?;
            match &config.out {
                Some(dir) => {
                    let written = emit(&bundle, dir)
                        .with_context(|| format!("writing results to {}", dir.display()))?;
                    for p in written {
                        eprintln!("wrote {}", p.display());
                    }
                }
                None => println!("{}", bundle.summary_json()),
            }
        }
    }
    Ok(())
}
