use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ccphase_cli::commands;
use ccphase_cli::{RunOptions, Scenario};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccphase", version, about = "Tunable-coupler CCPHASE gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adiabatic levels, conditional shifts and diabatic crossings over a coupler grid.
    Spectrum(Common),
    /// Calibrate the flux-pulse phase model and the π-pulses.
    Calibrate(Common),
    /// Solve a refocused pulse sequence for the scenario gate.
    Plan(Common),
    /// Plan (or load) and simulate the scenario gate.
    Gate {
        #[command(flatten)]
        common: Common,
        /// Simulate this plan file instead of solving a new one.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Evaluate the scenario over its sweep grid.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; defaults apply to absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long)]
    workers: Option<usize>,
    /// Simulation time step, ps.
    #[arg(long)]
    dt: Option<f64>,
    /// Write final states of every computational input.
    #[arg(long)]
    dump_states: bool,
    /// Replace an existing run directory.
    #[arg(long)]
    overwrite: bool,
}

impl Common {
    fn load(&self) -> Result<(Scenario, RunOptions)> {
        let mut sc = match &self.config {
            Some(p) => Scenario::load(p)?,
            None => Scenario::default(),
        };
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bail!("--dt must be positive");
            }
            sc.sim.sim_rate = 1000.0 / dt;
        }
        if let Some(n) = self.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global()
                .context("configuring worker pool")?;
        }
        let opts = RunOptions {
            out: self.out.clone(),
            overwrite: self.overwrite,
            dump_states: self.dump_states,
            plan: None,
        };
        Ok((sc, opts))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, result) = match &cli.command {
        Command::Spectrum(c) => ("spectrum", c.load().and_then(|(s, o)| commands::spectrum(&s, &o).map(|r| (o, r)))),
        Command::Calibrate(c) => ("calibrate", c.load().and_then(|(s, o)| commands::calibrate(&s, &o).map(|r| (o, r)))),
        Command::Plan(c) => ("plan", c.load().and_then(|(s, o)| commands::plan(&s, &o).map(|r| (o, r)))),
        Command::Gate { common, plan } => (
            "gate",
            common.load().and_then(|(s, mut o)| {
                o.plan = plan.clone();
                commands::gate(&s, &o).map(|r| (o, r))
            }),
        ),
        Command::Sweep(c) => ("sweep", c.load().and_then(|(s, o)| commands::sweep(&s, &o).map(|r| (o, r)))),
    };
    match result {
        Ok((opts, outcome)) => {
            let _ = commands::summarize(&mut std::io::stdout(), name, &opts, &outcome);
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
