use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uwb_collide::harness::{exit_code, run, Command, RunConfig, SimScenario};
use uwb_collide::protocol::ProtocolMode;
use uwb_collide::{Error, Result};

/// Range-only collision prediction experiments.
#[derive(Parser)]
#[command(name = "uwb-collide", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory (default `runs/<command>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cramér-Rao bound sweep over random geometries.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Comma-separated noise levels, meters.
        #[arg(long, value_delimiter = ',')]
        sigma_grid: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        geometries: Option<usize>,
        #[arg(long)]
        anchors: Option<usize>,
        #[arg(long)]
        friends: Option<usize>,
    },
    /// Simulate ranges over a scenario and track it with FACT.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// `bounce` or `random`.
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<SimScenario>,
    },
    /// Timestamp trace of the multi-node ranging protocol.
    ProtocolTrace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        cycles: Option<usize>,
        /// `two_way` or `tdoa`.
        #[arg(long)]
        mode: Option<ProtocolMode>,
        /// Standard deviation of the stamp noise, nanoseconds.
        #[arg(long)]
        timestamp_noise_ns: Option<f64>,
    },
    /// ROC of every detector on a simulated bounce walk.
    Roc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// RMSE of CP estimates against ranging noise.
    Rmse {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        sigma_grid: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        geometries: Option<usize>,
    },
}

fn parse_scenario(s: &str) -> std::result::Result<SimScenario, String> {
    match s {
        "bounce" => Ok(SimScenario::Bounce),
        "random" => Ok(SimScenario::Random),
        other => Err(format!("unknown scenario `{other}`")),
    }
}

fn load(common: &Common, command: Command) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(command),
    };
    if cfg.command != command {
        return Err(Error::Config(format!(
            "config is for `{}`, not `{}`",
            cfg.command.name(),
            command.name()
        )));
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn build(cmd: Cmd) -> Result<(RunConfig, Option<PathBuf>)> {
    Ok(match cmd {
        Cmd::Bounds {
            common,
            sigma_grid,
            trials,
            geometries,
            anchors,
            friends,
        } => {
            let mut c = load(&common, Command::Bounds)?;
            set(&mut c.bounds.sigmas, sigma_grid);
            set(&mut c.bounds.trials, trials);
            set(&mut c.bounds.geometries, geometries);
            set(&mut c.bounds.anchors, anchors);
            set(&mut c.bounds.friends, friends);
            (c, common.out)
        }
        Cmd::Simulate {
            common,
            agents,
            duration,
            sigma,
            scenario,
        } => {
            let mut c = load(&common, Command::Simulate)?;
            set(&mut c.simulate.agents, agents);
            set(&mut c.simulate.duration, duration);
            set(&mut c.simulate.sigma, sigma);
            set(&mut c.simulate.scenario, scenario);
            (c, common.out)
        }
        Cmd::ProtocolTrace {
            common,
            nodes,
            cycles,
            mode,
            timestamp_noise_ns,
        } => {
            let mut c = load(&common, Command::ProtocolTrace)?;
            set(&mut c.protocol.n_nodes, nodes);
            set(&mut c.protocol.cycles, cycles);
            set(&mut c.protocol.mode, mode);
            set(
                &mut c.protocol.timestamp_noise_std,
                timestamp_noise_ns.map(|ns| ns * 1e-9),
            );
            (c, common.out)
        }
        Cmd::Roc { common, duration } => {
            let mut c = load(&common, Command::Roc)?;
            set(&mut c.roc.duration, duration);
            (c, common.out)
        }
        Cmd::Rmse {
            common,
            sigma_grid,
            trials,
            geometries,
        } => {
            let mut c = load(&common, Command::Rmse)?;
            set(&mut c.rmse.sigmas, sigma_grid);
            set(&mut c.rmse.trials, trials);
            set(&mut c.rmse.geometries, geometries);
            (c, common.out)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build(cli.command).and_then(|(cfg, out)| {
        let out = out.unwrap_or_else(|| Path::new("runs").join(cfg.command.name()));
        run(&cfg, &out)
    });
    match result {
        Ok(summary) => {
            for f in &summary.manifest.outputs {
                println!("{}", summary.dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
