//! Configuration-driven runs: one TOML file selects a command and its
//! parameters; outputs land in a run directory next to a manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::rmse::{rmse_csv, rmse_sweep, RmseConfig};
use super::roc::{roc_experiment, roc_frontier_csv, roc_points_csv, RocConfig};
use crate::crlb::{bound_sweep, bounds_csv, BoundSweepConfig};
use crate::csvfmt::sig9;
use crate::error::{Error, Result};
use crate::estimators::DistanceFrames;
use crate::fact::{fact_track, FactConfig};
use crate::geom::{BodyGeometry, Vec2};
use crate::protocol::{
    extract_range_differences, extract_ranges, run_cycles, ProtocolConfig, ProtocolMode,
};
use crate::rng::{derive_seed, stream};

use crate::scenario::{
    gen_bounce_walk, gen_random_geometry, label_collisions, read_scenario, synth_pairwise_ranges,
    write_range_csv, write_rangediff_csv, BounceConfig, CollisionEvent, NoiseModel, FIELD_RADIUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Bounds,
    Simulate,
    ProtocolTrace,
    Roc,
    Rmse,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bounds => "bounds",
            Self::Simulate => "simulate",
            Self::ProtocolTrace => "protocol-trace",
            Self::Roc => "roc",
            Self::Rmse => "rmse",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimScenario {
    /// Random walk with bounces in a square arena.
    #[default]
    Bounce,
    /// Constant velocities in the radius-50 m field.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: SimScenario,
    /// Constant-velocity scenario file; overrides `scenario` when set.
    pub scenario_file: Option<PathBuf>,
    pub agents: usize,
    pub side: f64,
    pub speed: f64,
    pub radius: f64,
    pub duration: f64,
    /// Ranging rate, Hz.
    pub rate: f64,
    pub sigma: f64,
    pub fact: FactConfig,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            scenario: SimScenario::Bounce,
            scenario_file: None,
            agents: 6,
            side: 7.0,
            speed: 0.5,
            radius: 0.17,
            duration: 60.0,
            rate: 18.0,
            sigma: 0.08,
            fact: FactConfig::default(),
            seed: 0,
        }
    }
}

/// A complete run description. Only `command` is required; every section
/// falls back to its defaults and a top-level `seed` overrides the seed of
/// the selected section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub bounds: BoundSweepConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub roc: RocConfig,
    #[serde(default)]
    pub rmse: RmseConfig,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            seed: None,
            bounds: BoundSweepConfig::default(),
            simulate: SimulateConfig::default(),
            protocol: ProtocolConfig::default(),
            roc: RocConfig::default(),
            rmse: RmseConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Seed of the selected command after applying the top-level override.
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(match self.command {
            Command::Bounds => self.bounds.seed,
            Command::Simulate => self.simulate.seed,
            Command::ProtocolTrace => self.protocol.seed,
            Command::Roc => self.roc.seed,
            Command::Rmse => self.rmse.seed,
        })
    }

    /// Pushes the effective seed into the selected section.
    fn resolved(&self) -> Self {
        let mut c = self.clone();
        let s = self.effective_seed();
        match c.command {
            Command::Bounds => c.bounds.seed = s,
            Command::Simulate => c.simulate.seed = s,
            Command::ProtocolTrace => c.protocol.seed = s,
            Command::Roc => c.roc.seed = s,
            Command::Rmse => c.rmse.seed = s,
        }
        c.seed = Some(s);
        c
    }
}

/// Process exit status for an error: 2 for configuration problems, 3 for
/// failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub crate_version: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }
}

/// Loads `path` and runs it into `out`.
pub fn run_config(path: &Path, out: &Path) -> Result<RunSummary> {
    run(&RunConfig::load(path)?, out)
}

/// Runs `cfg`, writing `config.toml`, the command outputs and
/// `manifest.toml` into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    let cfg = cfg.resolved();
    validate(&cfg)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_text = cfg.to_toml()?;
    let mut w = Writer {
        dir: out,
        written: Vec::new(),
    };
    w.text("config.toml", &config_text)?;
    match cfg.command {
        Command::Bounds => w.text("bounds.csv", &bounds_csv(&bound_sweep(&cfg.bounds)?))?,
        Command::Rmse => w.text("rmse.csv", &rmse_csv(&rmse_sweep(&cfg.rmse)?))?,
        Command::Roc => {
            let ex = roc_experiment(&cfg.roc)?;
            w.text("events.csv", &events_csv(&ex.events))?;
            w.text("roc_points.csv", &roc_points_csv(&ex.results))?;
            w.text("roc_frontier.csv", &roc_frontier_csv(&ex.results))?;
        }
        Command::Simulate => simulate(&cfg.simulate, &mut w)?,
        Command::ProtocolTrace => protocol_trace(&cfg.protocol, &mut w)?,
    }
    let manifest = Manifest {
        command: cfg.command.name().to_string(),
        seed: cfg.effective_seed(),
        config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: w.written.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    w.text("manifest.toml", &text)?;
    Ok(RunSummary {
        dir: out.to_path_buf(),
        manifest,
    })
}

fn validate(cfg: &RunConfig) -> Result<()> {
    match cfg.command {
        Command::Bounds => cfg.bounds.validate(),
        Command::Rmse => cfg.rmse.validate(),
        Command::Roc => cfg.roc.validate(),
        Command::ProtocolTrace => with_default_infrastructure(&cfg.protocol).validate(),
        Command::Simulate => {
            let s = &cfg.simulate;
            NoiseModel::new(s.sigma)?;
            if !(s.rate > 0.0) || !(s.duration > 0.0) {
                return Err(Error::Config(
                    "simulate needs rate > 0 and duration > 0".into(),
                ));
            }
            if s.scenario_file.is_none() {
                s.fact.validate(s.agents)?;
            }
            Ok(())
        }
    }
}

pub const EVENTS_CSV_HEADER: &str = "i,j,t_start";
pub const TRACKS_CSV_HEADER: &str = "epoch,node,x,y";
pub const CP_CSV_HEADER: &str = "epoch,i,j,dm,tm,v";

pub fn events_csv(events: &[CollisionEvent]) -> String {
    let mut out = format!("{EVENTS_CSV_HEADER}\n");
    for e in events {
        let _ = writeln!(out, "{},{},{}", e.i, e.j, sig9(e.t_start));
    }
    out
}

/// Measures ranges over a scenario, tracks it with FACT and writes ranges,
/// collision labels, FACT tracks and per-window CP parameters.
fn simulate(s: &SimulateConfig, w: &mut Writer) -> Result<()> {
    let noise = NoiseModel::new(s.sigma)?;
    let mut rng = stream(s.seed, 1);
    let body = BodyGeometry::new(s.radius)?;
    let (ranges, events, n) = match (&s.scenario_file, s.scenario) {
        (Some(path), _) => {
            let sc = read_scenario(path)?;
            let motion = sc.motion();
            let ranges = synth_pairwise_ranges(&motion, noise, s.rate, &mut rng)?;
            (
                ranges,
                label_collisions(&motion, &body, 60.0)?,
                sc.agents.len(),
            )
        }
        (None, SimScenario::Random) => {
            let mut sc = gen_random_geometry(s.agents, 0, derive_seed(s.seed, 0))?;
            sc.duration = s.duration;
            let motion = sc.motion();
            let ranges = synth_pairwise_ranges(&motion, noise, s.rate, &mut rng)?;
            (ranges, label_collisions(&motion, &body, 60.0)?, s.agents)
        }
        (None, SimScenario::Bounce) => {
            let bc = BounceConfig {
                n_agents: s.agents,
                side: s.side,
                speed: s.speed,
                duration: s.duration,
                radius: s.radius,
                ..BounceConfig::default()
            };
            let traj = gen_bounce_walk(&bc, derive_seed(s.seed, 0))?;
            let ranges = synth_pairwise_ranges(&traj, noise, s.rate, &mut rng)?;
            (
                ranges,
                label_collisions(&traj, &body, 1.0 / traj.step)?,
                s.agents,
            )
        }
    };
    s.fact.validate(n)?;
    write_range_csv(&w.path("ranges.csv"), &ranges)?;
    w.text("events.csv", &events_csv(&events))?;

    let frames = DistanceFrames::from_samples(&ranges, n)?;
    let tr = fact_track(&frames, &s.fact)?;
    let mut tracks = format!("{TRACKS_CSV_HEADER}\n");
    for t in &tr.tracks {
        for (k, p) in t.positions.iter().enumerate() {
            let _ = writeln!(tracks, "{k},{},{},{}", t.node, sig9(p.x), sig9(p.y));
        }
    }
    w.text("tracks.csv", &tracks)?;
    let mut cps = format!("{CP_CSV_HEADER}\n");
    for win in &tr.windows {
        let epoch = win.start + win.times.len() - 1;
        for p in win.pair_cps(win.t_end) {
            let (dm, tm, v) =
                p.cp.map_or((f64::NAN, f64::NAN, f64::NAN), |c| (c.d_m, c.t_m, c.v));
            let _ = writeln!(
                cps,
                "{epoch},{},{},{},{},{}",
                p.i,
                p.j,
                sig9(dm),
                sig9(tm),
                sig9(v)
            );
        }
    }
    w.text("cp.csv", &cps)
}

/// TDOA mode without configured infrastructure gets four anchors on the
/// field circle and a synch node at the center.
fn with_default_infrastructure(p: &ProtocolConfig) -> ProtocolConfig {
    let mut p = p.clone();
    if p.mode == ProtocolMode::Tdoa && p.anchors.is_empty() {
        p.anchors = (0..4)
            .map(|k| {
                Vec2::from_polar(
                    FIELD_RADIUS,
                    std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2,
                )
            })
            .collect();
        p.synch.get_or_insert(Vec2::ZERO);
    }
    p
}

/// Simulates the ranging cycles over random constant-velocity nodes and
/// writes the timestamp log with the ranges or range differences it yields.
fn protocol_trace(p: &ProtocolConfig, w: &mut Writer) -> Result<()> {
    let p = with_default_infrastructure(p);
    let mut sc = gen_random_geometry(p.n_nodes.max(2), 0, derive_seed(p.seed, 7))?;
    sc.agents.truncate(p.n_nodes);
    let cycle = p.slot_length * (p.total_nodes() + 1) as f64;
    sc.duration = cycle * p.cycles as f64;
    let log = run_cycles(&p, &sc.motion())?;
    w.text("timestamps.csv", &log.to_csv())?;
    match p.mode {
        ProtocolMode::TwoWay => write_range_csv(&w.path("ranges.csv"), &extract_ranges(&log)?),
        ProtocolMode::Tdoa => write_rangediff_csv(
            &w.path("rangediffs.csv"),
            &extract_range_differences(&log, &p)?,
        ),
    }
}
