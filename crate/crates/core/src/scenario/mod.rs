//! Agent trajectories, synthetic range / range-difference streams and
//! ground-truth collision labels.

mod bounce;
mod io;
mod measure;

pub use bounce::{gen_bounce_walk, gen_bounce_walk_from, BounceConfig, Trajectories};
pub use io::{
    read_range_csv, read_scenario, write_range_csv, write_rangediff_csv, write_scenario,
    RANGEDIFF_CSV_HEADER, RANGE_CSV_HEADER,
};
pub use measure::{
    label_collisions, synth_anchor_rangediffs, synth_pairwise_ranges, NoiseInjection,
};

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{AgentState, Vec2};
use crate::rng::seeded;

/// Radius of the disk holding agents and of the anchor circle, meters.
pub const FIELD_RADIUS: f64 = 50.0;
/// Upper bound of the uniform agent-speed distribution, m/s.
pub const MAX_SPEED: f64 = 10.0;
/// Default range rate of the two-way ranging system, Hz.
pub const DEFAULT_RANGE_RATE: f64 = 18.0;

/// Anything that can report the state of each agent at a time `t` in seconds.
pub trait Kinematics {
    fn n_agents(&self) -> usize;
    fn state(&self, agent: usize, t: f64) -> AgentState;
    /// Time span covered, seconds.
    fn duration(&self) -> f64;

    fn position(&self, agent: usize, t: f64) -> Vec2 {
        self.state(agent, t).position
    }

    fn positions(&self, t: f64) -> Vec<Vec2> {
        (0..self.n_agents()).map(|a| self.position(a, t)).collect()
    }
}

/// Constant-velocity motion from initial states.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMotion {
    pub agents: Vec<AgentState>,
    pub duration: f64,
}

impl Kinematics for LinearMotion {
    fn n_agents(&self) -> usize {
        self.agents.len()
    }

    fn state(&self, agent: usize, t: f64) -> AgentState {
        let a = &self.agents[agent];
        AgentState::new(a.position_at(t), a.velocity)
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

/// Zero-mean additive Gaussian range noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma >= 0.0 && sigma.is_finite() {
            Ok(Self { sigma })
        } else {
            Err(Error::Config(format!(
                "noise sigma must be >= 0, got {sigma}"
            )))
        }
    }

    pub const fn noiseless() -> Self {
        Self { sigma: 0.0 }
    }
}

/// Noisy distance between nodes `i` and `j` at time `t`. Never clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSample {
    pub i: usize,
    pub j: usize,
    pub t: f64,
    pub delta: f64,
}

/// Noisy `D_a - D_b` for a tag, where `D_k` is the tag-to-anchor-`k` distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeDiffSample {
    pub tag: usize,
    pub anchor_a: usize,
    pub anchor_b: usize,
    pub t: f64,
    pub ddiff: f64,
}

/// Start of a contiguous interval in which a pair is within contact distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub i: usize,
    pub j: usize,
    pub t_start: f64,
}

/// Initial geometry of a simulated deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub agents: Vec<AgentState>,
    #[serde(default)]
    pub anchors: Vec<Vec2>,
    #[serde(default)]
    pub synch: Option<Vec2>,
    pub duration: f64,
    pub sample_rate: f64,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.agents.len() < 2 {
            return Err(Error::Config("a scenario needs at least two agents".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        for (k, a) in self.anchors.iter().enumerate() {
            if self.anchors[..k].iter().any(|b| b.distance(*a) == 0.0) {
                return Err(Error::Config(format!(
                    "anchor {k} duplicates an earlier anchor"
                )));
            }
        }
        Ok(())
    }

    pub fn motion(&self) -> LinearMotion {
        LinearMotion {
            agents: self.agents.clone(),
            duration: self.duration,
        }
    }

    /// Sample times `0, 1/rate, ...` up to and including `duration`.
    pub fn sample_times(&self) -> Vec<f64> {
        sample_times(self.duration, self.sample_rate)
    }
}

pub fn sample_times(duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 / rate).collect()
}

/// Uniform point in the disk of the given radius.
pub fn uniform_in_disk(rng: &mut impl Rng, radius: f64) -> Vec2 {
    let r = radius * rng.random::<f64>().sqrt();
    Vec2::from_polar(r, TAU * rng.random::<f64>())
}

/// Uniform point on the circle of the given radius.
pub fn uniform_on_circle(rng: &mut impl Rng, radius: f64) -> Vec2 {
    Vec2::from_polar(radius, TAU * rng.random::<f64>())
}

/// Velocity with speed uniform in `[0, max_speed]` and uniform heading.
pub fn uniform_velocity(rng: &mut impl Rng, max_speed: f64) -> Vec2 {
    let speed = max_speed * rng.random::<f64>();
    Vec2::from_polar(speed, TAU * rng.random::<f64>())
}

/// Random agents in the radius-50 m disk with speeds in [0, 10] m/s, anchors
/// on the radius-50 m circle.
///
/// Duration and sample rate default to the 10 s, 2 Hz plan used for the bound
/// and RMSE sweeps.
pub fn gen_random_geometry(n_agents: usize, n_anchors: usize, rng_seed: u64) -> Result<Scenario> {
    if n_agents < 2 {
        return Err(Error::Config("a scenario needs at least two agents".into()));
    }
    let mut rng = seeded(rng_seed);
    let agents = (0..n_agents)
        .map(|_| {
            let p = uniform_in_disk(&mut rng, FIELD_RADIUS);
            let v = uniform_velocity(&mut rng, MAX_SPEED);
            AgentState::new(p, v)
        })
        .collect();
    let anchors = (0..n_anchors)
        .map(|_| uniform_on_circle(&mut rng, FIELD_RADIUS))
        .collect();
    Ok(Scenario {
        agents,
        anchors,
        synch: None,
        duration: 10.0,
        sample_rate: 2.0,
        rng_seed,
    })
}
