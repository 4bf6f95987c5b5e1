//! Random bounce walk in a square arena: agents travel in straight lines at a
//! fixed speed and pick a new random heading on hitting a wall or another agent.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;

use super::Kinematics;
use crate::error::{Error, Result};
use crate::geom::{AgentState, Vec2};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BounceConfig {
    pub n_agents: usize,
    /// Side of the square arena `[0, side]^2`, meters.
    pub side: f64,
    pub speed: f64,
    pub duration: f64,
    /// Agent body radius; walls and other agents are hit at the body edge.
    pub radius: f64,
    /// Integration step, seconds. Contacts are detected on this grid.
    pub step: f64,
}

impl Default for BounceConfig {
    fn default() -> Self {
        Self {
            n_agents: 6,
            side: 7.0,
            speed: 0.5,
            duration: 60.0,
            radius: 0.17,
            step: 1.0 / 60.0,
        }
    }
}

/// Piecewise-linear trajectories on a uniform time grid.
///
/// `positions[k][a]` is agent `a` at `k * step`; `velocities[k][a]` is its
/// constant velocity over `[k * step, (k + 1) * step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    pub step: f64,
    pub positions: Vec<Vec<Vec2>>,
    pub velocities: Vec<Vec<Vec2>>,
}

impl Trajectories {
    pub fn n_steps(&self) -> usize {
        self.positions.len()
    }

    fn segment(&self, t: f64) -> (usize, f64) {
        let last = self.velocities.len().saturating_sub(1);
        let k = ((t / self.step).floor().max(0.0) as usize).min(last);
        (k, t - k as f64 * self.step)
    }
}

impl Kinematics for Trajectories {
    fn n_agents(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    fn state(&self, agent: usize, t: f64) -> AgentState {
        let (k, dt) = self.segment(t);
        let v = self.velocities[k][agent];
        AgentState::new(self.positions[k][agent] + v * dt, v)
    }

    fn duration(&self) -> f64 {
        (self.n_steps() - 1) as f64 * self.step
    }
}

fn validate(cfg: &BounceConfig) -> Result<()> {
    if !(cfg.duration > 0.0) || !(cfg.step > 0.0) {
        return Err(Error::Config(
            "bounce walk needs positive duration and step".into(),
        ));
    }
    if !(cfg.side > 4.0 * cfg.radius) || !(cfg.radius > 0.0) {
        return Err(Error::Config("arena too small for the agent radius".into()));
    }
    Ok(())
}

/// Heading drawn uniformly from the half-plane facing along `normal`.
fn heading_away(rng: &mut impl Rng, normal: Vec2) -> f64 {
    let base = normal.y.atan2(normal.x);
    base + rng.random_range(-FRAC_PI_2..FRAC_PI_2)
}

/// Random bounce walk with agents placed uniformly without overlap.
pub fn gen_bounce_walk(cfg: &BounceConfig, rng_seed: u64) -> Result<Trajectories> {
    validate(cfg)?;
    let mut rng = seeded(rng_seed);
    let lo = cfg.radius;
    let hi = cfg.side - cfg.radius;
    let mut initial: Vec<AgentState> = Vec::with_capacity(cfg.n_agents);
    let mut attempts = 0;
    while initial.len() < cfg.n_agents {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Config(
                "could not place agents without overlap".into(),
            ));
        }
        let p = Vec2::new(rng.random_range(lo..hi), rng.random_range(lo..hi));
        if initial
            .iter()
            .any(|a| a.position.distance(p) <= 4.0 * cfg.radius)
        {
            continue;
        }
        let v = Vec2::from_polar(cfg.speed, TAU * rng.random::<f64>());
        initial.push(AgentState::new(p, v));
    }
    simulate(cfg, initial, &mut rng)
}

/// Bounce walk from given initial states (their speeds are kept as given).
pub fn gen_bounce_walk_from(
    cfg: &BounceConfig,
    initial: &[AgentState],
    rng_seed: u64,
) -> Result<Trajectories> {
    validate(cfg)?;
    let mut rng = seeded(rng_seed);
    simulate(cfg, initial.to_vec(), &mut rng)
}

fn simulate(
    cfg: &BounceConfig,
    initial: Vec<AgentState>,
    rng: &mut impl Rng,
) -> Result<Trajectories> {
    let n = initial.len();
    let steps = (cfg.duration / cfg.step).ceil() as usize;
    let lo = cfg.radius;
    let hi = cfg.side - cfg.radius;
    let contact = 2.0 * cfg.radius;

    let mut pos: Vec<Vec2> = initial.iter().map(|a| a.position).collect();
    let mut vel: Vec<Vec2> = initial.iter().map(|a| a.velocity).collect();
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps);
    positions.push(pos.clone());

    for _ in 0..steps {
        velocities.push(vel.clone());
        for (p, v) in pos.iter_mut().zip(&vel) {
            *p += *v * cfg.step;
        }

        // Accumulate, per agent, the direction pointing away from every
        // obstruction it is moving into.
        let mut away = vec![Vec2::ZERO; n];
        for a in 0..n {
            let p = pos[a];
            let v = vel[a];
            let mut wall = Vec2::ZERO;
            if p.x <= lo && v.x < 0.0 {
                wall.x += 1.0;
            }
            if p.x >= hi && v.x > 0.0 {
                wall.x -= 1.0;
            }
            if p.y <= lo && v.y < 0.0 {
                wall.y += 1.0;
            }
            if p.y >= hi && v.y > 0.0 {
                wall.y -= 1.0;
            }
            away[a] += wall;
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let ab = pos[b] - pos[a];
                let d = ab.norm();
                if d > contact || d == 0.0 {
                    continue;
                }
                let u = ab * (1.0 / d);
                if vel[a].dot(u) > 0.0 {
                    away[a] -= u;
                }
                if vel[b].dot(u) < 0.0 {
                    away[b] += u;
                }
            }
        }
        for a in 0..n {
            if away[a] != Vec2::ZERO {
                let speed = vel[a].norm();
                vel[a] = Vec2::from_polar(speed, heading_away(rng, away[a]));
            }
            pos[a].x = pos[a].x.clamp(lo, hi);
            pos[a].y = pos[a].y.clamp(lo, hi);
        }
        positions.push(pos.clone());
    }
    Ok(Trajectories {
        step: cfg.step,
        positions,
        velocities,
    })
}
