//! Simulated bounce-walk experiment scored by ROC for every estimator.

use serde::{Deserialize, Serialize};

use super::detect::{
    pareto_frontier, roc_curve, DetectorConfig, PairPrediction, RocGrid, RocPoint,
};
use super::rmse::Method;
use crate::csvfmt::sig9;
use crate::error::{Error, Result};
use crate::estimators::{
    cp_from_tracks, mds_velocity_baseline, pairwise_fit_at, tdoa_tracks, AnchorSet, DistanceFrames,
    PairCp,
};
use crate::fact::{fact_track, FactConfig};
use crate::geom::{cp_params, BodyGeometry, CpParams, Vec2};
use crate::rng::{derive_seed, stream};
use crate::scenario::{
    gen_bounce_walk, label_collisions, synth_anchor_rangediffs, synth_pairwise_ranges,
    BounceConfig, CollisionEvent, Kinematics, NoiseInjection, NoiseModel, RangeDiffSample,
    Trajectories,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RocConfig {
    pub agents: usize,
    /// Side of the square arena, meters.
    pub side: f64,
    pub speed: f64,
    pub duration: f64,
    /// Ranging rate, Hz.
    pub rate: f64,
    /// Two-way range noise, meters.
    pub sigma_two_way: f64,
    /// One-way range-difference noise, meters.
    pub sigma_difference: f64,
    /// Anchors for TDOA; the first is the difference reference.
    pub anchors: Vec<Vec2>,
    /// Estimation window, epochs. Methods are scored at the end of each
    /// non-overlapping window.
    pub window: usize,
    pub methods: Vec<Method>,
    /// Also score detection fed with ground-truth CP parameters at every
    /// epoch, both the realized and the instantaneous straight-line ones.
    pub ground_truth: bool,
    pub detector: DetectorConfig,
    pub grid: RocGrid,
    pub fact: FactConfig,
    pub seed: u64,
}

impl Default for RocConfig {
    fn default() -> Self {
        Self {
            agents: 6,
            side: 7.0,
            speed: 0.5,
            duration: 600.0,
            rate: 18.0,
            sigma_two_way: 0.08,
            sigma_difference: 0.17,
            anchors: vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(7.0, 0.0),
                Vec2::new(0.0, 7.0),
            ],
            window: 18,
            methods: Method::ALL.to_vec(),
            ground_truth: true,
            detector: DetectorConfig::default(),
            grid: RocGrid::default(),
            fact: FactConfig::default(),
            seed: 0,
        }
    }
}

impl RocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents < 3 {
            return Err(Error::Config("need at least 3 agents".into()));
        }
        if !(self.duration > 0.0) || !(self.rate > 0.0) || !(self.speed > 0.0) {
            return Err(Error::Config("duration, rate and speed must be > 0".into()));
        }
        if self.window < 3 {
            return Err(Error::Config("window must be >= 3 epochs".into()));
        }
        if !(self.grid.horizon > 0.0) {
            return Err(Error::Config("horizon must be > 0".into()));
        }
        NoiseModel::new(self.sigma_two_way)?;
        NoiseModel::new(self.sigma_difference)?;
        self.detector.validate()?;
        self.grid.eps_t.values()?;
        self.grid.eps_d.values()?;
        let fact = FactConfig {
            window: self.window,
            ..self.fact.clone()
        };
        fact.validate(self.agents)?;
        if self.methods.contains(&Method::Tdoa) {
            AnchorSet::new(self.anchors.clone())?;
        }
        Ok(())
    }

    pub fn bounce(&self) -> BounceConfig {
        BounceConfig {
            n_agents: self.agents,
            side: self.side,
            speed: self.speed,
            duration: self.duration,
            radius: 0.5 * self.detector.two_r,
            ..BounceConfig::default()
        }
    }
}

/// Scored curve of one detector input.
#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    pub method: String,
    pub points: Vec<RocPoint>,
    pub frontier: Vec<RocPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocExperiment {
    pub events: Vec<CollisionEvent>,
    pub results: Vec<RocResult>,
}

/// Estimates at the end of every window, `t_m` measured from the window end.
fn windowed<F>(frames: &DistanceFrames, window: usize, mut f: F) -> Vec<PairPrediction>
where
    F: FnMut(&DistanceFrames, f64) -> Option<Vec<PairCp>>,
{
    let mut out = Vec::new();
    let mut start = 0;
    while frames.len() - start >= window {
        let slice = frames.slice(start..start + window);
        let t_end = *slice.times.last().unwrap_or(&0.0);
        if let Some(cps) = f(&slice, t_end) {
            out.extend(cps.into_iter().map(|p| PairPrediction {
                t: t_end,
                i: p.i,
                j: p.j,
                cp: p.cp,
            }));
        }
        start += window;
    }
    out
}

fn predictions(
    method: Method,
    cfg: &RocConfig,
    frames: &DistanceFrames,
    diffs: &[RangeDiffSample],
) -> Result<Vec<PairPrediction>> {
    let w = cfg.window;
    let span = (w - 1) as f64 / cfg.rate;
    Ok(match method {
        Method::Pairwise => windowed(frames, w, |f, t| {
            let n = f.n_nodes;
            Some(
                (0..n)
                    .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                    .map(|(i, j)| PairCp {
                        i,
                        j,
                        cp: pairwise_fit_at(&f.pair_series(i, j), t).ok(),
                    })
                    .collect(),
            )
        }),
        Method::Mds => windowed(frames, w, |f, t| {
            mds_velocity_baseline(f, t, span + 1e-9)
                .ok()
                .map(|m| m.pairs)
        }),
        Method::Fact => {
            let fc = FactConfig {
                window: w,
                ..cfg.fact.clone()
            };
            let tr = fact_track(frames, &fc)?;
            tr.windows
                .iter()
                .filter(|win| win.times.len() == w)
                .flat_map(|win| {
                    win.pair_cps(win.t_end)
                        .into_iter()
                        .map(move |p| PairPrediction {
                            t: win.t_end,
                            i: p.i,
                            j: p.j,
                            cp: p.cp,
                        })
                })
                .collect()
        }
        Method::Tdoa => {
            let anchors = AnchorSet::new(cfg.anchors.clone())?;
            let half_step = 0.5 / cfg.rate;
            windowed(frames, w, |f, t| {
                let t0 = f.times[0] - half_step;
                let sub: Vec<RangeDiffSample> = diffs
                    .iter()
                    .filter(|d| d.t > t0 && d.t <= t + half_step)
                    .copied()
                    .collect();
                tdoa_tracks(&sub, &anchors, cfg.agents, span + 1e-9)
                    .ok()
                    .filter(|tr| tr.iter().all(|k| k.len() >= 2))
                    .map(|tr| cp_from_tracks(&tr, t))
            })
        }
    })
}

/// Straight-line CP parameters from the true instantaneous states of every
/// pair at every ranging epoch. A later wall or agent bounce can void them.
fn linear_truth_predictions(traj: &Trajectories, times: &[f64]) -> Vec<PairPrediction> {
    let n = traj.n_agents();
    times
        .iter()
        .flat_map(|&t| {
            (0..n).flat_map(move |i| {
                ((i + 1)..n).map(move |j| {
                    let rel = traj.state(i, t).relative_to(&traj.state(j, t));
                    PairPrediction {
                        t,
                        i,
                        j,
                        cp: cp_params(&rel).ok(),
                    }
                })
            })
        })
        .collect()
}

/// CP parameters of the realized motion: the closest approach over the next
/// `horizon` seconds of the trajectory grid, with the relative speed at `t`.
fn realized_truth_predictions(
    traj: &Trajectories,
    times: &[f64],
    horizon: f64,
) -> Vec<PairPrediction> {
    let n = traj.n_agents();
    let steps = (horizon / traj.step).round() as usize;
    let last = traj.n_steps() - 1;
    let mut out = Vec::with_capacity(times.len() * n * (n - 1) / 2);
    for &t in times {
        let k0 = ((t / traj.step).ceil() as usize).min(last);
        let k1 = (k0 + steps).min(last);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (traj.state(j, t).velocity - traj.state(i, t).velocity).norm();
                let (t_min, d_min) = (k0..=k1)
                    .map(|k| {
                        (
                            k as f64 * traj.step,
                            traj.positions[k][i].distance(traj.positions[k][j]),
                        )
                    })
                    .fold(
                        (t, f64::INFINITY),
                        |best, c| if c.1 < best.1 { c } else { best },
                    );
                out.push(PairPrediction {
                    t,
                    i,
                    j,
                    cp: (v > 0.0).then_some(CpParams {
                        d_m: d_min,
                        t_m: t_min - t,
                        v,
                    }),
                });
            }
        }
    }
    out
}

/// Runs the bounce-walk experiment and scores every configured method.
pub fn roc_experiment(cfg: &RocConfig) -> Result<RocExperiment> {
    cfg.validate()?;
    let traj = gen_bounce_walk(&cfg.bounce(), derive_seed(cfg.seed, 0))?;
    let body = BodyGeometry::new(0.5 * cfg.detector.two_r)?;
    let events = label_collisions(&traj, &body, 1.0 / traj.step)?;
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    let ranges = synth_pairwise_ranges(
        &traj,
        NoiseModel::new(cfg.sigma_two_way)?,
        cfg.rate,
        &mut stream(cfg.seed, 1),
    )?;
    let frames = DistanceFrames::from_samples(&ranges, cfg.agents)?;
    let diffs = if cfg.methods.contains(&Method::Tdoa) {
        synth_anchor_rangediffs(
            &traj,
            &cfg.anchors,
            NoiseModel::new(cfg.sigma_difference)?,
            NoiseInjection::PerDifference,
            cfg.rate,
            &mut stream(cfg.seed, 2),
        )?
    } else {
        Vec::new()
    };

    // Pair-epochs already in contact carry no prediction to score.
    let touching = |p: &PairPrediction| {
        traj.position(p.i, p.t).distance(traj.position(p.j, p.t)) <= cfg.detector.two_r
    };
    let mut inputs: Vec<(String, Vec<PairPrediction>)> = Vec::new();
    if cfg.ground_truth {
        inputs.push((
            "truth".into(),
            realized_truth_predictions(&traj, &frames.times, cfg.grid.horizon),
        ));
        inputs.push((
            "truth_linear".into(),
            linear_truth_predictions(&traj, &frames.times),
        ));
    }
    for &m in &cfg.methods {
        inputs.push((m.name().into(), predictions(m, cfg, &frames, &diffs)?));
    }
    let results = inputs
        .into_iter()
        .map(|(method, mut preds)| {
            preds.retain(|p| !touching(p));
            let points = roc_curve(&preds, &events, traj.duration(), &cfg.detector, &cfg.grid)?;
            let frontier = pareto_frontier(&points);
            Ok(RocResult {
                method,
                points,
                frontier,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocExperiment { events, results })
}

pub const ROC_CSV_HEADER: &str = "method,eps_t,eps_d,pfa,pd,detected,events,false_alarms,negatives";

fn roc_rows(results: &[RocResult], pick: impl Fn(&RocResult) -> &[RocPoint]) -> String {
    let mut out = format!("{ROC_CSV_HEADER}\n");
    for r in results {
        for p in pick(r) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.method,
                sig9(p.eps_t),
                sig9(p.eps_d),
                sig9(p.pfa),
                sig9(p.pd),
                p.detected,
                p.events,
                p.false_alarms,
                p.negatives
            ));
        }
    }
    out
}

/// Every grid point of every method.
pub fn roc_points_csv(results: &[RocResult]) -> String {
    roc_rows(results, |r| &r.points)
}

/// Pareto frontier of every method.
pub fn roc_frontier_csv(results: &[RocResult]) -> String {
    roc_rows(results, |r| &r.frontier)
}
