//! Monte-Carlo RMSE of CP estimates versus ranging noise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crlb::{MeasurementModel, PairState, SamplingPlan};
use crate::csvfmt::sig9;
use crate::error::{Error, Result};
use crate::estimators::{
    cp_from_tracks, mds_velocity_baseline, pairwise_fit_at, tdoa_tracks, AnchorSet, DistanceFrames,
    PairCp,
};
use crate::fact::{fact_track, FactConfig};
use crate::geom::{cp_params, AgentState, CpParams, Vec2};
use crate::rng::{derive_seed, stream};
use crate::scenario::{
    gen_random_geometry, synth_anchor_rangediffs, synth_pairwise_ranges, NoiseInjection,
    NoiseModel, Scenario, FIELD_RADIUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fact,
    Pairwise,
    Mds,
    Tdoa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fact, Method::Pairwise, Method::Mds, Method::Tdoa];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fact => "fact",
            Self::Pairwise => "pairwise",
            Self::Mds => "mds",
            Self::Tdoa => "tdoa",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Anchor placement on the field circle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorLayout {
    /// Independent uniform angles; clustered draws leave TDOA unobservable.
    Random,
    /// Evenly spaced with a random common rotation.
    #[default]
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmseConfig {
    pub sigmas: Vec<f64>,
    pub geometries: usize,
    pub trials: usize,
    pub agents: usize,
    pub anchors: usize,
    pub anchor_layout: AnchorLayout,
    pub duration: f64,
    pub rate: f64,
    pub methods: Vec<Method>,
    pub injection: NoiseInjection,
    /// Trailing window for track velocities, seconds.
    pub velocity_window: f64,
    /// Pairs whose true `|t_m|` exceeds this many seconds are not scored.
    pub tm_horizon: f64,
    pub fact: FactConfig,
    /// Append RMS Cramér-Rao bounds of the pairwise and friend models.
    pub crlb: bool,
    pub seed: u64,
}

impl Default for RmseConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![0.05, 0.1, 0.2, 0.4],
            geometries: 30,
            trials: 30,
            agents: 6,
            anchors: 4,
            anchor_layout: AnchorLayout::Spread,
            duration: 10.0,
            rate: 2.0,
            methods: Method::ALL.to_vec(),
            injection: NoiseInjection::PerDistance,
            velocity_window: 10.0,
            tm_horizon: 20.0,
            fact: FactConfig {
                window: 21,
                ..FactConfig::default()
            },
            crlb: true,
            seed: 0,
        }
    }
}

impl RmseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.sigmas.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::Config(
                "sigmas must be a non-empty list of values >= 0".into(),
            ));
        }
        if self.geometries == 0 || self.trials == 0 {
            return Err(Error::Config("geometries and trials must be >= 1".into()));
        }
        if self.agents < 3 || self.anchors < 3 {
            return Err(Error::Config("need at least 3 agents and 3 anchors".into()));
        }
        if !(self.tm_horizon > 0.0) {
            return Err(Error::Config("tm_horizon must be > 0".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        self.fact.validate(self.agents)
    }
}

/// Signed errors of one method over all pairs of one trial.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorSet {
    pub tm: Vec<f64>,
    pub dm: Vec<f64>,
    pub failures: usize,
}

impl ErrorSet {
    fn absorb(&mut self, other: ErrorSet) {
        self.tm.extend(other.tm);
        self.dm.extend(other.dm);
        self.failures += other.failures;
    }
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt()
}

fn median_abs(v: &[f64]) -> f64 {
    let mut a: Vec<f64> = v.iter().map(|e| e.abs()).collect();
    crate::crlb::Statistic::Median.apply(&mut a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub sigma: f64,
    pub method: String,
    pub rmse_tm: f64,
    pub rmse_dm: f64,
    pub median_abs_tm: f64,
    pub median_abs_dm: f64,
    pub count: usize,
    pub failures: usize,
}

pub const RMSE_CSV_HEADER: &str =
    "sigma,method,rmse_tm,rmse_dm,median_abs_tm,median_abs_dm,count,failures";

pub fn rmse_csv(rows: &[RmseRow]) -> String {
    let mut out = format!("{RMSE_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            sig9(r.sigma),
            r.method,
            sig9(r.rmse_tm),
            sig9(r.rmse_dm),
            sig9(r.median_abs_tm),
            sig9(r.median_abs_dm),
            r.count,
            r.failures
        ));
    }
    out
}

/// True CP parameters at time 0 of every pair whose closest approach lies
/// within `horizon` seconds; `None` for pairs that are not scored.
pub fn true_pair_cps(agents: &[AgentState], horizon: f64) -> Vec<(usize, usize, Option<CpParams>)> {
    let n = agents.len();
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let cp = cp_params(&agents[i].relative_to(&agents[j]))
                .ok()
                .filter(|c| c.t_m.abs() <= horizon);
            (i, j, cp)
        })
        .collect()
}

fn score(estimates: &[PairCp], truth: &[(usize, usize, Option<CpParams>)]) -> ErrorSet {
    let mut e = ErrorSet::default();
    for &(i, j, t) in truth {
        let Some(t) = t else { continue };
        match estimates
            .iter()
            .find(|p| p.i == i && p.j == j)
            .and_then(|p| p.cp)
        {
            Some(c) if c.is_finite() => {
                e.tm.push(c.t_m - t.t_m);
                e.dm.push(c.d_m - t.d_m);
            }
            _ => e.failures += 1,
        }
    }
    e
}

/// Estimates of every pair by `method` for one noisy realization; `t_m` is
/// measured from time 0.
pub fn estimate_trial(
    method: Method,
    sc: &Scenario,
    sigma: f64,
    cfg: &RmseConfig,
    seed: u64,
) -> Result<Vec<PairCp>> {
    let motion = sc.motion();
    let n = sc.agents.len();
    let noise = NoiseModel::new(sigma)?;
    let mut rng = stream(seed, 0);
    let ranges = synth_pairwise_ranges(&motion, noise, cfg.rate, &mut rng)?;
    let frames = DistanceFrames::from_samples(&ranges, n)?;
    match method {
        Method::Pairwise => Ok((0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| PairCp {
                i,
                j,
                cp: pairwise_fit_at(&frames.pair_series(i, j), 0.0).ok(),
            })
            .collect()),
        Method::Mds => Ok(mds_velocity_baseline(&frames, 0.0, cfg.velocity_window)?.pairs),
        Method::Fact => {
            let fc = FactConfig {
                window: frames.len(),
                ..cfg.fact.clone()
            };
            let tr = fact_track(&frames, &fc)?;
            Ok(tr.windows[0].pair_cps(0.0))
        }
        Method::Tdoa => {
            let mut rng = stream(seed, 1);
            let diffs = synth_anchor_rangediffs(
                &motion,
                &sc.anchors,
                noise,
                cfg.injection,
                cfg.rate,
                &mut rng,
            )?;
            let anchors = AnchorSet::new(sc.anchors.clone())?;
            let tracks = tdoa_tracks(&diffs, &anchors, n, cfg.velocity_window)?;
            Ok(cp_from_tracks(&tracks, 0.0))
        }
    }
}

/// Geometry `g` of the sweep.
pub fn sweep_geometry(cfg: &RmseConfig, g: usize) -> Result<Scenario> {
    let seed = derive_seed(cfg.seed, g as u64);
    let mut sc = gen_random_geometry(cfg.agents, cfg.anchors, seed)?;
    if cfg.anchor_layout == AnchorLayout::Spread {
        let phase = stream(seed, 1).random_range(0.0..std::f64::consts::TAU);
        let step = std::f64::consts::TAU / cfg.anchors as f64;
        sc.anchors = (0..cfg.anchors)
            .map(|k| Vec2::from_polar(FIELD_RADIUS, phase + step * k as f64))
            .collect();
    }
    sc.duration = cfg.duration;
    sc.sample_rate = cfg.rate;
    Ok(sc)
}

/// Per-method signed errors pooled over geometries and trials at one sigma.
pub fn collect_errors(cfg: &RmseConfig, sigma_index: usize) -> Result<Vec<(Method, ErrorSet)>> {
    let sigma = cfg.sigmas[sigma_index];
    let cells: Vec<(usize, usize)> = (0..cfg.geometries)
        .flat_map(|g| (0..cfg.trials).map(move |k| (g, k)))
        .collect();
    let per_cell: Vec<Vec<ErrorSet>> = cells
        .par_iter()
        .map(|&(g, k)| {
            let sc = sweep_geometry(cfg, g)?;
            let truth = true_pair_cps(&sc.agents, cfg.tm_horizon);
            let trial_seed = derive_seed(
                derive_seed(cfg.seed ^ 0x5eed, sigma_index as u64),
                (g * cfg.trials + k) as u64,
            );
            cfg.methods
                .iter()
                .map(|&m| {
                    let est = match estimate_trial(m, &sc, sigma, cfg, trial_seed) {
                        Ok(e) => e,
                        Err(Error::DivergenceDetected { before, after }) => {
                            return Err(Error::DivergenceDetected { before, after })
                        }
                        Err(_) => Vec::new(),
                    };
                    Ok(score(&est, &truth))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut pooled: Vec<(Method, ErrorSet)> = cfg
        .methods
        .iter()
        .map(|&m| (m, ErrorSet::default()))
        .collect();
    for cell in per_cell {
        for (slot, e) in pooled.iter_mut().zip(cell) {
            slot.1.absorb(e);
        }
    }
    Ok(pooled)
}

/// RMS of the friend-model and pairwise bounds over the same pairs.
fn crlb_rows(cfg: &RmseConfig, sigma: f64) -> Result<Vec<RmseRow>> {
    if sigma <= 0.0 {
        return Ok(Vec::new());
    }
    let plan = SamplingPlan::uniform(cfg.duration, cfg.rate, sigma)?;
    let mut acc = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
    for g in 0..cfg.geometries {
        let sc = sweep_geometry(cfg, g)?;
        let n = sc.agents.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let pair = PairState::new(sc.agents[i], sc.agents[j]);
                match cp_params(&sc.agents[i].relative_to(&sc.agents[j])) {
                    Ok(c) if c.t_m.abs() <= cfg.tm_horizon => {}
                    _ => continue,
                }
                let friends: Vec<AgentState> = (0..n)
                    .filter(|&k| k != i && k != j)
                    .map(|k| sc.agents[k])
                    .collect();
                for (slot, model) in [
                    MeasurementModel::Pairwise,
                    MeasurementModel::Friend(friends),
                ]
                .iter()
                .enumerate()
                {
                    if let Some(b) = model
                        .bounds(&pair, &plan)
                        .ok()
                        .filter(|b| b.std_tm.is_finite() && b.std_dm.is_finite())
                    {
                        acc[slot].0.push(b.std_tm);
                        acc[slot].1.push(b.std_dm);
                    }
                }
            }
        }
    }
    Ok(["crlb_pairwise", "crlb_friend"]
        .iter()
        .zip(acc)
        .map(|(name, (tm, dm))| RmseRow {
            sigma,
            method: name.to_string(),
            rmse_tm: rms(&tm),
            rmse_dm: rms(&dm),
            median_abs_tm: median_abs(&tm),
            median_abs_dm: median_abs(&dm),
            count: tm.len(),
            failures: 0,
        })
        .collect())
}

/// RMSE of `t_m` and `d_m` per method and sigma, failures excluded and counted.
pub fn rmse_sweep(cfg: &RmseConfig) -> Result<Vec<RmseRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (s, &sigma) in cfg.sigmas.iter().enumerate() {
        for (m, e) in collect_errors(cfg, s)? {
            rows.push(RmseRow {
                sigma,
                method: m.name().to_string(),
                rmse_tm: rms(&e.tm),
                rmse_dm: rms(&e.dm),
                median_abs_tm: median_abs(&e.tm),
                median_abs_dm: median_abs(&e.dm),
                count: e.tm.len(),
                failures: e.failures,
            });
        }
        if cfg.crlb {
            rows.extend(crlb_rows(cfg, sigma)?);
        }
    }
    Ok(rows)
}
