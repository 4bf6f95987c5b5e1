//! Threshold detector on CP parameters and event-matched ROC scoring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::CpParams;
use crate::scenario::CollisionEvent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Reaction time, seconds.
    pub tau: f64,
    /// Contact distance, meters.
    pub two_r: f64,
    /// Slack on the passing distance, meters.
    pub eps_t: f64,
    /// Slack on the time to closest approach, seconds.
    pub eps_d: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            two_r: 0.34,
            eps_t: 0.0,
            eps_d: 0.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !(self.two_r > 0.0) {
            return Err(Error::Config(
                "detector needs tau >= 0 and two_r > 0".into(),
            ));
        }
        Ok(())
    }

    /// Smallest slacks that would raise an alarm on `cp`: the detector fires
    /// iff `eps_t > a` and `eps_d > b`. `None` for receding or degenerate
    /// estimates, which never alarm.
    pub fn thresholds(&self, cp: &CpParams) -> Option<(f64, f64)> {
        if !cp.is_finite() || !(cp.t_m > 0.0) {
            return None;
        }
        let inside = (self.two_r * self.two_r - cp.d_m * cp.d_m).max(0.0).sqrt();
        let contact = if inside > 0.0 { inside / cp.v } else { 0.0 };
        let b = cp.t_m - self.tau - contact;
        (!b.is_nan()).then_some((cp.d_m - self.two_r, b))
    }
}

/// Alarm decision for one pair estimate.
pub fn detect(cp: &CpParams, cfg: &DetectorConfig) -> bool {
    cfg.thresholds(cp)
        .is_some_and(|(a, b)| cfg.eps_t > a && cfg.eps_d > b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub i: usize,
    pub j: usize,
    pub t_raised: f64,
}

/// One estimate of one pair at one evaluation epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPrediction {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub cp: Option<CpParams>,
}

/// Alarms raised by `cfg` over a prediction stream.
pub fn alarms(preds: &[PairPrediction], cfg: &DetectorConfig) -> Vec<Alarm> {
    preds
        .iter()
        .filter(|p| p.cp.is_some_and(|cp| detect(&cp, cfg)))
        .map(|p| Alarm {
            i: p.i,
            j: p.j,
            t_raised: p.t,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub pfa: f64,
    pub pd: f64,
    pub eps_t: f64,
    pub eps_d: f64,
    pub detected: usize,
    pub events: usize,
    pub false_alarms: usize,
    pub negatives: usize,
}

/// Inclusive arithmetic grid `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.stop >= self.start) {
            return Err(Error::Config(
                "grid needs step > 0 and stop >= start".into(),
            ));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        // Snap to 1e-9 so that e.g. -0.2 + 4 * 0.05 is exactly 0.
        Ok((0..=n)
            .map(|k| ((self.start + self.step * k as f64) * 1e9).round() / 1e9)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RocGrid {
    pub eps_t: Grid,
    pub eps_d: Grid,
    /// Lookahead matching alarms to events, seconds.
    pub horizon: f64,
}

impl Default for RocGrid {
    fn default() -> Self {
        Self {
            eps_t: Grid {
                start: -0.2,
                stop: 2.0,
                step: 0.05,
            },
            eps_d: Grid {
                start: -0.5,
                stop: 4.0,
                step: 0.1,
            },
            horizon: 3.0,
        }
    }
}

/// ROC point cloud over the `(eps_t, eps_d)` grid, sorted by PFA then PD.
///
/// An event counts as detected when its pair alarms at some epoch in
/// `[t_start - H, t_start]`. A pair-epoch is negative when no event of that
/// pair starts in `(t, t + H]`; PFA is the fraction of negatives that alarm.
/// Pair-epochs later than `end - H` are censored from the negatives, as
/// their lookahead runs past the data. Pair-epochs in contact should be left
/// out of `preds` by the caller.
pub fn roc_curve(
    preds: &[PairPrediction],
    events: &[CollisionEvent],
    end: f64,
    base: &DetectorConfig,
    grid: &RocGrid,
) -> Result<Vec<RocPoint>> {
    base.validate()?;
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    let h = grid.horizon;
    let key = |i: usize, j: usize| (i.min(j), i.max(j));
    let mut by_pair: std::collections::BTreeMap<(usize, usize), Vec<f64>> = Default::default();
    for e in events {
        by_pair.entry(key(e.i, e.j)).or_default().push(e.t_start);
    }
    for v in by_pair.values_mut() {
        v.sort_by(f64::total_cmp);
    }

    let mut negatives: Vec<(f64, f64)> = Vec::new();
    let mut n_negatives = 0;
    for p in preds {
        let upcoming = by_pair
            .get(&key(p.i, p.j))
            .is_some_and(|ts| ts.iter().any(|&ts| ts > p.t && ts <= p.t + h));
        if upcoming || p.t + h > end {
            continue;
        }
        n_negatives += 1;
        if let Some(th) = p.cp.and_then(|cp| base.thresholds(&cp)) {
            negatives.push(th);
        }
    }
    // Per event, the Pareto set of thresholds that would detect it.
    let per_event: Vec<Vec<(f64, f64)>> = events
        .iter()
        .map(|e| {
            let k = key(e.i, e.j);
            let cands: Vec<(f64, f64)> = preds
                .iter()
                .filter(|p| key(p.i, p.j) == k && p.t >= e.t_start - h && p.t <= e.t_start)
                .filter_map(|p| p.cp.and_then(|cp| base.thresholds(&cp)))
                .collect();
            minimal_set(cands)
        })
        .collect();

    let et = grid.eps_t.values()?;
    let ed = grid.eps_d.values()?;
    let cells: Vec<(f64, f64)> = et
        .iter()
        .flat_map(|&a| ed.iter().map(move |&b| (a, b)))
        .collect();
    let mut points: Vec<RocPoint> = cells
        .par_iter()
        .map(|&(eps_t, eps_d)| {
            let fires = |&(a, b): &(f64, f64)| eps_t > a && eps_d > b;
            let false_alarms = negatives.iter().filter(|th| fires(th)).count();
            let detected = per_event.iter().filter(|c| c.iter().any(fires)).count();
            RocPoint {
                pfa: if n_negatives == 0 {
                    0.0
                } else {
                    false_alarms as f64 / n_negatives as f64
                },
                pd: detected as f64 / events.len() as f64,
                eps_t,
                eps_d,
                detected,
                events: events.len(),
                false_alarms,
                negatives: n_negatives,
            }
        })
        .collect();
    points.sort_by(|a, b| a.pfa.total_cmp(&b.pfa).then(b.pd.total_cmp(&a.pd)));
    Ok(points)
}

fn minimal_set(mut c: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    c.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in c {
        if out.last().is_none_or(|q| p.1 < q.1) {
            out.push(p);
        }
    }
    out
}

/// Pareto-optimal subset of a sorted point cloud: PD strictly increases with PFA.
pub fn pareto_frontier(points: &[RocPoint]) -> Vec<RocPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.pfa.total_cmp(&b.pfa).then(b.pd.total_cmp(&a.pd)));
    let mut out: Vec<RocPoint> = Vec::new();
    for p in sorted {
        if out.last().is_none_or(|q| p.pd > q.pd) {
            out.push(p);
        }
    }
    out
}

/// Best PD among points whose PFA does not exceed `pfa`.
pub fn pd_at_pfa(points: &[RocPoint], pfa: f64) -> f64 {
    points
        .iter()
        .filter(|p| p.pfa <= pfa)
        .map(|p| p.pd)
        .fold(0.0, f64::max)
}
