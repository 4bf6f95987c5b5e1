//! FACT: distributed relative localization and tracking by majorization of
//! range-fit stress plus a velocity-smoothness penalty.
//!
//! Coordinates are stored epoch-major, `x[t][i]`. One sweep visits epochs in
//! order and, within an epoch, nodes in order, always using the newest
//! coordinates (Gauss-Seidel). Stress is invariant to a rigid motion of any
//! single epoch, so after each sweep an optional gauge step re-poses every
//! epoch to minimize the smoothness penalty alone.

use std::sync::mpsc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{classical_mds, linear_fit, procrustes, DistanceFrames, PairCp, Track};
use crate::geom::{cp_params, AgentState, Vec2};
use crate::linalg::{levenberg_marquardt, LmOptions};

/// Below this separation a pair's majorization direction is taken from the cache.
pub const ZERO_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateVariant {
    /// Exact minimizer of the majorizer over one coordinate block; descends.
    #[default]
    PriorTarget,
    /// Pull toward the block's own previous value with weight `r_i`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FactInit {
    /// Every epoch of the first window starts at the first epoch's MDS.
    FirstEpochMds,
    /// Per-epoch MDS, each epoch Procrustes-aligned to the previous one.
    #[default]
    AlignedMds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactConfig {
    /// Smoothness weight `r_i` shared by all nodes.
    pub smoothness: f64,
    /// Per-node override of `smoothness`.
    pub node_smoothness: Option<Vec<f64>>,
    /// Stop once a sweep lowers the cost by less than this (m^2).
    pub epsilon: f64,
    pub max_sweeps: usize,
    /// Window length in epochs.
    pub window: usize,
    pub update_variant: UpdateVariant,
    pub init: FactInit,
    /// Re-pose epochs to minimize the smoothness penalty after each sweep.
    pub gauge_alignment: bool,
    /// Run each window on one worker thread per node.
    pub distributed: bool,
}

impl Default for FactConfig {
    fn default() -> Self {
        Self {
            smoothness: 1.0,
            node_smoothness: None,
            epsilon: 1e-6,
            max_sweeps: 200,
            window: 18,
            update_variant: UpdateVariant::PriorTarget,
            init: FactInit::AlignedMds,
            gauge_alignment: true,
            distributed: false,
        }
    }
}

impl FactConfig {
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if !(self.smoothness >= 0.0) {
            return Err(Error::Config("smoothness must be >= 0".into()));
        }
        if let Some(r) = &self.node_smoothness {
            if r.len() != n_nodes || r.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::Config(format!(
                    "node_smoothness must list {n_nodes} non-negative weights"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.window < 3 {
            return Err(Error::Config("window must span at least 3 epochs".into()));
        }
        Ok(())
    }

    pub fn weights(&self, n_nodes: usize) -> Vec<f64> {
        self.node_smoothness
            .clone()
            .unwrap_or_else(|| vec![self.smoothness; n_nodes])
    }
}

/// Unit weights: `w_ij^t = 1` iff `i != j` and a range is present.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    present: Vec<Vec<bool>>,
    n: usize,
}

impl WeightMatrix {
    pub fn from_frames(frames: &DistanceFrames) -> Self {
        let n = frames.n_nodes;
        let present = frames
            .frames
            .iter()
            .map(|f| {
                (0..n * n)
                    .map(|k| k / n != k % n && f[(k / n, k % n)].is_finite())
                    .collect()
            })
            .collect();
        Self { present, n }
    }

    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        if self.present[t][i * self.n + j] {
            1.0
        } else {
            0.0
        }
    }
}

/// Coordinates, cost and sweep count of a FACT optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct FactState {
    pub x: Vec<Vec<Vec2>>,
    pub cost: f64,
    pub sweeps: usize,
    /// Last nonzero direction from `j` to `i` per `[t][i * n + j]`.
    dir_cache: Vec<Vec<Vec2>>,
}

impl FactState {
    pub fn new(x: Vec<Vec<Vec2>>, frames: &DistanceFrames, r: &[f64]) -> Self {
        let n = frames.n_nodes;
        let dir_cache = x
            .iter()
            .map(|epoch| {
                (0..n * n)
                    .map(|k| {
                        let (i, j) = (k / n, k % n);
                        let d = epoch[i] - epoch[j];
                        let len = d.norm();
                        if len >= ZERO_DISTANCE {
                            d * (1.0 / len)
                        } else {
                            // Deterministic fallback, antisymmetric in (i, j).
                            let s = if i < j { 1.0 } else { -1.0 };
                            Vec2::from_polar(s, (i.min(j) * n + i.max(j)) as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        let cost = fact_cost(&x, frames, r);
        Self {
            x,
            cost,
            sweeps: 0,
            dir_cache,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn epochs(&self) -> usize {
        self.x.len()
    }
}

/// Stress and smoothness terms owned by node `i`.
pub fn local_cost(i: usize, x: &[Vec<Vec2>], frames: &DistanceFrames, r_i: f64) -> f64 {
    let n = frames.n_nodes;
    let mut s = 0.0;
    for (t, f) in frames.frames.iter().enumerate() {
        for j in (0..n).filter(|&j| j != i) {
            let d = f[(i, j)];
            if d.is_finite() {
                let e = d - x[t][i].distance(x[t][j]);
                s += e * e;
            }
        }
    }
    for t in 1..x.len().saturating_sub(1) {
        s += r_i * (x[t - 1][i] + x[t + 1][i] - x[t][i] * 2.0).norm_sq();
    }
    s
}

/// Total cost: stress over ordered pairs (each unordered pair counted twice)
/// plus smoothness over interior epochs.
pub fn fact_cost(x: &[Vec<Vec2>], frames: &DistanceFrames, r: &[f64]) -> f64 {
    (0..frames.n_nodes).fold(0.0, |acc, i| acc + local_cost(i, x, frames, r[i]))
}

/// New coordinates for node `i` at epoch `t`; updates the direction cache
/// entries `(t, i, *)`.
pub fn local_update(
    i: usize,
    t: usize,
    x: &[Vec<Vec2>],
    frames: &DistanceFrames,
    r_i: f64,
    variant: UpdateVariant,
    dir_cache: &mut [Vec2],
) -> Vec2 {
    let n = frames.n_nodes;
    let xi = x[t][i];
    let mut w = 0.0;
    let mut sum = Vec2::ZERO;
    for j in (0..n).filter(|&j| j != i) {
        let delta = frames.frames[t][(i, j)];
        if !delta.is_finite() {
            continue;
        }
        let diff = xi - x[t][j];
        let len = diff.norm();
        let dir = if len >= ZERO_DISTANCE {
            let u = diff * (1.0 / len);
            dir_cache[i * n + j] = u;
            u
        } else {
            dir_cache[i * n + j]
        };
        if delta >= 0.0 {
            w += 1.0;
            sum += x[t][j] + dir * delta;
        } else {
            // A negative range turns -2 delta |d| convex; bound |d| from above
            // by (|d|^2 + c^2) / 2c instead of linearizing it.
            let k = 1.0 - delta / len.max(ZERO_DISTANCE);
            w += k;
            sum += x[t][j] * k;
        }
    }
    let epochs = x.len();
    match variant {
        UpdateVariant::Literal => {
            if w + r_i == 0.0 {
                return xi;
            }
            (sum + xi * r_i) * (1.0 / (w + r_i))
        }
        UpdateVariant::PriorTarget => {
            let mut num = sum * 2.0;
            let mut den = 2.0 * w;
            if t >= 1 && t + 1 < epochs {
                num += (x[t - 1][i] + x[t + 1][i]) * (0.5 * 4.0 * r_i);
                den += 4.0 * r_i;
            }
            if t >= 2 {
                num += (x[t - 1][i] * 2.0 - x[t - 2][i]) * r_i;
                den += r_i;
            }
            if t + 2 < epochs {
                num += (x[t + 1][i] * 2.0 - x[t + 2][i]) * r_i;
                den += r_i;
            }
            if den == 0.0 {
                xi
            } else {
                num * (1.0 / den)
            }
        }
    }
}

fn divergence_tolerance(before: f64, frames: &DistanceFrames) -> f64 {
    let scale: f64 = frames
        .frames
        .iter()
        .flat_map(|f| f.iter().filter(|d| d.is_finite()).map(|d| d * d))
        .sum();
    1e-9 * before.max(f64::EPSILON * scale)
}

/// Finishes a sweep: optional gauge step, cost recomputation, descent check.
fn finish_sweep(
    state: &mut FactState,
    frames: &DistanceFrames,
    cfg: &FactConfig,
    cost: f64,
) -> Result<()> {
    let before = state.cost;
    state.cost = cost;
    state.sweeps += 1;
    if cfg.update_variant == UpdateVariant::PriorTarget
        && state.cost > before + divergence_tolerance(before, frames)
    {
        return Err(Error::DivergenceDetected {
            before,
            after: state.cost,
        });
    }
    Ok(())
}

fn apply_gauge_if(
    state: &mut FactState,
    frames: &DistanceFrames,
    r: &[f64],
    cfg: &FactConfig,
) -> f64 {
    if cfg.gauge_alignment {
        gauge_align(&mut state.x, r);
    }
    fact_cost(&state.x, frames, r)
}

/// One Gauss-Seidel pass over all epochs and nodes.
pub fn fact_sweep(state: &mut FactState, frames: &DistanceFrames, cfg: &FactConfig) -> Result<()> {
    let n = frames.n_nodes;
    let r = cfg.weights(n);
    for t in 0..state.epochs() {
        for (i, &ri) in r.iter().enumerate() {
            let new = local_update(
                i,
                t,
                &state.x,
                frames,
                ri,
                cfg.update_variant,
                &mut state.dir_cache[t],
            );
            state.x[t][i] = new;
        }
    }
    let cost = apply_gauge_if(state, frames, &r, cfg);
    finish_sweep(state, frames, cfg, cost)
}

/// Per-epoch rigid motions (epoch 0 fixed) that minimize the smoothness
/// penalty. Stress is unchanged. Shifting epoch `t` by `b * t` leaves every
/// second difference alone, so the last epoch keeps its centroid to make the
/// minimizer unique.
pub fn gauge_align(x: &mut [Vec<Vec2>], r: &[f64]) {
    let epochs = x.len();
    if epochs < 3 || r.iter().all(|&v| v == 0.0) {
        return;
    }
    let n = x[0].len();
    let k = epochs - 1;
    let sr: Vec<f64> = r.iter().map(|v| v.sqrt()).collect();
    let base: Vec<Vec<Vec2>> = x.to_vec();
    // Rotations act about each epoch's centroid so the problem, and with it
    // the solver's path, does not depend on where the frame origin lies.
    let centroids: Vec<Vec2> = base
        .iter()
        .map(|e| e.iter().fold(Vec2::ZERO, |a, &p| a + p) * (1.0 / n as f64))
        .collect();
    let pose = |p: &DVector<f64>, t: usize, q: Vec2| -> (Vec2, Vec2) {
        if t == 0 {
            return (q, Vec2::ZERO);
        }
        let th = p[t - 1];
        let u = if t < k {
            Vec2::new(p[k + 2 * (t - 1)], p[k + 2 * (t - 1) + 1])
        } else {
            Vec2::ZERO
        };
        let y = (q - centroids[t]).rotate(th);
        (y + centroids[t] + u, y.perp())
    };
    let rows = 2 * n * (epochs - 2);
    let dim = 3 * k - 2;
    // Residuals, Jacobian and the second-order term of the rotations, which
    // only touches the diagonal since each angle moves one epoch.
    let eval = |p: &DVector<f64>,
                res: &mut DVector<f64>,
                jac: &mut DMatrix<f64>,
                curv: &mut DVector<f64>| {
        *res = DVector::zeros(rows);
        *jac = DMatrix::zeros(rows, dim);
        *curv = DVector::zeros(k);
        let mut row = 0;
        for t in 1..epochs - 1 {
            for i in 0..n {
                let mut v = Vec2::ZERO;
                let mut terms = [(0, 0.0, Vec2::ZERO); 3];
                for (slot, (tt, coef)) in [(t - 1, 1.0), (t + 1, 1.0), (t, -2.0)]
                    .into_iter()
                    .enumerate()
                {
                    let (y, dy) = pose(p, tt, base[tt][i]);
                    v += y * coef;
                    terms[slot] = (tt, coef * sr[i], dy);
                    if tt > 0 {
                        let c = coef * sr[i];
                        jac[(row, tt - 1)] += c * dy.x;
                        jac[(row + 1, tt - 1)] += c * dy.y;
                        if tt < k {
                            jac[(row, k + 2 * (tt - 1))] += c;
                            jac[(row + 1, k + 2 * (tt - 1) + 1)] += c;
                        }
                    }
                }
                let e = v * sr[i];
                res[row] = e.x;
                res[row + 1] = e.y;
                for (tt, c, dy) in terms.into_iter().filter(|term| term.0 > 0) {
                    // d2/dth2 of the rotated offset is minus the offset, -dy.perp() rotated back.
                    curv[tt - 1] += c * e.dot(dy.perp());
                }
                row += 2;
            }
        }
    };
    let mut curv = DVector::zeros(0);
    let rep = levenberg_marquardt(
        |p, res, jac| eval(p, res, jac, &mut curv),
        DVector::zeros(dim),
        LmOptions {
            max_iter: 100,
            ftol: 1e-14,
            xtol: 1e-15,
            initial_lambda: 1e-6,
        },
    );
    // Gauss-Newton converges slowly on the weakly curved rotations and the
    // cost cannot resolve them, so finish with exact Newton steps. Poses then
    // do not depend on the solver's path.
    let (mut res, mut jac) = (DVector::zeros(0), DMatrix::zeros(0, 0));
    let mut p = rep.x.clone();
    let mut last = f64::INFINITY;
    for _ in 0..30 {
        eval(&p, &mut res, &mut jac, &mut curv);
        let mut h = jac.transpose() * &jac;
        for a in 0..k {
            h[(a, a)] += curv[a];
        }
        let Some(ch) = h.cholesky() else { break };
        let step = ch.solve(&(-(jac.transpose() * &res)));
        let size = step.norm();
        if !(size < 0.5 * last) {
            break;
        }
        p += step;
        last = size;
        if size <= 4.0 * f64::EPSILON * (1.0 + p.norm()) {
            break;
        }
    }
    eval(&p, &mut res, &mut jac, &mut curv);
    if !(res.norm_squared() <= rep.cost * (1.0 + 1e-12)) {
        p = rep.x;
    }
    for (t, epoch) in x.iter_mut().enumerate() {
        for (i, q) in epoch.iter_mut().enumerate() {
            *q = pose(&p, t, base[t][i]).0;
        }
    }
}

/// Runs sweeps until the decrease drops below `epsilon` or `max_sweeps`.
pub fn fact_optimize(
    state: &mut FactState,
    frames: &DistanceFrames,
    cfg: &FactConfig,
) -> Result<()> {
    while state.sweeps < cfg.max_sweeps {
        let before = state.cost;
        fact_sweep(state, frames, cfg)?;
        if before - state.cost < cfg.epsilon {
            break;
        }
    }
    Ok(())
}

enum Msg {
    /// Token: update the receiver's coordinates at epoch `t`.
    Compute {
        t: usize,
    },
    /// A peer's new coordinates.
    Update {
        t: usize,
        node: usize,
        x: Vec2,
    },
    /// All updates of the sweep have been sent.
    SweepDone,
    /// Running cost, accumulated in node order.
    Cost {
        partial: f64,
    },
    Stop,
}

/// Message-passing version of [`fact_optimize`]: one worker thread per node,
/// each holding a replica of the coordinates. Workers exchange only their own
/// coordinate updates and pass a token carrying the running cost; each applies
/// the deterministic gauge step to its replica. Results are bit-identical to
/// the single-threaded optimizer.
pub fn fact_optimize_distributed(
    state: &mut FactState,
    frames: &DistanceFrames,
    cfg: &FactConfig,
) -> Result<()> {
    let n = frames.n_nodes;
    if n == 0 || state.sweeps >= cfg.max_sweeps {
        return Ok(());
    }
    let r = cfg.weights(n);
    let epochs = state.epochs();
    let (txs, rxs): (Vec<_>, Vec<_>) = (0..n).map(|_| mpsc::channel::<Msg>()).unzip();
    let (done_tx, done_rx) = mpsc::channel::<Result<FactState>>();
    // Each worker owns the direction-cache rows of its node; they are merged
    // into the result so the returned state matches the serial one exactly.
    let (rows_tx, rows_rx) = mpsc::channel::<(usize, Vec<Vec<Vec2>>)>();

    std::thread::scope(|scope| {
        for (me, inbox) in rxs.into_iter().enumerate() {
            let peers = txs.clone();
            let done = done_tx.clone();
            let rows = rows_tx.clone();
            let mut replica = state.clone();
            let r = r.clone();
            scope.spawn(move || {
                let next = (me + 1) % n;
                let last = me + 1 == n;
                let broadcast = |msg: &dyn Fn() -> Msg| {
                    for (k, p) in peers.iter().enumerate() {
                        if k != me {
                            let _ = p.send(msg());
                        }
                    }
                };
                while let Ok(msg) = inbox.recv() {
                    match msg {
                        Msg::Update { t, node, x } => replica.x[t][node] = x,
                        Msg::Compute { t } => {
                            let x = local_update(
                                me,
                                t,
                                &replica.x,
                                frames,
                                r[me],
                                cfg.update_variant,
                                &mut replica.dir_cache[t],
                            );
                            replica.x[t][me] = x;
                            broadcast(&|| Msg::Update { t, node: me, x });
                            if !last {
                                let _ = peers[next].send(Msg::Compute { t });
                            } else if t + 1 < epochs {
                                let _ = peers[next].send(Msg::Compute { t: t + 1 });
                            } else {
                                broadcast(&|| Msg::SweepDone);
                                if cfg.gauge_alignment {
                                    gauge_align(&mut replica.x, &r);
                                }
                                let _ = peers[next].send(Msg::Cost { partial: 0.0 });
                            }
                        }
                        Msg::SweepDone => {
                            if cfg.gauge_alignment {
                                gauge_align(&mut replica.x, &r);
                            }
                        }
                        Msg::Cost { partial } => {
                            let acc = partial + local_cost(me, &replica.x, frames, r[me]);
                            if !last {
                                let _ = peers[next].send(Msg::Cost { partial: acc });
                                continue;
                            }
                            let before = replica.cost;
                            let outcome = finish_sweep(&mut replica, frames, cfg, acc);
                            let stop = outcome.is_err()
                                || replica.sweeps >= cfg.max_sweeps
                                || before - replica.cost < cfg.epsilon;
                            if stop {
                                let _ = done.send(outcome.map(|()| replica.clone()));
                                broadcast(&|| Msg::Stop);
                                break;
                            }
                            let _ = peers[next].send(Msg::Compute { t: 0 });
                        }
                        Msg::Stop => break,
                    }
                }
                let own = replica
                    .dir_cache
                    .iter()
                    .map(|c| c[me * n..(me + 1) * n].to_vec())
                    .collect();
                let _ = rows.send((me, own));
            });
        }
        drop(done_tx);
        drop(rows_tx);
        let _ = txs[0].send(Msg::Compute { t: 0 });
    });
    let mut result = done_rx.recv().expect("the last worker reports")?;
    for (node, own) in rows_rx.iter() {
        for (cache, row) in result.dir_cache.iter_mut().zip(own) {
            cache[node * n..(node + 1) * n].copy_from_slice(&row);
        }
    }
    *state = result;
    Ok(())
}

/// Initial coordinates for a window from MDS; node 0 starts at the origin.
pub fn mds_init(frames: &DistanceFrames, init: FactInit) -> Result<Vec<Vec<Vec2>>> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("window has no epochs".into()));
    }
    let mut x: Vec<Vec<Vec2>> = match init {
        FactInit::FirstEpochMds => {
            let c = classical_mds(&frames.frames[0])?.coords;
            vec![c; frames.len()]
        }
        FactInit::AlignedMds => {
            let mut out: Vec<Vec<Vec2>> = Vec::with_capacity(frames.len());
            for f in &frames.frames {
                let mut c = classical_mds(f)?.coords;
                if let Some(prev) = out.last() {
                    let tf = procrustes(&c, prev, true);
                    c = c.into_iter().map(|p| tf.apply(p)).collect();
                }
                out.push(c);
            }
            out
        }
    };
    let origin = x[0][0];
    for epoch in &mut x {
        for p in epoch.iter_mut() {
            *p -= origin;
        }
    }
    Ok(x)
}

/// Optimized coordinates and fitted kinematics of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FactWindow {
    /// Index of the window's first epoch in the input frames.
    pub start: usize,
    pub times: Vec<f64>,
    pub x: Vec<Vec<Vec2>>,
    /// Per-node regression line of the window's coordinates, evaluated at `t_end`.
    pub states: Vec<AgentState>,
    pub t_end: f64,
    pub cost: f64,
    pub sweeps: usize,
}

impl FactWindow {
    /// CP parameters of every pair with `t_m` measured from `t_ref`.
    pub fn pair_cps(&self, t_ref: f64) -> Vec<PairCp> {
        let n = self.states.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let rel = self.states[i].relative_to(&self.states[j]);
                let at_ref = AgentState::new(rel.position_at(t_ref - self.t_end), rel.velocity);
                out.push(PairCp {
                    i,
                    j,
                    cp: cp_params(&at_ref).ok(),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactTrack {
    pub windows: Vec<FactWindow>,
    /// Per-node coordinates across all windows (relative frame).
    pub tracks: Vec<Track>,
}

/// Windowed FACT tracking over non-overlapping windows of `cfg.window` epochs.
///
/// The first window starts from MDS; later windows start from the previous
/// window's fitted positions projected forward with its fitted velocities. A
/// trailing remainder shorter than 3 epochs is ignored.
pub fn fact_track(frames: &DistanceFrames, cfg: &FactConfig) -> Result<FactTrack> {
    let n = frames.n_nodes;
    cfg.validate(n)?;
    let r = cfg.weights(n);
    let mut windows: Vec<FactWindow> = Vec::new();
    let mut start = 0;
    while frames.len() - start >= 3 {
        let end = (start + cfg.window).min(frames.len());
        let wf = frames.slice(start..end);
        let x0 = match windows.last() {
            None => mds_init(&wf, cfg.init)?,
            Some(prev) => wf
                .times
                .iter()
                .map(|&t| {
                    prev.states
                        .iter()
                        .map(|s| s.position_at(t - prev.t_end))
                        .collect()
                })
                .collect(),
        };
        let mut state = FactState::new(x0, &wf, &r);
        if cfg.gauge_alignment {
            gauge_align(&mut state.x, &r);
            state.cost = fact_cost(&state.x, &wf, &r);
        }
        if cfg.distributed {
            fact_optimize_distributed(&mut state, &wf, cfg)?;
        } else {
            fact_optimize(&mut state, &wf, cfg)?;
        }
        let t_end = *wf.times.last().expect("non-empty window");
        let states = (0..n)
            .map(|i| {
                let pos: Vec<Vec2> = state.x.iter().map(|e| e[i]).collect();
                linear_fit(&wf.times, &pos, t_end).map(|(p, v)| AgentState::new(p, v))
            })
            .collect::<Result<Vec<_>>>()?;
        windows.push(FactWindow {
            start,
            times: wf.times.clone(),
            x: state.x,
            states,
            t_end,
            cost: state.cost,
            sweeps: state.sweeps,
        });
        start = end;
    }
    if windows.is_empty() {
        return Err(Error::InsufficientData(
            "FACT needs at least 3 epochs".into(),
        ));
    }
    let tracks = (0..n)
        .map(|i| {
            let times: Vec<f64> = windows
                .iter()
                .flat_map(|w| w.times.iter().copied())
                .collect();
            let pos: Vec<Vec2> = windows
                .iter()
                .flat_map(|w| w.x.iter().map(move |e| e[i]))
                .collect();
            let span = windows[0].times.last().expect("non-empty") - windows[0].times[0];
            Track::new(i, times, pos, span)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactTrack { windows, tracks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::scenario::{synth_pairwise_ranges, LinearMotion, NoiseModel};
    use rand::Rng;

    fn frames_of(motion: &LinearMotion, sigma: f64, rate: f64, seed: u64) -> DistanceFrames {
        let mut rng = seeded(seed);
        let s =
            synth_pairwise_ranges(motion, NoiseModel::new(sigma).unwrap(), rate, &mut rng).unwrap();
        DistanceFrames::from_samples(&s, motion.agents.len()).unwrap()
    }

    fn linear(n: usize, seed: u64, duration: f64) -> LinearMotion {
        let mut rng = seeded(seed);
        LinearMotion {
            agents: (0..n)
                .map(|_| {
                    AgentState::new(
                        Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)),
                        Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                    )
                })
                .collect(),
            duration,
        }
    }

    fn truth(m: &LinearMotion, times: &[f64]) -> Vec<Vec<Vec2>> {
        times
            .iter()
            .map(|&t| m.agents.iter().map(|a| a.position_at(t)).collect())
            .collect()
    }

    #[test]
    fn ground_truth_has_zero_cost_and_is_fixed() {
        let m = linear(4, 1, 1.0);
        let f = frames_of(&m, 0.0, 18.0, 0);
        let x = truth(&m, &f.times);
        let r = vec![1.0; 4];
        assert!(fact_cost(&x, &f, &r) < 1e-20);
        let cfg = FactConfig {
            gauge_alignment: false,
            ..Default::default()
        };
        let mut st = FactState::new(x.clone(), &f, &r);
        fact_sweep(&mut st, &f, &cfg).unwrap();
        for (a, b) in st.x.iter().flatten().zip(x.iter().flatten()) {
            assert!(a.distance(*b) < 1e-9);
        }
        assert!(st.cost < 1e-18);
    }

    #[test]
    fn single_epoch_cost_is_stress() {
        let m = linear(3, 2, 0.0);
        let f = frames_of(&m, 0.0, 1.0, 0);
        assert_eq!(f.len(), 1);
        let x = vec![vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]];
        let stress: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (f.frames[0][(i, j)] - x[0][i].distance(x[0][j])).powi(2))
            .sum();
        assert!((fact_cost(&x, &f, &[5.0; 3]) - stress).abs() < 1e-12 * stress);
    }

    #[test]
    fn two_nodes_move_apart() {
        let mut d = DMatrix::zeros(2, 2);
        d[(0, 1)] = 5.0;
        d[(1, 0)] = 5.0;
        let f = DistanceFrames {
            times: vec![0.0],
            n_nodes: 2,
            frames: vec![d],
        };
        let x = vec![vec![Vec2::ZERO, Vec2::new(3.0, 0.0)]];
        let mut st = FactState::new(x, &f, &[1.0, 1.0]);
        fact_sweep(&mut st, &f, &FactConfig::default()).unwrap();
        let (a, b) = (st.x[0][0], st.x[0][1]);
        // Gauss-Seidel: node 0 moves away first, which already restores the range.
        assert!(a.x < 0.0 && b.x >= 3.0 - 1e-12);
        assert!(a.y.abs() < 1e-15 && b.y.abs() < 1e-15);
        let gap = a.distance(b);
        assert!(gap > 3.0 && gap <= 5.0 + 1e-12, "{gap}");
    }

    #[test]
    fn coincident_nodes_use_cached_direction() {
        let mut d = DMatrix::zeros(2, 2);
        d[(0, 1)] = 2.0;
        d[(1, 0)] = 2.0;
        let f = DistanceFrames {
            times: vec![0.0],
            n_nodes: 2,
            frames: vec![d],
        };
        let mut st = FactState::new(vec![vec![Vec2::ZERO, Vec2::ZERO]], &f, &[0.0, 0.0]);
        fact_sweep(&mut st, &f, &FactConfig::default()).unwrap();
        assert!(st.x[0][0].distance(st.x[0][1]) > 1.0);
        assert!(st.x.iter().flatten().all(|p| p.is_finite()));
    }

    #[test]
    fn descent_on_noisy_windows() {
        for seed in 0..6 {
            let m = linear(5, seed, 1.0);
            let f = frames_of(&m, 0.1, 9.0, seed);
            let r = vec![1.0; 5];
            for gauge in [false, true] {
                let cfg = FactConfig {
                    gauge_alignment: gauge,
                    max_sweeps: 60,
                    epsilon: 1e-12,
                    ..Default::default()
                };
                let mut st = FactState::new(mds_init(&f, FactInit::AlignedMds).unwrap(), &f, &r);
                let mut prev = st.cost;
                for _ in 0..60 {
                    fact_sweep(&mut st, &f, &cfg).unwrap();
                    assert!(st.cost <= prev * (1.0 + 1e-9));
                    prev = st.cost;
                }
            }
        }
    }

    #[test]
    fn gauge_step_keeps_stress_and_lowers_smoothness() {
        let m = linear(4, 3, 2.0);
        let f = frames_of(&m, 0.0, 5.0, 0);
        let r = vec![1.0; 4];
        let mut x = truth(&m, &f.times);
        for (t, e) in x.iter_mut().enumerate() {
            for p in e.iter_mut() {
                *p = p.rotate(0.05 * (t * t) as f64) + Vec2::new(t as f64, 0.0);
            }
        }
        let before = fact_cost(&x, &f, &r);
        gauge_align(&mut x, &r);
        let after = fact_cost(&x, &f, &r);
        assert!(before > 1.0);
        assert!(after < 1e-10 * before, "{before} -> {after}");
    }

    #[test]
    fn descent_with_negative_ranges() {
        for seed in 0..40 {
            let m = linear(4, 100 + seed, 1.0);
            let mut f = frames_of(&m, 0.3, 9.0, seed);
            // Close pairs measured through heavy noise come out negative.
            for d in &mut f.frames {
                d[(0, 1)] = -0.5;
                d[(1, 0)] = -0.5;
            }
            let r = vec![0.5; 4];
            let cfg = FactConfig {
                max_sweeps: 40,
                epsilon: 1e-300,
                ..Default::default()
            };
            let mut st = FactState::new(mds_init(&f, FactInit::AlignedMds).unwrap(), &f, &r);
            let mut prev = st.cost;
            for _ in 0..40 {
                fact_sweep(&mut st, &f, &cfg).unwrap();
                assert!(
                    st.cost <= prev * (1.0 + 1e-9),
                    "seed {seed}: {prev} -> {}",
                    st.cost
                );
                prev = st.cost;
            }
        }
    }

    #[test]
    fn gauge_step_is_idempotent() {
        for seed in 0..10 {
            let m = linear(4, 200 + seed, 1.0);
            let f = frames_of(&m, 0.1, 9.0, seed);
            let r = vec![1.0; 4];
            let mut once = mds_init(&f, FactInit::AlignedMds).unwrap();
            gauge_align(&mut once, &r);
            let mut twice = once.clone();
            gauge_align(&mut twice, &r);
            for (p, q) in once.iter().flatten().zip(twice.iter().flatten()) {
                assert!(p.distance(*q) < 1e-10, "seed {seed}: {p:?} vs {q:?}");
            }
        }
    }

    #[test]
    fn literal_variant_runs() {
        let m = linear(3, 4, 1.0);
        let f = frames_of(&m, 0.05, 9.0, 1);
        let cfg = FactConfig {
            update_variant: UpdateVariant::Literal,
            gauge_alignment: false,
            ..Default::default()
        };
        let mut st = FactState::new(mds_init(&f, FactInit::AlignedMds).unwrap(), &f, &[1.0; 3]);
        fact_optimize(&mut st, &f, &cfg).unwrap();
        assert!(st.cost.is_finite() && st.sweeps >= 1);
    }

    #[test]
    fn distributed_matches_single_threaded() {
        for seed in 0..3 {
            let n = 3 + seed as usize;
            let m = linear(n, 10 + seed, 1.0);
            let f = frames_of(&m, 0.1, 8.0, seed);
            let cfg = FactConfig {
                max_sweeps: 15,
                epsilon: 1e-15,
                ..Default::default()
            };
            let r = cfg.weights(n);
            let x0 = mds_init(&f, FactInit::AlignedMds).unwrap();
            let mut a = FactState::new(x0.clone(), &f, &r);
            let mut b = FactState::new(x0, &f, &r);
            fact_optimize(&mut a, &f, &cfg).unwrap();
            fact_optimize_distributed(&mut b, &f, &cfg).unwrap();
            assert_eq!(a.sweeps, b.sweeps);
            assert_eq!(a.cost.to_bits(), b.cost.to_bits());
            for (p, q) in a.x.iter().flatten().zip(b.x.iter().flatten()) {
                assert_eq!(
                    (p.x.to_bits(), p.y.to_bits()),
                    (q.x.to_bits(), q.y.to_bits())
                );
            }
        }
    }

    #[test]
    fn noiseless_track_recovers_cp() {
        let m = linear(4, 7, 2.0);
        let f = frames_of(&m, 0.0, 18.0, 0);
        let cfg = FactConfig {
            window: 18,
            epsilon: 1e-14,
            max_sweeps: 500,
            ..Default::default()
        };
        let tr = fact_track(&f, &cfg).unwrap();
        assert_eq!(tr.windows.len(), 2);
        for w in &tr.windows {
            for pc in w.pair_cps(w.t_end) {
                let rel = m.agents[pc.i].relative_to(&m.agents[pc.j]);
                let want =
                    cp_params(&AgentState::new(rel.position_at(w.t_end), rel.velocity)).unwrap();
                let got = pc.cp.unwrap();
                assert!((got.d_m - want.d_m).abs() < 1e-6, "{got:?} {want:?}");
                assert!((got.t_m - want.t_m).abs() < 1e-6, "{got:?} {want:?}");
                assert!((got.v - want.v).abs() < 1e-6, "{got:?} {want:?}");
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(FactConfig {
            window: 2,
            ..Default::default()
        }
        .validate(3)
        .is_err());
        assert!(FactConfig {
            epsilon: 0.0,
            ..Default::default()
        }
        .validate(3)
        .is_err());
        let bad = FactConfig {
            node_smoothness: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(bad.validate(3).is_err());
    }
}
