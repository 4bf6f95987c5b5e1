//! Fisher information and Cramér-Rao bounds on `(t_m, d_m, v)` for the
//! pairwise, anchor and friend measurement models.
//!
//! Parameter order throughout is `theta = (t_m, d_m, v)` and
//! `alpha = (x_i, x_j, v_i, v_j)` (8 scalars).

use nalgebra::{DMatrix, DVector, SMatrix};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{cp_params, AgentState, CpParams, Vec2};
use crate::linalg::{
    condition_number, levenberg_marquardt, pinv, symmetrize, LmOptions, PINV_RTOL,
};
use crate::rng::{derive_seed, seeded};
use crate::scenario::{
    gen_random_geometry, sample_times, uniform_in_disk, uniform_on_circle, uniform_velocity,
    FIELD_RADIUS, MAX_SPEED,
};

/// Largest condition number accepted when inverting an information matrix.
pub const MAX_CONDITION: f64 = 1e12;

pub type CpJacobian = SMatrix<f64, 3, 8>;

/// Kinematic state of the pair of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub x_i: Vec2,
    pub x_j: Vec2,
    pub v_i: Vec2,
    pub v_j: Vec2,
}

impl PairState {
    pub fn new(a: AgentState, b: AgentState) -> Self {
        Self {
            x_i: a.position,
            x_j: b.position,
            v_i: a.velocity,
            v_j: b.velocity,
        }
    }

    pub fn agent_i(&self) -> AgentState {
        AgentState::new(self.x_i, self.v_i)
    }

    pub fn agent_j(&self) -> AgentState {
        AgentState::new(self.x_j, self.v_j)
    }

    /// State of `j` relative to `i`.
    pub fn relative(&self) -> AgentState {
        AgentState::new(self.x_j - self.x_i, self.v_j - self.v_i)
    }

    pub fn cp(&self) -> Result<CpParams> {
        cp_params(&self.relative())
    }

    pub fn alpha(&self) -> [f64; 8] {
        [
            self.x_i.x, self.x_i.y, self.x_j.x, self.x_j.y, self.v_i.x, self.v_i.y, self.v_j.x,
            self.v_j.y,
        ]
    }

    pub fn from_alpha(a: &[f64]) -> Self {
        Self {
            x_i: Vec2::new(a[0], a[1]),
            x_j: Vec2::new(a[2], a[3]),
            v_i: Vec2::new(a[4], a[5]),
            v_j: Vec2::new(a[6], a[7]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x_i.is_finite() && self.x_j.is_finite() && self.v_i.is_finite() && self.v_j.is_finite()
    }
}

/// Symmetric positive semidefinite Fisher information (3x3 in theta, 8x8 in alpha).
#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix(DMatrix<f64>);

impl FimMatrix {
    pub fn new(m: DMatrix<f64>) -> Self {
        Self(symmetrize(&m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self(&self.0 * k)
    }

    pub fn is_symmetric_psd(&self) -> bool {
        let m = &self.0;
        let scale = m.abs().max().max(f64::MIN_POSITIVE);
        if (m - m.transpose()).abs().max() > 1e-9 * scale {
            return false;
        }
        let trace = m.trace();
        m.clone()
            .symmetric_eigenvalues()
            .iter()
            .all(|&l| l >= -1e-9 * trace.abs().max(f64::MIN_POSITIVE))
    }

    /// Standard-deviation bounds, `+inf` for parameters outside the
    /// identifiable subspace.
    pub fn bounds(&self) -> BoundTriple {
        let m = &self.0;
        let eig = m.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut cov = DMatrix::zeros(m.nrows(), m.ncols());
        let mut unidentified = vec![false; m.nrows()];
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            let u = eig.eigenvectors.column(k);
            if lmax > 0.0 && l > lmax / MAX_CONDITION {
                cov += u * u.transpose() / l;
            } else {
                for (p, flag) in unidentified.iter_mut().enumerate() {
                    if u[p].abs() > 1e-6 {
                        *flag = true;
                    }
                }
            }
        }
        let sd = |p: usize| {
            if unidentified[p] {
                f64::INFINITY
            } else {
                cov[(p, p)].max(0.0).sqrt()
            }
        };
        BoundTriple {
            std_tm: sd(0),
            std_dm: sd(1),
            std_v: sd(2),
        }
    }
}

/// Lower bounds on the standard deviation of `(t_m, d_m, v)` estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTriple {
    pub std_tm: f64,
    pub std_dm: f64,
    pub std_v: f64,
}

impl BoundTriple {
    pub const INFINITE: BoundTriple = BoundTriple {
        std_tm: f64::INFINITY,
        std_dm: f64::INFINITY,
        std_v: f64::INFINITY,
    };

    pub fn from_covariance(c: &DMatrix<f64>) -> Self {
        let sd = |p: usize| c[(p, p)].max(0.0).sqrt();
        Self {
            std_tm: sd(0),
            std_dm: sd(1),
            std_v: sd(2),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.std_tm, self.std_dm, self.std_v]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self {
            std_tm: a[0],
            std_dm: a[1],
            std_v: a[2],
        }
    }
}

/// Sample times and range-noise standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub times: Vec<f64>,
    pub sigma: f64,
}

impl SamplingPlan {
    pub fn new(times: Vec<f64>, sigma: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InsufficientData("sampling plan has no times".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { times, sigma })
    }

    /// `0, 1/rate, ...` through `duration` inclusive.
    pub fn uniform(duration: f64, rate: f64, sigma: f64) -> Result<Self> {
        Self::new(sample_times(duration, rate), sigma)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.times.clone(), sigma)
    }
}

/// Pairwise-range information about `(t_m, d_m, v)`.
pub fn fim_pairwise(cp: &CpParams, plan: &SamplingPlan) -> Result<FimMatrix> {
    let mut m = DMatrix::zeros(3, 3);
    for &t in &plan.times {
        let u = cp.t_m - t;
        let d2 = cp.d_m * cp.d_m + cp.v * cp.v * u * u;
        if !(d2 > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "zero distance at t = {t}"
            )));
        }
        let g = nalgebra::Vector3::new(cp.v * cp.v * u, cp.d_m, cp.v * u * u);
        m += DMatrix::from_fn(3, 3, |r, c| g[r] * g[c] / d2);
    }
    Ok(FimMatrix::new(m / (plan.sigma * plan.sigma)))
}

fn unit_projector(d: Vec2) -> [[f64; 2]; 2] {
    let n2 = d.norm_sq();
    [
        [d.x * d.x / n2, d.x * d.y / n2],
        [d.x * d.y / n2, d.y * d.y / n2],
    ]
}

/// Information about `alpha` from ranges of both agents to reference points
/// moving at known constant velocity (anchors have zero velocity).
pub fn fim_references(
    pair: &PairState,
    refs: &[AgentState],
    plan: &SamplingPlan,
) -> Result<FimMatrix> {
    let mut m = DMatrix::zeros(8, 8);
    for r in refs {
        for &t in &plan.times {
            let p_ref = r.position_at(t);
            for (a, agent) in [pair.agent_i(), pair.agent_j()].iter().enumerate() {
                let d = agent.position_at(t) - p_ref;
                if d.norm() < 1e-12 {
                    return Err(Error::DegenerateGeometry(format!(
                        "agent {a} coincides with a reference point at t = {t}"
                    )));
                }
                let proj = unit_projector(d);
                let (xo, vo) = (2 * a, 4 + 2 * a);
                for p in 0..2 {
                    for q in 0..2 {
                        m[(xo + p, xo + q)] += proj[p][q];
                        m[(xo + p, vo + q)] += t * proj[p][q];
                        m[(vo + p, xo + q)] += t * proj[p][q];
                        m[(vo + p, vo + q)] += t * t * proj[p][q];
                    }
                }
            }
        }
    }
    Ok(FimMatrix::new(m / (plan.sigma * plan.sigma)))
}

/// Anchor-range information about `alpha`.
pub fn fim_anchor(pair: &PairState, anchors: &[Vec2], plan: &SamplingPlan) -> Result<FimMatrix> {
    let refs: Vec<AgentState> = anchors
        .iter()
        .map(|&p| AgentState::new(p, Vec2::ZERO))
        .collect();
    fim_references(pair, &refs, plan)
}

/// Jacobian of `(t_m, d_m, v)` with respect to `alpha`.
///
/// At `d_m = 0` the `d_m` row is set to zero (the cone point has no gradient).
pub fn jacobian_cp(pair: &PairState) -> Result<CpJacobian> {
    let rel = pair.relative();
    let (x, u) = (rel.position, rel.velocity);
    let v = u.norm();
    if v == 0.0 {
        return Err(Error::ZeroRelativeSpeed);
    }
    let v2 = v * v;
    let xu = x.dot(u);
    let t_m = -xu / v2;
    let x_perp = x + u * t_m;
    let d_m = x_perp.norm();

    let dtm_dx = u * (-1.0 / v2);
    let dtm_du = x * (-1.0 / v2) + u * (2.0 * xu / (v2 * v2));
    let (ddm_dx, ddm_du) = if d_m > 1e-12 * x.norm().max(1.0) {
        (x_perp * (1.0 / d_m), x_perp * (t_m / d_m))
    } else {
        (Vec2::ZERO, Vec2::ZERO)
    };
    let dv_du = u * (1.0 / v);

    let mut j = CpJacobian::zeros();
    for (row, gx, gu) in [
        (0, dtm_dx, dtm_du),
        (1, ddm_dx, ddm_du),
        (2, Vec2::ZERO, dv_du),
    ] {
        j[(row, 0)] = -gx.x;
        j[(row, 1)] = -gx.y;
        j[(row, 2)] = gx.x;
        j[(row, 3)] = gx.y;
        j[(row, 4)] = -gu.x;
        j[(row, 5)] = -gu.y;
        j[(row, 6)] = gu.x;
        j[(row, 7)] = gu.y;
    }
    Ok(j)
}

/// Bound covariance `J I_alpha^-1 J^T` in theta space.
pub fn transform_covariance(i_alpha: &FimMatrix, j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cond = condition_number(i_alpha.matrix());
    if !(cond <= MAX_CONDITION) {
        return Err(Error::NonIdentifiable(cond));
    }
    let inv = pinv(i_alpha.matrix(), PINV_RTOL);
    Ok(symmetrize(&(j * inv * j.transpose())))
}

/// Information about theta obtained from information about alpha.
pub fn crlb_transform(i_alpha: &FimMatrix, j: &DMatrix<f64>) -> Result<FimMatrix> {
    let c = transform_covariance(i_alpha, j)?;
    Ok(FimMatrix::new(pinv(&c, PINV_RTOL)))
}

fn jacobian_dyn(pair: &PairState) -> Result<DMatrix<f64>> {
    let j = jacobian_cp(pair)?;
    Ok(DMatrix::from_fn(3, 8, |r, c| j[(r, c)]))
}

/// Friend-range plus pairwise-range information about theta.
///
/// Friends are known evaluation points moving at constant velocity. When the
/// friend ranges alone leave alpha unidentifiable they contribute nothing.
pub fn fim_friend(
    pair: &PairState,
    friends: &[AgentState],
    plan: &SamplingPlan,
) -> Result<FimMatrix> {
    let cp = pair.cp()?;
    let pairwise = fim_pairwise(&cp, plan)?;
    if friends.is_empty() {
        return Ok(pairwise);
    }
    let i_alpha = fim_references(pair, friends, plan)?;
    match crlb_transform(&i_alpha, &jacobian_dyn(pair)?) {
        Ok(i1) => Ok(FimMatrix::new(i1.into_matrix() + pairwise.into_matrix())),
        Err(Error::NonIdentifiable(_)) => Ok(pairwise),
        Err(e) => Err(e),
    }
}

/// Measurement model for bound and ML computations.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementModel {
    Pairwise,
    Anchor(Vec<Vec2>),
    Friend(Vec<AgentState>),
}

impl MeasurementModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pairwise => "pairwise",
            Self::Anchor(_) => "anchor",
            Self::Friend(_) => "friend",
        }
    }

    fn references(&self) -> Vec<AgentState> {
        match self {
            Self::Pairwise => Vec::new(),
            Self::Anchor(a) => a.iter().map(|&p| AgentState::new(p, Vec2::ZERO)).collect(),
            Self::Friend(f) => f.clone(),
        }
    }

    pub fn bounds(&self, pair: &PairState, plan: &SamplingPlan) -> Result<BoundTriple> {
        match self {
            Self::Pairwise => Ok(fim_pairwise(&pair.cp()?, plan)?.bounds()),
            Self::Anchor(anchors) => {
                let i_alpha = fim_anchor(pair, anchors, plan)?;
                match transform_covariance(&i_alpha, &jacobian_dyn(pair)?) {
                    Ok(c) => Ok(BoundTriple::from_covariance(&c)),
                    Err(Error::NonIdentifiable(_)) => Ok(BoundTriple::INFINITE),
                    Err(e) => Err(e),
                }
            }
            Self::Friend(friends) => Ok(fim_friend(pair, friends, plan)?.bounds()),
        }
    }

    /// One noisy realization of the model's measurements followed by a local
    /// maximum-likelihood fit started at the true parameters.
    pub fn ml_estimate(
        &self,
        pair: &PairState,
        plan: &SamplingPlan,
        rng: &mut impl Rng,
    ) -> Result<CpParams> {
        let noise = Normal::new(0.0, plan.sigma).expect("positive sigma");
        let pair_obs: Vec<f64> = match self {
            Self::Anchor(_) => Vec::new(),
            _ => plan
                .times
                .iter()
                .map(|&t| pair.relative().position_at(t).norm() + noise.sample(rng))
                .collect(),
        };
        let refs = self.references();
        let ref_obs: Vec<[f64; 2]> = refs
            .iter()
            .flat_map(|r| plan.times.iter().map(move |&t| (r, t)))
            .map(|(r, t)| {
                let p = r.position_at(t);
                [
                    pair.agent_i().position_at(t).distance(p) + noise.sample(rng),
                    pair.agent_j().position_at(t).distance(p) + noise.sample(rng),
                ]
            })
            .collect();
        let opts = LmOptions {
            max_iter: 500,
            ..LmOptions::default()
        };

        if let Self::Pairwise = self {
            let cp = pair.cp()?;
            let x0 = DVector::from_vec(vec![cp.t_m, cp.d_m, cp.v]);
            let rep = levenberg_marquardt(
                |th, r, j| pairwise_residuals(th, &plan.times, &pair_obs, r, j),
                x0,
                opts,
            );
            return Ok(CpParams {
                t_m: rep.x[0],
                d_m: rep.x[1].abs(),
                v: rep.x[2].abs(),
            });
        }

        let times = &plan.times;
        let rep = levenberg_marquardt(
            |a, r, j| {
                let n_ref = ref_obs.len() * 2;
                let rows = n_ref + pair_obs.len();
                *r = DVector::zeros(rows);
                *j = DMatrix::zeros(rows, 8);
                let s = PairState::from_alpha(a.as_slice());
                let mut row = 0;
                for (k, rf) in refs.iter().enumerate() {
                    for (n, &t) in times.iter().enumerate() {
                        let p = rf.position_at(t);
                        for (agent, st) in [s.agent_i(), s.agent_j()].iter().enumerate() {
                            let d = st.position_at(t) - p;
                            let dist = d.norm().max(1e-12);
                            r[row] = dist - ref_obs[k * times.len() + n][agent];
                            let g = d * (1.0 / dist);
                            j[(row, 2 * agent)] = g.x;
                            j[(row, 2 * agent + 1)] = g.y;
                            j[(row, 4 + 2 * agent)] = g.x * t;
                            j[(row, 5 + 2 * agent)] = g.y * t;
                            row += 1;
                        }
                    }
                }
                for (n, &t) in times.iter().enumerate().take(pair_obs.len()) {
                    let d = s.relative().position_at(t);
                    let dist = d.norm().max(1e-12);
                    r[row] = dist - pair_obs[n];
                    let g = d * (1.0 / dist);
                    for (c, val) in [(0, -g.x), (1, -g.y), (2, g.x), (3, g.y)] {
                        j[(row, c)] = val;
                        j[(row, c + 4)] = val * t;
                    }
                    row += 1;
                }
            },
            DVector::from_row_slice(&pair.alpha()),
            opts,
        );
        PairState::from_alpha(rep.x.as_slice()).cp()
    }
}

fn pairwise_residuals(
    th: &DVector<f64>,
    times: &[f64],
    obs: &[f64],
    r: &mut DVector<f64>,
    j: &mut DMatrix<f64>,
) {
    let (tm, dm, v) = (th[0], th[1], th[2]);
    *r = DVector::zeros(times.len());
    *j = DMatrix::zeros(times.len(), 3);
    for (n, &t) in times.iter().enumerate() {
        let u = tm - t;
        let d = (dm * dm + v * v * u * u).sqrt().max(1e-12);
        r[n] = d - obs[n];
        j[(n, 0)] = v * v * u / d;
        j[(n, 1)] = dm / d;
        j[(n, 2)] = v * u * u / d;
    }
}

/// Summary statistic applied across geometries in a bound sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    #[default]
    Median,
}

impl Statistic {
    pub fn apply(self, values: &mut [f64]) -> f64 {
        if values.is_empty() {
            return f64::NAN;
        }
        match self {
            Self::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Self::Median => {
                values.sort_by(f64::total_cmp);
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    0.5 * (values[n / 2 - 1] + values[n / 2])
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSweepConfig {
    pub sigmas: Vec<f64>,
    /// Random agent pairs.
    pub geometries: usize,
    /// Anchor/friend placements per pair.
    pub trials: usize,
    pub anchors: usize,
    pub friends: usize,
    pub duration: f64,
    pub rate: f64,
    pub statistic: Statistic,
    pub seed: u64,
}

impl Default for BoundSweepConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![0.05, 0.1, 0.2, 0.4],
            geometries: 150,
            trials: 100,
            anchors: 4,
            friends: 4,
            duration: 10.0,
            rate: 2.0,
            statistic: Statistic::Median,
            seed: 0,
        }
    }
}

impl BoundSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.sigmas.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config(
                "sigmas must be a non-empty list of positive values".into(),
            ));
        }
        if self.geometries == 0 || self.trials == 0 {
            return Err(Error::Config("geometries and trials must be >= 1".into()));
        }
        if !(self.duration >= 0.0) || !(self.rate > 0.0) {
            return Err(Error::Config("duration must be >= 0 and rate > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub sigma: f64,
    pub method: String,
    pub bound: BoundTriple,
}

pub const BOUNDS_CSV_HEADER: &str = "sigma,method,std_tm,std_dm,std_v";

pub fn bounds_csv(rows: &[BoundRow]) -> String {
    use crate::csvfmt::sig9;
    let mut out = format!("{BOUNDS_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            sig9(r.sigma),
            r.method,
            sig9(r.bound.std_tm),
            sig9(r.bound.std_dm),
            sig9(r.bound.std_v)
        ));
    }
    out
}

/// Random placements for one trial of the sweep: anchors on the field circle,
/// friends as random agents in the disk.
pub fn random_references(
    n_anchors: usize,
    n_friends: usize,
    seed: u64,
) -> (Vec<Vec2>, Vec<AgentState>) {
    let mut rng = seeded(seed);
    let anchors = (0..n_anchors)
        .map(|_| uniform_on_circle(&mut rng, FIELD_RADIUS))
        .collect();
    let friends = (0..n_friends)
        .map(|_| {
            let p = uniform_in_disk(&mut rng, FIELD_RADIUS);
            AgentState::new(p, uniform_velocity(&mut rng, MAX_SPEED))
        })
        .collect();
    (anchors, friends)
}

/// Bounds for each model over random geometries, summarized per sigma.
///
/// Rows come in sigma order, then pairwise, anchor, friend. Instances whose
/// geometry is degenerate are skipped.
pub fn bound_sweep(cfg: &BoundSweepConfig) -> Result<Vec<BoundRow>> {
    cfg.validate()?;
    let times = sample_times(cfg.duration, cfg.rate);
    let mut rows = Vec::new();
    for &sigma in &cfg.sigmas {
        let plan = SamplingPlan::new(times.clone(), sigma)?;
        let per_geometry: Vec<Vec<[BoundTriple; 3]>> = (0..cfg.geometries)
            .into_par_iter()
            .map(|g| {
                let geo_seed = derive_seed(cfg.seed, g as u64);
                let Ok(sc) = gen_random_geometry(2, 0, geo_seed) else {
                    return Vec::new();
                };
                let pair = PairState::new(sc.agents[0], sc.agents[1]);
                (0..cfg.trials)
                    .filter_map(|k| {
                        let (anchors, friends) = random_references(
                            cfg.anchors,
                            cfg.friends,
                            derive_seed(geo_seed, k as u64 + 1),
                        );
                        let p = MeasurementModel::Pairwise.bounds(&pair, &plan).ok()?;
                        let a = MeasurementModel::Anchor(anchors)
                            .bounds(&pair, &plan)
                            .ok()?;
                        let f = MeasurementModel::Friend(friends)
                            .bounds(&pair, &plan)
                            .ok()?;
                        Some([p, a, f])
                    })
                    .collect()
            })
            .collect();
        let all: Vec<[BoundTriple; 3]> = per_geometry.into_iter().flatten().collect();
        for (m, name) in ["pairwise", "anchor", "friend"].iter().enumerate() {
            let mut summary = [0.0; 3];
            for (p, s) in summary.iter_mut().enumerate() {
                let mut vals: Vec<f64> = all.iter().map(|b| b[m].as_array()[p]).collect();
                *s = cfg.statistic.apply(&mut vals);
            }
            rows.push(BoundRow {
                sigma,
                method: name.to_string(),
                bound: BoundTriple::from_array(summary),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncidenceConfig {
    pub speed_i: f64,
    pub speed_j: f64,
    /// Time at which both agents reach the crossing point.
    pub t_cross: f64,
    /// Lateral offset of agent `j`'s path at the crossing, meters.
    pub miss: f64,
    pub angles: usize,
    pub sigma: f64,
    pub duration: f64,
    pub rate: f64,
    pub anchors: Vec<Vec2>,
    pub friends: Vec<AgentState>,
}

impl Default for IncidenceConfig {
    fn default() -> Self {
        let ring = |r: f64, phase: f64| -> Vec<Vec2> {
            (0..4)
                .map(|k| Vec2::from_polar(r, phase + k as f64 * std::f64::consts::FRAC_PI_2))
                .collect()
        };
        Self {
            speed_i: 5.0,
            speed_j: 5.0,
            t_cross: 5.0,
            miss: 1.0,
            angles: 19,
            sigma: 0.1,
            duration: 1.0,
            rate: 18.0,
            anchors: ring(FIELD_RADIUS, std::f64::consts::FRAC_PI_4),
            friends: ring(25.0, 0.0)
                .into_iter()
                .map(|p| AgentState::new(p, Vec2::ZERO))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceRow {
    pub angle: f64,
    pub method: &'static str,
    pub bound: BoundTriple,
}

/// Bounds for a fixed two-agent encounter with the relative heading swept
/// over `(0, pi]`. Headings with zero relative speed are skipped.
pub fn incidence_sweep(cfg: &IncidenceConfig) -> Result<Vec<IncidenceRow>> {
    let plan = SamplingPlan::uniform(cfg.duration, cfg.rate, cfg.sigma)?;
    let mut rows = Vec::new();
    for k in 1..=cfg.angles {
        let angle = std::f64::consts::PI * k as f64 / cfg.angles as f64;
        let v_i = Vec2::new(cfg.speed_i, 0.0);
        let v_j = Vec2::from_polar(cfg.speed_j, angle);
        let cross = v_i * cfg.t_cross;
        let x_j = cross + v_j.perp() * (cfg.miss / cfg.speed_j.max(f64::MIN_POSITIVE))
            - v_j * cfg.t_cross;
        let pair = PairState {
            x_i: Vec2::ZERO,
            x_j,
            v_i,
            v_j,
        };
        if pair.relative().speed() < 1e-9 {
            continue;
        }
        for model in [
            MeasurementModel::Pairwise,
            MeasurementModel::Anchor(cfg.anchors.clone()),
            MeasurementModel::Friend(cfg.friends.clone()),
        ] {
            rows.push(IncidenceRow {
                angle,
                method: model.name(),
                bound: model.bounds(&pair, &plan)?,
            });
        }
    }
    Ok(rows)
}
