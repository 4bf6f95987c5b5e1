//! Baseline CP-parameter estimators: pairwise quadratic regression, TDOA
//! localization with batch velocity regression, classical MDS and the MDS
//! second-difference velocity baseline.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{cp_params, AgentState, CpParams, Vec2};
use crate::scenario::{RangeDiffSample, RangeSample};

/// Least-squares fit `delta^2 = a0 + a1 t + a2 t^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFit {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl QuadFit {
    pub fn fit(times: &[f64], sq_ranges: &[f64]) -> Result<Self> {
        let mut distinct: Vec<f64> = times.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 3 || times.len() != sq_ranges.len() {
            return Err(Error::InsufficientData(
                "quadratic fit needs 3 distinct times".into(),
            ));
        }
        // Center and scale time for conditioning, then map back.
        let c = times.iter().sum::<f64>() / times.len() as f64;
        let s = times
            .iter()
            .map(|t| (t - c).abs())
            .fold(0.0, f64::max)
            .max(1e-12);
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for (&t, &y) in times.iter().zip(sq_ranges) {
            let u = (t - c) / s;
            let row = Vector3::new(1.0, u, u * u);
            ata += row * row.transpose();
            atb += row * y;
        }
        let b = ata
            .cholesky()
            .ok_or_else(|| Error::InsufficientData("singular quadratic design".into()))?
            .solve(&atb);
        let y_scale = sq_ranges.iter().fold(0.0f64, |a, y| a.max(y.abs()));
        // Curvature indistinguishable from round-off is treated as zero.
        let b2 = if b[2].abs() <= 1e-12 * y_scale {
            0.0
        } else {
            b[2]
        };
        let (b0, b1, b2) = (b[0], b[1] / s, b2 / (s * s));
        Ok(Self {
            a0: b0 - b1 * c + b2 * c * c,
            a1: b1 - 2.0 * b2 * c,
            a2: b2,
        })
    }

    /// CP parameters with `t_m` measured from `t_ref`.
    pub fn cp_params_at(&self, t_ref: f64) -> Result<CpParams> {
        if !(self.a2 > 0.0) {
            return Err(Error::NonApproaching(self.a2));
        }
        // Re-expand around t_ref to keep the vertex arithmetic local.
        let a1 = self.a1 + 2.0 * self.a2 * t_ref;
        let a0 = self.a0 + self.a1 * t_ref + self.a2 * t_ref * t_ref;
        Ok(CpParams {
            t_m: -a1 / (2.0 * self.a2),
            d_m: (a0 - a1 * a1 / (4.0 * self.a2)).max(0.0).sqrt(),
            v: self.a2.sqrt(),
        })
    }
}

/// Quadratic regression on squared ranges of one pair.
pub fn pairwise_fit(samples: &[RangeSample]) -> Result<CpParams> {
    pairwise_fit_at(samples, 0.0)
}

/// As [`pairwise_fit`], with `t_m` measured from `t_ref`.
pub fn pairwise_fit_at(samples: &[RangeSample], t_ref: f64) -> Result<CpParams> {
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let sq: Vec<f64> = samples.iter().map(|s| s.delta * s.delta).collect();
    QuadFit::fit(&times, &sq)?.cp_params_at(t_ref)
}

/// Time-indexed relative-frame or absolute positions of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub node: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
}

impl Track {
    /// Builds a track and fills velocities by regression over the trailing
    /// `window` seconds (the first sample reuses the second's velocity).
    pub fn new(node: usize, times: Vec<f64>, positions: Vec<Vec2>, window: f64) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InsufficientData("track times must increase".into()));
        }
        let mut velocities = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            let lo = times[..=k].partition_point(|&t| t < times[k] - window - 1e-9);
            let v = velocity_regression(&times[lo..=k], &positions[lo..=k]).unwrap_or(Vec2::ZERO);
            velocities.push(v);
        }
        if velocities.len() > 1 {
            velocities[0] = velocities[1];
        }
        Ok(Self {
            node,
            times,
            positions,
            velocities,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Regression line of the whole track evaluated at `t_ref`.
    pub fn fitted_state(&self, t_ref: f64) -> Result<AgentState> {
        let (p, v) = linear_fit(&self.times, &self.positions, t_ref)?;
        Ok(AgentState::new(p, v))
    }
}

/// Per-axis least-squares line through `(times, positions)`; returns the
/// fitted position at `t_ref` and the slope.
pub fn linear_fit(times: &[f64], positions: &[Vec2], t_ref: f64) -> Result<(Vec2, Vec2)> {
    if times.len() < 2 || times.len() != positions.len() {
        return Err(Error::InsufficientData("linear fit needs 2 epochs".into()));
    }
    let n = times.len() as f64;
    let t_bar = times.iter().sum::<f64>() / n;
    let p_bar = positions.iter().fold(Vec2::ZERO, |a, &p| a + p) * (1.0 / n);
    let stt: f64 = times.iter().map(|t| (t - t_bar) * (t - t_bar)).sum();
    if !(stt > 0.0) {
        return Err(Error::InsufficientData(
            "linear fit needs 2 distinct times".into(),
        ));
    }
    let stp = times
        .iter()
        .zip(positions)
        .fold(Vec2::ZERO, |a, (&t, &p)| a + (p - p_bar) * (t - t_bar));
    let slope = stp * (1.0 / stt);
    Ok((p_bar + slope * (t_ref - t_bar), slope))
}

/// Least-squares velocity of a position sequence.
pub fn velocity_regression(times: &[f64], positions: &[Vec2]) -> Result<Vec2> {
    linear_fit(times, positions, 0.0).map(|(_, v)| v)
}

/// Anchor coordinates; anchor 0 is the TDOA reference.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    anchors: Vec<Vec2>,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Vec2>) -> Result<Self> {
        if anchors.len() < 3 {
            return Err(Error::SingularGeometry);
        }
        let a0 = anchors[0];
        let scale = anchors.iter().map(|a| a.distance(a0)).fold(0.0, f64::max);
        let spans = anchors.iter().skip(1).any(|&a| {
            anchors
                .iter()
                .skip(1)
                .any(|&b| (a - a0).cross(b - a0).abs() > 1e-9 * scale * scale)
        });
        if !spans {
            return Err(Error::SingularGeometry);
        }
        Ok(Self { anchors })
    }

    pub fn coords(&self) -> &[Vec2] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Sum of squared range-difference residuals at `x`.
pub fn tdoa_residual(x: Vec2, ddiff: &[f64], anchors: &AnchorSet) -> f64 {
    let a = anchors.coords();
    let d1 = x.distance(a[0]);
    ddiff
        .iter()
        .zip(&a[1..])
        .map(|(&dm, &am)| {
            let r = x.distance(am) - d1 - dm;
            r * r
        })
        .sum()
}

/// Tag position from range differences `ddiff[m-1] = D_m - D_0`, m = 1..M-1.
///
/// Linearizing `D_m^2 - D_0^2` gives `2 A x = b + 2 D_0 c`, so the position
/// is affine in `D_0`; the constraint `|x - a_0| = D_0` closes it with a
/// quadratic.
pub fn tdoa_localize(ddiff: &[f64], anchors: &AnchorSet) -> Result<Vec2> {
    let a = anchors.coords();
    if ddiff.len() != a.len() - 1 {
        return Err(Error::InsufficientData(format!(
            "expected {} range differences, got {}",
            a.len() - 1,
            ddiff.len()
        )));
    }
    let a0 = a[0];
    let mut ata = Matrix2::zeros();
    let mut atb = nalgebra::Vector2::zeros();
    let mut atc = nalgebra::Vector2::zeros();
    for (&dm, &am) in ddiff.iter().zip(&a[1..]) {
        let row = nalgebra::Vector2::new(am.x - a0.x, am.y - a0.y);
        let b = am.norm_sq() - a0.norm_sq() - dm * dm;
        ata += row * row.transpose();
        atb += row * b;
        atc += row * (-dm);
    }
    let inv = ata.try_inverse().ok_or(Error::SingularGeometry)?;
    let u = inv * atb * 0.5;
    let w = inv * atc;
    let (u, w) = (Vec2::new(u[0], u[1]), Vec2::new(w[0], w[1]));
    let e = u - a0;
    let qa = w.norm_sq() - 1.0;
    let qb = 2.0 * e.dot(w);
    let qc = e.norm_sq();

    let mut roots: Vec<f64> = Vec::with_capacity(2);
    if qa.abs() < 1e-12 * (1.0 + w.norm_sq()) {
        if qb != 0.0 {
            roots.push(-qc / qb);
        } else if qc == 0.0 {
            roots.push(0.0);
        }
    } else {
        let mut disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 && disc > -1e-9 * (qb * qb + (4.0 * qa * qc).abs()) {
            disc = 0.0;
        }
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // Numerically stable pair of roots.
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                roots.push(q / qa);
                roots.push(qc / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    let scale = qc.sqrt().max(1.0);
    let mut feasible: Vec<f64> = roots
        .into_iter()
        .filter(|r| r.is_finite())
        .map(|r| if r < 0.0 && r > -1e-9 * scale { 0.0 } else { r })
        .filter(|&r| r >= 0.0)
        .collect();
    feasible.sort_by(f64::total_cmp);
    let point = |d: f64| u + w * d;
    match feasible.as_slice() {
        [] => Err(Error::NoFeasibleRoot),
        [r] => Ok(point(*r)),
        [small, large, ..] => {
            let rs = tdoa_residual(point(*small), ddiff, anchors);
            let rl = tdoa_residual(point(*large), ddiff, anchors);
            Ok(if rs > 1.1 * rl {
                point(*large)
            } else {
                point(*small)
            })
        }
    }
}

/// Localizes every tag at every epoch; epochs without a feasible root are
/// dropped. Differences must be referenced to anchor 0.
pub fn tdoa_tracks(
    diffs: &[RangeDiffSample],
    anchors: &AnchorSet,
    n_tags: usize,
    window: f64,
) -> Result<Vec<Track>> {
    let m = anchors.len();
    let mut tracks = Vec::with_capacity(n_tags);
    for tag in 0..n_tags {
        let mut rows: Vec<&RangeDiffSample> = diffs.iter().filter(|d| d.tag == tag).collect();
        rows.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.anchor_a.cmp(&b.anchor_a)));
        let mut times = Vec::new();
        let mut positions = Vec::new();
        for epoch in rows.chunk_by(|a, b| a.t == b.t) {
            let mut dd = vec![f64::NAN; m - 1];
            for d in epoch {
                if d.anchor_b == 0 && d.anchor_a >= 1 && d.anchor_a < m {
                    dd[d.anchor_a - 1] = d.ddiff;
                }
            }
            if dd.iter().any(|v| v.is_nan()) {
                continue;
            }
            match tdoa_localize(&dd, anchors) {
                Ok(p) => {
                    times.push(epoch[0].t);
                    positions.push(p);
                }
                Err(Error::NoFeasibleRoot) => {}
                Err(e) => return Err(e),
            }
        }
        tracks.push(Track::new(tag, times, positions, window)?);
    }
    Ok(tracks)
}

/// CP estimate for one pair; `None` when the estimator failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCp {
    pub i: usize,
    pub j: usize,
    pub cp: Option<CpParams>,
}

/// CP parameters of every pair from the regression line of each track,
/// evaluated at `t_ref`.
pub fn cp_from_tracks(tracks: &[Track], t_ref: f64) -> Vec<PairCp> {
    let states: Vec<Option<AgentState>> =
        tracks.iter().map(|t| t.fitted_state(t_ref).ok()).collect();
    let mut out = Vec::new();
    for i in 0..tracks.len() {
        for j in (i + 1)..tracks.len() {
            let cp = match (states[i], states[j]) {
                (Some(a), Some(b)) => cp_params(&a.relative_to(&b)).ok(),
                _ => None,
            };
            out.push(PairCp {
                i: tracks[i].node,
                j: tracks[j].node,
                cp,
            });
        }
    }
    out
}

/// Classical MDS embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    pub coords: Vec<Vec2>,
    /// Eigenvalues of the double-centered matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// False when the third eigenvalue exceeds `1e-6` of the first.
    pub realizable: bool,
}

/// Two-dimensional classical MDS of a symmetric distance matrix.
pub fn classical_mds(dist: &DMatrix<f64>) -> Result<MdsResult> {
    let n = dist.nrows();
    if n == 0 || dist.ncols() != n {
        return Err(Error::InsufficientData(
            "distance matrix must be square".into(),
        ));
    }
    if dist.iter().any(|d| !d.is_finite()) {
        return Err(Error::InsufficientData(
            "distance matrix has missing entries".into(),
        ));
    }
    let sq = dist.map(|d| d * d);
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let total = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        let s = 0.5 * (sq[(i, j)] + sq[(j, i)]);
        -0.5 * (s - row_mean[i] - row_mean[j] + total)
    });
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let coord = |axis: usize, i: usize| -> f64 {
        order.get(axis).map_or(0.0, |&k| {
            let l = eig.eigenvalues[k].max(0.0).sqrt();
            // Fix the eigenvector sign so output does not depend on the solver.
            let col = eig.eigenvectors.column(k);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            l * col[i] * pivot.signum()
        })
    };
    let coords = (0..n)
        .map(|i| Vec2::new(coord(0, i), coord(1, i)))
        .collect();
    let realizable = eigenvalues
        .get(2)
        .is_none_or(|&l3| l3 <= 1e-6 * eigenvalues[0].max(0.0));
    Ok(MdsResult {
        coords,
        eigenvalues,
        realizable,
    })
}

/// Rigid map `p -> R p + t` with `R` orthogonal (reflections allowed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix2<f64>,
    pub translation: Vec2,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix2::identity(),
            translation: Vec2::ZERO,
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        let q = self.rotation * nalgebra::Vector2::new(p.x, p.y);
        Vec2::new(q[0], q[1]) + self.translation
    }

    pub fn apply_vector(&self, v: Vec2) -> Vec2 {
        let q = self.rotation * nalgebra::Vector2::new(v.x, v.y);
        Vec2::new(q[0], q[1])
    }
}

/// Orthogonal Procrustes: the rigid map (with reflection when
/// `allow_reflection`) taking `source` closest to `target` in least squares.
pub fn procrustes(source: &[Vec2], target: &[Vec2], allow_reflection: bool) -> RigidTransform {
    let n = source.len().min(target.len());
    if n == 0 {
        return RigidTransform::identity();
    }
    let mean = |pts: &[Vec2]| pts[..n].iter().fold(Vec2::ZERO, |a, &p| a + p) * (1.0 / n as f64);
    let (cs, ct) = (mean(source), mean(target));
    let mut h = Matrix2::zeros();
    for k in 0..n {
        let s = source[k] - cs;
        let t = target[k] - ct;
        h += nalgebra::Vector2::new(t.x, t.y) * nalgebra::RowVector2::new(s.x, s.y);
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut r = u * vt;
    if !allow_reflection && r.determinant() < 0.0 {
        let d = Matrix2::new(1.0, 0.0, 0.0, -1.0);
        r = u * d * vt;
    }
    let rc = r * nalgebra::Vector2::new(cs.x, cs.y);
    RigidTransform {
        rotation: r,
        translation: ct - Vec2::new(rc[0], rc[1]),
    }
}

/// Full pairwise range matrices per epoch; missing pairs are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceFrames {
    pub times: Vec<f64>,
    pub n_nodes: usize,
    pub frames: Vec<DMatrix<f64>>,
}

impl DistanceFrames {
    /// Groups samples by exact timestamp.
    pub fn from_samples(samples: &[RangeSample], n_nodes: usize) -> Result<Self> {
        let mut sorted: Vec<&RangeSample> = samples.iter().collect();
        sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut times = Vec::new();
        let mut frames = Vec::new();
        for epoch in sorted.chunk_by(|a, b| a.t == b.t) {
            let mut m = DMatrix::from_element(n_nodes, n_nodes, f64::NAN);
            for k in 0..n_nodes {
                m[(k, k)] = 0.0;
            }
            for s in epoch {
                if s.i >= n_nodes || s.j >= n_nodes || s.i == s.j {
                    return Err(Error::InsufficientData(format!(
                        "bad pair ({}, {})",
                        s.i, s.j
                    )));
                }
                m[(s.i, s.j)] = s.delta;
                m[(s.j, s.i)] = s.delta;
            }
            times.push(epoch[0].t);
            frames.push(m);
        }
        Ok(Self {
            times,
            n_nodes,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Epochs `range` as a new set of frames.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            times: self.times[range.clone()].to_vec(),
            n_nodes: self.n_nodes,
            frames: self.frames[range].to_vec(),
        }
    }

    pub fn pair_series(&self, i: usize, j: usize) -> Vec<RangeSample> {
        self.times
            .iter()
            .zip(&self.frames)
            .filter(|(_, f)| f[(i, j)].is_finite())
            .map(|(&t, f)| RangeSample {
                i,
                j,
                t,
                delta: f[(i, j)],
            })
            .collect()
    }
}

/// Output of the MDS baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MdsBaseline {
    pub tracks: Vec<Track>,
    pub pairs: Vec<PairCp>,
    /// Relative speed from smoothed second differences of squared ranges.
    pub speeds: Vec<f64>,
}

/// Points in the local stencil of [`second_difference_speed`].
const STENCIL: usize = 5;

/// Relative speed from smoothed second central differences of squared
/// ranges, averaged over the window.
///
/// Each stencil is a local least-squares quadratic over five consecutive
/// epochs (the 5-point Savitzky-Golay second derivative on a uniform grid);
/// with fewer epochs one stencil spans them all. Exact whenever the squared
/// range is quadratic in time.
pub fn second_difference_speed(times: &[f64], deltas: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InsufficientData(
            "second difference needs 3 epochs".into(),
        ));
    }
    let sq: Vec<f64> = deltas.iter().map(|d| d * d).collect();
    let span = STENCIL.min(times.len());
    let d2 = times
        .windows(span)
        .zip(sq.windows(span))
        .map(|(t, s)| QuadFit::fit(t, s).map(|q| 2.0 * q.a2))
        .collect::<Result<Vec<_>>>()?;
    // d2 estimates the second derivative of the squared range, 2 v^2.
    let v2 = d2.iter().sum::<f64>() / d2.len() as f64 / 2.0;
    Ok(v2.max(0.0).sqrt())
}

/// Squared range and its first and second time derivatives at `t_ref`,
/// smoothed over the samples by a least-squares quadratic (a Savitzky-Golay
/// derivative spanning the whole window). Exact when the squared range is
/// quadratic in time.
pub fn squared_range_derivatives(
    times: &[f64],
    deltas: &[f64],
    t_ref: f64,
) -> Result<(f64, f64, f64)> {
    let sq: Vec<f64> = deltas.iter().map(|d| d * d).collect();
    let q = QuadFit::fit(times, &sq)?;
    Ok((
        q.a0 + q.a1 * t_ref + q.a2 * t_ref * t_ref,
        q.a1 + 2.0 * q.a2 * t_ref,
        2.0 * q.a2,
    ))
}

/// Rotation or reflection `Q` minimizing `sum (p_k . Q q_k - g_k)^2`.
fn align_velocity_frame(p: &[Vec2], q: &[Vec2], g: &[f64]) -> Matrix2<f64> {
    let candidates = [Matrix2::identity(), Matrix2::new(1.0, 0.0, 0.0, -1.0)];
    candidates
        .iter()
        .map(|flip| {
            // p . R(theta) F q = c (p . Fq) + s (p x Fq), linear in (c, s).
            let mut ata = Matrix2::zeros();
            let mut atb = nalgebra::Vector2::zeros();
            for ((&pk, &qk), &gk) in p.iter().zip(q).zip(g) {
                let fq = flip * nalgebra::Vector2::new(qk.x, qk.y);
                let fq = Vec2::new(fq[0], fq[1]);
                let row = nalgebra::Vector2::new(pk.dot(fq), fq.cross(pk));
                ata += row * row.transpose();
                atb += row * gk;
            }
            let cs = ata
                .try_inverse()
                .map_or(nalgebra::Vector2::new(1.0, 0.0), |inv| inv * atb);
            let theta = cs[1].atan2(cs[0]);
            let (sn, c) = theta.sin_cos();
            let q_mat = Matrix2::new(c, -sn, sn, c) * flip;
            let cost: f64 = p
                .iter()
                .zip(q)
                .zip(g)
                .map(|((&pk, &qk), &gk)| {
                    let r = q_mat * nalgebra::Vector2::new(qk.x, qk.y);
                    let r = pk.dot(Vec2::new(r[0], r[1])) - gk;
                    r * r
                })
                .sum();
            (q_mat, cost)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(m, _)| m)
        .unwrap_or_else(Matrix2::identity)
}

/// MDS baseline: per-epoch MDS aligned epoch to epoch by Procrustes for the
/// tracks; CP parameters from an MDS of the relative speeds (averaged second
/// differences of squared ranges) whose frame is fixed to the position MDS at
/// `t_ref` through the smoothed first derivatives.
pub fn mds_velocity_baseline(
    frames: &DistanceFrames,
    t_ref: f64,
    window: f64,
) -> Result<MdsBaseline> {
    if frames.len() < 3 {
        return Err(Error::InsufficientData(
            "MDS baseline needs 3 epochs".into(),
        ));
    }
    let n = frames.n_nodes;
    if n < 3 {
        return Err(Error::InsufficientData("MDS baseline needs 3 nodes".into()));
    }
    let mut aligned: Vec<Vec<Vec2>> = Vec::with_capacity(frames.len());
    for f in &frames.frames {
        let mut coords = classical_mds(f)?.coords;
        if let Some(prev) = aligned.last() {
            let tf = procrustes(&coords, prev, true);
            coords = coords.into_iter().map(|p| tf.apply(p)).collect();
        }
        aligned.push(coords);
    }
    let tracks = (0..n)
        .map(|k| {
            let pos = aligned.iter().map(|c| c[k]).collect();
            Track::new(k, frames.times.clone(), pos, window)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pos_edm = DMatrix::zeros(n, n);
    let mut vel_edm = DMatrix::zeros(n, n);
    let mut slopes = DMatrix::zeros(n, n);
    let mut speeds = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let series: Vec<RangeSample> = frames
                .pair_series(i, j)
                .into_iter()
                .filter(|s| (s.t - t_ref).abs() <= window)
                .collect();
            let ts: Vec<f64> = series.iter().map(|s| s.t).collect();
            let ds: Vec<f64> = series.iter().map(|s| s.delta).collect();
            let (s0, d1, _) = squared_range_derivatives(&ts, &ds, t_ref)?;
            let speed = second_difference_speed(&ts, &ds)?;
            speeds.push(speed);
            pos_edm[(i, j)] = s0.max(0.0).sqrt();
            pos_edm[(j, i)] = pos_edm[(i, j)];
            vel_edm[(i, j)] = speed;
            vel_edm[(j, i)] = speed;
            slopes[(i, j)] = 0.5 * d1;
        }
    }
    let x = classical_mds(&pos_edm)?.coords;
    let u = classical_mds(&vel_edm)?.coords;
    let idx: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let p: Vec<Vec2> = idx.iter().map(|&(i, j)| x[j] - x[i]).collect();
    let q: Vec<Vec2> = idx.iter().map(|&(i, j)| u[j] - u[i]).collect();
    let g: Vec<f64> = idx.iter().map(|&(i, j)| slopes[(i, j)]).collect();
    let qm = align_velocity_frame(&p, &q, &g);
    let pairs = idx
        .iter()
        .zip(p.iter().zip(&q))
        .map(|(&(i, j), (&pk, &qk))| {
            let r = qm * nalgebra::Vector2::new(qk.x, qk.y);
            let cp = cp_params(&AgentState::new(pk, Vec2::new(r[0], r[1]))).ok();
            PairCp { i, j, cp }
        })
        .collect();
    Ok(MdsBaseline {
        tracks,
        pairs,
        speeds,
    })
}
