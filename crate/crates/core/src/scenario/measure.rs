use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{sample_times, CollisionEvent, Kinematics, NoiseModel, RangeDiffSample, RangeSample};
use crate::error::{Error, Result};
use crate::geom::{BodyGeometry, Vec2};

/// Where range-difference noise enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseInjection {
    /// Independent N(0, sigma^2) on each tag-to-anchor distance; a difference
    /// then has variance 2 sigma^2 and differences sharing the reference
    /// anchor are correlated.
    #[default]
    PerDistance,
    /// Independent N(0, sigma^2) on each reported difference.
    PerDifference,
}

fn normal(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"))
}

/// Pairwise ranges for every unordered pair at `0, 1/rate, ...`, ordered by
/// time then `(i, j)` with `i < j`.
pub fn synth_pairwise_ranges(
    traj: &impl Kinematics,
    noise: NoiseModel,
    rate: f64,
    rng: &mut impl Rng,
) -> Result<Vec<RangeSample>> {
    if !(rate > 0.0) {
        return Err(Error::Config("range rate must be positive".into()));
    }
    let n = traj.n_agents();
    let dist = normal(noise.sigma);
    let mut out = Vec::new();
    for t in sample_times(traj.duration(), rate) {
        let pos = traj.positions(t);
        for i in 0..n {
            for j in (i + 1)..n {
                let mut delta = pos[i].distance(pos[j]);
                if let Some(d) = &dist {
                    delta += d.sample(rng);
                }
                out.push(RangeSample { i, j, t, delta });
            }
        }
    }
    Ok(out)
}

/// Range differences `D_m - D_0` for every tag and every anchor `m >= 1`,
/// referenced to anchor 0.
pub fn synth_anchor_rangediffs(
    traj: &impl Kinematics,
    anchors: &[Vec2],
    noise: NoiseModel,
    injection: NoiseInjection,
    rate: f64,
    rng: &mut impl Rng,
) -> Result<Vec<RangeDiffSample>> {
    if anchors.len() < 2 {
        return Err(Error::Config(
            "range differences need at least two anchors".into(),
        ));
    }
    if !(rate > 0.0) {
        return Err(Error::Config("range rate must be positive".into()));
    }
    let dist = normal(noise.sigma);
    let mut out = Vec::new();
    let mut ranges = vec![0.0; anchors.len()];
    for t in sample_times(traj.duration(), rate) {
        for (tag, p) in traj.positions(t).into_iter().enumerate() {
            for (r, a) in ranges.iter_mut().zip(anchors) {
                *r = p.distance(*a);
                if let (Some(d), NoiseInjection::PerDistance) = (&dist, injection) {
                    *r += d.sample(rng);
                }
            }
            for m in 1..anchors.len() {
                let mut ddiff = ranges[m] - ranges[0];
                if let (Some(d), NoiseInjection::PerDifference) = (&dist, injection) {
                    ddiff += d.sample(rng);
                }
                out.push(RangeDiffSample {
                    tag,
                    anchor_a: m,
                    anchor_b: 0,
                    t,
                    ddiff,
                });
            }
        }
    }
    Ok(out)
}

/// Labels every contiguous run of samples in which a pair is within contact
/// distance. Sampling must be at least 60 Hz.
pub fn label_collisions(
    traj: &impl Kinematics,
    body: &BodyGeometry,
    rate: f64,
) -> Result<Vec<CollisionEvent>> {
    if rate < 60.0 {
        return Err(Error::Config(format!(
            "collision labeling needs >= 60 Hz sampling, got {rate}"
        )));
    }
    let n = traj.n_agents();
    let contact = body.contact_distance();
    let mut inside = vec![false; n * n];
    let mut events = Vec::new();
    for t in sample_times(traj.duration(), rate) {
        let pos = traj.positions(t);
        for i in 0..n {
            for j in (i + 1)..n {
                let now = pos[i].distance(pos[j]) <= contact;
                let was = &mut inside[i * n + j];
                if now && !*was {
                    events.push(CollisionEvent { i, j, t_start: t });
                }
                *was = now;
            }
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::AgentState;
    use crate::rng::seeded;
    use crate::scenario::LinearMotion;

    fn static_pair(d: f64, duration: f64) -> LinearMotion {
        LinearMotion {
            agents: vec![
                AgentState::new(Vec2::ZERO, Vec2::ZERO),
                AgentState::new(Vec2::new(d, 0.0), Vec2::ZERO),
            ],
            duration,
        }
    }

    #[test]
    fn noiseless_ranges_are_exact() {
        let m = LinearMotion {
            agents: vec![
                AgentState::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)),
                AgentState::new(Vec2::new(3.0, 4.0), Vec2::new(0.0, -1.0)),
                AgentState::new(Vec2::new(-2.0, 1.0), Vec2::new(0.5, 0.5)),
            ],
            duration: 2.0,
        };
        let s = synth_pairwise_ranges(&m, NoiseModel::noiseless(), 18.0, &mut seeded(1)).unwrap();
        assert_eq!(s.len(), 37 * 3);
        for r in &s {
            let truth = m.position(r.i, r.t).distance(m.position(r.j, r.t));
            assert_eq!(r.delta, truth);
        }
    }

    #[test]
    fn range_noise_std() {
        // 1e5 draws: the 99% interval of the sample std is about sigma * (1 +- 2.576 / sqrt(2n)).
        let m = static_pair(5.0, 100_000.0 / 18.0 - 0.5 / 18.0);
        let s =
            synth_pairwise_ranges(&m, NoiseModel::new(0.1).unwrap(), 18.0, &mut seeded(2)).unwrap();
        let n = s.len() as f64;
        assert!(n >= 1e5 - 1.0);
        let mean = s.iter().map(|r| r.delta).sum::<f64>() / n;
        let var = s.iter().map(|r| (r.delta - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        assert!((0.097..=0.103).contains(&sd), "sample std {sd}");

        // Whiteness: lag-1..3 autocorrelation within 4/sqrt(n).
        let resid: Vec<f64> = s.iter().map(|r| r.delta - 5.0).collect();
        for lag in 1..=3 {
            let c: f64 = resid.windows(lag + 1).map(|w| w[0] * w[lag]).sum::<f64>() / n;
            assert!((c / var).abs() < 4.0 / n.sqrt(), "lag {lag}");
        }
    }

    #[test]
    fn rangediff_closed_form() {
        let m = LinearMotion {
            agents: vec![AgentState::new(Vec2::new(10.0, 20.0), Vec2::ZERO)],
            duration: 0.0,
        };
        let anchors = [Vec2::new(50.0, 0.0), Vec2::new(0.0, 0.0)];
        let s = synth_anchor_rangediffs(
            &m,
            &anchors,
            NoiseModel::noiseless(),
            NoiseInjection::PerDistance,
            18.0,
            &mut seeded(0),
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        // D_a - D_b with a = (0,0), b = (50,0).
        let expected = 500f64.sqrt() - 2000f64.sqrt();
        assert!((s[0].ddiff - expected).abs() < 1e-12);
        assert!((s[0].ddiff + 22.360679775).abs() < 1e-6);

        let sym = LinearMotion {
            agents: vec![AgentState::new(Vec2::new(25.0, 13.0), Vec2::ZERO)],
            duration: 0.0,
        };
        let s = synth_anchor_rangediffs(
            &sym,
            &anchors,
            NoiseModel::noiseless(),
            NoiseInjection::PerDifference,
            18.0,
            &mut seeded(0),
        )
        .unwrap();
        assert_eq!(s[0].ddiff, 0.0);
    }

    #[test]
    fn rangediff_noise_variance_per_injection_point() {
        let m = LinearMotion {
            agents: vec![AgentState::new(Vec2::new(10.0, 20.0), Vec2::ZERO)],
            duration: 20_000.0 / 18.0,
        };
        let anchors = [Vec2::new(0.0, 0.0), Vec2::new(50.0, 0.0)];
        let truth = 2000f64.sqrt() - 500f64.sqrt();
        let sigma = 0.17;
        for (inj, factor) in [
            (NoiseInjection::PerDistance, 2.0),
            (NoiseInjection::PerDifference, 1.0),
        ] {
            let s = synth_anchor_rangediffs(
                &m,
                &anchors,
                NoiseModel::new(sigma).unwrap(),
                inj,
                18.0,
                &mut seeded(5),
            )
            .unwrap();
            let n = s.len() as f64;
            let var = s.iter().map(|r| (r.ddiff - truth).powi(2)).sum::<f64>() / n;
            let expected = factor * sigma * sigma;
            // Relative standard error of a variance estimate is sqrt(2/n) ~ 1%.
            assert!(
                (var / expected - 1.0).abs() < 0.05,
                "{inj:?}: {var} vs {expected}"
            );
        }
    }

    #[test]
    fn static_agents_never_collide() {
        let m = static_pair(1.0, 10.0);
        let body = BodyGeometry::new(0.17).unwrap();
        assert!(label_collisions(&m, &body, 60.0).unwrap().is_empty());
        assert!(label_collisions(&m, &body, 30.0).is_err());
    }
}
