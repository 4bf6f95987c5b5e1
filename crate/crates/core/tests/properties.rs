use nalgebra::DMatrix;
use proptest::prelude::*;
use uwb_collide::crlb::{fim_anchor, fim_friend, fim_pairwise, PairState, SamplingPlan};
use uwb_collide::estimators::{
    classical_mds, pairwise_fit, tdoa_localize, tdoa_residual, AnchorSet, DistanceFrames,
};
use uwb_collide::fact::{
    fact_optimize, fact_optimize_distributed, fact_sweep, mds_init, FactConfig, FactInit, FactState,
};
use uwb_collide::harness::{
    pareto_frontier, roc_curve, DetectorConfig, PairPrediction, RocGrid, RocPoint,
};
use uwb_collide::protocol::{
    extract_range_differences, extract_ranges, run_cycles, ProtocolConfig, ProtocolMode,
};
use uwb_collide::rng::seeded;
use uwb_collide::scenario::{
    gen_bounce_walk, synth_pairwise_ranges, BounceConfig, CollisionEvent, Kinematics, LinearMotion,
    NoiseModel, RangeSample,
};
use uwb_collide::{collision_time, cp_params, AgentState, BodyGeometry, CpParams, Vec2};

fn vec2(r: f64) -> impl Strategy<Value = Vec2> {
    (-r..r, -r..r).prop_map(|(x, y)| Vec2::new(x, y))
}

fn agent(pos: f64, vel: f64) -> impl Strategy<Value = AgentState> {
    (vec2(pos), vec2(vel)).prop_map(|(p, v)| AgentState::new(p, v))
}

fn motion(
    n: std::ops::RangeInclusive<usize>,
    duration: f64,
) -> impl Strategy<Value = LinearMotion> {
    prop::collection::vec(agent(10.0, 2.0), n)
        .prop_map(move |agents| LinearMotion { agents, duration })
}

fn frames(m: &LinearMotion, sigma: f64, rate: f64, seed: u64) -> DistanceFrames {
    let s =
        synth_pairwise_ranges(m, NoiseModel::new(sigma).unwrap(), rate, &mut seeded(seed)).unwrap();
    DistanceFrames::from_samples(&s, m.agents.len()).unwrap()
}

/// Whether the formation stays away from collinear over the whole motion.
/// Ranges cannot tell a formation from its mirror image, so a formation that
/// passes through collinear leaves a mirrored local minimum behind.
fn keeps_chirality(m: &LinearMotion) -> bool {
    (0..=200).all(|k| {
        let t = m.duration * k as f64 / 200.0;
        let pts: Vec<Vec2> = m.agents.iter().map(|a| a.position_at(t)).collect();
        let c = pts.iter().fold(Vec2::ZERO, |a, &p| a + p) * (1.0 / pts.len() as f64);
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in &pts {
            let d = *p - c;
            sxx += d.x * d.x;
            sxy += d.x * d.y;
            syy += d.y * d.y;
        }
        let mean = 0.5 * (sxx + syy);
        let spread = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
        mean - spread >= 1e-2 * (mean + spread)
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cp_params_rigid_motion_invariant(a in agent(50.0, 10.0), b in agent(50.0, 10.0),
                                        angle in 0.0..std::f64::consts::TAU, shift in vec2(100.0)) {
        let rel = a.relative_to(&b);
        prop_assume!(rel.velocity.norm() > 0.1);
        let moved = |s: &AgentState| AgentState::new(s.position.rotate(angle) + shift, s.velocity.rotate(angle));
        let p = cp_params(&rel).unwrap();
        let q = cp_params(&moved(&a).relative_to(&moved(&b))).unwrap();
        prop_assert!(close(p.d_m, q.d_m, 1e-12) && close(p.t_m, q.t_m, 1e-12) && close(p.v, q.v, 1e-12),
                     "{p:?} vs {q:?}");
    }

    #[test]
    fn cp_params_consistent_with_distance(rel in agent(50.0, 10.0), t in -20.0..20.0f64) {
        prop_assume!(rel.velocity.norm() > 0.1);
        let cp = cp_params(&rel).unwrap();
        prop_assert!(cp.d_m >= 0.0 && cp.v >= 0.0 && cp.t_m.is_finite());
        let d_tm = rel.position_at(cp.t_m).norm();
        prop_assert!(close(d_tm * d_tm, cp.d_m * cp.d_m, 1e-9));
        let d_t = rel.position_at(t).norm();
        let model = cp.d_m * cp.d_m + cp.v * cp.v * (cp.t_m - t).powi(2);
        prop_assert!(close(d_t * d_t, model, 1e-9), "{} vs {model}", d_t * d_t);
    }

    #[test]
    fn collision_time_non_increasing_in_radius(d_m in 0.0..0.5f64, t_m in 0.1..20.0f64, v in 0.1..5.0f64,
                                               r1 in 0.3..1.0f64, dr in 0.0..1.0f64) {
        let cp = CpParams { d_m, t_m, v };
        let t1 = collision_time(&cp, &BodyGeometry::new(r1).unwrap()).unwrap();
        let t2 = collision_time(&cp, &BodyGeometry::new(r1 + dr).unwrap()).unwrap();
        prop_assert!(t2 <= t1);
    }

    #[test]
    fn scenario_streams_are_deterministic(seed in any::<u64>(), sigma in 0.0..0.5f64) {
        let cfg = BounceConfig { duration: 5.0, ..Default::default() };
        let a = gen_bounce_walk(&cfg, seed).unwrap();
        let b = gen_bounce_walk(&cfg, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let noise = NoiseModel::new(sigma).unwrap();
        let ra = synth_pairwise_ranges(&a, noise, 18.0, &mut seeded(seed)).unwrap();
        let rb = synth_pairwise_ranges(&b, noise, 18.0, &mut seeded(seed)).unwrap();
        let bits = |r: &[RangeSample]| r.iter().map(|s| s.delta.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&ra), bits(&rb));
    }

    #[test]
    fn range_noise_is_white(seed in any::<u64>()) {
        let m = LinearMotion { agents: vec![AgentState::new(Vec2::ZERO, Vec2::new(1.0, 0.5)),
                                            AgentState::new(Vec2::new(5.0, 0.0), Vec2::ZERO)], duration: 100.0 };
        let s = synth_pairwise_ranges(&m, NoiseModel::new(0.1).unwrap(), 18.0, &mut seeded(seed)).unwrap();
        let res: Vec<f64> = s.iter().map(|r| r.delta - m.state(0, r.t).position.distance(m.state(1, r.t).position)).collect();
        let n = res.len() as f64;
        let mean = res.iter().sum::<f64>() / n;
        let var = res.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        for lag in 1..4 {
            let c = res.iter().zip(&res[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / n / var;
            prop_assert!(c.abs() <= 4.0 / n.sqrt(), "lag {lag}: {c}");
        }
    }

    #[test]
    fn protocol_offsets_cancel_bitwise(pos in prop::collection::vec(vec2(50.0), 4),
                                       offsets in prop::collection::vec(-1e-2..1e-2f64, 4 + 3 + 1),
                                       tdoa in any::<bool>()) {
        let m = LinearMotion { agents: pos.iter().map(|&p| AgentState::new(p, Vec2::ZERO)).collect(), duration: 10.0 };
        let mut cfg = ProtocolConfig { n_nodes: 4, cycles: 4, timestamp_noise_std: 0.0, residual_freq_ppm: 0.0,
                                       ..Default::default() };
        if tdoa {
            cfg.mode = ProtocolMode::Tdoa;
            cfg.anchors = vec![Vec2::new(-60.0, -60.0), Vec2::new(60.0, -60.0), Vec2::new(0.0, 70.0)];
            cfg.synch = Some(Vec2::new(1.0, 2.0));
        }
        let total = cfg.total_nodes();
        let zero = ProtocolConfig { explicit_offsets: Some(vec![0.0; total]), ..cfg.clone() };
        let shifted = ProtocolConfig { explicit_offsets: Some(offsets[..total].to_vec()), ..cfg.clone() };
        let out = |c: &ProtocolConfig| {
            let log = run_cycles(c, &m).unwrap();
            let per_cycle: Vec<usize> = (0..c.cycles).map(|n| log.packets_in_cycle(n)).collect();
            let vals: Vec<u64> = if tdoa {
                extract_range_differences(&log, c).unwrap().iter().map(|d| d.ddiff.to_bits()).collect()
            } else {
                extract_ranges(&log).unwrap().iter().map(|r| r.delta.to_bits()).collect()
            };
            (per_cycle, vals)
        };
        let (tx, a) = out(&zero);
        let (_, b) = out(&shifted);
        prop_assert_eq!(a, b);
        let expected = if tdoa { 5 } else { 4 };
        prop_assert!(tx.iter().all(|&k| k == expected), "{tx:?}");
    }

    #[test]
    fn protocol_static_recovery(pos in prop::collection::vec(vec2(50.0), 2..7)) {
        let n = pos.len();
        let m = LinearMotion { agents: pos.iter().map(|&p| AgentState::new(p, Vec2::ZERO)).collect(), duration: 10.0 };
        let cfg = ProtocolConfig { n_nodes: n, cycles: 3, timestamp_noise_std: 0.0, residual_freq_ppm: 0.0,
                                   ..Default::default() };
        let r = extract_ranges(&run_cycles(&cfg, &m).unwrap()).unwrap();
        prop_assert_eq!(r.len(), 3 * n * (n - 1) / 2);
        for s in &r {
            prop_assert!((s.delta - pos[s.i].distance(pos[s.j])).abs() <= 1e-9);
        }
    }

    #[test]
    fn fims_are_symmetric_psd(a in agent(50.0, 10.0), b in agent(50.0, 10.0),
                              anchors in prop::collection::vec(vec2(50.0), 3..6),
                              friends in prop::collection::vec(agent(50.0, 10.0), 2..5)) {
        let pair = PairState::new(a, b);
        let plan = SamplingPlan::uniform(10.0, 2.0, 0.1).unwrap();
        if let Ok(cp) = pair.cp() {
            if let Ok(f) = fim_pairwise(&cp, &plan) {
                prop_assert!(f.is_symmetric_psd());
            }
        }
        prop_assert!(fim_anchor(&pair, &anchors, &plan).unwrap().is_symmetric_psd());
        if let Ok(f) = fim_friend(&pair, &friends, &plan) {
            prop_assert!(f.is_symmetric_psd());
        }
    }

    #[test]
    fn pairwise_fit_exact_on_noiseless_quadratic(rel in agent(50.0, 10.0)) {
        prop_assume!(rel.velocity.norm() > 0.5);
        let samples: Vec<RangeSample> = (0..21).map(|k| {
            let t = k as f64 * 0.5;
            RangeSample { i: 0, j: 1, t, delta: rel.position_at(t).norm() }
        }).collect();
        let got = pairwise_fit(&samples).unwrap();
        let want = cp_params(&rel).unwrap();
        prop_assert!(close(got.t_m, want.t_m, 1e-9) && close(got.d_m, want.d_m, 1e-7) && close(got.v, want.v, 1e-9),
                     "{got:?} vs {want:?}");
    }

    #[test]
    fn tdoa_noiseless_residual_inside_hull(angle in 0.0..std::f64::consts::TAU, frac in 0.0..0.9f64,
                                           m in 3usize..7) {
        let anchors: Vec<Vec2> = (0..m).map(|k| Vec2::from_polar(50.0, std::f64::consts::TAU * k as f64 / m as f64)).collect();
        // Inscribed-circle radius of the regular polygon keeps the tag inside the hull.
        let inner = 50.0 * (std::f64::consts::PI / m as f64).cos();
        let tag = Vec2::from_polar(frac * inner, angle);
        let set = AnchorSet::new(anchors.clone()).unwrap();
        let d: Vec<f64> = anchors.iter().map(|a| tag.distance(*a)).collect();
        let ddiff: Vec<f64> = d[1..].iter().map(|x| x - d[0]).collect();
        let x = tdoa_localize(&ddiff, &set).unwrap();
        prop_assert!(tdoa_residual(x, &ddiff, &set) <= 1e-9);
        prop_assert!(x.distance(tag) <= 1e-6);
    }

    #[test]
    fn mds_is_frame_free(pts in prop::collection::vec(vec2(20.0), 3..8), angle in 0.0..std::f64::consts::TAU,
                         shift in vec2(50.0)) {
        let n = pts.len();
        let moved: Vec<Vec2> = pts.iter().map(|p| p.rotate(angle) + shift).collect();
        let dist = |p: &[Vec2]| DMatrix::from_fn(n, n, |i, j| p[i].distance(p[j]));
        let a = classical_mds(&dist(&pts)).unwrap().coords;
        let b = classical_mds(&dist(&moved)).unwrap().coords;
        let (da, db) = (dist(&a), dist(&b));
        prop_assert!((da - db).abs().max() <= 1e-8);
    }

    #[test]
    fn fact_sweeps_descend(m in motion(3..=6, 1.0), sigma in 0.0..0.2f64, seed in any::<u64>(),
                           gauge in any::<bool>(), smooth in 0.0..5.0f64) {
        let f = frames(&m, sigma, 9.0, seed);
        let cfg = FactConfig { gauge_alignment: gauge, smoothness: smooth, ..Default::default() };
        let r = cfg.weights(m.agents.len());
        let mut st = FactState::new(mds_init(&f, FactInit::AlignedMds).unwrap(), &f, &r);
        let s0 = st.cost;
        for _ in 0..30 {
            let before = st.cost;
            fact_sweep(&mut st, &f, &cfg).unwrap();
            prop_assert!(st.cost >= 0.0);
            prop_assert!(st.cost <= before + 1e-9 * s0, "{before} -> {}", st.cost);
        }
    }

    #[test]
    fn fact_distributed_matches_serial(m in motion(3..=5, 1.0), seed in any::<u64>()) {
        let f = frames(&m, 0.1, 9.0, seed);
        let cfg = FactConfig { max_sweeps: 8, epsilon: 1e-15, ..Default::default() };
        let r = cfg.weights(m.agents.len());
        let x0 = mds_init(&f, FactInit::AlignedMds).unwrap();
        let mut a = FactState::new(x0.clone(), &f, &r);
        let mut b = FactState::new(x0, &f, &r);
        fact_optimize(&mut a, &f, &cfg).unwrap();
        fact_optimize_distributed(&mut b, &f, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fact_noiseless_reaches_zero_cost(m in motion(3..=6, 1.0)) {
        prop_assume!(keeps_chirality(&m));
        let f = frames(&m, 0.0, 9.0, 0);
        let cfg = FactConfig { epsilon: 1e-18, max_sweeps: 2000, ..Default::default() };
        let r = cfg.weights(m.agents.len());
        let mut st = FactState::new(mds_init(&f, FactInit::AlignedMds).unwrap(), &f, &r);
        fact_optimize(&mut st, &f, &cfg).unwrap();
        let scale: f64 = f.frames.iter().map(|d| d.iter().map(|v| v * v).sum::<f64>()).sum();
        prop_assert!(st.cost <= 1e-12 * scale, "{} vs scale {scale}", st.cost);
    }

    // Sweeps commute with rigid motions, so a moved start yields the moved
    // iterate. Comparing iterates rather than converged tracks keeps the flat
    // directions of the cost out of the comparison.
    #[test]
    fn fact_equivariant_under_rigid_init(m in motion(3..=5, 1.0), seed in any::<u64>(),
                                         angle in 0.0..std::f64::consts::TAU, shift in vec2(30.0),
                                         flip in any::<bool>(), gauge in any::<bool>()) {
        let f = frames(&m, 0.05, 9.0, seed);
        let cfg = FactConfig { epsilon: 1e-300, max_sweeps: 25, gauge_alignment: gauge, ..Default::default() };
        let r = cfg.weights(m.agents.len());
        let map = |p: Vec2| {
            let q = if flip { Vec2::new(p.x, -p.y) } else { p };
            q.rotate(angle) + shift
        };
        let moved = |x: &[Vec<Vec2>]| -> Vec<Vec<Vec2>> {
            x.iter().map(|e| e.iter().map(|&p| map(p)).collect()).collect()
        };
        let x0 = mds_init(&f, FactInit::AlignedMds).unwrap();
        let mut a = FactState::new(x0.clone(), &f, &r);
        let mut b = FactState::new(moved(&x0), &f, &r);
        fact_optimize(&mut a, &f, &cfg).unwrap();
        fact_optimize(&mut b, &f, &cfg).unwrap();
        prop_assert!(close(a.cost, b.cost, 1e-9), "{} vs {}", a.cost, b.cost);
        let scale = 40.0 + x0.iter().flatten().fold(0.0f64, |s, p| s.max(p.norm()));
        for (ea, eb) in moved(&a.x).iter().zip(&b.x) {
            for (p, q) in ea.iter().zip(eb) {
                prop_assert!(p.distance(*q) <= 1e-9 * scale, "{p:?} vs {q:?}");
            }
        }
    }

    #[test]
    fn roc_counts_and_frontier(seed in any::<u64>(), n_events in 1usize..6) {
        use rand::Rng;
        let mut rng = seeded(seed);
        let end = 40.0;
        let events: Vec<CollisionEvent> = (0..n_events)
            .map(|k| CollisionEvent { i: k % 3, j: 3, t_start: rng.random_range(5.0..end) })
            .collect();
        let preds: Vec<PairPrediction> = (0..80).flat_map(|e| {
            let t = e as f64 * 0.5;
            (0..3).map(move |i| (t, i))
        }).map(|(t, i)| PairPrediction {
            t, i, j: 3,
            cp: Some(CpParams { d_m: rng.random_range(0.0..3.0), t_m: rng.random_range(-1.0..5.0), v: rng.random_range(0.1..2.0) }),
        }).collect();
        let grid = RocGrid::default();
        let points = roc_curve(&preds, &events, end, &DetectorConfig::default(), &grid).unwrap();
        for p in &points {
            prop_assert_eq!(p.events, n_events);
            prop_assert!(p.detected <= p.events && p.false_alarms <= p.negatives);
            prop_assert_eq!(p.pd, p.detected as f64 / p.events as f64);
            if p.negatives > 0 {
                prop_assert_eq!(p.pfa, p.false_alarms as f64 / p.negatives as f64);
            }
        }
        let front: Vec<RocPoint> = pareto_frontier(&points);
        for w in front.windows(2) {
            prop_assert!(w[0].pfa <= w[1].pfa && w[0].pd < w[1].pd);
        }
        // No grid point dominates a frontier point.
        for q in &front {
            prop_assert!(!points.iter().any(|p| p.pfa <= q.pfa && p.pd > q.pd));
        }
    }
}
