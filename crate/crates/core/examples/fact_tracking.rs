//! FACT on a bounce walk: windowed relative tracking from two-way ranges,
//! single-threaded and with one worker thread per node.

use uwb_collide::estimators::DistanceFrames;
use uwb_collide::fact::{fact_track, FactConfig};
use uwb_collide::rng::seeded;
use uwb_collide::scenario::{gen_bounce_walk, synth_pairwise_ranges, BounceConfig, NoiseModel};

fn main() -> uwb_collide::Result<()> {
    let walk = BounceConfig {
        duration: 5.0,
        ..BounceConfig::default()
    };
    let traj = gen_bounce_walk(&walk, 12)?;
    let ranges = synth_pairwise_ranges(&traj, NoiseModel::new(0.08)?, 18.0, &mut seeded(5))?;
    let frames = DistanceFrames::from_samples(&ranges, walk.n_agents)?;

    let cfg = FactConfig::default();
    let tracked = fact_track(&frames, &cfg)?;
    for w in &tracked.windows {
        println!(
            "window at {:5.2} s: cost {:9.4} after {:3} sweeps",
            w.t_end, w.cost, w.sweeps
        );
    }
    let close = tracked.windows[0]
        .pair_cps(tracked.windows[0].t_end)
        .into_iter()
        .filter_map(|p| p.cp.map(|cp| (p.i, p.j, cp)))
        .min_by(|a, b| a.2.d_m.total_cmp(&b.2.d_m));
    println!("closest predicted pass in window 0: {close:?}");

    let threaded = fact_track(
        &frames,
        &FactConfig {
            distributed: true,
            ..cfg
        },
    )?;
    println!("distributed run identical: {}", threaded == tracked);
    Ok(())
}
