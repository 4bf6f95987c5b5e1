//! Classical MDS of one distance frame, and the MDS baseline that adds
//! relative velocities from second derivatives of squared ranges.

use uwb_collide::estimators::{classical_mds, mds_velocity_baseline, DistanceFrames};
use uwb_collide::rng::seeded;
use uwb_collide::scenario::{gen_random_geometry, synth_pairwise_ranges, NoiseModel};

fn main() -> uwb_collide::Result<()> {
    let sc = gen_random_geometry(5, 0, 4)?;
    let ranges = synth_pairwise_ranges(&sc.motion(), NoiseModel::new(0.1)?, 2.0, &mut seeded(8))?;
    let frames = DistanceFrames::from_samples(&ranges, 5)?;

    let first = classical_mds(&frames.frames[0])?;
    println!(
        "eigenvalues {:?}, realizable {}",
        first.eigenvalues, first.realizable
    );

    let base = mds_velocity_baseline(&frames, 0.0, sc.duration)?;
    for (p, speed) in base.pairs.iter().zip(&base.speeds) {
        let truth = (sc.agents[p.j].velocity - sc.agents[p.i].velocity).norm();
        println!(
            "({},{})  speed {speed:.3} (true {truth:.3})  cp {:?}",
            p.i, p.j, p.cp
        );
    }
    Ok(())
}
