//! Anchor-based tracking: localize tags from range differences, regress
//! velocities and form CP parameters for every pair.

use uwb_collide::cp_params;
use uwb_collide::estimators::{cp_from_tracks, tdoa_tracks, AnchorSet};
use uwb_collide::rng::seeded;
use uwb_collide::scenario::{
    gen_random_geometry, synth_anchor_rangediffs, NoiseInjection, NoiseModel,
};

fn main() -> uwb_collide::Result<()> {
    let sc = gen_random_geometry(4, 4, 21)?;
    let diffs = synth_anchor_rangediffs(
        &sc.motion(),
        &sc.anchors,
        NoiseModel::new(0.05)?,
        NoiseInjection::PerDistance,
        2.0,
        &mut seeded(1),
    )?;
    let anchors = AnchorSet::new(sc.anchors.clone())?;
    let tracks = tdoa_tracks(&diffs, &anchors, sc.agents.len(), sc.duration)?;
    for p in cp_from_tracks(&tracks, 0.0) {
        let truth = cp_params(&sc.agents[p.i].relative_to(&sc.agents[p.j]))?;
        match p.cp {
            Some(cp) => println!(
                "({},{})  d_m {:7.3} (true {:7.3})  t_m {:7.3} (true {:7.3})",
                p.i, p.j, cp.d_m, truth.d_m, cp.t_m, truth.t_m
            ),
            None => println!("({},{})  no estimate", p.i, p.j),
        }
    }
    Ok(())
}
