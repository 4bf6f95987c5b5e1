//! Quadratic regression of squared ranges for one pair, noiseless and noisy.

use uwb_collide::estimators::pairwise_fit;
use uwb_collide::rng::seeded;
use uwb_collide::scenario::{synth_pairwise_ranges, LinearMotion, NoiseModel};
use uwb_collide::{cp_params, AgentState, Vec2};

fn main() -> uwb_collide::Result<()> {
    let motion = LinearMotion {
        agents: vec![
            AgentState::new(Vec2::new(0.0, 0.0), Vec2::new(0.5, 0.1)),
            AgentState::new(Vec2::new(4.0, 1.0), Vec2::new(-0.4, 0.0)),
        ],
        duration: 1.0,
    };
    let truth = cp_params(&motion.agents[0].relative_to(&motion.agents[1]))?;
    println!("truth     {truth:?}");
    for sigma in [0.0, 0.08] {
        let samples =
            synth_pairwise_ranges(&motion, NoiseModel::new(sigma)?, 18.0, &mut seeded(3))?;
        match pairwise_fit(&samples) {
            Ok(cp) => println!("sigma {sigma}  {cp:?}"),
            Err(e) => println!("sigma {sigma}  {e}"),
        }
    }
    Ok(())
}
