//! One ranging cycle per slot round: every node transmits once, and all
//! pairwise ranges come out of the stamps despite unknown clock offsets.

use uwb_collide::protocol::{extract_ranges, run_cycles, ProtocolConfig};
use uwb_collide::scenario::LinearMotion;
use uwb_collide::{AgentState, Vec2};

fn main() -> uwb_collide::Result<()> {
    let nodes: Vec<AgentState> = (0..4)
        .map(|k| AgentState::new(Vec2::from_polar(5.0, k as f64), Vec2::ZERO))
        .collect();
    let geometry = LinearMotion {
        agents: nodes.clone(),
        duration: 1.0,
    };
    let cfg = ProtocolConfig {
        n_nodes: 4,
        cycles: 3,
        timestamp_noise_std: 0.0,
        residual_freq_ppm: 0.0,
        ..ProtocolConfig::default()
    };
    let log = run_cycles(&cfg, &geometry)?;
    println!(
        "{} packets over {} cycles",
        log.packets.len(),
        log.cycles.len()
    );
    for r in extract_ranges(&log)?.iter().take(6) {
        let truth = nodes[r.i].position.distance(nodes[r.j].position);
        println!(
            "cycle t={:.4}  ({},{})  {:.9} m  (true {:.9})",
            r.t, r.i, r.j, r.delta, truth
        );
    }
    Ok(())
}
