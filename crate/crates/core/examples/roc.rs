//! Detection ROC of every estimator on a short simulated bounce walk.

use uwb_collide::harness::{pd_at_pfa, roc_experiment, RocConfig};

fn main() -> uwb_collide::Result<()> {
    let cfg = RocConfig {
        duration: 180.0,
        ..RocConfig::default()
    };
    let ex = roc_experiment(&cfg)?;
    println!("{} collisions", ex.events.len());
    for r in &ex.results {
        println!(
            "{:13} PD at PFA 1%: {:.3}   5%: {:.3}",
            r.method,
            pd_at_pfa(&r.points, 0.01),
            pd_at_pfa(&r.points, 0.05)
        );
    }
    Ok(())
}
