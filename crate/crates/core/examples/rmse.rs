//! RMSE of CP estimates against ranging noise, with reference bounds.

use uwb_collide::harness::{rmse_csv, rmse_sweep, RmseConfig};

fn main() -> uwb_collide::Result<()> {
    let cfg = RmseConfig {
        sigmas: vec![0.1, 0.4],
        geometries: 6,
        trials: 4,
        ..RmseConfig::default()
    };
    print!("{}", rmse_csv(&rmse_sweep(&cfg)?));
    Ok(())
}
