//! Cramér-Rao bounds on (t_m, d_m, v): a small random-geometry sweep and the
//! dependence on the angle between two headings.

use uwb_collide::crlb::{
    bound_sweep, bounds_csv, incidence_sweep, BoundSweepConfig, IncidenceConfig,
};

fn main() -> uwb_collide::Result<()> {
    let cfg = BoundSweepConfig {
        sigmas: vec![0.1, 0.2],
        geometries: 40,
        trials: 10,
        ..BoundSweepConfig::default()
    };
    print!("{}", bounds_csv(&bound_sweep(&cfg)?));

    println!("\nangle_deg,method,std_dm");
    for row in incidence_sweep(&IncidenceConfig::default())? {
        println!(
            "{:.0},{},{:.4}",
            row.angle.to_degrees(),
            row.method,
            row.bound.std_dm
        );
    }
    Ok(())
}
