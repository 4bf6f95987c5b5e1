//! CP parameters of a single encounter and the time the bodies first touch.

use uwb_collide::{collision_time, cp_params, min_distance_oracle, AgentState, BodyGeometry, Vec2};

fn main() -> uwb_collide::Result<()> {
    let a = AgentState::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0));
    let b = AgentState::new(Vec2::new(10.0, 0.2), Vec2::new(-1.0, 0.0));
    let cp = cp_params(&a.relative_to(&b))?;
    println!(
        "d_m = {:.3} m, t_m = {:.3} s, v = {:.3} m/s",
        cp.d_m, cp.t_m, cp.v
    );

    let body = BodyGeometry::new(0.17)?;
    let t_c = collision_time(&cp, &body)?;
    println!(
        "contact at t = {t_c:.3} s (2r = {} m)",
        body.contact_distance()
    );

    // Brute-force check on a fine grid.
    let (d, t) = min_distance_oracle(&a, &b, 10.0, 1e-4);
    println!("oracle: {d:.4} m at {t:.4} s");
    Ok(())
}
