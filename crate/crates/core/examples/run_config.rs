//! Configuration-driven run into a directory with a manifest.

use uwb_collide::harness::{run, RunConfig};

fn main() -> uwb_collide::Result<()> {
    let cfg = RunConfig::from_toml(
        r#"
command = "protocol-trace"
seed = 11

[protocol]
n_nodes = 3
cycles = 2
mode = "tdoa"
anchors = [{ x = 0.0, y = 0.0 }, { x = 7.0, y = 0.0 }, { x = 0.0, y = 7.0 }]
synch = { x = 7.0, y = 7.0 }
"#,
    )?;
    let dir = std::env::temp_dir().join("uwb-collide-example");
    let summary = run(&cfg, &dir)?;
    println!("wrote {:?} to {}", summary.manifest.outputs, dir.display());
    println!("config sha256 {}", summary.manifest.config_sha256);
    Ok(())
}
