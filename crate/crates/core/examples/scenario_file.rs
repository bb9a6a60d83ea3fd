//! Loads a TOML scenario and runs all of its seeds.
//!
//! cargo run --release --example scenario_file -- examples/scenarios/hold-ring7.toml

use gridhold::runner::{run_scenario, worker_count};
use gridhold::Scenario;

fn main() -> gridhold::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios/hold-ring7.toml").into());
    let scenario = Scenario::load(&path)?;
    for s in run_scenario(&scenario, None, worker_count())? {
        println!(
            "seed {}: {}/{} trips, total delay {:.0} s, {} held, peak occupancy {}",
            s.seed, s.exited, s.injected, s.total_delay_s, s.held_vehicles, s.peak_occupancy
        );
    }
    Ok(())
}
